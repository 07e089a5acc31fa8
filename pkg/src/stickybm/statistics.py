"""Crossing, bouncing, difference and occupation statistics of sampled paths.

All counters are running sums over observation intervals: ``counts[k]`` is
the statistic over intervals ``1..k`` and ``counts[0] = 0``. Interval ``i``
joins ``X_{(i-1)/n}`` and ``X_{i/n}``. Tests against the sticky point are
exact: a path is at 0 when its value is ``0.0``.
"""

from __future__ import annotations

import enum
import io
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernel
from .errors import ArgumentError
from .path_model import CountSeries, SamplePath, StatKind, require_valid

__all__ = [
    "Interval",
    "Normalizer",
    "StatReport",
    "LocalTimeEstimates",
    "crossings",
    "bouncings",
    "differences",
    "occupation_stat",
    "conditional_crossings",
    "local_time_estimates",
    "all_counts",
    "terminal_counts",
    "report",
    "stats_table",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class Interval:
    """A real interval, possibly degenerate or unbounded."""

    lo: float
    hi: float
    left_closed: bool = True
    right_closed: bool = True

    @classmethod
    def point(cls, x: float) -> "Interval":
        return cls(x, x)

    @classmethod
    def real_line(cls) -> "Interval":
        return cls(-math.inf, math.inf, False, False)

    @classmethod
    def coerce(cls, obj) -> "Interval":
        if isinstance(obj, Interval):
            return obj
        if np.isscalar(obj):
            return cls.point(float(obj))
        lo, hi = obj
        return cls(float(lo), float(hi))

    def contains(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x)
        left = x >= self.lo if self.left_closed else x > self.lo
        right = x <= self.hi if self.right_closed else x < self.hi
        if self.lo == -math.inf:
            left = np.ones_like(left)
        if self.hi == math.inf:
            right = np.ones_like(right)
        return left & right


class Normalizer(str, enum.Enum):
    SQRT_N = "sqrt_n"
    N = "n"
    U_N = "u_n"


@dataclass(frozen=True)
class StatReport:
    series: CountSeries
    normalized_terminal: float
    normalizer: Normalizer


@dataclass(frozen=True)
class LocalTimeEstimates:
    """Three estimates of the local time at 0 over the path horizon.

    ``via_crossings`` is only meaningful for (non-sticky) Brownian inputs.
    """

    via_occupation: Optional[float]
    via_d1: float
    via_crossings: float


def _indicators(path: SamplePath):
    v = path.values
    s = np.sign(v)
    prod = s[:-1] * s[1:]
    z0 = v[:-1] == 0.0
    z1 = v[1:] == 0.0
    return prod, z0, z1, path.hit_flags


def _cumulative(kind, increments) -> CountSeries:
    counts = np.zeros(len(increments) + 1, dtype=np.int64)
    np.cumsum(increments, out=counts[1:])
    return CountSeries(kind, counts)


def _check_type(j, allowed):
    if j not in allowed:
        raise ArgumentError(f"statistic type must be one of {sorted(allowed)}, got {j!r}")


def _crossing_increments(prod, z0, z1, j):
    if j == 0:
        return prod < 0
    if j == 1:
        return (prod <= 0) & ~(z0 & z1)
    return prod <= 0


def _bouncing_increments(prod, z0, z1, hit, j):
    if j == 0:
        return hit & (prod > 0)
    if j == 1:
        return hit & (prod >= 0) & ~(z0 & z1)
    return hit & (prod >= 0)


def crossings(path: SamplePath, j: int) -> CountSeries:
    """Number of crossings of type ``j``.

    Type 0 counts strict sign changes ``X_{i-1} X_i < 0``, type 2 counts
    ``X_{i-1} X_i <= 0``, and type 1 is type 2 without the pairs at which both
    values are 0.
    """
    _check_type(j, {0, 1, 2})
    require_valid(path)
    prod, z0, z1, _ = _indicators(path)
    return _cumulative(StatKind(f"C{j}"), _crossing_increments(prod, z0, z1, j))


def bouncings(path: SamplePath, j: int) -> CountSeries:
    """Number of bouncings of type ``j``: the crossing tests with ``>`` in place
    of ``<``, each term gated by the interval-hit flag."""
    _check_type(j, {0, 1, 2})
    require_valid(path)
    prod, z0, z1, hit = _indicators(path)
    return _cumulative(StatKind(f"B{j}"), _bouncing_increments(prod, z0, z1, hit, j))


def differences(path: SamplePath, j: int) -> CountSeries:
    """``D1`` counts transitions between 0 and a nonzero value; ``D2`` counts
    consecutive zeros. Computed from the indicators directly."""
    _check_type(j, {1, 2})
    require_valid(path)
    _, z0, z1, _ = _indicators(path)
    inc = (z0 != z1) if j == 1 else (z0 & z1)
    return _cumulative(StatKind(f"D{j}"), inc)


def occupation_stat(path: SamplePath, interval=0.0) -> CountSeries:
    """``counts[k] = #{i <= k : X_{(i-1)/n} in U}``; a scalar ``U`` is a singleton."""
    require_valid(path)
    u = Interval.coerce(interval)
    return _cumulative(StatKind.OCC, u.contains(path.values[:-1]))


def all_counts(path: SamplePath, validate: bool = True) -> dict:
    """Every counter of one path (``C0..D2`` and ``OCC`` at 0) as a dict of CountSeries."""
    if validate:
        require_valid(path)
    prod, z0, z1, hit = _indicators(path)
    out = {}
    for j in (0, 1, 2):
        out[StatKind(f"C{j}")] = _cumulative(StatKind(f"C{j}"), _crossing_increments(prod, z0, z1, j))
        out[StatKind(f"B{j}")] = _cumulative(StatKind(f"B{j}"), _bouncing_increments(prod, z0, z1, hit, j))
    out[StatKind.D1] = _cumulative(StatKind.D1, z0 != z1)
    out[StatKind.D2] = _cumulative(StatKind.D2, z0 & z1)
    out[StatKind.OCC] = _cumulative(StatKind.OCC, z0)
    return out


def terminal_counts(path: SamplePath, validate: bool = True) -> dict:
    """Terminal values of :func:`all_counts`, keyed by the statistic name."""
    return {k.value: s.terminal for k, s in all_counts(path, validate).items()}


def conditional_crossings(path: SamplePath, j: int, rho: float) -> np.ndarray:
    """Running sums of the one-step conditional expectations of the crossing terms.

    Term ``i`` is the expectation under the sticky Brownian kernel with
    stickiness ``rho``, started from ``X_{(i-1)/n}``, of the type-``j``
    crossing indicator of interval ``i``. Returns a float array with a
    leading 0.
    """
    _check_type(j, {0, 1, 2})
    require_valid(path)
    t = 1.0 / path.n
    x = path.values[:-1]
    at_zero = x == 0.0
    terms = kernel.crossing_probability(t, x, rho)
    if j >= 1:
        f = kernel.sticky_atom_mass(t, x, rho)
        f0 = float(kernel.sticky_atom_mass(t, 0.0, rho))
        terms = terms + np.where(at_zero, 1.0 - f0, f)
        if j == 2:
            terms = terms + np.where(at_zero, f0, 0.0)
    out = np.zeros(len(x) + 1)
    np.cumsum(terms, out=out[1:])
    return out


def local_time_estimates(path: SamplePath, rho: Optional[float] = None) -> LocalTimeEstimates:
    """Local time at 0 over ``[0, T]`` from the occupation at 0, from ``D1`` and from ``C0``.

    ``via_occupation`` is ``None`` unless ``rho`` is given.
    """
    if rho is not None and not (rho > 0 and math.isfinite(rho)):
        raise ArgumentError(f"rho must be positive, got {rho!r}")
    c = terminal_counts(path)
    n = path.n
    via_occ = None if rho is None else c["OCC"] / (n * rho)
    via_d1 = c["D1"] / (4.0 * SQRT_2_OVER_PI * math.sqrt(n))
    via_c0 = c["C0"] / (math.sqrt(n) * SQRT_2_OVER_PI)
    return LocalTimeEstimates(via_occ, via_d1, via_c0)


def report(series: CountSeries, n: int, normalizer: Normalizer, alpha: Optional[float] = None) -> StatReport:
    """Terminal count divided by ``sqrt(n)``, ``n`` or ``u_n = n**alpha``."""
    normalizer = Normalizer(normalizer)
    if normalizer is Normalizer.SQRT_N:
        scale = math.sqrt(n)
    elif normalizer is Normalizer.N:
        scale = float(n)
    else:
        if alpha is None:
            raise ArgumentError("the u_n normalizer needs alpha")
        scale = float(n) ** alpha
    return StatReport(series, series.terminal / scale, normalizer)


STATS_COLUMNS = ("k", "t", "C0", "C1", "C2", "B0", "B1", "B2", "D1", "D2", "OCC0")


def stats_table(path: SamplePath) -> str:
    """CSV of every running count, one row per observation index."""
    counts = all_counts(path)
    keys = [StatKind(c) for c in STATS_COLUMNS[2:-1]] + [StatKind.OCC]
    cols = [counts[k].counts for k in keys]
    times = path.times()
    buf = io.StringIO()
    buf.write(",".join(STATS_COLUMNS) + "\n")
    for k in range(len(times)):
        row = [str(k), format(float(times[k]), ".17g")] + [str(int(c[k])) for c in cols]
        buf.write(",".join(row) + "\n")
    return buf.getvalue()
