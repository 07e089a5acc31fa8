"""Value types shared across the package: models, observation grids, sample paths.

Zeros are exact. A sticky path sits at the origin for a positive amount of
time, so every test against the sticky point in this package is ``x == 0.0``,
never a tolerance comparison.
"""

from __future__ import annotations

import csv
import enum
import io
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Union

import numpy as np

from .errors import ConfigError, ValidationError

__all__ = [
    "ModelKind",
    "StatKind",
    "StickyModel",
    "ObservationGrid",
    "SamplePath",
    "CountSeries",
    "Violation",
    "validate_path",
    "require_valid",
    "write_path_csv",
    "read_path_csv",
]

Coefficient = Union[float, Callable[[float], float]]


class ModelKind(str, enum.Enum):
    STICKY_BM = "StickyBM"
    STICKY_REFLECTED_BM = "StickyReflectedBM"
    STICKY_ITO = "StickyIto"

    @classmethod
    def parse(cls, text: str) -> "ModelKind":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for kind in cls:
            if kind.value.lower() == key:
                return kind
        aliases = {"bm": cls.STICKY_BM, "reflected": cls.STICKY_REFLECTED_BM, "ito": cls.STICKY_ITO}
        if key in aliases:
            return aliases[key]
        raise ConfigError(f"unknown model kind {text!r}")


class StatKind(str, enum.Enum):
    C0 = "C0"
    C1 = "C1"
    C2 = "C2"
    B0 = "B0"
    B1 = "B1"
    B2 = "B2"
    D1 = "D1"
    D2 = "D2"
    OCC = "OCC"


def _coefficient_at(coef: Coefficient, x: float) -> float:
    return float(coef(x)) if callable(coef) else float(coef)


@dataclass(frozen=True)
class StickyModel:
    """A one-dimensional sticky diffusion with sticky point 0.

    Parameters
    ----------
    rho : float
        Stickiness parameter: the weight of the atom of the speed measure
        ``dx + rho * delta_0``.
    x0 : float
        Initial value.
    kind : ModelKind
        Sticky Brownian motion, its absolute value (sticky-reflected), or a
        sticky Ito diffusion with coefficients ``mu`` and ``sigma``.
    mu, sigma : float or callable, optional
        Drift and diffusion coefficient of a sticky Ito diffusion, either a
        constant or a function of the state. Ignored for the Brownian kinds.
    """

    rho: float
    x0: float = 0.0
    kind: ModelKind = ModelKind.STICKY_BM
    mu: Optional[Coefficient] = None
    sigma: Optional[Coefficient] = None

    def __post_init__(self):
        if not isinstance(self.kind, ModelKind):
            object.__setattr__(self, "kind", ModelKind.parse(str(self.kind)))
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ConfigError(f"rho must be a positive finite number, got {self.rho!r}")
        if not math.isfinite(self.x0):
            raise ConfigError(f"x0 must be finite, got {self.x0!r}")
        if self.kind is ModelKind.STICKY_REFLECTED_BM and self.x0 < 0:
            raise ConfigError("a sticky-reflected Brownian motion needs x0 >= 0")
        if self.kind is ModelKind.STICKY_ITO:
            sigma = 1.0 if self.sigma is None else self.sigma
            mu = 0.0 if self.mu is None else self.mu
            object.__setattr__(self, "sigma", sigma)
            object.__setattr__(self, "mu", mu)
            if not _coefficient_at(sigma, 0.0) > 0:
                raise ConfigError("the diffusion coefficient must satisfy sigma(0) > 0")

    @property
    def sigma0(self) -> float:
        """Diffusion coefficient at the sticky point (1 for the Brownian kinds)."""
        if self.kind is not ModelKind.STICKY_ITO:
            return 1.0
        return _coefficient_at(self.sigma, 0.0)


@dataclass(frozen=True)
class ObservationGrid:
    """Equally spaced observation times ``i / n`` for ``i = 0 .. floor(n * horizon_t)``."""

    n: int
    horizon_t: float = 1.0

    def __post_init__(self):
        if isinstance(self.n, bool) or int(self.n) != self.n or self.n < 1:
            raise ConfigError(f"sampling frequency n must be a positive integer, got {self.n!r}")
        object.__setattr__(self, "n", int(self.n))
        if not (math.isfinite(self.horizon_t) and self.horizon_t > 0):
            raise ConfigError(f"horizon must be positive, got {self.horizon_t!r}")
        if self.num_intervals < 1:
            raise ConfigError("the grid must contain at least one observation interval")

    @property
    def num_intervals(self) -> int:
        # a relative guard so that e.g. n=100, T=0.29 yields 29 intervals
        return int(math.floor(self.n * self.horizon_t * (1.0 + 1e-12)))

    @property
    def dt(self) -> float:
        return 1.0 / self.n

    def times(self) -> np.ndarray:
        return np.arange(self.num_intervals + 1, dtype=np.float64) / self.n

    def index_at(self, t: float) -> int:
        """Number of complete intervals in ``[0, t]``, i.e. ``floor(n t)``."""
        return min(self.num_intervals, int(math.floor(self.n * t * (1.0 + 1e-12))))


def _readonly(a, dtype):
    arr = np.array(a, dtype=dtype, copy=True).reshape(-1)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class SamplePath:
    """Observed skeleton of a path together with its interval-hit indicators.

    ``hit_flags[i - 1]`` (zero-based storage) records whether the continuous
    path touched 0 during ``[(i - 1) / n, i / n]``. The flags are produced by
    the simulators: they cannot be recovered from the skeleton alone.
    """

    grid: ObservationGrid
    values: np.ndarray
    hit_flags: np.ndarray
    seed: int = 0
    replica: int = 0

    def __post_init__(self):
        object.__setattr__(self, "values", _readonly(self.values, np.float64))
        object.__setattr__(self, "hit_flags", _readonly(self.hit_flags, np.bool_))

    @classmethod
    def from_arrays(cls, values, hit_flags, n: int = 1, seed: int = 0) -> "SamplePath":
        """Build a path on the grid ``i / n`` implied by the number of values."""
        values = np.asarray(values, dtype=np.float64)
        m = max(len(values) - 1, 1)
        return cls(ObservationGrid(n, m / n), values, hit_flags, seed=seed)

    @property
    def n(self) -> int:
        return self.grid.n

    @property
    def num_intervals(self) -> int:
        return len(self.values) - 1

    def times(self) -> np.ndarray:
        return np.arange(len(self.values), dtype=np.float64) / self.grid.n

    @property
    def hit_event(self) -> bool:
        """Whether 0 is reached (a zero observation or a flagged interval)."""
        return bool(np.any(self.values == 0.0) or np.any(self.hit_flags))

    def with_values(self, values) -> "SamplePath":
        return SamplePath(self.grid, values, self.hit_flags, seed=self.seed, replica=self.replica)

    def __eq__(self, other):
        if not isinstance(other, SamplePath):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.values, other.values)
            and np.array_equal(self.hit_flags, other.hit_flags)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class CountSeries:
    """Running counts; ``counts[k]`` is the statistic over the first ``k`` intervals."""

    kind: StatKind
    counts: np.ndarray = field(repr=False)

    def __post_init__(self):
        object.__setattr__(self, "counts", _readonly(self.counts, np.int64))

    @property
    def terminal(self) -> int:
        return int(self.counts[-1])

    def __len__(self):
        return len(self.counts)

    def __getitem__(self, k):
        return self.counts[k]


@dataclass(frozen=True)
class Violation:
    index: int
    rule: str
    message: str

    def __str__(self):
        return f"[i={self.index}] {self.rule}: {self.message}"


def validate_path(path: SamplePath) -> list:
    """List every violated :class:`SamplePath` invariant; empty when the path is valid.

    Interval ``i`` (1-based, between ``values[i-1]`` and ``values[i]``) must be
    flagged whenever an endpoint is zero or the endpoints have opposite signs.
    """
    out = []
    v, h = path.values, path.hit_flags
    if len(v) != len(h) + 1:
        out.append(Violation(-1, "length", f"{len(v)} values but {len(h)} hit flags"))
        return out
    if len(v) != path.grid.num_intervals + 1:
        out.append(
            Violation(-1, "grid", f"{len(v)} values for a grid with {path.grid.num_intervals} intervals")
        )
    bad = np.flatnonzero(~np.isfinite(v))
    out.extend(Violation(int(i), "finite", f"value {v[i]!r} is not finite") for i in bad)
    s = np.sign(v)
    touches = (v[:-1] == 0.0) | (v[1:] == 0.0)
    crosses = s[:-1] * s[1:] < 0
    for i in np.flatnonzero(touches & ~h):
        out.append(Violation(int(i) + 1, "zero-endpoint", "an endpoint is 0 but the interval is not flagged"))
    for i in np.flatnonzero(crosses & ~h):
        out.append(Violation(int(i) + 1, "sign-change", "the sign changes but the interval is not flagged"))
    out.sort(key=lambda viol: viol.index)
    return out


def require_valid(path: SamplePath) -> SamplePath:
    violations = validate_path(path)
    if violations:
        raise ValidationError(violations)
    return path


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def write_path_csv(path: SamplePath, dest=None) -> str:
    """Serialize as CSV ``t,x,hit``; ``hit`` annotates the interval ending at ``t``.

    Returns the CSV text and additionally writes it to ``dest`` (a filename or
    a text stream) when given.
    """
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["t", "x", "hit"])
    times = path.times()
    flags = np.concatenate([[False], path.hit_flags])
    for t, x, hit in zip(times, path.values, flags):
        w.writerow([_fmt(t), _fmt(x), int(hit)])
    text = buf.getvalue()
    if isinstance(dest, (str, Path)):
        Path(dest).write_text(text)
    elif dest is not None:
        dest.write(text)
    return text


def read_path_csv(source, n: Optional[int] = None) -> SamplePath:
    """Parse a ``t,x,hit`` CSV written by :func:`write_path_csv`.

    The sampling frequency is recovered from the time column unless given.
    """
    if isinstance(source, (str, Path)) and Path(source).exists():
        text = Path(source).read_text()
    elif isinstance(source, str):
        text = source
    else:
        text = source.read()
    rows = list(csv.reader(io.StringIO(text)))
    if not rows or [c.strip() for c in rows[0]] != ["t", "x", "hit"]:
        raise ConfigError("path CSV must start with the header 't,x,hit'")
    body = [r for r in rows[1:] if r]
    if len(body) < 2:
        raise ConfigError("path CSV needs at least two observations")
    try:
        t = np.array([float(r[0]) for r in body])
        x = np.array([float(r[1]) for r in body])
        hit = np.array([int(r[2]) for r in body])
    except (ValueError, IndexError) as exc:
        raise ConfigError(f"malformed path CSV: {exc}") from None
    if n is None:
        n = int(round(1.0 / (t[1] - t[0])))
    grid = ObservationGrid(n, (len(x) - 1) / n)
    if not np.allclose(t, grid.times(), rtol=0, atol=1e-9 * max(1.0, t[-1])):
        raise ConfigError("time column is not the uniform grid i/n")
    return SamplePath(grid, x, hit[1:].astype(bool))
