"""Estimators of the stickiness parameter from one sampled path.

Each estimator is consistent only on the event that the path reaches 0.
A path on which the estimator is undefined (zero denominator) yields
``value=None`` rather than NaN or an exception, so that Monte Carlo
callers can count and exclude such replicas explicitly.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import ArgumentError
from .path_model import SamplePath, require_valid
from .statistics import terminal_counts

__all__ = [
    "EstimatorMethod",
    "EstimateResult",
    "default_test_function",
    "crossing_ratio",
    "estimate_rho_crossing",
    "estimate_rho_occupation",
    "estimate_rho_ito",
]

CROSSING_FACTOR = 4.0 * math.sqrt(2.0 / math.pi)

# numerator/denominator count names per variant
_VARIANTS = {"C": ("C1", "C2"), "B": ("B1", "B2"), "D": ("D1", "D2")}


class EstimatorMethod(str, enum.Enum):
    CROSSING_RATIO = "CrossingRatio"
    OCCUPATION_RATIO = "OccupationRatio"
    CROSSING_RATIO_ITO = "CrossingRatioIto"


@dataclass(frozen=True)
class EstimateResult:
    """An estimate together with the raw counts it was computed from.

    ``diagnostics`` maps ``"N1"`` (denominator) and ``"N2"`` (numerator) to
    the counts used; the occupation estimator stores the real-valued
    test-function sum as ``N1``.
    """

    value: Optional[float]
    hit_event: bool
    method: EstimatorMethod
    diagnostics: dict = field(default_factory=dict)


def default_test_function(x):
    """``1{0 < |x| < 5} / 10``, whose integral is 1."""
    a = np.abs(np.asarray(x, dtype=np.float64))
    return np.where((a > 0) & (a < 5), 0.1, 0.0)


def crossing_ratio(n1, n2, n: int, sigma0: float = 1.0) -> Optional[float]:
    """``(4 / sigma0) sqrt(2/pi) n**-0.5 n2 / n1``, or ``None`` when ``n1 == 0``."""
    if n1 == 0:
        return None
    return CROSSING_FACTOR / sigma0 * (n2 / n1) / math.sqrt(n)


def _variant(variant, allowed):
    key = str(getattr(variant, "value", variant)).upper()
    if key not in allowed:
        raise ArgumentError(f"variant must be one of {sorted(allowed)}, got {variant!r}")
    return _VARIANTS[key]


def _from_counts(counts, path, variant, method, sigma0=1.0):
    k1, k2 = variant
    n1, n2 = counts[k1], counts[k2]
    value = crossing_ratio(n1, n2, path.n, sigma0)
    return EstimateResult(value, path.hit_event, method, {"N1": n1, "N2": n2, "counts": (k1, k2)})


def estimate_rho_crossing(path: SamplePath, variant: str = "C", counts: Optional[dict] = None) -> EstimateResult:
    """Ratio estimator ``4 sqrt(2/pi) n**-0.5 N2 / N1``.

    Parameters
    ----------
    path : SamplePath
    variant : {"C", "B", "D"}
        Uses ``(C1, C2)``, ``(B1, B2)`` or ``(D1, D2)`` as ``(N1, N2)``.
    counts : dict, optional
        Precomputed :func:`~stickybm.statistics.terminal_counts` of ``path``.
    """
    keys = _variant(variant, _VARIANTS)
    if counts is None:
        counts = terminal_counts(path)
    return _from_counts(counts, path, keys, EstimatorMethod.CROSSING_RATIO)


def estimate_rho_ito(path: SamplePath, sigma0: float, variant: str = "C",
                     counts: Optional[dict] = None) -> EstimateResult:
    """Crossing-ratio estimator for a sticky Ito diffusion with ``sigma(0) = sigma0``."""
    if not (sigma0 > 0 and math.isfinite(sigma0)):
        raise ArgumentError(f"sigma0 must be positive, got {sigma0!r}")
    keys = _variant(variant, {"C": None, "D": None})
    if counts is None:
        counts = terminal_counts(path)
    return _from_counts(counts, path, keys, EstimatorMethod.CROSSING_RATIO_ITO, sigma0)


def estimate_rho_occupation(path: SamplePath, g: Callable = default_test_function, alpha: float = 0.5,
                            g_integral: float = 1.0, validate: bool = True) -> EstimateResult:
    """Occupation-ratio estimator with threshold scale ``u_n = n**alpha``.

    ``g_integral * u_n**-1 * #{X_{i-1} = 0} / sum g(u_n X_{i-1})`` over the
    observation intervals. ``g`` must be vectorized, bounded and vanish at 0;
    ``g_integral`` is its integral, supplied by the caller.
    """
    if not 0 < alpha < 1:
        raise ArgumentError(f"alpha must lie in (0, 1), got {alpha!r}")
    if float(np.asarray(g(np.zeros(1)))[0]) != 0.0:
        raise ArgumentError("the test function must vanish at 0")
    if validate:
        require_valid(path)
    x = path.values[:-1]
    u_n = float(path.n) ** alpha
    occupied = int(np.count_nonzero(x == 0.0))
    denom = float(np.sum(g(u_n * x)))
    value = None if denom == 0.0 else g_integral * occupied / (u_n * denom)
    return EstimateResult(
        value, path.hit_event, EstimatorMethod.OCCUPATION_RATIO, {"N1": denom, "N2": occupied, "alpha": alpha}
    )
