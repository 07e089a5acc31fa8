"""Path generators for sticky Brownian motion and its variants.

Every sampler takes a :class:`SimConfig` and a replica index, derives three
independent counter-based streams from ``(seed, replica, role)`` and returns
a :class:`~stickybm.path_model.SamplePath` with interval-hit flags.

The kernel-exact sampler draws the skeleton one step at a time from the
exact transition law, jointly with the indicator that the path touched 0
during the step. The joint law of ``(X_{i/n}, U_i)`` given ``X_{(i-1)/n}`` is
exact; see :mod:`stickybm._engine` for the construction.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numba
import numpy as np
from numpy.random import Generator, Philox, SeedSequence

from . import _engine
from .errors import ConfigError, ModelError, NumericError
from .path_model import ModelKind, ObservationGrid, SamplePath, StickyModel

__all__ = [
    "SimMethod",
    "SimConfig",
    "stream_generators",
    "sample_sticky_bm_exact",
    "sample_sticky_bm_timechange",
    "sample_sticky_reflected",
    "sample_sticky_ito",
    "sample_path",
    "reflect_at_first_hit",
    "exact_terminal_strict_crossings",
]

STREAM_ROLES = ("increments", "atoms", "hits")
_U64 = (1 << 64) - 1


class SimMethod(str, enum.Enum):
    KERNEL_EXACT = "KernelExact"
    TIME_CHANGE = "TimeChange"

    @classmethod
    def parse(cls, text: str) -> "SimMethod":
        key = text.strip().lower().replace("_", "").replace("-", "")
        for m in cls:
            if m.value.lower() == key:
                return m
        aliases = {"exact": cls.KERNEL_EXACT, "kernel": cls.KERNEL_EXACT, "timechange": cls.TIME_CHANGE}
        if key in aliases:
            return aliases[key]
        raise ConfigError(f"unknown simulation method {text!r}")


@dataclass(frozen=True)
class SimConfig:
    """What to simulate and how.

    Parameters
    ----------
    model : StickyModel
    grid : ObservationGrid
    method : SimMethod
        ``KernelExact`` for the Brownian kinds; sticky Ito diffusions need
        ``TimeChange``.
    refine : int
        Fine substeps per observation interval for ``TimeChange``.
    seed : int
        Master seed, reduced modulo 2**64.
    """

    model: StickyModel
    grid: ObservationGrid
    method: SimMethod = SimMethod.KERNEL_EXACT
    refine: int = 64
    seed: int = 0

    def __post_init__(self):
        if not isinstance(self.method, SimMethod):
            object.__setattr__(self, "method", SimMethod.parse(str(self.method)))
        if isinstance(self.refine, bool) or int(self.refine) != self.refine or self.refine < 1:
            raise ConfigError(f"refine must be a positive integer, got {self.refine!r}")
        object.__setattr__(self, "refine", int(self.refine))
        object.__setattr__(self, "seed", int(self.seed) & _U64)
        if self.method is SimMethod.KERNEL_EXACT and self.model.kind is ModelKind.STICKY_ITO:
            raise ConfigError("the kernel-exact sampler covers only the Brownian kinds; use TimeChange")


def stream_generators(seed: int, replica: int):
    """The ``(increments, atoms, hits)`` generators of one replica."""
    return tuple(
        Generator(Philox(SeedSequence([int(seed) & _U64, int(replica), role])))
        for role in range(len(STREAM_ROLES))
    )


def _buffers(grid):
    m = grid.num_intervals
    return np.empty(m + 1, dtype=np.float64), np.zeros(m, dtype=np.bool_)


def _exact_arrays(config, replica):
    values, flags = _buffers(config.grid)
    status = _engine.exact_path(
        float(config.model.x0), float(config.model.rho), 1.0 / config.grid.n, values, flags,
        *stream_generators(config.seed, replica),
    )
    if status != 0:
        raise NumericError(f"hit-tail inversion failed at interval {-status}")
    return values, flags


def _timechange_arrays(config, replica):
    values, flags = _buffers(config.grid)
    _engine.timechange_path(
        float(config.model.x0), float(config.model.rho), float(config.grid.n), config.refine,
        values, flags, *stream_generators(config.seed, replica),
    )
    return values, flags


def _path(config, replica, values, flags):
    return SamplePath(config.grid, values, flags, seed=config.seed, replica=replica)


def sample_sticky_bm_exact(config: SimConfig, replica: int = 0) -> SamplePath:
    """Kernel-exact skeleton of sticky Brownian motion with exact hit flags."""
    if config.method is not SimMethod.KERNEL_EXACT:
        raise ConfigError("sample_sticky_bm_exact needs method KernelExact")
    if config.model.kind is not ModelKind.STICKY_BM:
        raise ConfigError("sample_sticky_bm_exact needs model kind StickyBM")
    return _path(config, replica, *_exact_arrays(config, replica))


def sample_sticky_bm_timechange(config: SimConfig, replica: int = 0) -> SamplePath:
    """Sticky Brownian motion as a Brownian path run on the clock ``t + rho L_t``.

    The fine Brownian path has step ``1 / (n * refine)``; its local time
    gains are drawn from their exact conditional law given the fine
    endpoints, and the path is linearly interpolated between fine nodes.
    The result is approximate, with a bias that vanishes as ``refine`` grows.
    """
    if config.method is not SimMethod.TIME_CHANGE:
        raise ConfigError("sample_sticky_bm_timechange needs method TimeChange")
    if config.model.kind is not ModelKind.STICKY_BM:
        raise ConfigError("sample_sticky_bm_timechange needs model kind StickyBM")
    return _path(config, replica, *_timechange_arrays(config, replica))


def sample_sticky_reflected(config: SimConfig, replica: int = 0) -> SamplePath:
    """``|Y|`` for a sticky Brownian motion ``Y`` with the same ``rho`` and ``x0``."""
    if config.model.kind is not ModelKind.STICKY_REFLECTED_BM:
        raise ConfigError("sample_sticky_reflected needs model kind StickyReflectedBM")
    if config.method is SimMethod.KERNEL_EXACT:
        values, flags = _exact_arrays(config, replica)
    else:
        values, flags = _timechange_arrays(config, replica)
    return _path(config, replica, np.abs(values), flags)


_USER_COEFS = {}


def _coefficient(coef):
    """``(fn, c)`` with ``fn(x, c)`` a jitted evaluation of ``coef`` at ``x``."""
    if not callable(coef):
        return _engine.constant_coef, float(coef)
    fn = _USER_COEFS.get(coef)
    if fn is None:
        inner = coef if isinstance(coef, numba.core.registry.CPUDispatcher) else numba.njit(coef)

        @numba.njit(nogil=True)
        def fn(x, c):
            return inner(x)

        _USER_COEFS[coef] = fn
    return fn, 0.0


def sample_sticky_ito(config: SimConfig, replica: int = 0) -> SamplePath:
    """Approximate sticky Ito diffusion.

    Euler steps of ``dZ = mu(Z) dt + sigma(Z) dW`` on the fine grid, run on the
    clock ``t + rho L_t``, with the local time gain of each fine step drawn as
    for a Brownian motion of local variance ``sigma(Z)**2``. With constant
    ``sigma`` and zero drift the construction is the sticky Brownian one
    scaled by ``sigma``. Callable coefficients must be numba-compilable.

    Raises
    ------
    ModelError
        If ``sigma`` is not positive at a visited state.
    """
    model = config.model
    if model.kind is not ModelKind.STICKY_ITO:
        raise ConfigError("sample_sticky_ito needs model kind StickyIto")
    if config.method is not SimMethod.TIME_CHANGE:
        raise ConfigError("sample_sticky_ito needs method TimeChange")
    mu_fn, mu_c = _coefficient(model.mu)
    sigma_fn, sigma_c = _coefficient(model.sigma)
    values, flags = _buffers(config.grid)
    status = _engine.ito_path(
        float(model.x0), float(model.rho), float(config.grid.n), config.refine, values, flags,
        *stream_generators(config.seed, replica), mu_fn, mu_c, sigma_fn, sigma_c,
    )
    if status != 0:
        raise ModelError(f"sigma is not positive at a state visited before observation {-status - 1}")
    return _path(config, replica, values, flags)


def sample_path(config: SimConfig, replica: int = 0) -> SamplePath:
    """Dispatch on model kind and method."""
    kind = config.model.kind
    if kind is ModelKind.STICKY_ITO:
        return sample_sticky_ito(config, replica)
    if kind is ModelKind.STICKY_REFLECTED_BM:
        return sample_sticky_reflected(config, replica)
    if config.method is SimMethod.KERNEL_EXACT:
        return sample_sticky_bm_exact(config, replica)
    return sample_sticky_bm_timechange(config, replica)


def first_hit_interval(path: SamplePath):
    """1-based index of the first flagged interval, or ``None``."""
    idx = np.flatnonzero(path.hit_flags)
    return int(idx[0]) + 1 if len(idx) else None


def reflect_at_first_hit(path: SamplePath) -> SamplePath:
    """Negate the path from the first interval during which it touched 0.

    With ``i`` the first flagged interval, ``values[i:]`` are negated: the
    continuous path hits 0 inside ``[(i-1)/n, i/n]`` and every later
    observation lies after the hitting time. Flags and ``|values|`` are
    unchanged, which makes the transform an involution.
    """
    i = first_hit_interval(path)
    if i is None:
        return path
    values = np.array(path.values)
    values[i:] = -values[i:]
    # keep zeros unsigned so that applying the transform twice is bit-exact
    values[values == 0.0] = 0.0
    return path.with_values(values)


def exact_terminal_strict_crossings(rho: float, n: int, horizon_t: float, seed: int, replica: int,
                                    x0: float = 0.0) -> int:
    """``C0`` at the horizon of one kernel-exact path, without storing the path."""
    grid = ObservationGrid(n, horizon_t)
    count = _engine.strict_crossing_count(
        float(x0), float(rho), 1.0 / n, grid.num_intervals, *stream_generators(seed, replica)
    )
    if count < 0:
        raise NumericError("hit-tail inversion failed")
    return int(count)
