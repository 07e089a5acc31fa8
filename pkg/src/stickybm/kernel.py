"""Transition kernel of sticky Brownian motion and quantities derived from it.

The kernel with respect to the speed measure ``m(dy) = dy + rho * delta_0(dy)`` is

    p(t, x, y) = [phi_t(x - y) - phi_t(|x| + |y|)]
                 + (1/rho) exp(2(|x|+|y|)/rho + 2t/rho^2) erfc((|x|+|y|)/sqrt(2t) + sqrt(2t)/rho)

where the first bracket is the Brownian kernel killed at 0. Writing
``a = (|x|+|y|)/sqrt(2t) + sqrt(2t)/rho`` the second term equals
``erfcx(a) * exp(-(|x|+|y|)^2 / 2t) / rho``; it is always evaluated in that
form, so nothing overflows for large arguments.

All public functions broadcast over numpy arrays and return a Python float
for scalar input.
"""

from __future__ import annotations

import math
from fractions import Fraction
from typing import Callable, NamedTuple, Tuple

import numpy as np
from scipy import integrate
from scipy.special import erfcx, ndtr

from .errors import DomainError, NumericError

__all__ = [
    "absorbed_density",
    "sticky_density",
    "speed_kernel",
    "sticky_atom_mass",
    "crossing_probability",
    "sticky_cdf",
    "hit_probability",
    "asymptotic_fn",
    "m_functional",
    "QuadResult",
    "portenko_transform",
    "portenko_pmf",
    "stehfest_coefficients",
    "stehfest_invert",
    "LIMIT_SQRT_N_ONE_MINUS_F",
    "LIMIT_M_K",
]

SQRT_2_OVER_PI = math.sqrt(2.0 / math.pi)
#: limit of sqrt(n) (1 - f_n(0)) is this constant divided by rho
LIMIT_SQRT_N_ONE_MINUS_F = 2.0 * math.sqrt(2.0) / math.sqrt(math.pi)
#: limit of m_{sqrt(n) rho}(k_n)
LIMIT_M_K = 2.0 * SQRT_2_OVER_PI


def _out(a):
    a = np.asarray(a, dtype=np.float64)
    return float(a) if a.ndim == 0 else a


def _check_t(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(~(t > 0)):
        raise DomainError("time must be strictly positive")
    return t


def _check_rho(rho):
    rho = np.asarray(rho, dtype=np.float64)
    if np.any(~(rho > 0)):
        raise DomainError("stickiness rho must be strictly positive")
    return rho


def _gauss(t, z):
    return np.exp(-(z * z) / (2.0 * t)) / np.sqrt(2.0 * np.pi * t)


def _sticky_part(t, s, rho):
    """Second kernel term as a function of s = |x| + |y|."""
    a = s / np.sqrt(2.0 * t) + np.sqrt(2.0 * t) / rho
    return erfcx(a) * np.exp(-(s * s) / (2.0 * t)) / rho


def _hit_tail(t, s, rho):
    """Integral of the second kernel term over one half line, ``s' >= s >= 0``.

    Equals ``P_x(X_t < 0)`` for ``x = s >= 0``. Closed form
    ``exp(-u^2) [erfcx(u) - erfcx(u + c)] / 2`` with ``u = s/sqrt(2t)`` and
    ``c = sqrt(2t)/rho``.
    """
    u = s / np.sqrt(2.0 * t)
    c = np.sqrt(2.0 * t) / rho
    return 0.5 * np.exp(-u * u) * (erfcx(u) - erfcx(u + c))


def absorbed_density(t, x, y):
    """Brownian transition density killed at 0.

    Zero when ``x`` and ``y`` have opposite signs or either of them is 0.
    """
    t = _check_t(t)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    same_side = x * y > 0
    # phi(x - y) - phi(|x| + |y|) = phi(x - y) * (1 - exp(-2|x||y|/t))
    val = _gauss(t, x - y) * -np.expm1(-2.0 * np.abs(x) * np.abs(y) / t)
    return _out(np.where(same_side, val, 0.0))


def speed_kernel(t, x, y, rho):
    """Kernel density with respect to the speed measure; ``y = 0`` allowed."""
    t = _check_t(t)
    rho = _check_rho(rho)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    s = np.abs(x) + np.abs(y)
    return _out(absorbed_density(t, x, y) + _sticky_part(t, s, rho))


def sticky_density(t, x, y, rho):
    """Lebesgue density of ``X_t`` at ``y != 0`` given ``X_0 = x``."""
    y = np.asarray(y, dtype=np.float64)
    if np.any(y == 0.0):
        raise DomainError("the law has an atom at 0; use sticky_atom_mass for y = 0")
    return speed_kernel(t, x, y, rho)


def sticky_atom_mass(t, x, rho):
    """``P_x(X_t = 0)``, i.e. ``rho * p(t, x, 0)``."""
    t = _check_t(t)
    rho = _check_rho(rho)
    ax = np.abs(np.asarray(x, dtype=np.float64))
    a = ax / np.sqrt(2.0 * t) + np.sqrt(2.0 * t) / rho
    return _out(erfcx(a) * np.exp(-(ax * ax) / (2.0 * t)))


def crossing_probability(t, x, rho):
    """``P_x(x X_t < 0)``: probability of being strictly on the other side at time t."""
    t = _check_t(t)
    rho = _check_rho(rho)
    ax = np.abs(np.asarray(x, dtype=np.float64))
    return _out(np.where(ax > 0, _hit_tail(t, ax, rho), 0.0))


def _below_nonneg(t, a, rho, y):
    """``P_a(X_t < y)`` for a >= 0 (strict inequality, continuous part only at 0)."""
    st = np.sqrt(t)
    neg = _hit_tail(t, a + np.abs(y), rho)
    pos = 1.0 - (ndtr((a - y) / st) - ndtr(-(a + y) / st) + _hit_tail(t, a + np.abs(y), rho))
    return np.where(y <= 0, neg, pos)


def sticky_cdf(t, x, rho, y, left: bool = False):
    """``P_x(X_t <= y)``, or the left limit ``P_x(X_t < y)`` when ``left`` is set.

    The only discontinuity is at ``y = 0`` where the jump equals
    :func:`sticky_atom_mass`.
    """
    t = _check_t(t)
    rho = _check_rho(rho)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    t, x, rho, y = np.broadcast_arrays(t, x, rho, y)
    a = np.abs(x)
    atom = np.asarray(sticky_atom_mass(t, a, rho))
    at_zero = (y == 0) & (not left)
    # x >= 0: P(X <= y) = P(X < y) + atom 1{y = 0}
    direct = _below_nonneg(t, a, rho, y) + np.where(at_zero, atom, 0.0)
    # x < 0: P_x(X <= y) = 1 - P_|x|(X < -y) and P_x(X < y) = 1 - P_|x|(X <= -y)
    mirrored_strict = _below_nonneg(t, a, rho, -y)
    mirrored = 1.0 - mirrored_strict - np.where((y == 0) & bool(left), atom, 0.0)
    val = np.where(x >= 0, direct, mirrored)
    return _out(np.clip(val, 0.0, 1.0))


def hit_probability(t, x, y, rho):
    """Probability that the path visits 0 during ``[0, t]`` given ``X_0 = x`` and ``X_t = y``.

    One when the endpoints are on different sides or either is 0, otherwise
    ``1 - absorbed_density / sticky_density`` in a cancellation-free form.
    """
    t = _check_t(t)
    rho = _check_rho(rho)
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    ax, ay = np.abs(x), np.abs(y)
    a = (ax + ay) / np.sqrt(2.0 * t) + np.sqrt(2.0 * t) / rho
    w = -2.0 * ax * ay / t
    # both kernel terms divided by phi_t(x - y)
    hit_part = erfcx(a) * np.exp(w) / rho
    killed_part = -np.expm1(w) / np.sqrt(2.0 * np.pi * t)
    prob = hit_part / (hit_part + killed_part)
    return _out(np.where(x * y > 0, prob, 1.0))


def asymptotic_fn(kind: str, n: int, x, rho):
    """The functions ``f_n, g_n, h_n, k_n`` governing one observation step.

    ``f_n(x) = P_x(X_{1/n} = 0)``, ``g_n(x) = P_x(x X_{1/n} < 0)``,
    ``k_n(x) = 1{x != 0} f_n(x / sqrt(n))`` and ``h_n(x) = sqrt(n) g_n(x / sqrt(n))``.
    They are evaluated through the space-time scaling of the kernel, which
    maps step ``1/n`` with stickiness ``rho`` to unit time with stickiness
    ``sqrt(n) rho``.
    """
    if int(n) != n or n < 1:
        raise DomainError("n must be a positive integer")
    rho = float(_check_rho(rho))
    x = np.asarray(x, dtype=np.float64)
    rn = math.sqrt(n)
    r = rn * rho
    if kind == "f":
        return sticky_atom_mass(1.0, rn * x, r)
    if kind == "g":
        return crossing_probability(1.0, rn * x, r)
    if kind == "k":
        return _out(np.where(x != 0, sticky_atom_mass(1.0, x, r), 0.0))
    if kind == "h":
        return _out(rn * np.asarray(crossing_probability(1.0, x, r)))
    raise DomainError(f"unknown asymptotic function {kind!r}; expected one of f, g, h, k")


class QuadResult(NamedTuple):
    value: float
    error: float


def m_functional(
    g: Callable,
    n: int,
    rho: float,
    window: Tuple[float, float] = (-20.0, 20.0),
    tail_bound: float = 0.0,
    epsrel: float = 1e-10,
    epsabs: float = 1e-12,
) -> QuadResult:
    """``m_{sqrt(n) rho}(g) = integral of g + sqrt(n) rho g(0)``.

    The integral is truncated to ``window`` (split at 0, where the integrands
    of interest have a kink or a removable jump); ``tail_bound`` is the
    caller's bound on the neglected mass and is added to the reported error.
    """
    rho = float(_check_rho(rho))
    lo, hi = window
    if not lo < 0 < hi:
        raise DomainError("the truncation window must contain 0 in its interior")
    total, err = 0.0, float(tail_bound)
    for a, b in ((lo, 0.0), (0.0, hi)):
        res = integrate.quad(lambda u: float(g(u)), a, b, epsabs=epsabs, epsrel=epsrel, limit=200, full_output=1)
        if len(res) > 3:
            raise NumericError(f"quadrature on [{a}, {b}] did not converge: {res[3]}", achieved=res[1])
        total += res[0]
        err += res[1]
    return QuadResult(total + math.sqrt(n) * rho * float(g(0.0)), err)


def portenko_transform(lam, k, rho):
    """Transform ``int lambda e^{-lambda t} b_k(t) dt`` of the limit law of strict crossings.

    ``A/(1/rho^2 + A) * ((1/rho^2) / (1/rho^2 + A))^k`` with
    ``A = sqrt(lambda) (sqrt(lambda) + sqrt(2)/rho)``.
    """
    lam = np.asarray(lam, dtype=np.float64)
    if np.any(~(lam > 0)):
        raise DomainError("lambda must be strictly positive")
    rho = _check_rho(rho)
    k = np.asarray(k)
    if np.any(k < 0) or np.any(k != np.floor(k)):
        raise DomainError("k must be a nonnegative integer")
    sl = np.sqrt(lam)
    big_a = sl * (sl + math.sqrt(2.0) / rho)
    r = 1.0 / rho**2
    return _out(big_a / (r + big_a) * (r / (r + big_a)) ** k)


def stehfest_coefficients(order: int) -> np.ndarray:
    """Gaver-Stehfest weights ``V_1 .. V_N`` (computed exactly, returned as floats)."""
    if order % 2 or order < 2:
        raise DomainError("the Stehfest order must be a positive even integer")
    half = order // 2
    out = []
    for k in range(1, order + 1):
        acc = Fraction(0)
        for j in range((k + 1) // 2, min(k, half) + 1):
            acc += Fraction(
                j**half * math.factorial(2 * j),
                math.factorial(half - j)
                * math.factorial(j)
                * math.factorial(j - 1)
                * math.factorial(k - j)
                * math.factorial(2 * j - k),
            )
        out.append(float((-1) ** (half + k) * acc))
    return np.array(out)


def stehfest_invert(transform: Callable, t: float, order: int = 12) -> float:
    """Approximate f(t) from its Laplace transform ``F(s) = int e^{-st} f(t) dt``."""
    if not t > 0:
        raise DomainError("inversion time must be strictly positive")
    v = stehfest_coefficients(order)
    ln2t = math.log(2.0) / t
    s = ln2t * np.arange(1, order + 1)
    return float(ln2t * np.dot(v, [transform(si) for si in s]))


def portenko_pmf(
    t: float,
    k: int,
    rho: float,
    inversion_order: int = 12,
    check_order: int = None,
    tol: float = 1e-3,
) -> float:
    """Numerical ``P_0(Z_t = k)`` for the limit law of the strict-crossing count.

    Inverts ``lambda -> portenko_transform(lambda, k, rho) / lambda`` by Gaver-
    Stehfest of ``inversion_order`` and cross-checks against ``check_order``
    (default: two orders higher, or lower at the top of the range). Raises
    :class:`NumericError` when the two disagree by more than ``tol``.
    """
    if inversion_order % 2 or not 8 <= inversion_order <= 18:
        raise DomainError("inversion_order must be an even integer in [8, 18]")
    if check_order is None:
        check_order = inversion_order + 2 if inversion_order < 18 else inversion_order - 2
    _check_rho(rho)

    def laplace(s):
        return portenko_transform(s, k, rho) / s

    main = stehfest_invert(laplace, t, inversion_order)
    check = stehfest_invert(laplace, t, check_order)
    if abs(main - check) > tol:
        raise NumericError(
            f"Stehfest inversion unstable for k={k}, t={t}: order {inversion_order} gives {main:.6g}, "
            f"order {check_order} gives {check:.6g}",
            values=(main, check),
            achieved=abs(main - check),
        )
    return min(max(main, 0.0), 1.0)
