"""numba-compiled path generators.

Exact skeleton step
-------------------
From ``x`` over a step ``h`` the sticky path coincides with a Brownian path
until it first hits 0. A Brownian endpoint plus the bridge-hit test
``exp(-2 x y / h)`` therefore samples the event "0 was touched" with its
exact probability, and on the complementary event the Brownian endpoint is
an exact draw from the killed part of the kernel. On the hit event the
endpoint is redrawn from the remaining kernel mass: the atom with
conditional probability ``erfcx(u + c) / erfcx(u)``, otherwise the
continuous hit part whose tail is ``exp(-u^2) (erfcx(u) - erfcx(u + c))``
in the scaled variable ``u = (|x| + |y|) / sqrt(2h)``, ``c = sqrt(2h)/rho``. That
tail is log-concave, so Newton's method on its logarithm converges from
the first overshoot on.

Fine-grid time change
---------------------
Brownian increments with the local time gained over each fine step drawn
from its exact conditional law given both endpoints (a Rayleigh tail
beyond ``|z| + |z_next|``). The clock ``A = u + rho L`` is then exact at fine
nodes. Inside a step that touches 0 the path is laid out as: linear run to
0, a hold of length ``rho * dL`` at 0, linear run to the endpoint.
"""

import math

import numba

from ._special import erfcx

_NEWTON_TOL = 1e-12
_MAX_NEWTON = 100


@numba.njit(nogil=True)
def _log_hit_tail(u, c):
    return -u * u + math.log(erfcx(u) - erfcx(u + c))


@numba.njit(nogil=True)
def solve_hit_tail(u0, c, v):
    """Smallest ``u >= u0`` with ``tail(u) = v * tail(u0)`` for ``v`` in (0, 1]."""
    target = math.log(v) + _log_hit_tail(u0, c)
    u = u0
    for _ in range(_MAX_NEWTON):
        d = erfcx(u) - erfcx(u + c)
        phi = -u * u + math.log(d) - target
        if abs(phi) < _NEWTON_TOL:
            return u
        dphi = -2.0 * c * erfcx(u + c) / d
        step = phi / dphi
        u_new = u - step
        if u_new < u0:
            u_new = 0.5 * (u + u0)
        if abs(u_new - u) <= 1e-15 * (1.0 + u):
            return u_new
        u = u_new
    return -1.0


@numba.njit(nogil=True)
def exact_step(x, h, rho, g_inc, g_atom, g_hit):
    """One kernel-exact step; returns ``(X_h, touched_zero, status)``.

    ``status`` is -1 when the tail inversion failed.
    """
    sqrt_2h = math.sqrt(2.0 * h)
    if x != 0.0:
        y = x + math.sqrt(h) * g_inc.standard_normal()
        if x * y > 0.0:
            if g_hit.random() >= math.exp(-2.0 * x * y / h):
                return y, False, 0
    ax = abs(x)
    u0 = ax / sqrt_2h
    c = sqrt_2h / rho
    if g_atom.random() * erfcx(u0) < erfcx(u0 + c):
        return 0.0, True, 0
    v = 1.0 - g_inc.random()
    u = solve_hit_tail(u0, c, v)
    if u < 0.0:
        return 0.0, True, -1
    mag = sqrt_2h * u - ax
    if mag <= 0.0:
        mag = 5e-324
    if g_inc.random() < 0.5:
        mag = -mag
    return mag, True, 0


@numba.njit(nogil=True)
def exact_path(x0, rho, h, values, flags, g_inc, g_atom, g_hit):
    """Fill ``values`` (length m+1) and ``flags`` (length m); returns a status code."""
    m = flags.shape[0]
    x = x0
    values[0] = x0
    for i in range(m):
        y, hit, status = exact_step(x, h, rho, g_inc, g_atom, g_hit)
        if status != 0:
            return -(i + 1)
        values[i + 1] = y
        flags[i] = hit
        x = y
    return 0


@numba.njit(nogil=True)
def _local_time_gain(s, var_h, g):
    # conditional law of dL given endpoints and a visit: s + dL has density
    # proportional to r exp(-r^2 / (2 var_h)) on r > s
    e = -2.0 * var_h * math.log(1.0 - g.random())
    return e / (math.sqrt(s * s + e) + s)


@numba.njit(nogil=True)
def _flag_hold(flags, n, a_start, lead, hold, m):
    # interval i is [(i-1)/n, i/n]; flagged when it meets [lead, lead + hold]
    # measured from a_start, with the same arithmetic as the value lookup
    i_lo = max(1, int(math.floor((a_start + lead) * n)) - 1)
    i_hi = min(m, int(math.floor((a_start + lead + hold) * n)) + 2)
    for i in range(i_lo, i_hi + 1):
        right = i / n - a_start
        left = (i - 1) / n - a_start
        if right >= lead and left <= lead + hold:
            flags[i - 1] = True


@numba.njit(nogil=True)
def _repair_flags(values, flags):
    for i in range(flags.shape[0]):
        a = values[i]
        b = values[i + 1]
        if a == 0.0 or b == 0.0 or (a > 0.0) != (b > 0.0):
            flags[i] = True


@numba.njit(nogil=True)
def _timechange_core(x0, rho, n, refine, values, flags, g_inc, g_atom, g_hit, mu_fn, mu_c, sigma_fn, sigma_c):
    m = flags.shape[0]
    h = 1.0 / (n * refine)
    sh = math.sqrt(h)
    z = x0
    a_clock = 0.0
    j = 0
    for i in range(m):
        flags[i] = False
    while j <= m:
        sig = sigma_fn(z, sigma_c)
        if not sig > 0.0:
            return -(j + 1)
        zn = z + mu_fn(z, mu_c) * h + sig * sh * g_inc.standard_normal()
        var_h = sig * sig * h
        hit = False
        if z * zn <= 0.0:
            hit = True
        elif g_hit.random() < math.exp(-2.0 * z * zn / var_h):
            hit = True
        dl = 0.0
        lead = 0.0
        if hit:
            s = abs(z) + abs(zn)
            dl = _local_time_gain(s, var_h, g_atom)
            if s > 0.0:
                lead = h * abs(z) / s
        hold = rho * dl
        a_next = a_clock + h + hold
        while j <= m and j / n < a_next:
            f = j / n - a_clock
            if not hit:
                x = z + (zn - z) * (f / h)
            elif f < lead:
                x = z * (1.0 - f / lead)
            elif f <= lead + hold:
                x = 0.0
            else:
                x = zn * ((f - lead - hold) / (h - lead))
            values[j] = x
            j += 1
        if hit:
            _flag_hold(flags, n, a_clock, lead, hold, m)
        z = zn
        a_clock = a_next
    values[0] = x0
    _repair_flags(values, flags)
    return 0


@numba.njit(nogil=True)
def constant_coef(x, c):
    return c


@numba.njit(nogil=True)
def timechange_path(x0, rho, n, refine, values, flags, g_inc, g_atom, g_hit):
    return _timechange_core(
        x0, rho, n, refine, values, flags, g_inc, g_atom, g_hit, constant_coef, 0.0, constant_coef, 1.0
    )


@numba.njit(nogil=True)
def ito_path(x0, rho, n, refine, values, flags, g_inc, g_atom, g_hit, mu_fn, mu_c, sigma_fn, sigma_c):
    return _timechange_core(
        x0, rho, n, refine, values, flags, g_inc, g_atom, g_hit, mu_fn, mu_c, sigma_fn, sigma_c
    )


@numba.njit(nogil=True)
def strict_crossing_count(x0, rho, h, m, g_inc, g_atom, g_hit):
    """Terminal strict-crossing count of an exact path without storing it."""
    x = x0
    count = 0
    for i in range(m):
        y, hit, status = exact_step(x, h, rho, g_inc, g_atom, g_hit)
        if status != 0:
            return -1
        if x * y < 0.0:
            count += 1
        x = y
    return count
