"""Monte Carlo harness: estimator studies, convergence suites and numerical checks.

Replica ``r`` of a run always draws from the streams derived from
``(mc.master_seed, r)``, so results do not depend on ``mc.workers``.
Per-replica records are reduced in replica order.
"""

from __future__ import annotations

import io
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import stats as sps

from . import kernel
from .config import EstimatorSpec, RunConfig
from .errors import ConfigError, StickyError
from .estimate import CROSSING_FACTOR, estimate_rho_crossing, estimate_rho_ito, estimate_rho_occupation
from .path_model import ModelKind, ObservationGrid
from .simulate import (
    SimConfig,
    SimMethod,
    exact_terminal_strict_crossings,
    reflect_at_first_hit,
    sample_path,
)
from .statistics import all_counts, conditional_crossings

__all__ = [
    "McSummary",
    "run_mc",
    "run_mc_estimation",
    "ConvergenceRow",
    "run_convergence_suite",
    "CheckRow",
    "run_kernel_checks",
    "run_reflection_test",
    "run_sampler_crosscheck",
    "run_portenko_check",
    "rows_to_csv",
    "randomized_pit",
]


def fmt(x) -> str:
    """Fixed CSV formatting: 17 significant digits, ints and strings verbatim."""
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return format(float(x), ".17g")
    return str(x)


def rows_to_csv(header: Sequence[str], rows) -> str:
    buf = io.StringIO()
    buf.write(",".join(header) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")
    return buf.getvalue()


def _map_replicas(fn, replicas, workers: int):
    if workers <= 1:
        return [fn(r) for r in replicas]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, replicas))


def _nanmean(a):
    a = np.asarray(a, dtype=np.float64)
    a = a[np.isfinite(a)]
    return float(np.mean(a)) if len(a) else math.nan


# --------------------------------------------------------------------------
# estimator studies


@dataclass(frozen=True)
class McSummary:
    """Monte Carlo summary of one estimator over a set of replicas.

    ``mean`` and ``std`` (population form, ``1/N_included``) use only the
    replicas with a defined estimate. ``conditioning_rate`` is the fraction
    of replicas whose path reached 0; ``included_rate + none_rate +
    error_rate = 1``.
    """

    config: dict = field(repr=False)
    estimator: str
    n_replicas: int
    n_included: int
    n_none: int
    n_errors: int
    mean: float
    std: float
    conditioning_rate: float
    wall_seconds: float

    @property
    def included_rate(self) -> float:
        return self.n_included / self.n_replicas

    @property
    def none_rate(self) -> float:
        return self.n_none / self.n_replicas

    @property
    def error_rate(self) -> float:
        return self.n_errors / self.n_replicas

    CSV_HEADER = (
        "estimator", "kind", "rho", "x0", "n", "T", "method", "replicas", "included", "none", "errors",
        "mean", "std", "conditioning_rate", "included_rate", "none_rate", "error_rate",
    )

    def csv_row(self):
        c = self.config
        return (
            self.estimator, c["model.kind"], c["model.rho"], c["model.x0"], c["grid.n"], c["grid.T"],
            c["sim.method"], self.n_replicas, self.n_included, self.n_none, self.n_errors, self.mean, self.std,
            self.conditioning_rate, self.included_rate, self.none_rate, self.error_rate,
        )


def summaries_csv(summaries) -> str:
    """CSV of several summaries; wall time is left out to keep runs byte-identical."""
    return rows_to_csv(McSummary.CSV_HEADER, [s.csv_row() for s in summaries])


def _apply(spec: EstimatorSpec, path, counts):
    if spec.method == "crossing":
        return estimate_rho_crossing(path, spec.variant, counts)
    if spec.method == "ito":
        return estimate_rho_ito(path, spec.sigma0, spec.variant, counts)
    return estimate_rho_occupation(path, alpha=spec.alpha, g_integral=spec.g_integral, validate=False)


def run_mc(config: RunConfig, estimators: Optional[Sequence[EstimatorSpec]] = None) -> list:
    """Simulate ``mc.replicas`` paths and summarize every estimator on the same paths.

    A replica whose simulation or evaluation raises a library error is
    excluded and counted in ``n_errors``.
    """
    specs = list(estimators) if estimators is not None else config.estimators()
    if not specs:
        raise ConfigError("no estimator configured")
    sim = config.sim_config()
    start = time.perf_counter()

    def one(r):
        try:
            path = sample_path(sim, r)
            counts = {k.value: s.terminal for k, s in all_counts(path).items()}
            values = [_apply(spec, path, counts).value for spec in specs]
        except StickyError as exc:
            return r, None, None, exc
        return r, path.hit_event, values, None

    records = sorted(_map_replicas(one, range(config["mc.replicas"]), config["mc.workers"]), key=lambda t: t[0])
    wall = time.perf_counter() - start
    total = len(records)
    errors = sum(1 for rec in records if rec[3] is not None)
    hits = sum(1 for rec in records if rec[3] is None and rec[1])
    out = []
    for j, spec in enumerate(specs):
        vals = np.array([rec[2][j] for rec in records if rec[3] is None and rec[2][j] is not None], dtype=np.float64)
        n_inc = len(vals)
        mean = float(np.mean(vals)) if n_inc else math.nan
        std = float(np.sqrt(np.mean((vals - mean) ** 2))) if n_inc else math.nan
        out.append(
            McSummary(
                config.echo(), spec.label, total, n_inc, total - errors - n_inc, errors, mean, std,
                hits / total, wall,
            )
        )
    return out


def run_mc_estimation(config: RunConfig) -> McSummary:
    """Monte Carlo study of the single configured estimator."""
    specs = config.estimators()
    if len(specs) != 1:
        raise ConfigError(f"run_mc_estimation needs exactly one estimator, got {len(specs)}")
    return run_mc(config, specs)[0]


# --------------------------------------------------------------------------
# convergence suite


@dataclass(frozen=True)
class ConvergenceRow:
    statistic: str
    n: int
    t: float
    mean_value: float
    mean_reference: float
    mean_abs_deviation: float
    mean_rel_deviation: float
    replicas: int

    HEADER = ("statistic", "n", "t", "mean_value", "mean_reference", "mean_abs_deviation",
              "mean_rel_deviation", "replicas")

    def csv_row(self):
        return (self.statistic, self.n, self.t, self.mean_value, self.mean_reference, self.mean_abs_deviation,
                self.mean_rel_deviation, self.replicas)


def _suite_terms(kind, counts, k, n, rho, chat0):
    """``(name, value, reference, scale)`` at index ``k``; relative deviation is
    ``|value - reference| / scale``."""
    sq = math.sqrt(n)
    occ = counts["OCC"][k] / n
    out = []
    if kind is ModelKind.STICKY_REFLECTED_BM:
        lt = 2.0 * occ / rho
        lim1 = 0.5 * CROSSING_FACTOR * lt
        lim2 = 0.5 * rho * lt
        out.append(("B1/sqrt(n)", counts["B1"][k] / sq, lim1, lim1))
        out.append(("B2/n", counts["B2"][k] / n, lim2, lim2))
        out.append(("D1/sqrt(n)", counts["D1"][k] / sq, lim1, lim1))
        out.append(("D2/n", counts["D2"][k] / n, lim2, lim2))
        return out
    lt = occ / rho
    lim1 = CROSSING_FACTOR * lt
    lim2 = rho * lt
    out.append(("C0/sqrt(n)", counts["C0"][k] / sq, 0.0, lim1))
    for name in ("C1", "D1", "B1"):
        out.append((f"{name}/sqrt(n)", counts[name][k] / sq, lim1, lim1))
    for name in ("C2", "D2", "B2"):
        out.append((f"{name}/n", counts[name][k] / n, lim2, lim2))
    out.append(("|B1-C1|/sqrt(n)", abs(counts["B1"][k] - counts["C1"][k]) / sq, 0.0, lim1))
    out.append(("|B2-C2|/n", abs(counts["B2"][k] - counts["C2"][k]) / n, 0.0, lim2))
    if chat0 is not None:
        out.append(("Chat0", chat0[k], lt / rho, lt / rho))
    return out


def run_convergence_suite(config: RunConfig) -> list:
    """Fixed-time convergence of the normalized counts for every ``n`` in ``grid.n_values``.

    For each replica the reference limits use the local time estimated from
    the occupation at 0 of the same path. Rows are averaged over the
    replicas at times ``T/4``, ``T/2`` and ``T``.
    """
    kind = config.model.kind
    if kind is ModelKind.STICKY_ITO:
        raise ConfigError("the convergence suite covers the Brownian kinds")
    rho = config["model.rho"]
    horizon = config["grid.T"]
    times = (horizon / 4, horizon / 2, horizon)
    rows = []
    for n in config["grid.n_values"]:
        sim = config.sim_config(n=n)
        grid = sim.grid
        idx = [grid.index_at(t) for t in times]

        def one(r, sim=sim, idx=idx, n=n):
            path = sample_path(sim, r)
            counts = {k.value: s.counts for k, s in all_counts(path).items()}
            chat0 = conditional_crossings(path, 0, rho) if kind is ModelKind.STICKY_BM else None
            return r, [_suite_terms(kind, counts, k, n, rho, chat0) for k in idx]

        records = sorted(_map_replicas(one, range(config["mc.replicas"]), config["mc.workers"]), key=lambda x: x[0])
        for ti, t in enumerate(times):
            names = [term[0] for term in records[0][1][ti]]
            for si, name in enumerate(names):
                terms = [rec[1][ti][si] for rec in records]
                v = np.array([x[1] for x in terms])
                ref = np.array([x[2] for x in terms])
                scale = np.array([x[3] for x in terms])
                dev = np.abs(v - ref)
                with np.errstate(divide="ignore", invalid="ignore"):
                    rel = np.where(scale > 0, dev / scale, np.nan)
                rows.append(ConvergenceRow(name, n, t, float(v.mean()), float(ref.mean()), float(dev.mean()),
                                           _nanmean(rel), len(records)))
    return rows


# --------------------------------------------------------------------------
# kernel checks


@dataclass(frozen=True)
class CheckRow:
    check: str
    params: str
    value: float
    reference: float
    error: float
    tolerance: float
    passed: bool

    HEADER = ("check", "params", "value", "reference", "error", "tolerance", "passed")

    def csv_row(self):
        return (self.check, self.params, self.value, self.reference, self.error, self.tolerance, self.passed)


def _quad_speed(f, lo=-np.inf, hi=np.inf, points=(0.0,)):
    from scipy.integrate import quad

    cuts = [lo] + sorted({p for p in points if lo < p < hi}) + [hi]
    total = 0.0
    for a, b in zip(cuts[:-1], cuts[1:]):
        val, _ = quad(f, a, b, epsabs=1e-14, epsrel=1e-12, limit=500)
        total += val
    return total


def _normalization_rows():
    rows = []
    for t in (0.1, 1.0, 4.0):
        for x in (-1.0, 0.0, 0.5, 2.0):
            for rho in (0.5, 1.0, 2.0):
                mass = _quad_speed(lambda y: kernel.sticky_density(t, x, y, rho), points=(0.0, x)) + float(
                    kernel.sticky_atom_mass(t, x, rho)
                )
                rows.append(CheckRow("normalization", f"t={t:g};x={x:g};rho={rho:g}", mass, 1.0, abs(mass - 1.0),
                                     1e-8, abs(mass - 1.0) < 1e-8))
    return rows


def _chapman_kolmogorov_rows():
    rows = []
    for s, t, x, y, rho in ((0.5, 0.5, 0.0, 0.5, 1.0), (0.3, 0.7, 0.4, -0.2, 0.5), (1.0, 2.0, -1.0, 1.5, 2.0),
                            (0.2, 0.2, 0.1, 0.0, 1.0)):
        def f(z):
            return kernel.speed_kernel(s, x, z, rho) * kernel.speed_kernel(t, z, y, rho)

        lhs = _quad_speed(f, points=(0.0, x, y)) + rho * float(f(0.0))
        rhs = float(kernel.speed_kernel(s + t, x, y, rho))
        err = abs(lhs - rhs)
        rows.append(CheckRow("chapman_kolmogorov", f"s={s:g};t={t:g};x={x:g};y={y:g};rho={rho:g}", lhs, rhs, err,
                             1e-6, err < 1e-6))
    return rows


def _random_tuples(rng, size):
    t = np.exp(rng.uniform(np.log(1e-4), np.log(10.0), size))
    x = rng.normal(0.0, 2.0, size) * np.sqrt(t)
    y = rng.normal(0.0, 2.0, size) * np.sqrt(t)
    rho = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), size))
    return t, x, y, rho


def _symmetry_scaling_hit_rows(samples, seed):
    rng = np.random.default_rng(seed)
    t, x, y, rho = _random_tuples(rng, samples)
    p = kernel.sticky_density(t, x, y, rho)
    q = kernel.sticky_density(t, -x, -y, rho)
    sym = float(np.max(np.abs(p - q) / np.maximum(p, 1e-300)))
    rows = [CheckRow("symmetry", f"samples={samples}", sym, 0.0, sym, 1e-12, sym <= 1e-12)]
    # scaling: p_{rho/sqrt(c)}(t, x/sqrt(c), y/sqrt(c)) = sqrt(c) p_rho(ct, x, y), atom included
    c = np.exp(rng.uniform(np.log(1e-2), np.log(1e2), samples))
    rc = np.sqrt(c)
    lhs = kernel.speed_kernel(t, x / rc, y / rc, rho / rc)
    rhs = rc * kernel.speed_kernel(c * t, x, y, rho)
    ok = (lhs > 1e-250) & (rhs > 1e-250)
    scal = float(np.max(np.abs(lhs[ok] - rhs[ok]) / rhs[ok]))
    lhs0 = kernel.sticky_atom_mass(t, x / rc, rho / rc)
    rhs0 = kernel.sticky_atom_mass(c * t, x, rho)
    ok0 = rhs0 > 1e-250
    scal0 = float(np.max(np.abs(lhs0[ok0] - rhs0[ok0]) / rhs0[ok0]))
    rows.append(CheckRow("scaling_density", f"samples={samples}", scal, 0.0, scal, 1e-12, scal <= 1e-12))
    rows.append(CheckRow("scaling_atom", f"samples={samples}", scal0, 0.0, scal0, 1e-12, scal0 <= 1e-12))
    h = kernel.hit_probability(t, x, y, rho)
    bad = int(np.count_nonzero(~((h >= 0) & (h <= 1))))
    rows.append(CheckRow("hit_probability_range", f"samples={samples}", float(bad), 0.0, float(bad), 0.0, bad == 0))
    dens_order = int(np.count_nonzero(kernel.absorbed_density(t, x, y) > p))
    rows.append(CheckRow("absorbed_le_sticky", f"samples={samples}", float(dens_order), 0.0, float(dens_order), 0.0,
                         dens_order == 0))
    return rows


def kernel_limit_values(n: int, rho: float) -> dict:
    """The three small-time kernel limits evaluated at ``n``: name -> (value, limit)."""
    one_minus = 1.0 - float(kernel.asymptotic_fn("f", n, 0.0, rho))
    mk = kernel.m_functional(lambda x: kernel.asymptotic_fn("k", n, x, rho), n, rho).value
    mh = kernel.m_functional(lambda x: kernel.asymptotic_fn("h", n, x, rho), n, rho).value
    return {
        "sqrt_n_one_minus_f0": (math.sqrt(n) * one_minus, kernel.LIMIT_SQRT_N_ONE_MINUS_F / rho),
        "m_k": (mk, kernel.LIMIT_M_K),
        "m_h": (mh, 1.0 / rho),
    }


def _limit_rows(n_values, rho_values, tol=0.01):
    rows = []
    n_values = sorted(n_values)
    for rho in rho_values:
        prev = {}
        for n in n_values:
            for name, (val, lim) in kernel_limit_values(n, rho).items():
                err = abs(val - lim) / abs(lim)
                if n == n_values[-1]:
                    passed = err < tol
                else:
                    # below the largest n only the trend is checked
                    passed = name not in prev or err <= prev[name]
                prev[name] = err
                rows.append(CheckRow(f"limit_{name}", f"n={n};rho={rho:g}", val, lim, err, tol, passed))
    return rows


def _portenko_rows(k_max, rho=1.0, t=1.0):
    vals = [kernel.portenko_pmf(t, k, rho) for k in range(k_max + 1)]
    total = float(sum(vals))
    rows = [CheckRow("portenko_sum", f"t={t:g};rho={rho:g};k<={k_max}", total, 1.0, abs(total - 1.0), 1e-3,
                     abs(total - 1.0) < 1e-3)]
    neg = sum(1 for v in vals if v < 0)
    rows.append(CheckRow("portenko_nonnegative", f"t={t:g};rho={rho:g};k<={k_max}", float(neg), 0.0, float(neg),
                         0.0, neg == 0))
    lam = np.array([0.1, 1.0, 10.0, 100.0])
    geo = 0.0
    for lm in lam:
        s = sum(float(kernel.portenko_transform(lm, k, rho)) for k in range(2000))
        geo = max(geo, abs(s - 1.0))
    rows.append(CheckRow("portenko_transform_sum", f"rho={rho:g}", geo, 0.0, geo, 1e-12, geo <= 1e-12))
    return rows


def run_kernel_checks(config: Optional[RunConfig] = None) -> list:
    """Every kernel invariant as a pass/fail :class:`CheckRow`."""
    config = config or RunConfig()
    rows = []
    rows += _normalization_rows()
    rows += _chapman_kolmogorov_rows()
    rows += _symmetry_scaling_hit_rows(config["check.samples"], config["mc.master_seed"])
    rows += _limit_rows(config["check.n_values"], config["check.rho_values"])
    rows += _portenko_rows(config["check.k_max"])
    return rows


# --------------------------------------------------------------------------
# distributional checks


def _terminal_values(sim: SimConfig, replicas, workers, index=None):
    def one(r):
        p = sample_path(sim, r)
        return p.values if index is None else p.values[index]

    return np.array(_map_replicas(one, replicas, workers))


@dataclass(frozen=True)
class KsRow:
    check: str
    t: float
    samples: int
    statistic: float
    pvalue: float
    level: float
    passed: bool

    HEADER = ("check", "t", "samples", "ks_statistic", "pvalue", "level", "passed")

    def csv_row(self):
        return (self.check, self.t, self.samples, self.statistic, self.pvalue, self.level, self.passed)


def randomized_pit(samples, cdf, cdf_left, rng) -> np.ndarray:
    """``F(x-) + V (F(x) - F(x-))`` with ``V`` uniform: exactly uniform when ``x ~ F``.

    Makes one-sample KS tests valid for laws with atoms.
    """
    samples = np.asarray(samples, dtype=np.float64)
    lo = np.asarray(cdf_left(samples), dtype=np.float64)
    hi = np.asarray(cdf(samples), dtype=np.float64)
    return lo + rng.uniform(size=samples.shape) * (hi - lo)


def _ks_row(name, t, a, b, level):
    res = sps.ks_2samp(a, b)
    return KsRow(name, t, len(a), float(res.statistic), float(res.pvalue), level, bool(res.pvalue > level))


def run_reflection_test(config: RunConfig) -> list:
    """Two-sample KS between reflected-at-first-hit and fresh sticky-BM values at ``T``.

    The reflected and the fresh sample use disjoint replica ranges.
    """
    model = config.model
    if model.kind is not ModelKind.STICKY_BM:
        raise ConfigError("the reflection test needs model kind StickyBM")
    n_paths = config["mc.replicas"]
    sim = SimConfig(model, ObservationGrid(config["grid.n"], config["grid.T"]), SimMethod.KERNEL_EXACT,
                    seed=config["mc.master_seed"])

    def reflected(r):
        return reflect_at_first_hit(sample_path(sim, r)).values[-1]

    def fresh(r):
        return sample_path(sim, n_paths + r).values[-1]

    a = np.array(_map_replicas(reflected, range(n_paths), config["mc.workers"]))
    b = np.array(_map_replicas(fresh, range(n_paths), config["mc.workers"]))
    return [_ks_row("reflection", config["grid.T"], a, b, config["check.ks_level"])]


def run_sampler_crosscheck(config: RunConfig, times: Sequence[float] = None) -> list:
    """Two-sample KS between the kernel-exact and time-change samplers at several times."""
    model = config.model
    if model.kind is ModelKind.STICKY_ITO:
        raise ConfigError("the sampler cross-check covers the Brownian kinds")
    horizon = config["grid.T"]
    times = times or (horizon / 4, horizon / 2, horizon)
    grid = ObservationGrid(config["grid.n"], horizon)
    seed = config["mc.master_seed"]
    exact = SimConfig(model, grid, SimMethod.KERNEL_EXACT, seed=seed)
    # a different master seed keeps the two samples independent
    tchange = SimConfig(model, grid, SimMethod.TIME_CHANGE, config["sim.refine"], seed=seed + 1)
    replicas = range(config["mc.replicas"])
    a = _terminal_values(exact, replicas, config["mc.workers"])
    b = _terminal_values(tchange, replicas, config["mc.workers"])
    return [
        _ks_row("exact_vs_timechange", t, a[:, grid.index_at(t)], b[:, grid.index_at(t)], config["check.ks_level"])
        for t in times
    ]


def run_portenko_check(config: RunConfig, tol: float = 0.05) -> list:
    """Inverted limit law against the empirical law of the strict-crossing count.

    Compares ``b_k(T)`` with the frequency of ``C0 = k`` over ``mc.replicas``
    kernel-exact paths at ``grid.n``, for ``k <= 4``.
    """
    rho = config["model.rho"]
    n = config["grid.n"]
    horizon = config["grid.T"]
    seed = config["mc.master_seed"]

    def one(r):
        return exact_terminal_strict_crossings(rho, n, horizon, seed, r, x0=0.0)

    counts = np.array(_map_replicas(one, range(config["mc.replicas"]), config["mc.workers"]))
    rows = []
    for k in range(5):
        b = kernel.portenko_pmf(horizon, k, rho)
        emp = float(np.mean(counts == k))
        rows.append(CheckRow(f"portenko_b{k}", f"n={n};t={horizon:g};rho={rho:g};replicas={len(counts)}",
                             emp, b, abs(emp - b), tol, abs(emp - b) < tol))
    return rows
