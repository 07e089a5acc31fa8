"""Flat, typed run configuration for the Monte Carlo harness and the CLI.

Configuration files hold ``key = value`` lines; ``#`` starts a comment. Every
key is checked against :data:`SCHEMA` (type and range) before any work starts.
"""

from __future__ import annotations

import configparser
import math
from dataclasses import dataclass
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .errors import ConfigError
from .path_model import ModelKind, ObservationGrid, StickyModel
from .simulate import SimConfig, SimMethod

__all__ = ["SCHEMA", "RunConfig", "EstimatorSpec", "parse_estimator_spec"]


def _positive(x):
    return x > 0


def _nonneg(x):
    return x >= 0


def _all_positive(xs):
    return len(xs) > 0 and all(x > 0 for x in xs)


def _all_nonneg(xs):
    return all(x >= 0 for x in xs)


def _finite(x):
    return math.isfinite(x)


# key -> (type, default, check or None)
SCHEMA = {
    "model.kind": ("str", "StickyBM", None),
    "model.rho": ("float", 1.0, _positive),
    "model.x0": ("float", 0.0, _finite),
    "model.mu": ("float", 0.0, _finite),
    "model.sigma": ("float", 1.0, _positive),
    "grid.n": ("int", 1000, _positive),
    "grid.T": ("float", 1.0, _positive),
    "grid.n_values": ("int_list", (1000, 10000, 100000), _all_positive),
    "sim.method": ("str", "KernelExact", None),
    "sim.refine": ("int", 64, _positive),
    "mc.replicas": ("int", 500, _positive),
    "mc.master_seed": ("int", 0, _nonneg),
    "mc.workers": ("int", 1, _positive),
    "estimator.method": ("str", "crossing", None),
    "estimator.variant": ("str", "C", None),
    "estimator.alpha": ("float", 0.5, lambda a: 0 < a < 1),
    "estimator.g_integral": ("float", 1.0, _finite),
    "estimator.sigma0": ("float", 0.0, _nonneg),
    "estimator.list": ("str_list", (), None),
    "check.n_values": ("int_list", (100, 10000, 1000000), _all_positive),
    "check.rho_values": ("float_list", (0.5, 1.0, 2.0), _all_positive),
    "check.samples": ("int", 10000, _positive),
    "check.k_max": ("int", 30, _nonneg),
    "check.ks_level": ("float", 0.01, lambda a: 0 < a < 1),
    "output.path": ("str", "", None),
}


def _split(text):
    return [p.strip() for p in str(text).split(",") if p.strip()]


def _convert(key, kind, raw):
    try:
        if kind == "str":
            return str(raw).strip()
        if kind == "float":
            return float(raw)
        if kind == "int":
            if isinstance(raw, float) and not raw.is_integer():
                raise ValueError
            return int(float(raw)) if isinstance(raw, str) and "e" in raw.lower() else int(raw)
        if isinstance(raw, (list, tuple)):
            items = list(raw)
        else:
            items = _split(raw)
        if kind == "int_list":
            return tuple(int(float(x)) if isinstance(x, str) and "e" in x.lower() else int(x) for x in items)
        if kind == "float_list":
            return tuple(float(x) for x in items)
        if kind == "str_list":
            return tuple(str(x).strip() for x in items)
    except (TypeError, ValueError):
        pass
    raise ConfigError(f"{key}: cannot read {raw!r} as {kind}")


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator applied to every replica: ``crossing``, ``occupation`` or ``ito``."""

    method: str
    variant: str = "C"
    alpha: float = 0.5
    g_integral: float = 1.0
    sigma0: float = 1.0

    @property
    def label(self) -> str:
        if self.method == "occupation":
            return f"occupation(alpha={self.alpha:g})"
        if self.method == "ito":
            return f"ito:{self.variant}(sigma0={self.sigma0:g})"
        return f"crossing:{self.variant}"


_METHODS = {"crossing", "occupation", "ito"}


def parse_estimator_spec(text: str, defaults: EstimatorSpec) -> EstimatorSpec:
    """Parse ``crossing:C``, ``occupation:0.45`` or ``ito:D``."""
    head, _, arg = text.strip().partition(":")
    method = head.strip().lower()
    if method not in _METHODS:
        raise ConfigError(f"unknown estimator {text!r}")
    spec = EstimatorSpec(method, defaults.variant, defaults.alpha, defaults.g_integral, defaults.sigma0)
    if arg:
        if method == "occupation":
            try:
                alpha = float(arg)
            except ValueError:
                raise ConfigError(f"bad alpha in estimator {text!r}") from None
            if not 0 < alpha < 1:
                raise ConfigError(f"alpha must lie in (0, 1) in estimator {text!r}")
            spec = EstimatorSpec(method, spec.variant, alpha, spec.g_integral, spec.sigma0)
        else:
            spec = EstimatorSpec(method, arg.strip().upper(), spec.alpha, spec.g_integral, spec.sigma0)
    allowed = {"C", "D"} if method == "ito" else {"C", "B", "D"}
    if method != "occupation" and spec.variant not in allowed:
        raise ConfigError(f"variant must be one of {sorted(allowed)} for {method}, got {spec.variant!r}")
    return spec


class RunConfig:
    """Validated flat key-value configuration.

    Parameters
    ----------
    values : mapping, optional
        Overrides of :data:`SCHEMA` defaults. Values may be strings (as read
        from a file) or already typed.
    """

    def __init__(self, values: Mapping = None):
        merged = {k: spec[1] for k, spec in SCHEMA.items()}
        given = dict(values or {})
        for key, raw in given.items():
            if key not in SCHEMA:
                raise ConfigError(f"unknown configuration key {key!r}")
            kind, _, check = SCHEMA[key]
            value = _convert(key, kind, raw)
            if check is not None and not check(value):
                raise ConfigError(f"{key}: value {value!r} is out of range")
            merged[key] = value
        self._given = frozenset(given)
        self._values = MappingProxyType(merged)
        # build the typed objects once so that every inconsistency surfaces here
        self._model = self._build_model()
        ObservationGrid(self["grid.n"], self["grid.T"])
        self._method = SimMethod.parse(self["sim.method"])
        self.sim_config()
        self.estimators()

    @classmethod
    def from_text(cls, text: str, overrides: Mapping = None) -> "RunConfig":
        parser = configparser.ConfigParser(
            delimiters=("=",), comment_prefixes=("#",), inline_comment_prefixes=("#",),
            interpolation=None, strict=True,
        )
        parser.optionxform = str
        try:
            parser.read_string("[run]\n" + text)
        except configparser.Error as exc:
            raise ConfigError(f"malformed configuration: {exc}") from None
        values = dict(parser["run"])
        values.update(overrides or {})
        return cls(values)

    @classmethod
    def from_file(cls, path, overrides: Mapping = None) -> "RunConfig":
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read configuration {path}: {exc}") from None
        return cls.from_text(text, overrides)

    def __getitem__(self, key):
        return self._values[key]

    def items(self):
        return self._values.items()

    def is_set(self, key) -> bool:
        return key in self._given

    def replace(self, **changes) -> "RunConfig":
        """Copy with keys overridden; use ``__`` for the dot, e.g. ``grid__n=10``."""
        values = {k: self._values[k] for k in self._given}
        values.update({k.replace("__", "."): v for k, v in changes.items()})
        return RunConfig(values)

    def echo(self) -> dict:
        """The full key-value map (defaults included) as plain values."""
        return dict(self._values)

    def _build_model(self) -> StickyModel:
        kind = ModelKind.parse(self["model.kind"])
        if kind is ModelKind.STICKY_ITO:
            return StickyModel(self["model.rho"], self["model.x0"], kind, self["model.mu"], self["model.sigma"])
        return StickyModel(self["model.rho"], self["model.x0"], kind)

    @property
    def model(self) -> StickyModel:
        return self._model

    def sim_config(self, n: int = None, seed: int = None, horizon_t: float = None) -> SimConfig:
        grid = ObservationGrid(self["grid.n"] if n is None else n, self["grid.T"] if horizon_t is None else horizon_t)
        return SimConfig(
            self._model, grid, self._method, self["sim.refine"], self["mc.master_seed"] if seed is None else seed
        )

    def estimators(self) -> list:
        sigma0 = self["estimator.sigma0"] or self._model.sigma0
        base = EstimatorSpec(
            "crossing", self["estimator.variant"].upper(), self["estimator.alpha"], self["estimator.g_integral"], sigma0
        )
        specs = self["estimator.list"] or (self["estimator.method"],)
        out = []
        for text in specs:
            if ":" not in text and text.strip().lower() == "occupation":
                text = f"occupation:{base.alpha}"
            elif ":" not in text:
                text = f"{text}:{base.variant}"
            out.append(parse_estimator_spec(text, base))
        return out
