"""Scenario configuration: JSON parsing and validation.

Units: all frequencies are angular (rad per unit time), times are in the same
time unit, ``lambda`` is dimensionless.  Complex matrices are row-major lists
of rows whose entries are ``[re, im]`` pairs (plain reals are accepted).
"""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import ConfigError

SCHEMA_VERSION = 1
TI_ENGINES = ("ti",)
TD_ENGINES = ("td-mean", "td-gauged", "magnus", "floquet-magnus", "rwa", "dyson")
ENGINES = TI_ENGINES + TD_ENGINES
MODEL_KINDS = ("iontrap", "rabi", "ti-matrix", "td-trigpoly", "random")
TI_KINDS = ("rabi", "ti-matrix", "random")


@dataclass
class ScenarioConfig:
    scenario_id: str
    model: dict
    engine: str
    order: int
    lambda_grid: list
    time_grid: list
    oracle_rel_tol: float = 1e-11
    gauge: list | None = None
    checks: dict = field(default_factory=dict)
    csv_name: str | None = None
    summary_name: str | None = None
    source: str | None = None

    @property
    def is_ti(self) -> bool:
        return self.engine in TI_ENGINES

    def grid_signature(self) -> tuple:
        return (tuple(self.lambda_grid), tuple(self.time_grid))


def _line_of(text: str | None, key: str) -> str:
    """Best-effort ``line N`` locator for a key in the raw JSON text."""
    if not text:
        return ""
    m = re.search(r'"' + re.escape(key) + r'"\s*:', text)
    if not m:
        return ""
    return f"line {text.count(chr(10), 0, m.start()) + 1}: "


class _Ctx:
    def __init__(self, text: str | None, origin: str):
        self.text = text
        self.origin = origin

    def fail(self, key: str, msg: str):
        raise ConfigError(f"{self.origin}: {_line_of(self.text, key)}{key}: {msg}")


def parse_matrix(obj: Any, name: str = "matrix") -> np.ndarray:
    """Row-major complex matrix from ``[[[re, im], ...], ...]``."""
    if not isinstance(obj, list) or not obj or not all(isinstance(r, list) for r in obj):
        raise ConfigError(f"{name}: expected a non-empty list of rows")
    n = len(obj)
    out = np.zeros((n, n), complex)
    for i, row in enumerate(obj):
        if len(row) != n:
            raise ConfigError(f"{name}: row {i} has {len(row)} entries, expected {n}")
        for j, v in enumerate(row):
            if isinstance(v, (int, float)):
                out[i, j] = v
            elif isinstance(v, list) and len(v) == 2 and all(isinstance(c, (int, float)) for c in v):
                out[i, j] = complex(v[0], v[1])
            else:
                raise ConfigError(f"{name}[{i}][{j}]: expected a number or a [re, im] pair")
    return out


def matrix_to_json(m: np.ndarray) -> list:
    return [[[float(v.real), float(v.imag)] for v in row] for row in np.asarray(m, complex)]


def _positive_list(ctx: _Ctx, raw: dict, key: str, allow_zero: bool) -> list:
    vals = raw.get(key)
    if not isinstance(vals, list) or not vals:
        ctx.fail(key, "must be a non-empty list of numbers")
    out = []
    for v in vals:
        if not isinstance(v, (int, float)) or isinstance(v, bool) or not math.isfinite(v):
            ctx.fail(key, f"entry {v!r} is not a finite number")
        if v < 0 or (v == 0 and not allow_zero):
            ctx.fail(key, f"entry {v!r} must be {'non-negative' if allow_zero else 'positive'}")
        out.append(float(v))
    return out


def _validate_model(ctx: _Ctx, model: Any) -> dict:
    if not isinstance(model, dict):
        ctx.fail("model", "must be an object")
    kind = model.get("kind")
    if kind not in MODEL_KINDS:
        ctx.fail("kind", f"unknown model kind {kind!r}; expected one of {MODEL_KINDS}")
    if kind == "iontrap":
        for k in ("nu", "epsilon", "alpha"):
            if k in model and not isinstance(model[k], (int, float)):
                ctx.fail(k, "must be a number")
        if "cutoff" in model and (not isinstance(model["cutoff"], int) or model["cutoff"] < 4):
            ctx.fail("cutoff", "must be an integer >= 4")
        if model.get("form", "generalized-gf") not in ("full-D", "linearized", "generalized-gf"):
            ctx.fail("form", f"unknown form {model.get('form')!r}")
    elif kind == "ti-matrix":
        if "H0" not in model:
            ctx.fail("H0", "required for ti-matrix models")
        try:
            model["_H0"] = parse_matrix(model["H0"], "H0")
            model["_H"] = [parse_matrix(m, f"H[{i}]") for i, m in enumerate(model.get("H", []))]
        except ConfigError as exc:
            ctx.fail("H0" if "H0" in str(exc) else "H", str(exc))
        if not model["_H"]:
            ctx.fail("H", "at least one perturbation matrix is required")
    elif kind == "td-trigpoly":
        bases = model.get("bases")
        if not isinstance(bases, list) or not bases or any(not isinstance(b, (int, float)) or b <= 0 for b in bases):
            ctx.fail("bases", "must be a non-empty list of positive frequencies")
        orders = model.get("H")
        if not isinstance(orders, list) or not orders:
            ctx.fail("H", "must list the terms of each perturbative order")
        parsed = []
        for n, terms in enumerate(orders, start=1):
            if not isinstance(terms, list):
                ctx.fail("H", f"order {n} must be a list of {{freq, matrix}} terms")
            pt = []
            for term in terms:
                if not isinstance(term, dict) or "freq" not in term or "matrix" not in term:
                    ctx.fail("freq", f"order {n}: each term needs 'freq' and 'matrix'")
                freq = term["freq"]
                freq = [freq] if isinstance(freq, int) else freq
                if not isinstance(freq, list) or len(freq) != len(bases) or any(not isinstance(c, int) for c in freq):
                    ctx.fail("freq", f"order {n}: integer vector of length {len(bases)} expected")
                pt.append((tuple(freq), parse_matrix(term["matrix"], f"H[{n}].matrix")))
            parsed.append(pt)
        model["_terms"] = parsed
    elif kind == "random":
        dim = model.get("dim", 4)
        if not isinstance(dim, int) or dim < 2:
            ctx.fail("dim", "must be an integer >= 2")
        if not isinstance(model.get("orders", 1), int) or model.get("orders", 1) < 1:
            ctx.fail("orders", "must be a positive integer")
    return model


def validate(raw: Any, text: str | None = None, origin: str = "<config>") -> ScenarioConfig:
    ctx = _Ctx(text, origin)
    if not isinstance(raw, dict):
        raise ConfigError(f"{origin}: top level must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        ctx.fail("schema_version", f"unsupported version {version!r}")
    model = _validate_model(ctx, raw.get("model"))
    engine = raw.get("engine")
    if engine not in ENGINES:
        ctx.fail("engine", f"unknown engine {engine!r}; expected one of {ENGINES}")
    kind = model["kind"]
    if engine in TI_ENGINES and kind not in TI_KINDS + ("iontrap",):
        ctx.fail("engine", f"engine {engine!r} needs a time-independent model, got {kind!r}")
    if engine in TD_ENGINES and kind in TI_KINDS:
        ctx.fail("engine", f"engine {engine!r} needs a time-dependent model, got {kind!r}")
    if engine == "rwa" and kind != "iontrap":
        ctx.fail("engine", "the rwa engine is defined for the iontrap model only")
    order = raw.get("order", 1)
    caps = {"ti": 6, "dyson": 2, "magnus": 3, "rwa": 1}
    if not isinstance(order, int) or isinstance(order, bool) or not 1 <= order <= caps.get(engine, 4):
        ctx.fail("order", f"must be an integer in 1..{caps.get(engine, 4)} for engine {engine!r}")
    lam = _positive_list(ctx, raw, "lambda_grid", allow_zero=True)
    times = _positive_list(ctx, raw, "time_grid", allow_zero=True)
    tol = raw.get("oracle_rel_tol", 1e-11)
    if not isinstance(tol, (int, float)) or not 1e-13 <= tol <= 1e-6:
        ctx.fail("oracle_rel_tol", "must lie in [1e-13, 1e-6]")
    gauge = raw.get("gauge")
    if gauge is not None:
        if engine not in ("td-gauged", "ti"):
            ctx.fail("gauge", f"gauge constants are not used by engine {engine!r}")
        try:
            gauge = [None if g is None else parse_matrix(g, f"gauge[{i}]") for i, g in enumerate(gauge)]
        except ConfigError as exc:
            ctx.fail("gauge", str(exc))
    checks = raw.get("checks", {})
    if not isinstance(checks, dict) or any(k not in ("min_slope", "max_slope") for k in checks):
        ctx.fail("checks", "only 'min_slope' and 'max_slope' are supported")
    sid = raw.get("scenario_id", Path(origin).stem if origin != "<config>" else "scenario")
    if not isinstance(sid, str) or not re.fullmatch(r"[A-Za-z0-9_.-]+", sid):
        ctx.fail("scenario_id", "must be a non-empty identifier ([A-Za-z0-9_.-])")
    return ScenarioConfig(
        scenario_id=sid, model=model, engine=engine, order=order, lambda_grid=lam,
        time_grid=times, oracle_rel_tol=float(tol), gauge=gauge, checks=dict(checks),
        csv_name=raw.get("csv"), summary_name=raw.get("summary"), source=origin,
    )


def load(path: str | Path) -> list[ScenarioConfig]:
    """Load one scenario or a ``{"scenarios": [...]}`` bundle."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"{path}: cannot read ({exc.strerror})") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    if isinstance(raw, dict) and "scenarios" in raw:
        items = raw["scenarios"]
        if not isinstance(items, list) or not items:
            raise ConfigError(f"{path}: {_line_of(text, 'scenarios')}scenarios must be a non-empty list")
        return [validate(item, text, str(path)) for item in items]
    return [validate(raw, text, str(path))]
