"""Scenario execution, CSV/JSON persistence and comparison reports."""
from __future__ import annotations

import csv
import io
import json
import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .. import expansion_td as td
from .. import expansion_ti as ti
from .. import linalg as la
from .. import models
from .. import oracle
from ..errors import ConfigError
from ..trigpoly import TrigPoly, mean
from .config import SCHEMA_VERSION, ScenarioConfig, matrix_to_json, validate

CSV_COLUMNS = ("scenario_id", "engine", "N", "lambda", "t", "error_vs_oracle",
               "unitarity_defect", "commutation_residual", "runtime_ms")
RWA_DEFICIENT_SLOPE = 1.5


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return format(float(x), ".17g")


# -- model construction --------------------------------------------------
def iontrap_params(model: dict) -> tuple[models.IonTrapParams, str]:
    eta = float(model.get("eta", 0.1))
    cutoff = int(model.get("cutoff", 16))
    g, f = model.get("g", 1.0), model.get("f", eta)
    if model.get("lamb_dicke"):
        g, f = models.lamb_dicke_profiles(eta, cutoff)
    p = models.IonTrapParams(
        nu=float(model.get("nu", 1.0)), epsilon=float(model.get("epsilon", 3.0)),
        alpha=float(model.get("alpha", 2.0)), lam=0.0, eta=eta,
        phi=float(model.get("phi", -math.pi / 2)), g=g, f=f, cutoff=cutoff,
    )
    return p, model.get("form", "generalized-gf")


def random_ti(dim: int, orders: int, seed: int) -> tuple[np.ndarray, list]:
    """Seeded random model: non-degenerate diagonal ``H0`` plus Hermitian perturbations."""
    rng = np.random.default_rng(seed)
    energies = np.cumsum(0.5 + rng.random(dim))
    hs = []
    for _ in range(orders):
        x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
        x = 0.5 * (x + la.dagger(x))
        hs.append(x / la.fro(x))
    return np.diag(energies).astype(complex), hs


def ti_model(cfg: ScenarioConfig, seed: int = 0) -> tuple[np.ndarray, list]:
    m = cfg.model
    kind = m["kind"]
    if kind == "rabi":
        nu = float(m.get("nu", 1.0))
        return 0.5 * nu * np.diag([1.0, -1.0]).astype(complex), [nu * np.array([[0, 1], [1, 0]], complex)]
    if kind == "ti-matrix":
        return m["_H0"], list(m["_H"])
    if kind == "random":
        return random_ti(int(m.get("dim", 4)), int(m.get("orders", 1)), int(m.get("seed", seed)))
    if kind == "iontrap":
        p, form = iontrap_params(m)
        h0, h1 = models.rotating_frame(p, form)
        return h0, [h1]
    raise ConfigError(f"model kind {kind!r} has no time-independent form")


def td_chain(cfg: ScenarioConfig) -> list[TrigPoly]:
    m = cfg.model
    if m["kind"] == "iontrap":
        p, form = iontrap_params(m)
        return models.interaction_chain(p, form)
    if m["kind"] == "td-trigpoly":
        bases = tuple(float(b) for b in m["bases"])
        dim = m["_terms"][0][0][1].shape[0] if m["_terms"][0] else None
        out = []
        for terms in m["_terms"]:
            mapping: dict = {}
            for freq, mat in terms:
                mapping[freq] = mapping.get(freq, 0) + mat
            d = dim or (terms[0][1].shape[0] if terms else None)
            poly = TrigPoly.from_terms(bases, mapping, dim=d)
            if not poly.is_hermitian_valued(1e-10):
                raise ConfigError("td-trigpoly model: each order must be Hermitian-valued "
                                  "(A_{-w} = A_w^dagger)")
            out.append(poly)
        return out
    raise ConfigError(f"model kind {m['kind']!r} has no interaction-picture form")


# -- execution ------------------------------------------------------------
@dataclass
class ScenarioResult:
    config: ScenarioConfig
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def errors_at(self, t: float) -> list:
        return [r["error_vs_oracle"] for r in self.rows if r["t"] == t]


def _ti_point(cfg, H0, hs, sol, lam):
    h = H0 + sum(lam ** (n + 1) * x for n, x in enumerate(hs))
    ref = oracle.integrate_schrodinger(h, max(cfg.time_grid), cfg.oracle_rel_tol, t_eval=cfg.time_grid)
    c = sol.C(lam)
    cres = la.fro(la.commutator(c, H0)) if np.ndim(c) == 2 else 0.0
    out = []
    for t in cfg.time_grid:
        u = ti.evolution_ti(sol, lam, t)
        out.append((t, la.fro(u - ref.at(t)), la.unitarity_defect(u), cres))
    return out


def _td_point(cfg, chain, sol, lam):
    total = TrigPoly.zero(chain[0].bases, chain[0].dim)
    for n, h in enumerate(chain, start=1):
        total = total + h.scale(lam ** n)
    ref = oracle.integrate_schrodinger(total, max(cfg.time_grid), cfg.oracle_rel_tol, t_eval=cfg.time_grid)
    out = []
    for t in cfg.time_grid:
        if cfg.engine == "rwa":
            u = la.hermitian_exponential(lam * mean(chain[0]), t, tol=1e-10)
        elif cfg.engine == "dyson":
            u = oracle.dyson_truncation(chain, lam, cfg.order, t)
        else:
            u = td.evolution_td(sol, lam, t)
        out.append((t, la.fro(u - ref.at(t)), la.unitarity_defect(u), None))
    return out


def _solve(cfg: ScenarioConfig, seed: int):
    if cfg.is_ti:
        H0, hs = ti_model(cfg, seed)
        return ("ti", H0, hs, ti.solve_ti(H0, hs, cfg.order, gauge=cfg.gauge))
    chain = td_chain(cfg)
    if cfg.engine == "td-mean":
        sol = td.solve_td_mean(chain, cfg.order)
    elif cfg.engine == "td-gauged":
        sol = td.solve_td_gauged(chain, cfg.order, gauge=cfg.gauge)
    elif cfg.engine == "floquet-magnus":
        sol = td.solve_td_gauged(chain, cfg.order, gauge=None)
    elif cfg.engine == "magnus":
        sol = td.magnus_mode(chain, cfg.order)
    else:
        sol = None
    return ("td", None, chain, sol)


def slope_table(cfg: ScenarioConfig, rows: list) -> dict:
    out = {}
    for t in cfg.time_grid:
        pts = [(r["lambda"], r["error_vs_oracle"]) for r in rows if r["t"] == t and r["lambda"] > 0]
        if t <= 0 or len(pts) < 4 or any(e <= 0 for _, e in pts):
            continue
        s, r2 = oracle.error_scaling_fit([p[0] for p in pts], [p[1] for p in pts])
        out[fmt(t)] = {"slope": s, "r_squared": r2}
    return out


def default_checks(cfg: ScenarioConfig) -> dict:
    if cfg.checks:
        return dict(cfg.checks)
    if cfg.engine == "rwa":
        return {}
    return {"min_slope": cfg.order + 0.8}


def run_scenario(cfg: ScenarioConfig, threads: int = 1, seed: int = 0, timings: bool = False) -> ScenarioResult:
    """Evaluate every (lambda, t) point against the reference integrator."""
    t_start = time.perf_counter()
    kind, H0, payload, sol = _solve(cfg, seed)

    def work(lam):
        t0 = time.perf_counter()
        pts = _ti_point(cfg, H0, payload, sol, lam) if kind == "ti" else _td_point(cfg, payload, sol, lam)
        return pts, (time.perf_counter() - t0) * 1e3 / max(1, len(pts))

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(work, cfg.lambda_grid))
    else:
        results = [work(lam) for lam in cfg.lambda_grid]

    rows = []
    for lam, (pts, ms) in zip(cfg.lambda_grid, results):
        for t, err, udef, cres in pts:
            rows.append({"scenario_id": cfg.scenario_id, "engine": cfg.engine, "N": cfg.order,
                         "lambda": lam, "t": t, "error_vs_oracle": err, "unitarity_defect": udef,
                         "commutation_residual": cres, "runtime_ms": ms if timings else None})

    slopes = slope_table(cfg, rows)
    checks = default_checks(cfg)
    t_check = fmt(max(cfg.time_grid))
    verdict = {"time": t_check, "passed": True}
    if checks:
        fit = slopes.get(t_check)
        verdict.update(checks)
        if fit is None:
            verdict["passed"] = False
            verdict["reason"] = "no slope fit at the final time (need 4 positive lambdas and errors)"
        else:
            verdict["slope"] = fit["slope"]
            if "min_slope" in checks and fit["slope"] < checks["min_slope"]:
                verdict["passed"] = False
            if "max_slope" in checks and fit["slope"] > checks["max_slope"]:
                verdict["passed"] = False
    flags = []
    if cfg.engine == "rwa" and slopes.get(t_check, {}).get("slope", 99) < RWA_DEFICIENT_SLOPE:
        flags.append("first-order-deficient")
    summary = {
        "schema_version": SCHEMA_VERSION,
        "scenario_id": cfg.scenario_id,
        "engine": cfg.engine,
        "N": cfg.order,
        "columns": list(CSV_COLUMNS),
        "oracle_rel_tol": cfg.oracle_rel_tol,
        "slopes": slopes,
        "check": verdict,
        "flags": flags,
    }
    if timings:
        summary["runtime_ms"] = (time.perf_counter() - t_start) * 1e3
    return ScenarioResult(cfg, rows, summary)


def rows_to_csv(rows: list) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_COLUMNS)
    for r in rows:
        w.writerow([fmt(r[c]) if c not in ("scenario_id", "engine") else r[c] for c in CSV_COLUMNS])
    return buf.getvalue()


def write_result(res: ScenarioResult, out_dir: Path) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    cfg = res.config
    csv_path = out_dir / (cfg.csv_name or f"{cfg.scenario_id}.csv")
    js_path = out_dir / (cfg.summary_name or f"{cfg.scenario_id}.summary.json")
    csv_path.write_text(rows_to_csv(res.rows))
    js_path.write_text(json.dumps(res.summary, indent=2, sort_keys=True) + "\n")
    return csv_path, js_path


def solution_payload(cfg: ScenarioConfig, seed: int = 0) -> dict:
    """Perturbative coefficients of a scenario, JSON-serialisable."""
    kind, H0, payload, sol = _solve(cfg, seed)
    if kind == "ti":
        return {"schema_version": SCHEMA_VERSION, "scenario_id": cfg.scenario_id, "order": sol.order,
                "min_divisor": sol.min_divisor,
                "cluster_energies": [float(e) for e in sol.spectrum.energies],
                "cluster_multiplicities": sol.spectrum.multiplicities,
                "C": [matrix_to_json(c) for c in sol.C_list],
                "Z": [matrix_to_json(z) for z in sol.Z_list]}
    if sol is None:
        return {"schema_version": SCHEMA_VERSION, "scenario_id": cfg.scenario_id,
                "engine": cfg.engine, "note": "reference engine; no perturbative coefficients"}
    out = {"schema_version": SCHEMA_VERSION, "scenario_id": cfg.scenario_id, "mode": sol.mode,
           "order": sol.order, "bases": list(sol.bases), "Z0": [matrix_to_json(z) for z in sol.Z0_list]}
    if sol.mode != "magnus":
        out["C"] = [matrix_to_json(c(0.0)) for c in sol.C_list]
    out["Z_frequencies"] = [[list(f) for f in z.frequencies()] for z in sol.Z_list]
    return out


# -- comparison reports ---------------------------------------------------
def _public_model(cfg: ScenarioConfig) -> str:
    return json.dumps({k: v for k, v in cfg.model.items() if not k.startswith("_")}, sort_keys=True)


def compare_report(results: list) -> tuple[str, dict]:
    """Side-by-side error table (markdown) and its JSON form."""
    if len(results) < 2:
        raise ConfigError("a comparison needs at least two scenarios")
    first = results[0].config
    for r in results[1:]:
        if r.config.grid_signature() != first.grid_signature():
            raise ConfigError(f"grid mismatch between {first.scenario_id!r} and {r.config.scenario_id!r}")
        if _public_model(r.config) != _public_model(first):
            raise ConfigError(f"model mismatch between {first.scenario_id!r} and {r.config.scenario_id!r}")
    if not first.lambda_grid or not first.time_grid:
        raise ConfigError("empty grid")
    labels = [f"{r.config.engine} N={r.config.order}" for r in results]
    table = {}
    lines = []
    for t in first.time_grid:
        lines.append(f"### t = {t:.10g}\n")
        lines.append("| lambda | " + " | ".join(labels) + " |")
        lines.append("|---" * (len(labels) + 1) + "|")
        for lam in first.lambda_grid:
            vals = []
            for r in results:
                e = next(x["error_vs_oracle"] for x in r.rows if x["t"] == t and x["lambda"] == lam)
                vals.append(e)
                table.setdefault(fmt(t), {}).setdefault(fmt(lam), {})[labels[len(vals) - 1]] = e
            lines.append(f"| {lam:g} | " + " | ".join(f"{v:.3e}" for v in vals) + " |")
        slope_cells = []
        for r in results:
            s = r.summary["slopes"].get(fmt(t))
            slope_cells.append("n/a" if s is None else f"{s['slope']:.3f}")
        lines.append("| slope | " + " | ".join(slope_cells) + " |\n")
    md = "# Error comparison\n\n" + "\n".join(lines)
    js = {"schema_version": SCHEMA_VERSION, "scenarios": [r.config.scenario_id for r in results],
          "labels": labels, "errors": table,
          "slopes": {lab: r.summary["slopes"] for lab, r in zip(labels, results)}}
    return md, js


# -- ion-trap demonstration -------------------------------------------------
def iontrap_demo(model: dict | None = None, lam: float = 0.05, threads: int = 1) -> dict:
    """First-order ion-trap quantities against their closed forms."""
    model = dict(model or {"kind": "iontrap"})
    p, form = iontrap_params(model)
    if not p.resonant:
        raise ConfigError("iontrap-demo needs delta = nu")
    chain = models.interaction_chain(p, form)
    sol = td.solve_td_mean(chain, 1)
    period = 2 * math.pi / p.nu
    samples = np.linspace(0, period, 11)
    c1 = sol.C_list[0](0.0)
    z0 = sol.Z0_list[0]
    t_demo = 2.75 * period
    exp_c, v1, v2 = models.first_order_closed_forms(p, lam, t_demo)
    out = {
        "schema_version": SCHEMA_VERSION,
        "params": {"nu": p.nu, "epsilon": p.epsilon, "alpha": p.alpha, "eta": p.eta, "phi": p.phi,
                   "cutoff": p.cutoff, "form": form, "lambda": lam},
        "mean_coupling_deviation": la.fro(c1 - models.mean_coupling(p)),
        "mean_generator_deviation": la.fro(z0 - models.mean_generator(p)),
        "generator_deviation": max(la.fro(sol.Z_list[0](t) - models.generator_at(p, t)) for t in samples),
        "expC_deviation": la.fro(exp_c - la.hermitian_exponential(lam * c1, t_demo, tol=1e-10)),
    }
    lams = [0.02, 0.01, 0.005, 0.0025]
    split = []
    for l in lams:
        _, a, b = models.first_order_closed_forms(p, l, t_demo)
        split.append(la.fro(a @ b - la.hermitian_exponential(l * sol.Z_list[0](t_demo), 1.0, tol=1e-10)))
    out["product_split_slope"] = oracle.error_scaling_fit(lams, split)[0]
    base = {"kind": "iontrap", **{k: v for k, v in model.items() if k != "kind"}}
    grids = {"lambda_grid": lams, "time_grid": [t_demo], "oracle_rel_tol": 1e-11}
    rwa = run_scenario(validate({"scenario_id": "demo-rwa", "model": base, "engine": "rwa", **grids}), threads)
    eng = run_scenario(validate({"scenario_id": "demo-td1", "model": base, "engine": "td-mean", **grids}), threads)
    out["rwa_slope"] = rwa.summary["slopes"][fmt(t_demo)]["slope"]
    out["order1_slope"] = eng.summary["slopes"][fmt(t_demo)]["slope"]
    out["checks"] = {
        "closed_forms": max(out["mean_coupling_deviation"], out["mean_generator_deviation"],
                            out["generator_deviation"]) <= 1e-12,
        "expC": out["expC_deviation"] <= 1e-10,
        "product_split": out["product_split_slope"] >= 1.8,
        "rwa_deficient": out["rwa_slope"] <= 1.3 and out["order1_slope"] >= 1.8,
    }
    out["passed"] = all(out["checks"].values())
    out["_rows"] = rwa.rows + eng.rows
    return out
