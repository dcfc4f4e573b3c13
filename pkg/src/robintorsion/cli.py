"""Command-line experiment runner.

    robintorsion <task> --config cfg.json --out results/ [--level-override L] [--quiet]

Tasks: solve, steklov, identities, deficits, flow, convergence.  Every run
writes ``summary.json`` (resolved config, code version, results) plus
task-specific CSV files.  Exit status: 0 success, 2 numerical failure,
3 invalid configuration.
"""
from __future__ import annotations

import argparse
import json
import logging
import math
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import __version__
from .convergence import fitted_order
from .errors import (ConfigError, NumericalFailure, OrderTooLow, PositivityViolation, RobinTorsionError,
                     WindowTooSmall)
from .fem import (boundary_trace, export_solution_csv, export_trace_csv, solve_robin, torsional_rigidity)
from .geometry import BoundaryCurve, summarize
from .identities import evaluate_all
from .mesh import build_mesh
from .radial import RadialCase, q_formula, torsional_rigidity_ball
from .shapeopt import (calibrate, directional_derivative_check, flow, ratios_agree, write_trajectory_csv)
from .steklov import check_admissibility, export_spectrum_csv, steklov_spectrum

log = logging.getLogger("robintorsion")

TASKS = ("solve", "steklov", "identities", "deficits", "flow", "convergence")
EXIT_OK, EXIT_NUMERICAL, EXIT_CONFIG = 0, 2, 3


@dataclass
class ExperimentConfig:
    curve: dict
    beta: Optional[float]
    levels: list
    order: int = 2
    task: str = "solve"
    seed: int = 0
    steklov_m: int = 6
    flow: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, raw: dict, task: Optional[str] = None, level_override: Optional[int] = None):
        if not isinstance(raw, dict):
            raise ConfigError("config must be a JSON object")
        task = task or raw.get("task")
        if task not in TASKS:
            raise ConfigError(f"task must be one of {', '.join(TASKS)}; got {task!r}")
        if raw.get("task") not in (None, task):
            raise ConfigError(f"config task {raw['task']!r} conflicts with command-line task {task!r}")
        if "curve" not in raw:
            raise ConfigError("missing 'curve'")
        mesh = raw.get("mesh", {})
        levels = mesh.get("levels", [2])
        if level_override is not None:
            levels = [level_override] if task != "convergence" else [l for l in levels if l <= level_override]
        try:
            levels = [int(l) for l in levels]
            order = int(mesh.get("order", 2))
            seed = int(raw.get("seed", 0))
            m = int(raw.get("steklov", {}).get("m", 6))
            beta = raw.get("beta")
            beta = None if beta is None else float(beta)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad numeric field: {exc}") from exc
        if not levels or any(l < 0 for l in levels) or levels != sorted(set(levels)):
            raise ConfigError("mesh.levels must be a non-empty ascending list of non-negative integers")
        if order not in (1, 2):
            raise ConfigError("mesh.order must be 1 or 2")
        if task != "steklov":
            if beta is None or beta == 0 or not math.isfinite(beta):
                raise ConfigError("beta must be a finite nonzero number")
        if task == "convergence" and len(levels) < 3:
            raise ConfigError("convergence needs at least three levels")
        if m < 1:
            raise ConfigError("steklov.m must be >= 1")
        return cls(raw["curve"], beta, levels, order, task, seed, m, dict(raw.get("flow", {})))

    def to_dict(self) -> dict:
        return {"curve": self.curve, "beta": self.beta, "mesh": {"levels": self.levels, "order": self.order},
                "task": self.task, "seed": self.seed, "steklov": {"m": self.steklov_m}, "flow": self.flow}


def _clean(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_clean(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating, float)):
        f = float(obj)
        return f if math.isfinite(f) else repr(f)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _disk_case(curve: BoundaryCurve, beta: float) -> Optional[RadialCase]:
    if curve.n_modes and (np.any(curve.a) or np.any(curve.b)):
        return None
    return RadialCase(2, curve.r0, beta, curve.center)


# -- tasks ------------------------------------------------------------------


def _solve(cfg: ExperimentConfig, curve: BoundaryCurve, out: Path) -> dict:
    mesh = build_mesh(curve, cfg.levels[-1], cfg.order)
    sol = solve_robin(mesh, cfg.beta)
    res = {"T_beta": torsional_rigidity(sol), "h": mesh.h, "level": mesh.level, "n_nodes": mesh.n_nodes,
           "residual": sol.residual(), "rcond": sol.rcond}
    case = _disk_case(curve, cfg.beta)
    if case is not None:
        res["T_beta_exact"] = torsional_rigidity_ball(case)
        res["l2_relative_error"] = sol.l2_error(lambda x: q_formula(case, x))
    export_solution_csv(sol, out / "solution.csv")
    export_trace_csv(boundary_trace(sol), curve, out / "trace.csv")
    return res


def _steklov(cfg: ExperimentConfig, curve: BoundaryCurve, out: Path) -> dict:
    mesh = build_mesh(curve, cfg.levels[-1], cfg.order)
    spec = steklov_spectrum(mesh, cfg.steklov_m)
    export_spectrum_csv(spec, out / "spectrum.csv")
    res = {"eigenvalues": spec.eigenvalues, "mu1": spec.mu1, "h": mesh.h, "level": mesh.level}
    if cfg.beta is not None:
        try:
            res["admissible"] = check_admissibility(spec, cfg.beta).admissible.value
        except WindowTooSmall as exc:
            res["admissible"] = f"unknown: {exc}"
    return res


def _identities(cfg: ExperimentConfig, curve: BoundaryCurve, out: Path, with_identities: bool = True) -> dict:
    if cfg.order < 2:
        raise OrderTooLow("identities and deficits need mesh.order = 2")
    mesh = build_mesh(curve, cfg.levels[-1], cfg.order)
    sol = solve_robin(mesh, cfg.beta)
    rep = evaluate_all(sol)
    export_trace_csv(boundary_trace(sol), curve, out / "trace.csv")
    res = {"h": mesh.h, "level": mesh.level, "deficits": rep["deficits"].to_dict()}
    if with_identities:
        for k in ("fundamental", "soap_bubble", "serrin_robin"):
            res[k] = rep[k].to_dict()
        res["hessian_gap"] = rep["hessian_gap"]
    return res


def _default_directions(seed: int, n: int = 3, kmax: int = 4) -> list:
    rng = np.random.default_rng(seed)
    dirs = [[[0, 1.0, 0.0]]]
    for _ in range(n):
        dirs.append([[k, float(rng.normal()), float(rng.normal())] for k in range(2, kmax + 1)])
    return dirs


def _flow(cfg: ExperimentConfig, curve: BoundaryCurve, out: Path) -> dict:
    fc = cfg.flow
    level = int(fc.get("level", cfg.levels[-1]))
    dirs = fc.get("directions") or _default_directions(cfg.seed)
    checks = directional_derivative_check(curve, cfg.beta, dirs, level=level)
    c_star = calibrate(checks)
    result = flow(curve, cfg.beta, max_iters=int(fc.get("max_iters", 200)), tol=float(fc.get("tol", 1e-4)),
                  level=level, c_star=c_star, energy_tol=fc.get("energy_tol"))
    write_trajectory_csv(result, out / "trajectory.csv")
    s0, s1 = result.states[0], result.final
    return {
        "directional_check": [{"ratio": c.ratio, "status": c.status, "fd": c.fd_derivative,
                               "predicted": c.predicted} for c in checks],
        "ratios_agree": ratios_agree(checks),
        "c_star": c_star,
        "converged": result.converged,
        "iterations": s1.iteration,
        "T_initial": s0.T_beta,
        "T_final": s1.T_beta,
        "projected_gradient_norm": s1.projected_gradient_norm,
        "overdet_residual": s1.overdet_residual,
        "fourier_energy": s1.fourier_energy(),
        "area_drift": abs(s1.area - s0.area) / s0.area,
        "final_curve": s1.curve.to_config(),
    }


def _convergence(cfg: ExperimentConfig, curve: BoundaryCurve, out: Path) -> dict:
    case = _disk_case(curve, cfg.beta)
    rows = []
    for level in cfg.levels:
        mesh = build_mesh(curve, level, cfg.order)
        sol = solve_robin(mesh, cfg.beta)
        row = {"level": level, "h": mesh.h, "T_beta": torsional_rigidity(sol)}
        if case is not None:
            row["l2_error"] = sol.l2_error(lambda x: q_formula(case, x))
        if cfg.order == 2:
            rep = evaluate_all(sol)
            row["fundamental_rel_gap"] = rep["fundamental"].rel_gap
            row["soap_bubble_rel_gap"] = rep["soap_bubble"].rel_gap
            row["hessian_gap"] = rep["hessian_gap"]
            row["overdet_residual"] = rep["deficits"].overdet_residual
        rows.append(row)
    keys = list(rows[0])
    with (out / "convergence.csv").open("w") as fh:
        fh.write(",".join(keys) + "\n")
        for r in rows:
            fh.write(",".join(repr(float(r[k])) if k != "level" else str(r[k]) for k in keys) + "\n")
    h = [r["h"] for r in rows]
    orders = {}
    for k in keys[3:]:
        vals = [r[k] for r in rows]
        orders[k] = fitted_order(h, vals) if all(v > 0 for v in vals) else float("nan")
    return {"rows": rows, "fitted_order": orders}


_RUNNERS = {
    "solve": _solve,
    "steklov": _steklov,
    "identities": _identities,
    "deficits": lambda c, cu, o: _identities(c, cu, o, with_identities=False),
    "flow": _flow,
    "convergence": _convergence,
}


def run(cfg: ExperimentConfig, out: Path) -> dict:
    try:
        curve = BoundaryCurve.from_config(cfg.curve)
    except PositivityViolation as exc:
        raise ConfigError(str(exc)) from exc
    out.mkdir(parents=True, exist_ok=True)
    results = _RUNNERS[cfg.task](cfg, curve, out)
    g = summarize(curve)
    summary = {
        "version": __version__,
        "config": cfg.to_dict(),
        "geometry": g.to_dict(),
        "results": results,
    }
    text = json.dumps(_clean(summary), indent=2, sort_keys=True)
    (out / "summary.json").write_text(text + "\n")
    return summary


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="robintorsion", description="Robin torsion experiments")
    p.add_argument("task", choices=TASKS)
    p.add_argument("--config", required=True, type=Path, help="JSON experiment configuration")
    p.add_argument("--out", required=True, type=Path, help="output directory")
    p.add_argument("--level-override", type=int, default=None, help="force the (finest) refinement level")
    p.add_argument("--quiet", action="store_true")
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING if args.quiet else logging.INFO, format="%(message)s")
    try:
        raw = json.loads(args.config.read_text())
        cfg = ExperimentConfig.from_dict(raw, args.task, args.level_override)
        summary = run(cfg, args.out)
    except (OSError, json.JSONDecodeError, ConfigError, OrderTooLow) as exc:
        print(f"invalid config: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalFailure, WindowTooSmall) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except RobinTorsionError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    if not args.quiet:
        print(json.dumps(_clean(summary["results"]), indent=2, sort_keys=True))
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
