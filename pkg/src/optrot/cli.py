"""Command line entry point: ``python -m optrot <command> --config FILE --out DIR``.

Exit status 0 on success, 2 on configuration errors, 3 on numerical
failures.  Diagnostics go to standard error; reports to files.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import platform
import sys
import tempfile
import warnings
from pathlib import Path

import numpy as np
import scipy

from . import __version__
from .config import ConfigError, Experiment, load
from .elasticity import (
    limit_energy,
    minimize_nonlinear,
    minimize_over_R,
    reference_configuration,
    solve_linear,
    total_energy,
)
from .errors import IllPosedLoadError, InvalidArgumentError, IterationLimitError, OptrotError
from .harness import (
    CSV_COLUMNS,
    appendix_demo,
    fit_rate,
    records_csv,
    sweep_minimizers,
    sweep_recovery,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC = 0, 2, 3

COMMANDS = ("classify", "solve-linear", "minimize", "sweep-minimizers", "sweep-recovery", "appendix-demo")


def _clean(obj):
    """Make ``obj`` JSON-safe: arrays to lists, non-finite floats to null."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer, int)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def write_atomic(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _json(obj) -> str:
    return json.dumps(_clean(obj), indent=2, sort_keys=True) + "\n"


# --------------------------------------------------------------------------
# commands


def _base_rotation(exp: Experiment, problem):
    r0 = exp.recovery.get("R0", "base")
    if isinstance(r0, str):
        return problem.rotation_set.force.to_original(problem.rotation_set.base)
    return r0


def _force_report(problem) -> dict:
    fm = problem.force_matrix
    return {
        "force_matrix": fm.entries,
        "equilibration_residual": fm.equilibration_residual,
        "torque_residual": fm.torque_residual,
    }


def cmd_classify(exp: Experiment) -> dict:
    problem = exp.problem()
    rs = problem.rotation_set
    rng = np.random.default_rng(exp.solver.seed)
    samples = [rs.force.to_original(r) for r in rs.sample(3, rng)]
    out = _force_report(problem)
    out.update(rs.report())
    out["dimension"] = rs.dim
    out["sample_members"] = samples
    return out


def cmd_solve_linear(exp: Experiment) -> dict:
    problem = exp.problem()
    r0 = _base_rotation(exp, problem)
    try:
        lin = solve_linear(problem, r0)
    except IllPosedLoadError as exc:
        raise ConfigError("recovery.R0", str(exc)) from None
    best = minimize_over_R(problem)
    out = _force_report(problem)
    out.update({
        "kind": problem.rotation_set.kind.value,
        "R0": r0,
        "value": lin.value,
        "stationarity_residual": lin.residual,
        "u": lin.u,
        "min_over_R": {"rotation": best.rotation, "value": best.value},
    })
    return out


def cmd_minimize(exp: Experiment) -> dict:
    problem = exp.problem()
    eps = exp.epsilons[0]
    try:
        res = minimize_nonlinear(problem, eps, opts=exp.solver)
        y, iters, ok = res.y, res.iterations, res.converged
    except IterationLimitError as exc:
        y, iters, ok = exc.best, exc.iterations, False
    energy = total_energy(problem, y, eps)
    ref = reference_configuration(problem.mesh, y)
    return {
        "epsilon": eps,
        "energy": {
            "elastic": energy.elastic,
            "traction_work": energy.traction_work,
            "body_work": energy.body_work,
            "J": energy.J,
            "J_over_eps2": energy.J / eps**2,
        },
        "iterations": iters,
        "converged": ok,
        "reference": {"rotation": ref.rotation, "translation": ref.translation, "unique": ref.unique},
        "y": y,
    }


def _sweep_summary(records, limit: float | None) -> dict:
    values = [r.J_over_eps2 for r in records]
    out = {
        "rows": [r.row() for r in records],
        "columns": list(CSV_COLUMNS),
        "J_over_eps2_min": min(values),
        "J_over_eps2_max": max(values),
        "projected_rotations": [r.projected for r in records],
        "errors": [r.error for r in records if r.error],
    }
    jumps = [i for i in range(1, len(records))
             if np.linalg.norm(records[i].projected - records[i - 1].projected) > 1e-3]
    out["branch_jumps"] = jumps
    try:
        out["dist_rate"] = vars(fit_rate(records, "epsilon", "dist_R_to_set"))
    except OptrotError as exc:
        out["dist_rate"] = str(exc)
    if limit is not None:
        out["limit_value"] = limit
        dev = [abs(r.J_over_eps2 - limit) * r.epsilon**2 for r in records]
        try:
            out["energy_rate"] = vars(fit_rate(x=[r.epsilon for r in records], y=dev))
        except OptrotError as exc:
            out["energy_rate"] = str(exc)
    return out


def cmd_sweep_minimizers(exp: Experiment):
    problem = exp.problem()
    records = sweep_minimizers(problem, exp.epsilons, exp.solver, exp.warm_start)
    limit = minimize_over_R(problem).value
    return _sweep_summary(records, limit), records_csv(records)


def cmd_sweep_recovery(exp: Experiment):
    problem = exp.problem()
    r0 = _base_rotation(exp, problem)
    w0 = exp.recovery["W0"]
    u0 = exp.recovery["u0"]
    try:
        if isinstance(u0, str):
            u0 = solve_linear(problem, r0).u if u0 == "linear" else np.zeros_like(problem.mesh.vertices)
        records = sweep_recovery(problem, u0, r0, w0, exp.epsilons)
    except IllPosedLoadError as exc:
        raise ConfigError("recovery.R0", str(exc)) from None
    except InvalidArgumentError as exc:
        raise ConfigError("recovery.W0", str(exc)) from None
    limit = limit_energy(problem, u0, r0, w0)
    return _sweep_summary(records, limit), records_csv(records)


def cmd_appendix_demo(exp: Experiment | None) -> dict:
    return appendix_demo()


HANDLERS = {
    "classify": cmd_classify,
    "solve-linear": cmd_solve_linear,
    "minimize": cmd_minimize,
    "sweep-minimizers": cmd_sweep_minimizers,
    "sweep-recovery": cmd_sweep_recovery,
    "appendix-demo": cmd_appendix_demo,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="optrot", description=__doc__.splitlines()[0])
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=Path, help="experiment JSON (optional for appendix-demo)")
    parser.add_argument("--out", type=Path, default=Path("out"), help="output directory")
    parser.add_argument("--seed", type=int, default=None, help="overrides solver.seed")
    parser.add_argument("--quiet", action="store_true", help="suppress warnings on stderr")
    return parser


def _meta(args, exp: Experiment | None) -> dict:
    return {
        "command": args.command,
        "config": exp.raw if exp is not None else None,
        "seed": exp.solver.seed if exp is not None else args.seed,
        "versions": {
            "optrot": __version__,
            "python": platform.python_version(),
            "numpy": np.__version__,
            "scipy": scipy.__version__,
        },
    }


def run(argv=None) -> int:
    args = build_parser().parse_args(argv)
    err = sys.stderr
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        try:
            if args.config is not None:
                exp = load(args.config, args.seed)
            elif args.command == "appendix-demo":
                exp = None
            else:
                raise ConfigError("--config", "required for this command")
            result = HANDLERS[args.command](exp)
        except ConfigError as exc:
            print(f"optrot: config error: {exc}", file=err)
            return EXIT_CONFIG
        except (ArithmeticError, IterationLimitError, OptrotError) as exc:
            print(f"optrot: numerical error ({type(exc).__name__}): {exc}", file=err)
            return EXIT_NUMERIC
    if not args.quiet:
        seen = set()
        for w in caught:
            msg = f"optrot: warning: {w.category.__name__}: {w.message}"
            if msg not in seen:
                seen.add(msg)
                print(msg, file=err)
    report, table = result if isinstance(result, tuple) else (result, None)
    out = args.out
    write_atomic(out / "report.json", _json(report))
    if table is not None:
        write_atomic(out / "sweep.csv", table)
    write_atomic(out / "meta.json", _json(_meta(args, exp)))
    return EXIT_OK


def main() -> None:
    sys.exit(run())

