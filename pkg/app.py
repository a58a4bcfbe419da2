import argparse
import logging
import sys
from dataclasses import asdict
from pathlib import Path
from typing import List, Optional

from artifacts_manager import ArtifactsManager, manifest_hash, plot_frame
from config import ConfigError, RunConfig, _env, configure_logging, load_config, serialize_config
from continuation import (StudyRefused, commutation_check, eps_study, h_study, mosco_desk_check, n_study,
                          nu_study, uniqueness_experiment)
from diagnostics import diagnostics_summary, energy_report
from graphs import FracDNLError
from kernels import mittag_leffler, weights_frame
from presets import PRESET_NOTES, available_presets, build_problem
from problem import ProblemSpec, constants, has_errors, validate
from solver import SolverParams, StepError, solve
from spectral import EtaSolveError, eigenpairs, nodal_frame, project

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3

STUDY_KINDS = ("eps", "nu", "n", "h", "uniqueness", "mosco", "commutation")
_RECENT_RUNS = 5


def _params(cfg: RunConfig) -> SolverParams:
    s = cfg.solver
    return SolverParams(eps=s.eps, nu=s.nu, n=s.n, M=s.M, tol=s.tol, budget=s.budget, kind=s.kind,
                        oversample=s.oversample)


def _load(path: str, log: Optional[str] = None):
    cfg = load_config(path)
    if cfg.output.verbosity and not log:
        configure_logging(cfg.output.verbosity)
    spec = build_problem(cfg.problem, name=cfg.name, base_dir=Path(path).parent)
    return cfg, spec


def _print_violations(violations) -> None:
    for v in violations:
        print(f"[{v.severity}] {v.code}: {v.message}")


def _open_run(cfg: RunConfig, args, suffix: str = "") -> ArtifactsManager:
    out = args.out or cfg.output.dir or _env.out_dir
    manager = ArtifactsManager(out)
    config_hash = manifest_hash({"config": serialize_config(cfg), "verb": suffix})
    manager.create_run(cfg.name + (f"_{suffix}" if suffix else ""), config_hash)
    return manager


def cmd_validate(args) -> int:
    cfg, spec = _load(args.config, args.log)
    violations = validate(spec)
    _print_violations(violations)
    if has_errors(violations):
        return EXIT_VALIDATION
    print(f"{spec.name}: valid")
    return EXIT_OK


def _write_solution(manager: ArtifactsManager, cfg: RunConfig, args, traj) -> None:
    frame = traj.to_frame()
    manager.save_trajectory(frame)
    manager.save_weights(weights_frame(traj.weights))
    for m in cfg.output.snapshots:
        if 0 <= m <= traj.completed:
            df = nodal_frame(traj.basis, traj.nodal_u(m), "u")
            df["v"] = traj.nodal_v(m)
            df["w"] = traj.nodal_w(m)
            manager.save_nodal(df, m)
    if args.emit_plot_data or cfg.output.emit_plot_data:
        manager.save_plot_data(plot_frame(frame))


def cmd_solve(args) -> int:
    cfg, spec = _load(args.config, args.log)
    params = _params(cfg)
    basis = eigenpairs(spec.domain, params.n, params.oversample)
    violations = validate(spec, basis)
    manager = _open_run(cfg, args)
    manager.update_manifest(
        problem=spec.describe(),
        solver=params.describe(),
        basis=basis.describe(),
        constants=constants(spec, basis).to_dict(),
        violations=[v.to_dict() for v in violations],
    )
    if has_errors(violations):
        _print_violations(violations)
        manager.update_manifest(status="invalid")
        manager.generate_report()
        return EXIT_VALIDATION
    try:
        traj = solve(spec, params, basis, check=False)
    except StepError as exc:
        logger.error("%s", exc)
        if exc.trajectory is not None:
            _write_solution(manager, cfg, args, exc.trajectory)
        manager.update_manifest(status=f"failed at step {exc.m}", remedy=exc.remedy)
        manager.generate_report()
        return EXIT_SOLVER
    _write_solution(manager, cfg, args, traj)
    manager.save_energy(energy_report(traj).to_frame())
    manager.save_json("diagnostics", diagnostics_summary(traj))
    manager.update_manifest(status="ok", steps=[s.to_dict() for s in traj.stats],
                            summary={k: v for k, v in traj.summary().items() if k != "iterations"})
    manager.generate_report()
    print(f"{spec.name}: solved, artifacts in {manager.current_run_dir}")
    return EXIT_OK


def _reference(cfg: RunConfig, spec: ProblemSpec, params: SolverParams) -> Optional[float]:
    ref = cfg.study.reference
    if ref is None:
        return None
    if ref == "ml":
        # linear single-mode relaxation: u_k(T) = u_k(0) E_theta(-lambda_k T^theta)
        basis = eigenpairs(spec.domain, params.n, params.oversample)
        k = cfg.study.mode
        u0 = float(project(basis, spec.initial_fields(basis.nodes)[0])[k])
        return u0 * mittag_leffler(-basis.lambdas[k] * spec.T ** spec.theta, spec.theta)
    return float(ref)


def cmd_study(args) -> int:
    cfg, spec = _load(args.config, args.log)
    kind = args.kind or cfg.study.kind
    if kind not in STUDY_KINDS:
        print(f"unknown study kind '{kind}' (choose from {', '.join(STUDY_KINDS)})")
        return EXIT_VALIDATION
    params = _params(cfg)
    jobs = args.jobs or _env.jobs
    values = cfg.study.values
    manager = _open_run(cfg, args, suffix=kind)
    basis = eigenpairs(spec.domain, params.n, params.oversample)
    manager.update_manifest(problem=spec.describe(), solver=params.describe(), study=asdict(cfg.study),
                            constants=constants(spec, basis).to_dict())
    if kind == "eps":
        table = eps_study(spec, params, values, jobs)
    elif kind == "nu":
        table = nu_study(spec, params, values, jobs)
    elif kind == "n":
        table = n_study(spec, params, [int(v) for v in values], jobs)
    elif kind == "h":
        table = h_study(spec, params, [int(v) for v in values], _reference(cfg, spec, params),
                        cfg.study.mode, jobs)
    elif kind == "mosco":
        u0, v0 = spec.initial_fields(basis.nodes)
        table = mosco_desk_check(spec.alpha, values, {"u0": u0, "v0": v0}, basis.nodes, basis.weights)
    elif kind == "commutation":
        result = commutation_check(spec, params, values, cfg.study.nu_values, jobs)
        manager.save_json("commutation", result)
        manager.update_manifest(status="ok")
        manager.generate_report()
        return EXIT_OK
    else:
        result = uniqueness_experiment(spec, params, values, jobs)
        manager.save_study("uniqueness_windows", result.table)
        table = result.scaling
        manager.update_manifest(uniqueness=result.to_dict())
        if not result.ok:
            logger.error("uniqueness checks failed: scaling_ok=%s window_ok=%s", result.scaling_ok, result.window_ok)
    manager.save_study(kind, table)
    failed = "status" in table and bool((table["status"] == "failed").any())
    status = "partial" if failed else "ok"
    if kind == "uniqueness" and not failed and not result.ok:
        failed, status = True, "checks failed"
    manager.update_manifest(status=status)
    manager.generate_report()
    print(table.to_string(index=False))
    return EXIT_SOLVER if failed else EXIT_OK


def cmd_presets(args) -> int:
    for name in available_presets():
        print(f"{name:16s} {PRESET_NOTES[name]}")
    out = Path(args.out or _env.out_dir)
    if out.is_dir():
        runs = ArtifactsManager(str(out)).list_runs()
        if runs:
            print(f"\nrecent runs in {out}:")
            for run in runs[:_RECENT_RUNS]:
                print(f"  {run['name']:32s} {run['status'] or 'unknown'} ({run['artifacts']} artifacts)")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="fracdnl", description="Time-fractional doubly nonlinear solver")
    parser.add_argument("--log", default=None, help="log level (default: FRACDNL_LOG or WARNING)")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("solve", help="integrate one configuration")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default=None)
    p.add_argument("--emit-plot-data", action="store_true")
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("study", help="run a parameter study")
    p.add_argument("--config", required=True)
    p.add_argument("--kind", choices=STUDY_KINDS, default=None)
    p.add_argument("--out", default=None)
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_study)

    p = sub.add_parser("validate", help="check assumptions without solving")
    p.add_argument("--config", required=True)
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("presets", help="list named problems and recent runs")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_presets)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    configure_logging(args.log)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except StudyRefused as exc:
        print(f"study refused: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (StepError, EtaSolveError) as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except FracDNLError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION


if __name__ == "__main__":
    sys.exit(main())
