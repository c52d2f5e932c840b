"""Command-line front end.

Subcommands tie the pieces into reproducible, file-based experiments:

    gen-random   write a random sparse-recovery problem (JSON)
    solve        run gelma / gelma-implicit / ista / fista on a problem
    ode          integrate the regularized flow and dump the trajectory
    oracle       brute-force l1 ground truth for a small problem
    image        synthesize an array-imaging scene and recover the image

Every run writes a manifest JSON (parameters, input hashes, seed,
artifact paths, duration) next to its primary output.  Exit codes:
0 success, 1 usage, 2 solver precondition/failure, 3 I/O or bad file,
4 enumeration budget exceeded.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
import time
from pathlib import Path

import numpy as np

from . import flow, imaging, oracle
from .generate import random_instance
from .linalg import FormatError, ProblemInstance, load_problem, save_problem, spectral_norm, tau_scale
from .solvers import (
    SolverError,
    StopRule,
    certificate_check,
    certificate_to_json,
    fista_solve,
    gelma_solve,
    history_to_csv,
    implicit_gelma_solve,
    ista_solve,
    stable_step,
)

__all__ = ["main"]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_SOLVER = 2
EXIT_IO = 3
EXIT_BUDGET = 4


class _Parser(argparse.ArgumentParser):
    """argparse that exits with the documented usage code."""

    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def _write_manifest(
    out_base: Path,
    command: str,
    parameters: dict,
    inputs: list[Path],
    seed: int | None,
    artifacts: list[Path],
    t_start: float,
) -> None:
    manifest = {
        "command": command,
        "parameters": parameters,
        "inputs": {str(p): _sha256(p) for p in inputs},
        "seed": seed,
        "artifacts": [str(a) for a in artifacts],
        "duration_seconds": time.monotonic() - t_start,
    }
    with open(Path(str(out_base) + ".manifest.json"), "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2)
        fh.write("\n")


def _cmd_gen_random(args) -> int:
    if not (0 <= args.k <= args.m <= args.n):
        print("gen-random: need 0 <= k <= m <= n", file=sys.stderr)
        return EXIT_USAGE
    t0 = time.monotonic()
    p = random_instance(args.m, args.n, args.k, args.seed)
    out = Path(args.out)
    save_problem(p, out)
    _write_manifest(
        out,
        "gen-random",
        {"m": args.m, "n": args.n, "k": args.k},
        [],
        args.seed,
        [out],
        t0,
    )
    print(f"wrote {out}: {args.m}x{args.n} problem, {args.k}-sparse reference")
    return EXIT_OK


_SOLVERS = {
    "gelma": gelma_solve,
    "gelma-implicit": implicit_gelma_solve,
    "ista": ista_solve,
    "fista": fista_solve,
}


def _cmd_solve(args) -> int:
    t0 = time.monotonic()
    problem_path = Path(args.problem)
    p = load_problem(problem_path)
    tau = args.alpha * tau_scale(p.A, p.y)
    if tau <= 0:
        tau = p.tau  # zero data: keep the stored tau, iterates stay at 0
    dt = args.dt
    if dt is None:
        dt = p.dt
        if args.solver == "gelma":
            # stored steps honor only dt*||A|| < 1, which lets the
            # quasi-explicit scheme oscillate when ||A|| is large
            dt = min(dt, stable_step(spectral_norm(p.A)))
    p = ProblemInstance(
        A=p.A,
        y=p.y,
        tau=tau,
        dt=dt,
        reference_x=p.reference_x,
    )
    stop = StopRule(
        max_iter=args.max_iter,
        tol_change=args.tol_change,
        tol_residual=args.tol_residual,
        record_every=args.record_every,
    )
    run = _SOLVERS[args.solver](p, stop)
    out = Path(args.out)
    out.write_text(history_to_csv(run.history), encoding="utf-8")
    artifacts = [out]

    final = run.history[-1]
    summary = {
        "solver": args.solver,
        "alpha": args.alpha,
        "tau": p.tau,
        "iterations": run.iterations,
        "stop_reason": run.stop_reason,
        "final_residual": final.residual,
        "final_err": final.err_vs_ref,
    }
    if run.z is not None:
        report = certificate_check(p.A, run.x, run.z, p.tau, tol=args.certificate_tol)
        summary["certificate"] = json.loads(certificate_to_json(report))
    summary_path = Path(str(out) + ".summary.json")
    with open(summary_path, "w", encoding="utf-8") as fh:
        json.dump(summary, fh, indent=2)
        fh.write("\n")
    artifacts.append(summary_path)

    _write_manifest(
        out,
        "solve",
        {
            "solver": args.solver,
            "alpha": args.alpha,
            "dt": args.dt,
            "max_iter": args.max_iter,
            "tol_change": args.tol_change,
            "tol_residual": args.tol_residual,
            "record_every": args.record_every,
        },
        [problem_path],
        args.seed,
        artifacts,
        t0,
    )
    err = "n/a" if final.err_vs_ref is None else f"{final.err_vs_ref:.3e}"
    print(f"{args.solver}: {run.iterations} iterations, residual {final.residual:.3e}, err {err}")
    return EXIT_OK


def _cmd_ode(args) -> int:
    t0 = time.monotonic()
    problem_path = Path(args.problem)
    p = load_problem(problem_path)
    dt_ode = args.dt_ode if args.dt_ode is not None else 0.5 * flow.stability_cap(p, args.eps)
    cfg = flow.OdeConfig(
        eps=args.eps, dt_ode=dt_ode, t_final=args.t_final, observe_every=args.observe_every
    )
    result = flow.integrate(p, cfg)
    out = Path(args.out)
    out.write_text(flow.trajectory_to_csv(result, p, args.eps, p.reference_x), encoding="utf-8")
    _write_manifest(
        out,
        "ode",
        {"eps": args.eps, "dt_ode": dt_ode, "t_final": args.t_final, "observe_every": args.observe_every},
        [problem_path],
        args.seed,
        [out],
        t0,
    )
    print(f"integrated to t = {result.final_state.t:.6g} ({len(result.observations)} observations)")
    return EXIT_OK


def _cmd_oracle(args) -> int:
    t0 = time.monotonic()
    problem_path = Path(args.problem)
    p = load_problem(problem_path)
    result = oracle.brute_force_l1(p.A, p.y)
    payload = json.loads(oracle.oracle_to_json(result))
    if p.reference_x is not None:
        payload["reference_matches"] = bool(
            np.linalg.norm(p.reference_x - result.x_star) <= 1e-7 * (1.0 + np.linalg.norm(result.x_star))
        )
    out = Path(args.out)
    with open(out, "w", encoding="utf-8") as fh:
        json.dump(payload, fh)
        fh.write("\n")
    _write_manifest(out, "oracle", {}, [problem_path], args.seed, [out], t0)
    print(f"l1 minimum {result.value!r}, unique={result.unique}")
    return EXIT_OK


def _cmd_image(args) -> int:
    t0 = time.monotonic()
    scene_path = Path(args.scene)
    with open(scene_path, "r", encoding="utf-8") as fh:
        try:
            config = json.load(fh)
        except json.JSONDecodeError as exc:
            raise FormatError(f"{scene_path}: not valid JSON ({exc})") from exc
    geom, iw, scat, beta, seed = imaging.scene_from_dict(config)
    if args.seed is not None:
        seed = args.seed
    data = imaging.synthesize(geom, iw, scat)
    data.b = imaging.add_noise(data.b, beta, seed)
    grid, _run = imaging.recover(
        geom, iw, data, alpha=args.alpha, stop=StopRule(max_iter=args.iterations)
    )
    metrics = imaging.image_metrics(grid, scat, threshold=args.threshold)

    prefix = Path(args.out)
    csv_path = Path(str(prefix) + ".csv")
    pgm_path = Path(str(prefix) + ".pgm")
    scale_path = Path(str(prefix) + ".scale.json")
    metrics_path = Path(str(prefix) + ".metrics.json")
    csv_path.write_text(imaging.grid_to_csv(grid), encoding="utf-8")
    pgm_text, sidecar = imaging.grid_to_pgm(grid)
    pgm_path.write_text(pgm_text, encoding="utf-8")
    with open(scale_path, "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh)
        fh.write("\n")
    with open(metrics_path, "w", encoding="utf-8") as fh:
        json.dump(
            {
                "support_precision": metrics.support_precision,
                "support_recall": metrics.support_recall,
                "max_reflectivity_error": metrics.max_reflectivity_error,
                "l2_error": metrics.l2_error,
            },
            fh,
        )
        fh.write("\n")
    _write_manifest(
        prefix,
        "image",
        {"alpha": args.alpha, "iterations": args.iterations, "threshold": args.threshold, "beta": beta},
        [scene_path],
        seed,
        [csv_path, pgm_path, scale_path, metrics_path],
        t0,
    )
    print(
        f"image: precision {metrics.support_precision:.3f}, recall {metrics.support_recall:.3f}, "
        f"max reflectivity error {metrics.max_reflectivity_error:.3e}"
    )
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gelma", description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    g = sub.add_parser("gen-random", help="generate a random sparse problem")
    g.add_argument("--m", type=int, required=True, help="number of measurements")
    g.add_argument("--n", type=int, required=True, help="number of unknowns")
    g.add_argument("--k", type=int, required=True, help="sparsity of the planted solution")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="output problem JSON path")
    g.set_defaults(func=_cmd_gen_random)

    s = sub.add_parser("solve", help="run a solver on a problem file")
    s.add_argument("--problem", required=True)
    s.add_argument("--solver", choices=sorted(_SOLVERS), default="gelma")
    s.add_argument("--alpha", type=float, default=10.0, help="tau = alpha * ||A^T y||_inf")
    s.add_argument("--dt", type=float, default=None, help="override the stored step size")
    s.add_argument("--max-iter", type=int, default=10000)
    s.add_argument("--tol-change", type=float, default=0.0)
    s.add_argument("--tol-residual", type=float, default=0.0)
    s.add_argument("--record-every", type=int, default=1)
    s.add_argument("--certificate-tol", type=float, default=1e-6)
    s.add_argument("--seed", type=int, default=None, help="recorded in the manifest only")
    s.add_argument("--out", required=True, help="history CSV path")
    s.set_defaults(func=_cmd_solve)

    o = sub.add_parser("ode", help="integrate the regularized flow")
    o.add_argument("--problem", required=True)
    o.add_argument("--eps", type=float, default=1e-3)
    o.add_argument("--t-final", type=float, default=1.0)
    o.add_argument("--dt-ode", type=float, default=None, help="default: half the stability cap")
    o.add_argument("--observe-every", type=int, default=100)
    o.add_argument("--seed", type=int, default=None, help="recorded in the manifest only")
    o.add_argument("--out", required=True, help="trajectory CSV path")
    o.set_defaults(func=_cmd_ode)

    r = sub.add_parser("oracle", help="brute-force l1 ground truth")
    r.add_argument("--problem", required=True)
    r.add_argument("--seed", type=int, default=None, help="recorded in the manifest only")
    r.add_argument("--out", required=True, help="output JSON path")
    r.set_defaults(func=_cmd_oracle)

    i = sub.add_parser("image", help="synthesize a scene and recover the image")
    i.add_argument("--scene", required=True, help="scene config JSON")
    i.add_argument("--alpha", type=float, default=20.0)
    i.add_argument("--iterations", type=int, default=300)
    i.add_argument("--threshold", type=float, default=0.05, help="support detection level")
    i.add_argument("--seed", type=int, default=None, help="override the scene noise seed")
    i.add_argument("--out", required=True, help="output path prefix")
    i.set_defaults(func=_cmd_image)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else EXIT_USAGE
    try:
        return args.func(args)
    except oracle.BudgetError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BUDGET
    except SolverError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except (FormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
