"""Command line: ``plateflow run | sweep | tune``.

Exit status is 0 on success, 1 when a run does not converge or fails, 2 on
usage errors.  Every flag can also come from ``--config FILE`` (key=value
lines); flags given on the command line win.
"""

from __future__ import annotations

import argparse
import csv
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor

from . import io as pio
from .flow import FlowConfig, FlowDivergence, run, select_parameter
from .kkt import KktError
from .model import ALIASES, TAGS, PlateProblem, make_benchmark
from .morley import ModelError

log = logging.getLogger("plateflow")

SWEEP_PARAMS = ("tau", "alpha", "beta", "algorithm")
TUNE_PARAMS = ("alpha", "beta")
SWEEP_COLUMNS = (
    "index", "param", "value", "algorithm", "eta", "tau", "alpha", "beta", "tol",
    "N", "E_pot", "E_ki", "D_g_1", "D_g_2", "restarts", "converged", "status",
)

# benchmark parameters each example accepts (CLI dest -> make_benchmark keyword)
_MODEL_FLAGS = {
    "kirchhoff-load": {"mu": "mu", "lam": "lam"},
    "bilayer-iso": {"gamma": "gamma"},
    "prestrained-aniso": {"c": "c", "mu": "mu", "lam": "lam"},
}


class UsageError(Exception):
    pass


def _common(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key=value file with defaults for any flag")
    p.add_argument("--example", help=f"benchmark: {', '.join(TAGS + tuple(ALIASES))}")
    p.add_argument("--algorithm", default="acc", choices=("gf", "acc", "acc-bt", "acc-bdf2"))
    p.add_argument("--eta", default="nesterov", choices=("nesterov", "heavyball"), help="damping rule")
    p.add_argument("--alpha", type=float, default=3.0)
    p.add_argument("--beta", type=float, default=1.0)
    p.add_argument("--tau", type=float)
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--stop", default="total-energy", choices=("total-energy", "potential-energy"))
    p.add_argument("--nx", type=int, default=16)
    p.add_argument("--ny", type=int, default=16)
    p.add_argument("--split", default="diagonal", choices=("diagonal", "crisscross"))
    p.add_argument("--gamma", type=float)
    p.add_argument("--c", type=float)
    p.add_argument("--mu", type=float)
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--max-iters", type=int, default=1_000_000)
    p.add_argument("--snapshot-stride", type=int, default=0)
    p.add_argument("--format", default="vtk-legacy", choices=pio.SURFACE_FORMATS, help="surface file format")
    p.add_argument("--out", default="plateflow_out", help="output directory")
    p.add_argument("-q", "--quiet", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="plateflow", description="Accelerated gradient flows for bilayer and prestrained plates.")
    sub = parser.add_subparsers(dest="command", required=True)
    p_run = sub.add_parser("run", help="one run")
    _common(p_run)
    p_sweep = sub.add_parser("sweep", help="one run per parameter value, summaries in one CSV")
    _common(p_sweep)
    p_sweep.add_argument("--param", required=True, choices=SWEEP_PARAMS)
    p_sweep.add_argument("--values", required=True, help="comma separated list")
    p_tune = sub.add_parser("tune", help="search alpha or beta minimizing the iteration count")
    _common(p_tune)
    p_tune.add_argument("--param", required=True, choices=TUNE_PARAMS)
    p_tune.add_argument("--interval", help="lo,hi")
    p_tune.add_argument("--values", help="comma separated candidates instead of an interval")
    p_tune.add_argument("--budget", type=int, default=9)
    return parser


def _config_argv(argv):
    """Expand ``--config FILE`` into flags placed before the command-line ones."""
    argv = list(argv)
    path = None
    for i, a in enumerate(argv):
        if a == "--config" and i + 1 < len(argv):
            path = argv[i + 1]
        elif a.startswith("--config="):
            path = a.split("=", 1)[1]
    if path is None or not argv:
        return argv
    try:
        values = pio.read_config(path)
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from exc
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    extra = []
    for key, value in values.items():
        flag = "--" + ("lambda" if key == "lam" else key.replace("_", "-"))
        if value.lower() in ("true", "yes") and key == "quiet":
            extra.append(flag)
        else:
            extra += [flag, value]
    return argv[:1] + extra + argv[1:]


def _values(text, param):
    items = [s.strip() for s in text.split(",") if s.strip()]
    if not items:
        raise UsageError("empty value list")
    if param == "algorithm":
        return items
    try:
        return [float(s) for s in items]
    except ValueError as exc:
        raise UsageError(f"bad value list {text!r}: {exc}") from exc


def _settings(args) -> dict:
    if args.example is None:
        raise UsageError("--example is required")
    if args.tau is None:
        raise UsageError("--tau is required")
    tag = ALIASES.get(args.example, args.example)
    if tag not in TAGS:
        raise UsageError(f"unknown example {args.example!r}")
    model = {}
    for dest in ("gamma", "c", "mu", "lam"):
        value = getattr(args, dest)
        if value is None:
            continue
        if dest not in _MODEL_FLAGS[tag]:
            flag = "--lambda" if dest == "lam" else f"--{dest}"
            raise UsageError(f"{flag} does not apply to {tag}")
        model[_MODEL_FLAGS[tag][dest]] = value
    flow = dict(
        algorithm=args.algorithm, damping=args.eta, alpha=args.alpha, beta=args.beta, tau=args.tau,
        tol=args.tol, max_iters=args.max_iters, stop=args.stop, snapshot_stride=args.snapshot_stride,
    )
    return {
        "example": tag, "model": model, "flow": flow, "nx": args.nx, "ny": args.ny,
        "split": args.split, "format": args.format,
    }


def _flow_config(settings) -> FlowConfig:
    try:
        return FlowConfig(**settings["flow"])
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _problem(settings) -> PlateProblem:
    try:
        bench = make_benchmark(settings["example"], **settings["model"])
    except ModelError as exc:
        raise UsageError(str(exc)) from exc
    return PlateProblem(bench, settings["nx"], settings["ny"], settings["split"])


def execute(settings, outdir, problem=None):
    """Run once and write ``history.csv``, ``summary.json`` and surfaces into ``outdir``.

    Returns (summary, status) with status 'ok', 'unconverged' or an error message.
    """
    config = _flow_config(settings)
    problem = problem or _problem(settings)
    os.makedirs(outdir, exist_ok=True)
    try:
        state = run(problem, config)
        status = "ok" if state.converged else "unconverged"
    except FlowDivergence as exc:
        state, status = exc.state, f"diverged: {exc}"
    except KktError as exc:
        return None, f"failed: {exc}"
    pio.write_history(os.path.join(outdir, "history.csv"), state.history)
    ext = "vtk" if settings["format"] == "vtk-legacy" else "obj"
    files = []
    for n, y in state.snapshots:
        name = f"surface_{n:07d}.{ext}"
        pio.export_surface(problem.mesh, pio.surface_points(problem.space, y), os.path.join(outdir, name), settings["format"])
        files.append(name)
    pio.write_summary(os.path.join(outdir, "summary.json"), settings, state, files)
    summary = pio.summarize(state)
    return summary, status


def _cmd_run(args):
    settings = _settings(args)
    _flow_config(settings)
    summary, status = execute(settings, args.out)
    if summary is not None:
        print(pio.summary_line(summary))
    if status != "ok":
        print(status, file=sys.stderr)
        return 1
    return 0


def _override(settings, param, value):
    s = {**settings, "flow": dict(settings["flow"])}
    s["flow"][param] = value
    return s


def _sweep_task(job):
    index, param, value, settings, outdir = job
    try:
        summary, status = execute(settings, outdir)
    except (UsageError, ValueError, ArithmeticError) as exc:
        summary, status = None, f"failed: {exc}"
    return index, param, value, settings, summary, status


def _workers():
    try:
        return max(1, int(os.environ.get("PLATEFLOW_THREADS", "1")))
    except ValueError:
        return 1


def _cmd_sweep(args):
    settings = _settings(args)
    values = _values(args.values, args.param)
    jobs = []
    for i, v in enumerate(values):
        s = _override(settings, args.param, v)
        _flow_config(s)  # validate every run before starting any
        jobs.append((i, args.param, v, s, os.path.join(args.out, f"run_{i:03d}")))
    workers = min(_workers(), len(jobs))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_sweep_task, jobs))
    else:
        results = [_sweep_task(j) for j in jobs]
    results.sort(key=lambda r: r[0])
    os.makedirs(args.out, exist_ok=True)
    failed = False
    with open(os.path.join(args.out, "sweep.csv"), "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(SWEEP_COLUMNS)
        for index, param, value, s, summary, status in results:
            f = s["flow"]
            su = summary or {}
            failed |= status != "ok"
            writer.writerow([
                index, param, value, f["algorithm"], f["damping"], f["tau"], f["alpha"], f["beta"], f["tol"],
                su.get("N", ""), *(pio._fmt(su[k]) if k in su else "" for k in ("E_pot", "E_ki", "D_g_1", "D_g_2")),
                su.get("restarts", ""), int(bool(su.get("converged", False))), status,
            ])
            if not args.quiet:
                line = pio.summary_line(summary) if summary else ""
                print(f"{param}={value}: {line} [{status}]")
    return 1 if failed else 0


def _cmd_tune(args):
    settings = _settings(args)
    if args.interval is None and args.values is None:
        raise UsageError("give --interval lo,hi or --values")
    problem = _problem(settings)
    counter = iter(range(10**6))

    def evaluate(p):
        s = _override(settings, args.param, p)
        summary, status = execute(s, os.path.join(args.out, f"eval_{next(counter):03d}"), problem)
        if status != "ok" or summary is None:
            return float("inf")
        return summary["N"]

    try:
        if args.values is not None:
            best, scores = select_parameter(evaluate, candidates=_values(args.values, args.param))
        else:
            interval = _values(args.interval, args.param)
            if len(interval) != 2:
                raise UsageError("--interval takes two numbers")
            _flow_config(_override(settings, args.param, interval[0]))
            _flow_config(_override(settings, args.param, interval[1]))
            best, scores = select_parameter(evaluate, interval=interval, budget=args.budget)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc
    for p in sorted(scores):
        print(f"{args.param}={p:.6g} N={scores[p]:g}")
    print(f"best {args.param}={best:.6g} N={scores[best]:g}")
    return 0 if scores[best] != float("inf") else 1


def main(argv=None) -> int:
    parser = build_parser()
    argv = sys.argv[1:] if argv is None else argv
    try:
        args = parser.parse_args(_config_argv(argv))
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"plateflow: error: {exc}", file=sys.stderr)
        return 2
    except SystemExit as exc:  # argparse usage errors and --help
        return int(exc.code or 0)
    logging.basicConfig(level=logging.ERROR if args.quiet else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        return {"run": _cmd_run, "sweep": _cmd_sweep, "tune": _cmd_tune}[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"plateflow: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
