"""Command-line interface: ``otfsmc verify`` and ``otfsmc simulate``.

Exit codes:

    0  success
    2  bad command-line arguments
    3  file could not be read or written
    4  model file is not valid JSON
    5  model failed validation
    6  formula could not be parsed
    7  simulation/verification failed (e.g. too many replica errors)
"""

from __future__ import annotations

import argparse
import json
import math
import secrets
import sys
from importlib import resources
from pathlib import Path

from .bltlc import formula_horizon, parse_formula
from .expr import ParseError
from .model import ModelValidationError, ReactionNetwork, load_model_file
from .orchestrator import BatchError, JobConfig, Mode, default_workers, estimate_probability
from .ssa import RngStream, derive_seed_stream, simulate_to_time
from .stats import ConfidenceSpec, EstimationAborted

EXIT_OK, EXIT_USAGE, EXIT_IO, EXIT_JSON, EXIT_MODEL, EXIT_FORMULA, EXIT_RUNTIME = 0, 2, 3, 4, 5, 6, 7


class CliError(Exception):
    def __init__(self, message: str, code: int):
        self.code = code
        super().__init__(message)


def bundled_model_path(name: str) -> Path | None:
    res = resources.files("otfsmc") / "models" / name
    return Path(str(res)) if res.is_file() else None


def resolve_model(path: str) -> ReactionNetwork:
    p = Path(path)
    if not p.exists():
        for cand in (path, path + ".json"):
            bundled = bundled_model_path(cand)
            if bundled is not None:
                p = bundled
                break
    try:
        return load_model_file(p)
    except OSError as exc:
        raise CliError(f"cannot read model file {path}: {exc.strerror or exc}", EXIT_IO)
    except json.JSONDecodeError as exc:
        raise CliError(f"model file {path} is not valid JSON: {exc}", EXIT_JSON)
    except ModelValidationError as exc:
        lines = "\n".join(f"  - {v}" for v in exc.violations)
        raise CliError(f"model file {path} is invalid:\n{lines}", EXIT_MODEL)


def _sweep(spec: str) -> list[float]:
    try:
        start, stop, step = (float(x) for x in spec.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError("expected start:stop:step")
    if step <= 0 or stop < start or start <= 0:
        raise argparse.ArgumentTypeError("need 0 < start <= stop and step > 0")
    n = int(round((stop - start) / step))
    return [round(start + i * step, 12) for i in range(n + 1)]


def _positive_float(s: str) -> float:
    v = float(s)
    if not v > 0:
        raise argparse.ArgumentTypeError("must be positive")
    return v


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="otfsmc", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    v = sub.add_parser("verify", help="estimate the probability of a formula")
    v.add_argument("--model", required=True, help="model JSON file (or name of a bundled model)")
    g = v.add_mutually_exclusive_group(required=True)
    g.add_argument("--formula", help="BLTLc formula text")
    g.add_argument("--formula-file", help="file containing the formula")
    v.add_argument("--tmax", type=_positive_float,
                   help="simulation time horizon (default: the formula's own time bound, "
                        "else the model file's t_max)")
    v.add_argument("--epsilon", type=float, default=0.025, help="interval half-width (default 0.025)")
    v.add_argument("--alpha", type=float, default=0.01, help="1 - confidence level (default 0.01)")
    v.add_argument("--mode", choices=[m.value for m in Mode], default="iterative")
    v.add_argument("--n", type=int, help="sample size for --mode fixed")
    v.add_argument("--seed", type=int, help="64-bit master seed (default: random, echoed in report)")
    v.add_argument("--workers", type=int, default=default_workers())
    v.add_argument("--trace-out", help="write the traces of the first replicas as CSV")
    v.add_argument("--trace-count", type=int, default=1)
    v.add_argument("--report", choices=["json", "text"], default="json")
    v.add_argument("--sweep-tmax", type=_sweep, metavar="START:STOP:STEP",
                   help="repeat the estimate for each horizon t, substituting {t} in the "
                        "formula; prints CSV tmax,p_hat,lower,upper,n_total")

    s = sub.add_parser("simulate", help="write one SSA trajectory as CSV")
    s.add_argument("--model", required=True)
    s.add_argument("--tmax", type=_positive_float, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--replica", type=int, default=0, help="replica index under --seed")
    s.add_argument("--out", help="output CSV (default stdout)")
    return parser


def _write(path: str, text: str) -> None:
    try:
        Path(path).write_text(text)
    except OSError as exc:
        raise CliError(f"cannot write {path}: {exc.strerror or exc}", EXIT_IO)


def _trace_paths(base: str, indices) -> dict[int, str]:
    indices = sorted(indices)
    if len(indices) == 1:
        return {indices[0]: base}
    p = Path(base)
    return {i: str(p.with_name(f"{p.stem}_{i}{p.suffix or '.csv'}")) for i in indices}


def run_verify_command(args, out=None) -> int:
    out = out or sys.stdout
    net = resolve_model(args.model)
    if args.formula_file:
        try:
            text = Path(args.formula_file).read_text().strip()
        except OSError as exc:
            raise CliError(f"cannot read formula file: {exc.strerror or exc}", EXIT_IO)
    else:
        text = args.formula
    try:
        spec = ConfidenceSpec(args.alpha, args.epsilon)
    except ValueError as exc:
        raise CliError(str(exc), EXIT_USAGE)
    if args.mode == "fixed" and (args.n is None or args.n < 1):
        raise CliError("--mode fixed requires --n >= 1", EXIT_USAGE)
    if args.workers < 1 or args.trace_count < 1:
        raise CliError("--workers and --trace-count must be >= 1", EXIT_USAGE)
    seed = args.seed if args.seed is not None else secrets.randbits(64)

    def job(formula_text: str, t_max: float | None, keep: int = 0) -> JobConfig:
        try:
            formula = parse_formula(formula_text, net.symbols())
        except ParseError as exc:
            raise CliError(f"formula error: {exc}", EXIT_FORMULA)
        if t_max is None:
            t_max = formula_horizon(formula)
            if t_max == math.inf:
                t_max = net.default_t_max
            elif t_max == 0:  # nothing temporal: any horizon will do
                t_max = net.default_t_max or 1.0
            if t_max is None:
                raise CliError("--tmax is required: the formula has no finite time bound "
                               "and the model file sets no t_max", EXIT_USAGE)
        return JobConfig(net, formula, t_max, spec, seed, args.workers, Mode(args.mode),
                         args.n, formula_text, keep)

    def run(cfg: JobConfig, traces=None):
        try:
            return estimate_probability(cfg, traces)
        except (BatchError, EstimationAborted) as exc:
            raise CliError(f"estimation failed: {exc}", EXIT_RUNTIME)

    if args.sweep_tmax is not None:
        out.write("tmax,p_hat,lower,upper,n_total\n")
        for t in args.sweep_tmax:
            t_max = None if args.tmax is None else max(t, args.tmax)
            rep = run(job(text.replace("{t}", repr(t)), t_max))
            out.write(f"{t!r},{rep.p_hat!r},{rep.lower!r},{rep.upper!r},{rep.n_total}\n")
        return EXIT_OK

    traces: dict = {}
    cfg = job(text, args.tmax, args.trace_count if args.trace_out else 0)
    rep = run(cfg, traces)
    if args.trace_out:
        for idx, path in _trace_paths(args.trace_out, traces).items():
            _write(path, traces[idx].to_csv(net.species_names))
    if args.report == "json":
        out.write(rep.to_json(indent=2) + "\n")
    else:
        out.write(rep.to_text() + "\n")
    return EXIT_OK


def run_simulate_command(args, out=None) -> int:
    out = out or sys.stdout
    net = resolve_model(args.model)
    seed = derive_seed_stream(args.seed, 1, args.replica)[0]
    trace = simulate_to_time(net, net.initial_state, args.tmax, RngStream(seed))
    csv = trace.to_csv(net.species_names)
    if args.out:
        _write(args.out, csv)
    else:
        out.write(csv)
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        if args.command == "verify":
            return run_verify_command(args)
        return run_simulate_command(args)
    except CliError as exc:
        print(f"otfsmc: {exc}", file=sys.stderr)
        return exc.code


if __name__ == "__main__":
    sys.exit(main())
