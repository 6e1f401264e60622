"""Parallel replica execution and the estimation driver.

The coordinator owns the master seed.  Replica ``i`` of a job always gets
``derive_seed_stream(master_seed, 1, offset=i)``; batches advance the
offset cumulatively, so no seed is reused and results do not depend on
the number of workers or on scheduling order.
"""

from __future__ import annotations

import enum
import json
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field

from . import __version__
from .checker import Checker, finalize_verdict
from .bltlc import Formula
from .expr import ExpressionError
from .model import ModelError, ReactionNetwork
from .ssa import RNG_ALGORITHM, RngStream, Trace, derive_seed_stream
from .stats import (
    ConfidenceSpec, conservative_sample_size, iterative_estimate, wilson_interval,
)

__all__ = [
    "Mode", "JobConfig", "BatchResult", "BatchError", "EstimationReport", "WorkerPool",
    "run_replica", "run_batch", "estimate_probability", "MAX_ERROR_FRACTION",
]

MAX_ERROR_FRACTION = 0.01


class Mode(str, enum.Enum):
    ITERATIVE = "iterative"
    CONSERVATIVE = "conservative"
    FIXED = "fixed"


@dataclass
class JobConfig:
    network: ReactionNetwork
    formula: Formula
    t_max: float
    confidence: ConfidenceSpec = field(default_factory=ConfidenceSpec)
    master_seed: int = 0
    worker_count: int = 1
    mode: Mode = Mode.ITERATIVE
    fixed_n: int | None = None
    formula_text: str = ""
    keep_traces: int = 0  # store the traces of the first K replicas of the job

    def __post_init__(self):
        self.mode = Mode(self.mode)
        if self.worker_count < 1:
            raise ValueError("worker_count must be >= 1")
        if self.mode is Mode.FIXED and (self.fixed_n is None or self.fixed_n < 1):
            raise ValueError("fixed mode needs fixed_n >= 1")
        if not self.t_max > 0:
            raise ValueError("t_max must be positive")


@dataclass
class BatchResult:
    successes: int = 0
    trials: int = 0
    sum_path_length: int = 0
    error_count: int = 0
    errors: list[str] = field(default_factory=list)
    traces: dict[int, Trace] = field(default_factory=dict)

    def __iadd__(self, other: "BatchResult"):
        self.successes += other.successes
        self.trials += other.trials
        self.sum_path_length += other.sum_path_length
        self.error_count += other.error_count
        self.errors.extend(other.errors)
        self.traces.update(other.traces)
        return self


class BatchError(RuntimeError):
    def __init__(self, message: str, result: BatchResult):
        self.result = result
        super().__init__(message)


def run_replica(checker: Checker, init, t_max: float, seed: int) -> tuple[bool, Trace]:
    verdict, trace = checker.run(init, t_max, RngStream(seed))
    return finalize_verdict(verdict), trace


# worker-process globals, set once per pool by _init_worker
_W: dict = {}


def _context(network, formula, t_max, master_seed, keep_traces) -> dict:
    return dict(checker=Checker(formula, network), init=network.initial_state,
                t_max=t_max, master_seed=master_seed, keep=keep_traces)


def _init_worker(*args):
    _W.clear()
    _W.update(_context(*args))


def _run_chunk(offset: int, count: int, ctx: dict | None = None) -> BatchResult:
    ctx = _W if ctx is None else ctx
    checker, init, t_max = ctx["checker"], ctx["init"], ctx["t_max"]
    res = BatchResult()
    for idx, seed in enumerate(derive_seed_stream(ctx["master_seed"], count, offset), start=offset):
        try:
            ok, trace = run_replica(checker, init, t_max, seed)
        except (ExpressionError, ModelError, ArithmeticError) as exc:
            res.error_count += 1
            if len(res.errors) < 10:
                res.errors.append(f"replica {idx}: {exc}")
            continue
        res.trials += 1
        res.successes += ok
        res.sum_path_length += len(trace)
        if idx < ctx["keep"]:
            res.traces[idx] = trace
    return res


class WorkerPool:
    """Runs replica ranges on ``worker_count`` processes (in-process when 1)."""

    def __init__(self, cfg: JobConfig):
        self.cfg = cfg
        args = (cfg.network, cfg.formula, cfg.t_max, cfg.master_seed, cfg.keep_traces)
        self._executor = None
        if cfg.worker_count > 1:
            self._executor = ProcessPoolExecutor(
                cfg.worker_count, initializer=_init_worker, initargs=args)
        else:
            self._local = _context(*args)

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

    def close(self):
        if self._executor is not None:
            self._executor.shutdown()
            self._executor = None

    def run(self, offset: int, count: int) -> BatchResult:
        if self._executor is None:
            return _run_chunk(offset, count, self._local)
        workers = self.cfg.worker_count
        n_chunks = min(count, workers * 4)
        bounds = [offset + (count * c) // n_chunks for c in range(n_chunks + 1)]
        futures = [self._executor.submit(_run_chunk, lo, hi - lo)
                   for lo, hi in zip(bounds, bounds[1:])]
        total = BatchResult()
        for fut in futures:  # reduce in replica order
            total += fut.result()
        return total


def run_batch(cfg: JobConfig, replica_offset: int, count: int,
              pool: WorkerPool | None = None) -> BatchResult:
    """Run replicas ``replica_offset .. replica_offset+count-1`` and gather counts."""
    if count < 1:
        raise ValueError("count must be >= 1")
    if pool is None:
        with WorkerPool(cfg) as own:
            res = own.run(replica_offset, count)
    else:
        res = pool.run(replica_offset, count)
    if res.error_count > MAX_ERROR_FRACTION * count:
        raise BatchError(
            f"{res.error_count} of {count} replicas failed: " + "; ".join(res.errors[:3]), res)
    return res


@dataclass
class EstimationReport:
    p_hat: float
    lower: float
    upper: float
    alpha: float
    epsilon: float
    n_total: int
    successes: int
    iterations: list[dict]
    mean_path_length: float
    mode: str
    master_seed: int
    worker_count: int
    t_max: float
    formula: str
    model: str
    error_count: int
    rng: str
    wall_time_seconds: float
    tool_version: str = __version__

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self, **kw) -> str:
        return json.dumps(self.to_dict(), **kw)

    @classmethod
    def from_dict(cls, d: dict) -> "EstimationReport":
        return cls(**d)

    @classmethod
    def from_json(cls, s: str) -> "EstimationReport":
        return cls.from_dict(json.loads(s))

    def to_text(self) -> str:
        return (f"p = {self.p_hat:.5f}  [{self.lower:.5f}, {self.upper:.5f}]  "
                f"({100 * (1 - self.alpha):g}% confidence, eps={self.epsilon:g})\n"
                f"N = {self.n_total} ({self.mode}), mean |path| = {self.mean_path_length:.2f}, "
                f"seed = {self.master_seed}, {self.wall_time_seconds:.2f}s on {self.worker_count} worker(s)")


def estimate_probability(cfg: JobConfig, traces_out: dict | None = None) -> EstimationReport:
    """Estimate P(formula) under ``cfg.mode``; optionally collect kept traces."""
    start = time.perf_counter()
    spec = cfg.confidence
    total = BatchResult()
    next_offset = 0

    with WorkerPool(cfg) as pool:
        def batch(n: int) -> int:
            nonlocal next_offset, total
            got = BatchResult()
            need = n
            # replace failed replicas so every batch delivers n trials
            while need > 0:
                got += pool.run(next_offset, need)
                next_offset += need
                need = n - got.trials
                if got.error_count > MAX_ERROR_FRACTION * n:
                    raise BatchError(f"{got.error_count} of {n} replicas failed: "
                                     + "; ".join(got.errors[:3]), got)
            total += got
            return got.successes

        if cfg.mode is Mode.ITERATIVE:
            est = iterative_estimate(batch, spec)
            p_hat, lower, upper, n_total = est.p_hat, est.lower, est.upper, est.n_total
            log = [{"batch": b, "successes": s} for b, s in est.iterations]
        else:
            n = conservative_sample_size(spec) if cfg.mode is Mode.CONSERVATIVE else cfg.fixed_n
            s = batch(n)
            p_hat = s / n
            lower, upper = wilson_interval(p_hat, n, spec.alpha)
            n_total = n
            log = [{"batch": n, "successes": s}]

    if traces_out is not None:
        traces_out.update(total.traces)
    return EstimationReport(
        p_hat=p_hat, lower=lower, upper=upper, alpha=spec.alpha, epsilon=spec.epsilon,
        n_total=n_total, successes=total.successes, iterations=log,
        mean_path_length=total.sum_path_length / max(total.trials, 1),
        mode=cfg.mode.value, master_seed=cfg.master_seed, worker_count=cfg.worker_count,
        t_max=cfg.t_max, formula=cfg.formula_text, model=cfg.network.name,
        error_count=total.error_count, rng=RNG_ALGORITHM,
        wall_time_seconds=time.perf_counter() - start,
    )


def default_workers() -> int:
    return os.cpu_count() or 1
