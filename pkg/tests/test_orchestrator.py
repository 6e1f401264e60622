import json
import math
import os
from pathlib import Path

import pytest

from otfsmc import orchestrator
from otfsmc.bltlc import parse_formula
from otfsmc.expr import parse_expression
from otfsmc.model import Explicit, Reaction, ReactionNetwork, Species
from otfsmc.orchestrator import (
    BatchError, JobConfig, Mode, WorkerPool, estimate_probability, run_batch,
)
from otfsmc.ssa import RngStream, derive_seed_stream
from otfsmc.checker import Checker, finalize_verdict
from otfsmc.stats import EstimationAborted, wilson_sample_size

from _models import birth_death, death

EXACT = 1 - 2 * math.exp(-1) + math.exp(-2)
SCHEMA = Path(__file__).resolve().parents[1] / "src" / "otfsmc" / "report.schema.json"


def job(net=None, text="F[0,1](x==0)", t_max=5.0, **kw):
    net = net or death(2)
    return JobConfig(net, parse_formula(text, net.symbols()), t_max, formula_text=text, **kw)


def key(rep):
    return rep.p_hat, rep.lower, rep.upper, rep.n_total, rep.iterations


def test_worker_count_does_not_change_results():
    reports = [estimate_probability(job(master_seed=11, worker_count=w)) for w in (1, 2, 4)]
    assert len({json.dumps(key(r)) for r in reports}) == 1


def test_batches_are_seed_contiguous():
    cfg = job(master_seed=5)
    rep = estimate_probability(cfg)
    whole = run_batch(cfg, 0, rep.n_total)
    assert whole.successes == rep.successes


def test_batch_matches_manual_replicas():
    cfg = job(master_seed=8)
    ch = Checker(cfg.formula, cfg.network)
    seeds = derive_seed_stream(8, 300, offset=100)
    manual = sum(finalize_verdict(ch.run((2,), 5.0, RngStream(s))[0]) for s in seeds)
    assert run_batch(cfg, 100, 300).successes == manual


def test_chunking_is_order_independent():
    cfg = job(master_seed=3, worker_count=3)
    with WorkerPool(cfg) as pool:
        split = pool.run(0, 50)
        split += pool.run(50, 77)
        whole = pool.run(0, 127)
    assert (split.successes, split.trials, split.sum_path_length) == \
           (whole.successes, whole.trials, whole.sum_path_length)


def test_tautology_always_succeeds():
    rep = estimate_probability(job(text="x >= 0"))
    assert rep.successes == rep.n_total == 304
    assert rep.p_hat == 1.0
    assert rep.mean_path_length == 1.0


def test_fixed_mode_estimates_extinction():
    n = 10_000
    rep = estimate_probability(job(mode=Mode.FIXED, fixed_n=n, master_seed=2))
    assert abs(rep.p_hat - EXACT) <= 3 * math.sqrt(EXACT * (1 - EXACT) / n)
    assert rep.lower <= EXACT <= rep.upper


def test_conservative_mode_uses_fixed_size():
    rep = estimate_probability(job(mode="conservative"))
    assert rep.n_total == 2648
    assert rep.iterations == [{"batch": 2648, "successes": rep.successes}]


def test_iterative_mode_stays_below_conservative():
    rep = estimate_probability(job(master_seed=1))
    assert wilson_sample_size(1.0, 0.025, 0.01) <= rep.n_total <= 2648
    assert rep.iterations[0]["batch"] == 127
    assert sum(b["batch"] for b in rep.iterations) == rep.n_total


def test_report_is_deterministic_apart_from_wall_time():
    a = estimate_probability(job(master_seed=99)).to_dict()
    b = estimate_probability(job(master_seed=99)).to_dict()
    a.pop("wall_time_seconds"), b.pop("wall_time_seconds")
    assert a == b


def test_report_round_trip_and_schema():
    jsonschema = pytest.importorskip("jsonschema")
    rep = estimate_probability(job(master_seed=4))
    data = json.loads(rep.to_json())
    jsonschema.validate(data, json.loads(SCHEMA.read_text()))
    assert type(rep).from_json(rep.to_json()) == rep
    assert "p = " in rep.to_text()


def _faulty_net():
    # the death rate divides by (x - 1), so every trajectory reaching x = 1 fails
    rate = Explicit(parse_expression("1 / (x - 1)", {"x"}))
    return ReactionNetwork([Species("x", 3)], {}, [Reaction("death", {"x": 1}, {}, rate)],
                           name="faulty")


def test_systematic_errors_abort_batch():
    cfg = job(net=_faulty_net(), text="F(x==0)", t_max=100.0, mode="fixed", fixed_n=50)
    with pytest.raises(BatchError) as info:
        estimate_probability(cfg)
    assert info.value.result.error_count > 0
    assert "replica" in str(info.value)


def test_systematic_errors_abort_iterative_run():
    cfg = job(net=_faulty_net(), text="F(x==0)", t_max=100.0)
    with pytest.raises(EstimationAborted) as info:
        estimate_probability(cfg)
    assert isinstance(info.value.__cause__, BatchError)


def test_direct_batch_error_threshold():
    cfg = job(net=_faulty_net(), text="F(x==0)", t_max=100.0)
    with pytest.raises(BatchError):
        run_batch(cfg, 0, 20)


def test_rare_errors_are_replaced(monkeypatch):
    real = orchestrator.run_replica
    bad = set(derive_seed_stream(7, 2, offset=10))

    def flaky(checker, init, t_max, seed):
        if seed in bad:
            raise ArithmeticError("injected")
        return real(checker, init, t_max, seed)

    monkeypatch.setattr(orchestrator, "run_replica", flaky)
    rep = estimate_probability(job(mode="conservative", master_seed=7))
    assert rep.n_total == 2648 and rep.error_count == 2
    monkeypatch.undo()
    # the batch consumed replicas 0..2649 minus the two failures
    good = run_batch(job(master_seed=7), 0, 2650)
    bad_hits = run_batch(job(master_seed=7), 10, 2)
    assert rep.successes == good.successes - bad_hits.successes


def test_keep_traces():
    traces = {}
    estimate_probability(job(keep_traces=3, master_seed=6), traces_out=traces)
    assert sorted(traces) == [0, 1, 2]
    assert all(tr.states[0] == (2,) for tr in traces.values())


@pytest.mark.parametrize("kw", [dict(worker_count=0), dict(mode="fixed"), dict(t_max=0.0),
                                dict(mode="sometimes")])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        job(**kw)


@pytest.mark.skipif((os.cpu_count() or 1) < 4, reason="needs at least 4 cores")
def test_parallel_speedup():
    import time
    cfg1 = job(net=birth_death(), text="G[0,20](x >= 0)", t_max=20.0, mode="fixed", fixed_n=4000)
    cfg4 = job(net=birth_death(), text="G[0,20](x >= 0)", t_max=20.0, mode="fixed", fixed_n=4000,
               worker_count=4)
    t0 = time.perf_counter()
    estimate_probability(cfg1)
    t1 = time.perf_counter()
    estimate_probability(cfg4)
    t2 = time.perf_counter()
    assert (t1 - t0) / (t2 - t1) >= 2.0
