import itertools
import json
import time

import numpy as np
import pytest

from hyperdrift.config import RunConfig
from hyperdrift.engine import run_stream, train
from hyperdrift.errors import UndefinedMetricError
from hyperdrift.evaluation import (
    aucpr,
    aucroc,
    drift_response,
    measure_throughput,
    rate,
    read_trace,
    report,
    trace_record,
    write_scores_csv,
    write_trace,
)


def brute_aucroc(s, y):
    pos, neg = s[y == 1], s[y == 0]
    wins = sum(1.0 if p > n else 0.5 if p == n else 0.0 for p, n in itertools.product(pos, neg))
    return wins / (len(pos) * len(neg))


def brute_aucpr(s, y):
    total, prev_recall = 0.0, 0.0
    for tau in sorted(set(s.tolist()), reverse=True):
        flagged = s >= tau
        tp = np.sum(flagged & (y == 1))
        recall = tp / y.sum()
        total += (recall - prev_recall) * tp / flagged.sum()
        prev_recall = recall
    return total


def _problem(rng, n=200):
    s = np.round(rng.normal(size=n), 1)  # rounding creates ties
    y = (rng.random(n) < 0.3).astype(int)
    y[:2] = [0, 1]
    return s, y


def test_aucroc_examples():
    assert aucroc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    assert aucroc([0.1, 0.2, 0.8, 0.9], [1, 1, 0, 0]) == 0.0
    assert aucroc([0.5] * 6, [1, 0, 0, 1, 0, 1]) == 0.5


def test_aucpr_examples():
    assert aucpr([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]) == 1.0
    # all tied: one operating point at the positive rate
    assert aucpr([0.5] * 4, [1, 0, 0, 0]) == pytest.approx(0.25)


@pytest.mark.parametrize("seed", range(10))
def test_metrics_match_brute_force(seed):
    rng = np.random.default_rng(seed)
    for _ in range(10):
        s, y = _problem(rng)
        assert abs(aucroc(s, y) - brute_aucroc(s, y)) < 1e-12
        assert abs(aucpr(s, y) - brute_aucpr(s, y)) < 1e-12


def test_aucroc_monotone_invariance(rng):
    s, y = _problem(rng)
    base = aucroc(s, y)
    for f in (np.exp, lambda v: 3 * v - 7, lambda v: np.arctan(v) ** 3):
        assert aucroc(f(s), y) == pytest.approx(base, abs=1e-15)
    assert aucpr(np.exp(s), y) == pytest.approx(aucpr(s, y), abs=1e-15)


def test_aucpr_above_positive_rate_when_informative(rng):
    for _ in range(20):
        y = (rng.random(300) < 0.1).astype(int)
        s = y + rng.normal(scale=2.0, size=300)
        if aucroc(s, y) > 0.5:
            assert aucpr(s, y) >= y.mean()


def test_undefined_metrics():
    with pytest.raises(UndefinedMetricError):
        aucroc([0.1, 0.2], [0, 0])
    with pytest.raises(UndefinedMetricError):
        aucpr([0.1, 0.2], [0, 0])
    with pytest.raises(ValueError):
        aucroc([0.1, 0.2], [0, 1, 1])


# ---------------------------------------------------------------- trace


def _records(rng, n=50):
    return [trace_record(t, rng.random(), rng.random() * 0.1, "dynamic" if t % 3 else "static",
                         t == 20, 1 + (t >= 20)) for t in range(n)]


def test_trace_record_schema():
    r = trace_record(3, 0.5, 0.01, "static", False, 1)
    assert list(r) == ["t", "score", "u", "route", "update", "version"]


def test_trace_replay_reproduces_report(tmp_path, rng):
    recs = _records(rng)
    y = (rng.random(50) < 0.3).astype(int)
    y[0], y[1] = 0, 1
    write_trace(tmp_path / "t.jsonl", recs)
    back = read_trace(tmp_path / "t.jsonl")
    assert back == recs
    assert report(back, y, 2.0) == report(recs, y, 2.0)
    r = report(recs, y, 2.0)
    assert r.n_static + r.n_dynamic == r.n_scored == 50
    assert r.n_updates == 1 and r.throughput == 25.0
    assert json.loads(r.to_json())["aucroc"] == r.aucroc


def test_report_flags_undefined_metrics(rng):
    recs = _records(rng, 5)
    assert report(recs, [0] * 5).error is not None
    assert report(recs).error == "no labels"
    assert report(recs, [0] * 5).aucroc is None


def test_scores_csv(tmp_path, rng):
    recs = _records(rng, 4)
    write_scores_csv(tmp_path / "s.csv", recs)
    lines = (tmp_path / "s.csv").read_text().splitlines()
    assert lines[0] == "t,score,u" and len(lines) == 5
    assert float(lines[1].split(",")[1]) == recs[0]["score"]


# ---------------------------------------------------------------- drift diagnostics


def _u_trace(u, updates=()):
    return [trace_record(t, 0.0, v, "static", t in updates, 1) for t, v in enumerate(u)]


def test_flat_zero_trace_has_no_detections():
    rep = drift_response(_u_trace(np.zeros(200)), [100], delta_l=16, mu_e=0.01)
    assert rep[0].detection_delay is None and rep[0].update_lag is None
    assert rep[0].mean_u_before == rep[0].mean_u_after == 0.0


def test_step_trace_detects_with_zero_delay():
    u = np.r_[np.zeros(100), np.full(100, 0.5)]
    rep = drift_response(_u_trace(u, updates={130}), [100], delta_l=16, mu_e=0.1)[0]
    assert rep.detection_delay == 0 and rep.update_lag == 30
    assert rep.mean_u_after == 0.5 and rep.mean_u_before == 0.0


def test_drift_response_windows_and_gate_sequence():
    u = np.arange(100, dtype=float)
    rep = drift_response(_u_trace(u), [50], delta_l=5, mu_e=np.full(100, 54.5))[0]
    assert rep.mean_u_before == np.mean(np.arange(40, 50))
    assert rep.mean_u_after == np.mean(np.arange(50, 60))
    assert rep.detection_delay == 5
    with pytest.raises(ValueError):
        drift_response(_u_trace(u), [100], delta_l=5)


# ---------------------------------------------------------------- throughput


def test_throughput_arithmetic(monkeypatch):
    ticks = iter([10.0, 10.1])
    monkeypatch.setattr(time, "perf_counter", lambda: next(ticks))
    out = measure_throughput(lambda: list(range(1000)))
    assert out["n"] == 1000 and out["throughput"] == pytest.approx(1e4)
    assert rate(5, 0.0) == float("inf")


def _stream_setup(rng, n):
    x = rng.normal(size=(n, 6))
    cfg = RunConfig(epochs=5, iec_epochs=3, dsd_epochs=3, use_ous=False)
    return train(x[:300], cfg), x, cfg


def test_repeat_runs_share_scores(rng):
    snap, x, cfg = _stream_setup(rng, 1300)
    a = measure_throughput(lambda: run_stream(snap, x[300:], cfg)[0])
    b = measure_throughput(lambda: run_stream(snap, x[300:], cfg)[0])
    assert [d.score.value for d in a["result"]] == [d.score.value for d in b["result"]]
    assert a["n"] == 1000


def test_run_time_scales_linearly(rng):
    snap, x, cfg = _stream_setup(rng, 300 + 40000)
    sizes = np.array([10000, 20000, 40000])
    secs = []
    for n in sizes:
        xs = x[300:300 + n]
        secs.append(min(measure_throughput(lambda: run_stream(snap, xs, cfg)[0])["seconds"]
                        for _ in range(3)))
    secs = np.array(secs)
    slope, icept = np.polyfit(sizes, secs, 1)
    resid = secs - (slope * sizes + icept)
    r2 = 1 - resid @ resid / np.sum((secs - secs.mean()) ** 2)
    assert r2 > 0.95
