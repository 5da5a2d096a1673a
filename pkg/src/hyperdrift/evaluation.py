"""Ranking metrics, drift diagnostics, throughput and the JSONL trace format."""

from __future__ import annotations

import json
import sys
import time
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Callable, Iterable, Sequence

import numpy as np

from hyperdrift.errors import UndefinedMetricError

try:
    import resource
except ImportError:  # not available on Windows
    resource = None


def _check(scores, labels):
    s = np.asarray(scores, dtype=np.float64).ravel()
    y = np.asarray(labels).ravel().astype(np.int64)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    return s, y


def aucroc(scores, labels) -> float:
    """Probability a random positive outranks a random negative; ties count half.

    Computed from average ranks after one sort (Mann-Whitney U).
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError("AUCROC needs both classes")
    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    ranks = np.empty(len(s))
    # average 1-based rank within each run of tied scores
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    avg = (starts + ends + 1) / 2.0
    ranks[order] = np.repeat(avg, ends - starts)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def aucpr(scores, labels) -> float:
    """Average precision: sum over distinct thresholds of (recall gain) x precision.

    Tied scores form a single operating point.
    """
    s, y = _check(scores, labels)
    n_pos = int(y.sum())
    if n_pos == 0:
        raise UndefinedMetricError("AUCPR needs at least one positive")
    order = np.argsort(-s, kind="mergesort")
    s_desc, y_desc = s[order], y[order]
    tp = np.cumsum(y_desc)
    last = np.r_[s_desc[1:] != s_desc[:-1], True]  # end of each tie group
    tp_at = tp[last]
    k_at = np.flatnonzero(last) + 1
    precision = tp_at / k_at
    recall_gain = np.diff(np.r_[0, tp_at]) / n_pos
    return float(np.sum(recall_gain * precision))


@dataclass
class MetricsReport:
    aucroc: float | None
    aucpr: float | None
    n_scored: int
    n_anomalies: int
    n_static: int
    n_dynamic: int
    n_updates: int
    throughput: float | None = None
    wall_time: float | None = None
    error: str | None = None

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)


def report(records: Sequence[dict], labels=None, wall_time: float | None = None) -> MetricsReport:
    """Summarise trace records; metrics are ``None`` (with ``error``) when undefined."""
    scores = np.array([r["score"] for r in records], dtype=np.float64)
    n_dyn = sum(r["route"] == "dynamic" for r in records)
    auc = ap = None
    error = None
    n_anom = 0
    if labels is not None:
        y = np.asarray(labels, dtype=np.int64)
        n_anom = int(y.sum())
        try:
            auc = aucroc(scores, y)
            ap = aucpr(scores, y)
        except UndefinedMetricError as exc:
            error = str(exc)
    else:
        error = "no labels"
    rate = len(records) / wall_time if wall_time else None
    return MetricsReport(auc, ap, len(records), n_anom, len(records) - n_dyn, n_dyn,
                         sum(bool(r["update"]) for r in records), rate, wall_time, error)


# ---------------------------------------------------------------- trace sink


def trace_record(t: int, score: float, u: float, route: str, update: bool, version: int) -> dict:
    return {"t": int(t), "score": float(score), "u": float(u), "route": route,
            "update": bool(update), "version": int(version)}


def write_trace(path: str | Path, records: Iterable[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for r in records:
            fh.write(json.dumps(r) + "\n")


def read_trace(path: str | Path) -> list[dict]:
    with Path(path).open(encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def write_scores_csv(path: str | Path, records: Sequence[dict]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("t,score,u\n")
        for r in records:
            fh.write(f"{r['t']},{r['score']!r},{r['u']!r}\n")


# ---------------------------------------------------------------- drift diagnostics


@dataclass
class OnsetReport:
    onset: int
    mean_u_before: float
    mean_u_after: float
    detection_delay: int | None
    update_lag: int | None


def drift_response(records: Sequence[dict], onsets: Sequence[int], delta_l: int,
                   mu_e=None) -> list[OnsetReport]:
    """Uncertainty response around each drift onset.

    ``mu_e`` is the gate per step (scalar or sequence); the detection delay is
    the number of steps from the onset to the first ``u > mu_e``.
    """
    u = np.array([r["u"] for r in records], dtype=np.float64)
    upd = np.array([bool(r["update"]) for r in records])
    n = len(u)
    gate = np.full(n, np.inf) if mu_e is None else np.broadcast_to(np.asarray(mu_e, dtype=np.float64), (n,))
    span = 2 * delta_l
    out = []
    for t0 in onsets:
        if not 0 <= t0 < n:
            raise ValueError(f"onset {t0} outside the stream")
        before = u[max(0, t0 - span):t0]
        after = u[t0:t0 + span]
        hits = np.flatnonzero(u[t0:] > gate[t0:])
        ups = np.flatnonzero(upd[t0:])
        out.append(OnsetReport(
            t0,
            float(before.mean()) if before.size else float("nan"),
            float(after.mean()) if after.size else float("nan"),
            int(hits[0]) if hits.size else None,
            int(ups[0]) if ups.size else None,
        ))
    return out


# ---------------------------------------------------------------- throughput


def peak_memory_mib() -> float | None:
    if resource is None:
        return None
    try:
        peak = resource.getrusage(resource.RUSAGE_SELF).ru_maxrss
    except (OSError, ValueError):
        return None
    # bytes on macOS, KiB on Linux
    return peak / 2**20 if sys.platform == "darwin" else peak / 1024


def rate(n: int, seconds: float) -> float:
    return n / seconds if seconds > 0 else float("inf")


def measure_throughput(run: Callable[[], Sequence], n: int | None = None) -> dict:
    """Time ``run()`` and report instances per second and peak memory.

    ``n`` defaults to the length of the returned sequence.
    """
    start = time.perf_counter()
    out = run()
    elapsed = time.perf_counter() - start
    count = len(out) if n is None else n
    return {"n": count, "seconds": elapsed, "throughput": rate(count, elapsed),
            "peak_memory_mib": peak_memory_mib(), "result": out}
