"""Command-line entry points.

    hyperdrift train   --data history.csv --out run/
    hyperdrift stream  --snapshot run/snapshot.json --data stream.csv --trace-out run/trace.jsonl
    hyperdrift ablate  --script script.json --out ablation/ --seeds 0 1 2
    hyperdrift bench   --sizes 2000 10000 --out bench/

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 feature
dimension mismatch between a snapshot and a stream.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import sys
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from hyperdrift import __version__
from hyperdrift.config import RunConfig, load_config
from hyperdrift.data import (
    DriftScript,
    Standardizer,
    features_of,
    fit_standardizer,
    generate_drift_stream,
    labels_of,
    load_csv,
    split_history,
)
from hyperdrift.engine import VARIANTS, apply_variant, run_stream, train
from hyperdrift.errors import ConfigError, DataError, ShapeError
from hyperdrift.evaluation import aucpr, aucroc, measure_throughput, peak_memory_mib, report, write_trace
from hyperdrift.serialize import load_snapshot, save_snapshot

logger = logging.getLogger("hyperdrift")

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_DIM = 0, 2, 3, 4

MU_P_GRID = tuple(round(0.05 * k, 2) for k in range(1, 11))
MU_E_GRID = (0.001, 0.005, 0.01, 0.1, 0.2, 0.4)


@dataclass
class RunManifest:
    command: str
    config_hash: str
    seed: int
    dataset: dict
    code_version: str = __version__
    outputs: dict = field(default_factory=dict)

    def write(self, out: Path) -> Path:
        path = out / f"manifest.{self.command}.json"
        path.write_text(json.dumps(asdict(self), sort_keys=True, indent=2) + "\n")
        return path


class _Parser(argparse.ArgumentParser):
    def error(self, message):  # argparse exits 2 on usage errors; keep that, tidy the text
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _file_digest(path: Path) -> str:
    try:
        return hashlib.sha256(path.read_bytes()).hexdigest()
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc}") from exc


def _load_script(path: str | None) -> DriftScript:
    if path is None:
        return DriftScript.abrupt()
    try:
        return DriftScript.from_dict(json.loads(Path(path).read_text()))
    except OSError as exc:
        raise DataError(f"cannot read script {path}: {exc}") from exc
    except (ValueError, TypeError, KeyError) as exc:
        raise DataError(f"bad drift script {path}: {exc}") from exc


def _dataset(args, seed: int):
    """Instances plus a manifest entry, from --data or --script."""
    if getattr(args, "data", None):
        path = Path(args.data)
        if not path.is_file():
            raise DataError(f"data file {path} does not exist")
        return load_csv(path), {"path": str(path), "sha256": _file_digest(path)}
    script = _load_script(args.script)
    return generate_drift_stream(script, seed), {"script_sha256": script.digest(), "seed": seed}


def _config(args) -> RunConfig:
    cfg = load_config(args.config) if args.config else load_config(None)
    if args.seed is not None:
        cfg = cfg.replace(seed=args.seed)
    return cfg


def _standardized(x: np.ndarray, transform: Standardizer | None) -> np.ndarray:
    return x if transform is None or x.size == 0 else transform.apply(x)


# ---------------------------------------------------------------- train


def _train_split(instances, cfg: RunConfig):
    x = features_of(instances)
    if len(x) < 2:
        raise DataError("need at least two instances to train")
    k = split_history(len(x), cfg.h_r)
    transform = fit_standardizer(x[:k])
    y = labels_of(instances)
    return x, y, k, transform


def _grid_search(cfg: RunConfig, x, y, k, transform):
    if y is None:
        raise DataError("--grid needs a labelled dataset")
    best = None
    hist, rest = transform.apply(x[:k]), transform.apply(x[k:])
    for mu_p in MU_P_GRID:
        for mu_e in MU_E_GRID:
            trial = cfg.replace(mu_p=mu_p, mu_e=mu_e)
            snap = train(hist, trial, known_labels=y[:k])
            decisions, _, _ = run_stream(snap, rest, trial)
            auc = aucroc(np.array([d.score.value for d in decisions]), y[k:])
            logger.info("grid mu_p=%s mu_e=%s aucroc=%.4f", mu_p, mu_e, auc)
            if best is None or auc > best[0]:
                best = (auc, trial)
    return best[1], best[0]


def cmd_train(args) -> int:
    cfg = _config(args)
    instances, ident = _dataset(args, cfg.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    x, y, k, transform = _train_split(instances, cfg)
    grid_auc = None
    if args.grid:
        cfg, grid_auc = _grid_search(cfg, x, y, k, transform)
    outputs = {"snapshot": str(out / "snapshot.json"), "config": str(out / "config.txt")}
    RunManifest("train", cfg.digest(), cfg.seed, ident, outputs=outputs).write(out)
    (out / "config.txt").write_text(cfg.to_text())
    snap = train(transform.apply(x[:k]), cfg, known_labels=None if y is None else y[:k])
    save_snapshot(out / "snapshot.json", snap, transform)
    summary = {"history": k, "latent_dim": snap.scd.latent_dim, "mu_e": snap.mu_e}
    if grid_auc is not None:
        summary.update(grid_aucroc=grid_auc, mu_p=cfg.mu_p, mu_e_config=cfg.mu_e)
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- stream


def _stream_instances(args, cfg: RunConfig):
    instances, ident = _dataset(args, cfg.seed)
    if args.script is not None or not args.data:
        # a generated script also feeds training; stream only what follows the history
        instances = instances[split_history(len(instances), cfg.h_r):]
    return instances, ident


def cmd_stream(args) -> int:
    cfg = _config(args)
    snap, transform = load_snapshot(args.snapshot)
    instances, ident = _stream_instances(args, cfg)
    trace_path = Path(args.trace_out)
    out = Path(args.out) if args.out else trace_path.parent
    out.mkdir(parents=True, exist_ok=True)
    trace_path.parent.mkdir(parents=True, exist_ok=True)
    metrics_path = out / "metrics.json"
    events_path = out / "updates.jsonl"
    outputs = {"trace": str(trace_path), "metrics": str(metrics_path), "updates": str(events_path)}
    ident = dict(ident, snapshot=str(args.snapshot), snapshot_sha256=_file_digest(Path(args.snapshot)))
    RunManifest("stream", cfg.digest(), cfg.seed, ident, outputs=outputs).write(out)
    x = features_of(instances) if instances else np.empty((0, snap.scd.input_dim))
    if x.shape[1] != snap.scd.input_dim:
        raise ShapeError(f"stream has {x.shape[1]} features, snapshot expects {snap.scd.input_dim}")
    mode = "async" if args.async_ else "sync"
    start = time.perf_counter()
    decisions, _, events = run_stream(snap, _standardized(x, transform), cfg, mode=mode)
    elapsed = time.perf_counter() - start
    records = [d.to_record() for d in decisions]
    write_trace(trace_path, records)
    write_trace(events_path, events)
    labels = labels_of(instances) if instances else None
    metrics = report(records, labels, elapsed if records else None)
    if not records:
        metrics.error = "empty stream"
    metrics_path.write_text(metrics.to_json() + "\n")
    print(metrics.to_json())
    return EXIT_OK


# ---------------------------------------------------------------- ablate


def run_ablation(script: DriftScript, cfg: RunConfig, seeds) -> dict:
    """Train once per seed and score every variant; returns rows and per-variant means."""
    rows = []
    for seed in seeds:
        instances = generate_drift_stream(script, seed)
        x, y = features_of(instances), labels_of(instances)
        k = split_history(len(x), cfg.h_r)
        transform = fit_standardizer(x[:k])
        seeded = cfg.replace(seed=seed)
        full = train(transform.apply(x[:k]), seeded, known_labels=y[:k])
        for variant in VARIANTS:
            snap, vcfg = apply_variant(full, seeded, variant)
            decisions, _, events = run_stream(snap, transform.apply(x[k:]), vcfg)
            scores = np.array([d.score.value for d in decisions])
            rows.append({"variant": variant, "seed": seed, "aucroc": aucroc(scores, y[k:]),
                         "aucpr": aucpr(scores, y[k:]), "updates": len(events)})
    means = {v: float(np.mean([r["aucroc"] for r in rows if r["variant"] == v])) for v in VARIANTS}
    return {"rows": rows, "mean_aucroc": means}


def cmd_ablate(args) -> int:
    cfg = _config(args)
    script = _load_script(args.script)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    ident = {"script_sha256": script.digest(), "seeds": list(args.seeds)}
    RunManifest("ablate", cfg.digest(), cfg.seed, ident,
                outputs={"ablation": str(out / "ablation.json")}).write(out)
    result = run_ablation(script, cfg, args.seeds)
    text = json.dumps(result, sort_keys=True, indent=2)
    (out / "ablation.json").write_text(text + "\n")
    print(json.dumps(result["mean_aucroc"], sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- bench


def bench_row(script: DriftScript, cfg: RunConfig, size: int) -> dict:
    """Training and inference throughput on the first ``size`` instances of the script."""
    instances = generate_drift_stream(script, cfg.seed)[:size]
    x = features_of(instances)
    k = split_history(len(x), cfg.h_r)
    transform = fit_standardizer(x[:k])
    hist, rest = transform.apply(x[:k]), transform.apply(x[k:])
    fit = measure_throughput(lambda: train(hist, cfg), n=k)
    static_cfg = cfg.replace(use_ous=False)
    infer = measure_throughput(lambda: run_stream(fit["result"], rest, static_cfg)[0], n=len(rest))
    return {"size": size, "features": x.shape[1], "train_instances": k,
            "train_throughput": fit["throughput"], "inference_instances": len(rest),
            "inference_throughput": infer["throughput"], "peak_memory_mib": peak_memory_mib()}


def cmd_bench(args) -> int:
    cfg = _config(args)
    script = _load_script(args.script)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    RunManifest("bench", cfg.digest(), cfg.seed, {"script_sha256": script.digest()},
                outputs={"bench": str(out / "bench.json")}).write(out)
    if any(s < 2 for s in args.sizes):
        raise DataError("sizes must be at least 2")
    if any(s > script.length for s in args.sizes):
        raise DataError(f"sizes may not exceed the script length {script.length}")
    rows = [bench_row(script, cfg, s) for s in sorted(args.sizes)]
    (out / "bench.json").write_text(json.dumps(rows, sort_keys=True, indent=2) + "\n")
    for r in rows:
        print(json.dumps(r, sort_keys=True))
    return EXIT_OK


# ---------------------------------------------------------------- wiring


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="hyperdrift", description="Streaming anomaly detection under concept drift.")
    p.add_argument("--version", action="version", version=__version__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp):
        sp.add_argument("--config", help="key=value config file")
        sp.add_argument("--seed", type=int, help="overrides the config seed")

    t = sub.add_parser("train", help="train a snapshot on the historical split")
    src = t.add_mutually_exclusive_group(required=True)
    src.add_argument("--data", help="CSV with a header; a 'label' column is optional")
    src.add_argument("--script", help="drift script JSON to generate data from")
    t.add_argument("--out", required=True)
    t.add_argument("--grid", action="store_true", help="search mu_p x mu_e on a labelled stream")
    common(t)
    t.set_defaults(func=cmd_train)

    s = sub.add_parser("stream", help="score a stream with a trained snapshot")
    s.add_argument("--snapshot", required=True)
    src = s.add_mutually_exclusive_group(required=True)
    src.add_argument("--data")
    src.add_argument("--script")
    s.add_argument("--trace-out", required=True)
    s.add_argument("--out", help="directory for metrics, update events and manifest")
    mode = s.add_mutually_exclusive_group()
    mode.add_argument("--sync", dest="async_", action="store_false")
    mode.add_argument("--async", dest="async_", action="store_true")
    common(s)
    s.set_defaults(func=cmd_stream, async_=False)

    a = sub.add_parser("ablate", help="compare detector variants over seeds")
    a.add_argument("--script")
    a.add_argument("--out", required=True)
    a.add_argument("--seeds", type=int, nargs="+", default=[0, 1, 2, 3, 4])
    common(a)
    a.set_defaults(func=cmd_ablate)

    b = sub.add_parser("bench", help="training and inference throughput")
    b.add_argument("--script")
    b.add_argument("--sizes", type=int, nargs="+", required=True)
    b.add_argument("--out", required=True)
    common(b)
    b.set_defaults(func=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ShapeError as exc:
        print(f"dimension mismatch: {exc}", file=sys.stderr)
        return EXIT_DIM
    except DataError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except OSError as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
