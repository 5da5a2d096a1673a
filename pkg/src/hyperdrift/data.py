"""Stream ingestion, preprocessing and synthetic drifting streams."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from hyperdrift.errors import ContractError, DataError

LABEL_COLUMN = "label"


@dataclass(frozen=True)
class Instance:
    features: np.ndarray
    label: int | None = None  # evaluation only
    t: int = 0


def features_of(instances: Sequence[Instance]) -> np.ndarray:
    if len(instances) == 0:
        return np.zeros((0, 0))
    return np.vstack([inst.features for inst in instances])


def labels_of(instances: Sequence[Instance]) -> np.ndarray | None:
    if any(inst.label is None for inst in instances):
        return None
    return np.array([inst.label for inst in instances], dtype=np.int64)


def to_instances(x: np.ndarray, labels=None, start: int = 0) -> list[Instance]:
    x = np.asarray(x, dtype=np.float64)
    out = []
    for i, row in enumerate(x):
        lab = None if labels is None else int(labels[i])
        out.append(Instance(row, lab, start + i))
    return out


# ---------------------------------------------------------------- CSV


def load_csv(path: str | Path, features: Sequence[str] | None = None,
             label: str | None = LABEL_COLUMN) -> list[Instance]:
    """Read a UTF-8 CSV with a mandatory header.

    ``features`` selects columns by name (default: every column except the
    label). A column named ``label`` is read as the ground truth when present.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: missing header row") from None
        has_label = label is not None and label in header
        if features is None:
            features = [h for h in header if not (has_label and h == label)]
        missing = [c for c in features if c not in header]
        if missing:
            raise DataError(f"{path}: missing column(s) {missing}")
        cols = [header.index(c) for c in features]
        lab_col = header.index(label) if has_label else None
        out = []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: expected {len(header)} cells, got {len(row)}")
            values = np.empty(len(cols))
            for k, c in enumerate(cols):
                try:
                    values[k] = float(row[c])
                except ValueError:
                    raise DataError(f"{path}:{lineno}: column {header[c]!r} is not numeric: {row[c]!r}") from None
                if not math.isfinite(values[k]):
                    raise DataError(f"{path}:{lineno}: column {header[c]!r} is not finite")
            lab = None
            if lab_col is not None:
                try:
                    lab = int(float(row[lab_col]))
                except ValueError:
                    raise DataError(f"{path}:{lineno}: bad label {row[lab_col]!r}") from None
                if lab not in (0, 1):
                    raise DataError(f"{path}:{lineno}: label must be 0 or 1")
            out.append(Instance(values, lab, len(out)))
    return out


def write_csv(path: str | Path, instances: Sequence[Instance], names: Sequence[str] | None = None) -> None:
    """Write instances with full float precision; adds a label column if all are labelled."""
    x = features_of(instances)
    d = x.shape[1] if x.size else 0
    names = list(names) if names is not None else [f"f{i}" for i in range(d)]
    labels = labels_of(instances) if instances else None
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(names + ([LABEL_COLUMN] if labels is not None else []))
        for i, row in enumerate(x):
            cells = [repr(float(v)) for v in row]
            if labels is not None:
                cells.append(str(int(labels[i])))
            w.writerow(cells)


# ---------------------------------------------------------------- preprocessing


def shingle(series: Sequence[float], width: int = 10, labels=None) -> list[Instance]:
    """Overlapping windows ``(s_t, ..., s_{t+width-1})`` of a scalar series.

    A window is labelled anomalous when any of its points is.
    """
    s = np.asarray(series, dtype=np.float64).ravel()
    if width < 1:
        raise ContractError("width must be >= 1")
    if len(s) < width:
        raise ContractError(f"series of length {len(s)} is shorter than width {width}")
    windows = np.lib.stride_tricks.sliding_window_view(s, width).copy()
    lab = None
    if labels is not None:
        lab = np.lib.stride_tricks.sliding_window_view(np.asarray(labels), width).max(axis=1)
    return to_instances(windows, lab)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def apply(self, x) -> np.ndarray:
        return (np.asarray(x, dtype=np.float64) - self.mean) / self.std

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "Standardizer":
        return cls(np.asarray(d["mean"], dtype=np.float64), np.asarray(d["std"], dtype=np.float64))


def fit_standardizer(history) -> Standardizer:
    x = np.asarray(history, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ContractError("history is empty")
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardizer(x.mean(axis=0), std)


def standardize(history, stream):
    """Fit a per-feature affine map on ``history`` and apply it to both."""
    t = fit_standardizer(history)
    s = np.asarray(stream, dtype=np.float64)
    return t.apply(history), (t.apply(s) if s.size else s), t


def split_history(n: int, h_r: float) -> int:
    """Number of leading records forming the historical split."""
    if not 0.0 < h_r < 1.0:
        raise ContractError("h_r must lie in (0, 1)")
    return min(n, math.ceil(round(h_r * n, 9)))


# ---------------------------------------------------------------- synthetic streams


@dataclass(frozen=True)
class Segment:
    generator: int
    length: int
    style: str = "abrupt"  # abrupt | gradual | incremental
    transition: int = 0  # steps over which gradual/incremental drift blends in
    anomaly_rate: float = 0.02


@dataclass(frozen=True)
class DriftScript:
    """Concept schedule for :func:`generate_drift_stream`.

    ``dim`` features are generated around a ``rank``-dimensional latent
    mixture per concept. With ``recurrent`` the whole segment list is played
    a second time, so earlier concepts come back.
    """

    segments: tuple[Segment, ...]
    dim: int = 8
    rank: int = 2
    components: int = 3
    mean_scale: float = 3.0
    noise: float = 0.1
    anomaly_scale: float = 2.0
    recurrent: bool = False

    def __post_init__(self):
        if not self.segments:
            raise ContractError("script needs at least one segment")
        for seg in self.segments:
            if seg.length < 1:
                raise ContractError("segment lengths must be positive")
            if not 0.0 <= seg.anomaly_rate < 0.5:
                raise ContractError("anomaly rate must lie in [0, 0.5)")
            if seg.style not in ("abrupt", "gradual", "incremental"):
                raise ContractError(f"unknown drift style {seg.style!r}")
        if not 1 <= self.rank <= self.dim:
            raise ContractError("rank must lie in [1, dim]")

    @property
    def schedule(self) -> tuple[Segment, ...]:
        return self.segments * 2 if self.recurrent else self.segments

    @property
    def length(self) -> int:
        return sum(s.length for s in self.schedule)

    def onsets(self) -> list[int]:
        """Stream indices where a new segment begins (excluding 0)."""
        out, t = [], 0
        for seg in self.schedule[:-1]:
            t += seg.length
            out.append(t)
        return out

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "DriftScript":
        d = dict(d)
        d["segments"] = tuple(Segment(**s) for s in d["segments"])
        return cls(**d)

    def digest(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def abrupt(cls, n_concepts: int = 4, length: int = 20000, anomaly_rate: float = 0.02,
               **kw) -> "DriftScript":
        seg = length // n_concepts
        lengths = [seg] * (n_concepts - 1) + [length - seg * (n_concepts - 1)]
        return cls(tuple(Segment(g, n, "abrupt", 0, anomaly_rate) for g, n in enumerate(lengths)), **kw)


@dataclass
class _Concept:
    center: np.ndarray  # (dim,)
    loading: np.ndarray  # (dim, rank)
    latent_means: np.ndarray  # (components, rank)
    latent_scale: np.ndarray  # (components, rank)

    @property
    def mean(self) -> np.ndarray:
        return self.center + self.loading @ self.latent_means.mean(axis=0)


def concept(script: DriftScript, generator: int, seed: int) -> _Concept:
    """Deterministic parameters of one concept; same ids give the same concept."""
    rng = np.random.default_rng([seed, generator, 7919])
    d, r = script.dim, script.rank
    # orthonormal loading columns scaled to unit per-feature variance
    q, _ = np.linalg.qr(rng.normal(size=(d, r)))
    return _Concept(
        center=rng.normal(0.0, script.mean_scale, size=d),
        loading=q * np.sqrt(d / r),
        latent_means=rng.normal(0.0, 0.5, size=(script.components, r)),
        latent_scale=rng.uniform(0.6, 0.9, size=(script.components, r)),
    )


def _sample(c: _Concept, script: DriftScript, rng: np.random.Generator, center=None) -> np.ndarray:
    k = rng.integers(len(c.latent_means))
    z = c.latent_means[k] + c.latent_scale[k] * rng.normal(size=script.rank)
    base = c.center if center is None else center
    return base + c.loading @ z + script.noise * rng.normal(size=script.dim)


def generate_drift_stream(script: DriftScript, seed: int = 0) -> list[Instance]:
    """Labelled synthetic stream following ``script``.

    Normals come from a low-rank Gaussian mixture per concept; anomalies are
    normals displaced by ``anomaly_scale`` in a random direction. Abrupt
    segments switch immediately; gradual ones draw from the new concept with a
    probability rising linearly over ``transition`` steps; incremental ones
    move the concept centre linearly over ``transition`` steps.
    """
    rng = np.random.default_rng(seed)
    rows, labels = [], []
    prev: _Concept | None = None
    for seg in script.schedule:
        cur = concept(script, seg.generator, seed)
        for i in range(seg.length):
            blend = 1.0
            if prev is not None and seg.style != "abrupt" and i < seg.transition:
                blend = (i + 1) / (seg.transition + 1)
            if seg.style == "gradual" and rng.random() > blend:
                source, center = prev, None
            elif seg.style == "incremental" and blend < 1.0:
                source, center = cur, prev.center + blend * (cur.center - prev.center)
            else:
                source, center = cur, None
            x = _sample(source, script, rng, center)
            is_anomaly = rng.random() < seg.anomaly_rate
            if is_anomaly:
                direction = rng.normal(size=script.dim)
                x = x + script.anomaly_scale * direction / np.linalg.norm(direction)
            rows.append(x)
            labels.append(int(is_anomaly))
        prev = cur
    return to_instances(np.array(rows), labels)
