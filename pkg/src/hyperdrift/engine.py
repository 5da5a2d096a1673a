"""Two-stage training and streaming inference with routing and offline updates."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from hyperdrift.config import RunConfig
from hyperdrift.data import Instance, features_of
from hyperdrift.dsd import dynamic_errors, train_dsd
from hyperdrift.errors import ContractError, ShapeError
from hyperdrift.evaluation import trace_record
from hyperdrift.iec import train_iec, uncertainties
from hyperdrift.ous import BackgroundUpdater, Snapshot, SnapshotStore, WindowState, update_models
from hyperdrift.scd import AnomalyScore, ScoreSource, reconstruction_errors, train_scd

logger = logging.getLogger(__name__)

VARIANTS: dict[str, dict[str, bool]] = {
    "static": dict(use_iec=False, use_dsd=False, use_ous=False),
    "static+dynamic": dict(use_iec=False, use_dsd=True, use_ous=False),
    "no_iec": dict(use_iec=False, use_dsd=True, use_ous=True),
    "no_ous": dict(use_iec=True, use_dsd=True, use_ous=False),
    "full": dict(use_iec=True, use_dsd=True, use_ous=True),
}


def _matrix(stream) -> np.ndarray:
    # features only: labels stay out of every training and scoring path
    if len(stream) and isinstance(stream[0], Instance):
        return features_of(stream)
    x = np.asarray(stream, dtype=np.float64)
    if x.size == 0:
        return x.reshape(0, 0)
    return np.atleast_2d(x)


def train(history, config: RunConfig, known_labels=None) -> Snapshot:
    """Fit the static detector, then the controller and the hypernetwork.

    Returns snapshot version 1. The live gate ``mu_e`` is the largest training
    uncertainty unless ``config.mu_e`` is set. ``known_labels`` is read only
    when ``config.use_true_labels`` is on.
    """
    x = _matrix(history)
    if x.size == 0:
        raise ContractError("historical split is empty")
    rng = np.random.default_rng(config.seed)
    scd = train_scd(x, config, rng)
    iec = hyper = None
    if config.use_iec:
        labels = known_labels if config.use_true_labels else None
        iec = train_iec(scd, x, config, rng, known_labels=labels)
    if config.use_dsd:
        hyper, scd = train_dsd(scd, None, x, config, rng)
    if config.mu_e is not None:
        mu_e = config.mu_e
    elif iec is not None:
        mu_e = max(float(np.max(uncertainties(iec, x))), 1e-12)
    else:
        mu_e = config.label_mu_e
    return Snapshot(1, scd, iec, hyper, mu_e)


def apply_variant(snapshot: Snapshot, config: RunConfig, variant: str):
    """Restrict a fully trained snapshot and config to an ablation variant."""
    flags = VARIANTS[variant]
    cfg = config.replace(**flags)
    snap = Snapshot(snapshot.version, snapshot.scd,
                    snapshot.iec if flags["use_iec"] else None,
                    snapshot.dsd if flags["use_dsd"] else None, snapshot.mu_e)
    return snap, cfg


@dataclass(frozen=True)
class StreamDecision:
    t: int
    score: AnomalyScore
    uncertainty: float
    route: ScoreSource
    update_fired: bool
    version: int

    def to_record(self) -> dict:
        return trace_record(self.t, self.score.value, self.uncertainty, self.route.value,
                            self.update_fired, self.version)


class StreamRunner:
    """Scores a stream against the current snapshot and keeps the window.

    In ``"sync"`` mode an update runs inline at the trigger step, so the next
    step already sees the new snapshot. In ``"async"`` mode a background
    thread trains the next snapshot while scoring continues on the old one;
    each step reads exactly one snapshot.
    """

    def __init__(self, snapshot: Snapshot, config: RunConfig, mode: str = "sync"):
        if mode not in ("sync", "async"):
            raise ValueError(f"unknown mode {mode!r}")
        self.config = config
        self.mode = mode
        self.store = SnapshotStore(snapshot)
        self.window = WindowState.from_config(config, snapshot.mu_e)
        self.updater = BackgroundUpdater(self.store, config) if mode == "async" else None
        self.t = 0
        self.events: list[dict] = []
        self._pending: dict | None = None
        self._version = snapshot.version

    @property
    def snapshot(self) -> Snapshot:
        return self.store.get()

    def _adopt(self) -> Snapshot:
        snap = self.store.get()
        if snap.version != self._version:
            self._version = snap.version
            self.window.mu_e = snap.mu_e
            if self._pending is not None:
                self._pending.update(version=snap.version, mu_e_after=snap.mu_e)
                self.events.append(self._pending)
                self._pending = None
        return snap

    def _uncertainty(self, snap: Snapshot, x: np.ndarray) -> np.ndarray:
        if self.config.use_iec and snap.iec is not None:
            return uncertainties(snap.iec, x)
        return np.zeros(len(x))

    def _dynamic_mask(self, snap: Snapshot, u: np.ndarray) -> np.ndarray:
        if not (self.config.use_dsd and snap.dsd is not None):
            return np.zeros(len(u), dtype=bool)
        if self.config.use_iec and snap.iec is not None:
            return u > snap.mu_e
        return np.ones(len(u), dtype=bool)

    def _scores(self, snap: Snapshot, x: np.ndarray, dyn: np.ndarray) -> np.ndarray:
        out = np.empty(len(x))
        if (~dyn).any():
            out[~dyn] = reconstruction_errors(snap.scd, x[~dyn])
        if dyn.any():
            out[dyn] = dynamic_errors(snap.scd, snap.dsd, x[dyn])
        return out

    def _trigger(self, snap: Snapshot) -> bool:
        """Start an update from the current window; returns whether one was started."""
        data, u = self.window.data(), self.window.uncertainties()
        event = {"step": self.t, "S": self.window.excess, "mu_e_before": snap.mu_e}
        if self.mode == "sync":
            new = update_models(snap, data, u, self.config)
            if new is snap:
                return False
            self.store.publish(new)
            self._pending = event
            self._adopt()
        else:
            if not self.updater.submit(data, u):
                return False
            self._pending = event
        self.window.reset()
        return True

    def _decide(self, snap, x_row, u, dyn, score) -> StreamDecision:
        fired = False
        if self.config.use_ous and self.window.observe(x_row, u):
            fired = self._trigger(snap)
        route = ScoreSource.DYNAMIC if dyn else ScoreSource.STATIC
        d = StreamDecision(self.t, AnomalyScore(float(score), route), float(u), route, fired,
                           snap.version)
        self.t += 1
        return d

    def _check_dim(self, x: np.ndarray, snap: Snapshot) -> None:
        if x.ndim != 2 or x.shape[1] != snap.scd.input_dim:
            raise ShapeError(f"step {self.t}: instance has {x.shape[-1]} features, "
                             f"model expects {snap.scd.input_dim}")

    def step(self, x) -> StreamDecision:
        """Process one instance (reference path)."""
        snap = self._adopt()
        xm = np.atleast_2d(np.asarray(x, dtype=np.float64))
        self._check_dim(xm, snap)
        u = self._uncertainty(snap, xm)
        dyn = self._dynamic_mask(snap, u)
        return self._decide(snap, xm[0], u[0], dyn[0], self._scores(snap, xm, dyn)[0])

    def run(self, stream) -> list[StreamDecision]:
        """Process a whole stream in vectorised chunks.

        A chunk is cut right after any step that starts a synchronous update,
        so every step sees the same snapshot as in :meth:`step`.
        """
        x = _matrix(stream)
        n = len(x)
        chunk = self.config.chunk_size if self.mode == "sync" else min(self.config.chunk_size,
                                                                        self.config.delta_l)
        out: list[StreamDecision] = []
        i = 0
        while i < n:
            snap = self._adopt()
            xc = x[i:i + chunk]
            self._check_dim(xc, snap)
            u = self._uncertainty(snap, xc)
            dyn = self._dynamic_mask(snap, u)
            scores = self._scores(snap, xc, dyn)
            consumed = len(xc)
            for j in range(len(xc)):
                d = self._decide(snap, xc[j], u[j], dyn[j], scores[j])
                out.append(d)
                if d.update_fired and self.mode == "sync":
                    consumed = j + 1
                    break
            i += consumed
        return out

    def finish(self) -> Snapshot:
        """Wait for any background update and return the latest snapshot."""
        if self.updater is not None:
            self.updater.join()
        self._adopt()
        return self.store.get()


def step(runner: StreamRunner, x) -> StreamDecision:
    return runner.step(x)


def run_stream(snapshot: Snapshot, stream, config: RunConfig, mode: str = "sync"):
    """Score ``stream``; returns ``(decisions, final snapshot, update events)``."""
    runner = StreamRunner(snapshot, config, mode)
    decisions = runner.run(stream)
    final = runner.finish()
    return decisions, final, runner.events
