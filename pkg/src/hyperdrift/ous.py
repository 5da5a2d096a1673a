"""Offline updating: windowed uncertainty accumulation, triggers, snapshot swaps."""

from __future__ import annotations

import logging
import threading
from collections import deque
from dataclasses import dataclass, replace

import numpy as np

from hyperdrift.config import RunConfig
from hyperdrift.dsd import HyperNetwork, train_dsd
from hyperdrift.errors import ContractError, TrainingError
from hyperdrift.iec import ControllerModel, train_iec
from hyperdrift.scd import AutoencoderModel, train_scd

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Snapshot:
    """One published, immutable version of all detectors."""

    version: int
    scd: AutoencoderModel
    iec: ControllerModel | None
    dsd: HyperNetwork | None
    mu_e: float


class WindowState:
    """Sliding window of the last ``delta_l`` (instance, uncertainty) pairs.

    ``excess`` is the running sum of uncertainties above ``mu_e`` over the
    window. An update is due when it exceeds ``mu_o`` or when more than
    ``t_max`` steps have passed since the last update.
    """

    def __init__(self, delta_l: int, t_max: int, mu_e: float,
                 mu_o_fraction: float = 0.1, mu_o: float | None = None):
        if delta_l < 1:
            raise ContractError("window length must be >= 1")
        self.delta_l = delta_l
        self.t_max = t_max
        self.mu_o_fraction = mu_o_fraction
        self.mu_o_absolute = mu_o
        self.buffer: deque = deque()
        self.excess = 0.0
        self.dt = 0
        self._mu_e = float(mu_e)

    @classmethod
    def from_config(cls, config: RunConfig, mu_e: float) -> "WindowState":
        return cls(config.delta_l, config.effective_t_max, mu_e, config.mu_o_fraction, config.mu_o)

    @property
    def mu_e(self) -> float:
        return self._mu_e

    @mu_e.setter
    def mu_e(self, value: float) -> None:
        self._mu_e = float(value)
        self.excess = self.recompute()

    @property
    def mu_o(self) -> float:
        if self.mu_o_absolute is not None:
            return self.mu_o_absolute
        return self.mu_o_fraction * self.delta_l * self._mu_e

    def _contribution(self, u: float) -> float:
        return u if u > self._mu_e else 0.0

    def observe(self, x, u: float) -> bool:
        """Slide the window by one instance; return whether an update is due."""
        if u < 0:
            raise ContractError("uncertainty must be non-negative")
        self.buffer.append((x, u))
        self.excess += self._contribution(u)
        if len(self.buffer) > self.delta_l:
            _, old = self.buffer.popleft()
            self.excess -= self._contribution(old)
        self.dt += 1
        return self.triggered()

    def triggered(self) -> bool:
        return self.excess > self.mu_o or self.dt > self.t_max

    def recompute(self) -> float:
        return float(sum(self._contribution(u) for _, u in self.buffer))

    def data(self) -> np.ndarray:
        return np.array([x for x, _ in self.buffer])

    def uncertainties(self) -> np.ndarray:
        return np.array([u for _, u in self.buffer], dtype=np.float64)

    def reset(self) -> None:
        self.buffer.clear()
        self.excess = 0.0
        self.dt = 0


def update_mu_e(mu_e: float, window_uncertainties, beta: float = 0.9) -> float:
    """EMA of the gate towards the window's largest uncertainty."""
    u = np.asarray(window_uncertainties, dtype=np.float64)
    if u.size == 0:
        raise ContractError("window is empty")
    return float(beta * mu_e + (1.0 - beta) * u.max())


def update_models(snapshot: Snapshot, window_data, window_uncertainties, config: RunConfig,
                  rng: np.random.Generator | None = None, epochs: int | None = None) -> Snapshot:
    """Fine-tune every present detector on the window and return the next snapshot.

    The window replaces the training pool; training warm-starts from
    ``snapshot``. An empty window logs a warning and returns ``snapshot``.
    """
    x = np.asarray(window_data, dtype=np.float64)
    if x.size == 0:
        logger.warning("update requested with an empty window; keeping version %d", snapshot.version)
        return snapshot
    x = np.atleast_2d(x)
    rng = np.random.default_rng(config.seed + snapshot.version) if rng is None else rng
    n = config.finetune_epochs if epochs is None else epochs
    mu_e = update_mu_e(snapshot.mu_e, window_uncertainties, config.ema_beta)
    scd, iec, hyper = snapshot.scd, snapshot.iec, snapshot.dsd
    if n > 0:
        scd = train_scd(x, config, rng, init=scd, epochs=n)
        if iec is not None:
            try:
                iec = train_iec(scd, x, config, rng, init=iec, epochs=n, mu_e=mu_e)
            except TrainingError:
                # every window row is Unknown under the live gate: relabel from scratch
                iec = train_iec(scd, x, config, rng, init=iec, epochs=n, mu_e=mu_e, bootstrap=True)
        if hyper is not None:
            hyper, scd = train_dsd(scd, hyper, x, config, rng, epochs=n)
    return Snapshot(snapshot.version + 1, scd, iec, hyper, mu_e)


class SnapshotStore:
    """Single-writer / multi-reader holder of the current snapshot."""

    def __init__(self, snapshot: Snapshot):
        self._lock = threading.Lock()
        self._current = snapshot

    def get(self) -> Snapshot:
        with self._lock:
            return self._current

    def publish(self, snapshot: Snapshot) -> None:
        with self._lock:
            if snapshot.version <= self._current.version:
                raise ContractError(
                    f"version {snapshot.version} does not follow {self._current.version}")
            self._current = snapshot


class BackgroundUpdater:
    """Runs :func:`update_models` on one worker thread and publishes the result."""

    def __init__(self, store: SnapshotStore, config: RunConfig):
        self.store = store
        self.config = config
        self._thread: threading.Thread | None = None
        self.error: BaseException | None = None

    @property
    def busy(self) -> bool:
        return self._thread is not None and self._thread.is_alive()

    def submit(self, window_data, window_uncertainties) -> bool:
        if self.busy:
            return False
        base = self.store.get()

        def work():
            try:
                self.store.publish(update_models(base, window_data, window_uncertainties, self.config))
            except BaseException as exc:  # surfaced by join()
                self.error = exc

        self._thread = threading.Thread(target=work, name="hyperdrift-updater", daemon=True)
        self._thread.start()
        return True

    def join(self) -> None:
        if self._thread is not None:
            self._thread.join()
        if self.error is not None:
            raise self.error
