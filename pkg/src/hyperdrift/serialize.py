"""Snapshot files.

A snapshot is written as canonical JSON: sorted keys, fixed separators and
shortest round-trip float reprs. Equal snapshots therefore produce identical
bytes, and a reload restores every parameter bit for bit.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from hyperdrift.core.mlp import MlpSpec, ParameterSet
from hyperdrift.data import Standardizer
from hyperdrift.dsd import HyperNetwork, LayerGenerator, _FIELDS
from hyperdrift.errors import DataError
from hyperdrift.iec import ControllerModel
from hyperdrift.ous import Snapshot
from hyperdrift.scd import AutoencoderModel

FORMAT = "hyperdrift-snapshot"
FORMAT_VERSION = 1


def _array(a) -> dict:
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": [float(v) for v in a.ravel()]}


def _unarray(obj) -> np.ndarray:
    data = np.array(obj["data"], dtype=np.float64)
    return data.reshape(tuple(obj["shape"]))


def _mlp(spec: MlpSpec, params: ParameterSet) -> dict:
    return {
        "widths": list(spec.widths),
        "activations": [a.value for a in spec.activations],
        "layers": [{"weight": _array(l.weight), "bias": _array(l.bias)} for l in params.layers],
    }


def _unmlp(obj) -> tuple[MlpSpec, ParameterSet]:
    spec = MlpSpec(tuple(obj["widths"]), tuple(obj["activations"]))
    params = ParameterSet([(_unarray(l["weight"]), _unarray(l["bias"])) for l in obj["layers"]])
    return spec, params


def snapshot_to_dict(snapshot: Snapshot, transform: Standardizer | None = None) -> dict:
    out = {
        "format": FORMAT,
        "format_version": FORMAT_VERSION,
        "version": snapshot.version,
        "mu_e": float(snapshot.mu_e),
        "scd": dict(_mlp(snapshot.scd.spec, snapshot.scd.params), n_encoder=snapshot.scd.n_encoder),
        "iec": None if snapshot.iec is None else _mlp(snapshot.iec.spec, snapshot.iec.params),
        "dsd": None,
        "transform": None if transform is None else transform.to_dict(),
    }
    if snapshot.dsd is not None:
        out["dsd"] = {
            "share": _mlp(snapshot.dsd.share_spec, snapshot.dsd.share),
            "generators": [{f: _array(getattr(g, f)) for f in _FIELDS} for g in snapshot.dsd.generators],
        }
    return out


def snapshot_from_dict(obj: dict) -> tuple[Snapshot, Standardizer | None]:
    if obj.get("format") != FORMAT:
        raise DataError("not a snapshot file")
    if obj.get("format_version") != FORMAT_VERSION:
        raise DataError(f"unsupported snapshot format version {obj.get('format_version')}")
    try:
        spec, params = _unmlp(obj["scd"])
        scd = AutoencoderModel(spec, params, int(obj["scd"]["n_encoder"]))
        iec = None
        if obj["iec"] is not None:
            iec = ControllerModel(*_unmlp(obj["iec"]))
        dsd = None
        if obj["dsd"] is not None:
            share_spec, share = _unmlp(obj["dsd"]["share"])
            gens = tuple(
                LayerGenerator(*[_readonly(_unarray(g[f])) for f in _FIELDS])
                for g in obj["dsd"]["generators"]
            )
            dsd = HyperNetwork(share_spec, share, gens)
        transform = None if obj.get("transform") is None else Standardizer.from_dict(obj["transform"])
        snapshot = Snapshot(int(obj["version"]), scd, iec, dsd, float(obj["mu_e"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed snapshot: {exc}") from exc
    return snapshot, transform


def _readonly(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


def dumps(snapshot: Snapshot, transform: Standardizer | None = None) -> str:
    return json.dumps(snapshot_to_dict(snapshot, transform), sort_keys=True, separators=(",", ":"))


def loads(text: str) -> tuple[Snapshot, Standardizer | None]:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"snapshot is not valid JSON: {exc}") from exc
    return snapshot_from_dict(obj)


def save_snapshot(path, snapshot: Snapshot, transform: Standardizer | None = None) -> None:
    Path(path).write_text(dumps(snapshot, transform) + "\n")


def load_snapshot(path) -> tuple[Snapshot, Standardizer | None]:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise DataError(f"cannot read snapshot {path}: {exc}") from exc
    return loads(text)
