"""
checkpoint.py

JSON checkpoint containers for the EDICT model and the classifier head.

{
  "format_version": 1,
  "kind": "edict" | "classifier",
  "dims": {...},                 # ModelDims, or hidden / n_classes / width
  "config": {...},               # echo of the training config
  "stats": {"mean": [...], "std": [...]} | null,
  "parameters": {name: {"shape": [...], "data": [...]}},
  "checksum": "<sha256 over names and float64 bytes>"
}

Floats are written with repr precision, so a save -> load round trip
reproduces every parameter bit for bit.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Optional, Union

import numpy as np

from edict.ingest.series import NormStats
from edict.model.classifier import ClassifierHead
from edict.model.dynamics import EdictModel, ModelDims
from edict.model.params import ParameterSet
from edict.numerics.autograd import Array

logger = logging.getLogger(__name__)

PathLike = Union[str, Path]
FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: ParameterSet
    config: Dict[str, Any] = field(default_factory=dict)
    stats: Optional[NormStats] = None


def _encode(params: ParameterSet) -> Dict[str, Any]:
    return {name: {"shape": list(arr.shape), "data": arr.data.reshape(-1).tolist()} for name, arr in params.parameters().items()}


def _decode(raw: Dict[str, Any]) -> Dict[str, Array]:
    return {
        name: Array(np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"]))
        for name, entry in raw.items()
    }


def _write(path: PathLike, payload: Dict[str, Any], overwrite: bool) -> Path:
    p = Path(path)
    if p.exists() and not overwrite:
        raise FileExistsError(f"Refusing to overwrite existing checkpoint: {p}")
    p.parent.mkdir(parents=True, exist_ok=True)
    p.write_text(json.dumps(payload, sort_keys=True) + "\n", encoding="utf-8")
    logger.info("wrote %s checkpoint to %s", payload["kind"], p)
    return p


def _read(path: PathLike, kind: str) -> Dict[str, Any]:
    p = Path(path)
    if not p.exists():
        raise FileNotFoundError(f"Missing required file: {p}")
    payload = json.loads(p.read_text(encoding="utf-8"))
    if payload.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"{p}: unsupported checkpoint format_version {payload.get('format_version')!r}")
    if payload.get("kind") != kind:
        raise ValueError(f"{p}: expected a {kind} checkpoint, found {payload.get('kind')!r}")
    return payload


def _verify(params: ParameterSet, payload: Dict[str, Any], path: PathLike) -> None:
    if params.checksum() != payload.get("checksum"):
        raise ValueError(f"{path}: parameter checksum mismatch")


def save_model(
    path: PathLike,
    model: EdictModel,
    config: Optional[Dict[str, Any]] = None,
    stats: Optional[NormStats] = None,
    overwrite: bool = False,
) -> Path:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "edict",
        "dims": model.dims.to_dict(),
        "config": dict(config or {}),
        "stats": stats.to_dict() if stats is not None else None,
        "parameters": _encode(model),
        "checksum": model.checksum(),
    }
    return _write(path, payload, overwrite)


def load_model(path: PathLike) -> Checkpoint:
    """Load a frozen EdictModel plus its config echo and normalization statistics."""
    payload = _read(path, "edict")
    model = EdictModel(ModelDims(**payload["dims"]), _decode(payload["parameters"]))
    _verify(model, payload, path)
    stats = NormStats.from_dict(payload["stats"]) if payload.get("stats") else None
    return Checkpoint(params=model, config=payload.get("config") or {}, stats=stats)


def save_classifier(
    path: PathLike, head: ClassifierHead, config: Optional[Dict[str, Any]] = None, overwrite: bool = False
) -> Path:
    payload = {
        "format_version": FORMAT_VERSION,
        "kind": "classifier",
        "dims": {"hidden": head.hidden, "n_classes": head.n_classes, "width": head.width},
        "config": dict(config or {}),
        "stats": None,
        "parameters": _encode(head),
        "checksum": head.checksum(),
    }
    return _write(path, payload, overwrite)


def load_classifier(path: PathLike) -> Checkpoint:
    payload = _read(path, "classifier")
    dims = payload["dims"]
    head = ClassifierHead(int(dims["hidden"]), int(dims["n_classes"]), _decode(payload["parameters"]))
    _verify(head, payload, path)
    return Checkpoint(params=head, config=payload.get("config") or {})
