"""
Versioned checkpoint documents.

A checkpoint is one JSON object:

    {
      "format": "dano-checkpoint",
      "format_version": 1,
      "config": {"n_qubits": 16, "locality": 4, "depth": 6, "mode": "dano", ...},
      "epoch": 30, "step": 1500, "rng_seed": 0,
      "layout": [{"name": "theta", "shape": [6, 16]}, {"name": "lambda", "shape": [16, 16]}],
      "params": ["-1.2345678901234567", ...],
      "adam_m": [...], "adam_v": [...],
      "frozen": [0, 1, ...],
      "metadata": {...}
    }

Arrays are flattened row-major in layout order. Every float is a decimal
string with 17 significant digits, so loading restores the exact doubles.
"frozen" lists the indices of frozen parameters.
"""
import logging
from pathlib import Path
from typing import Dict, List, Literal, Union

import numpy as np
from pydantic import BaseModel, ValidationError

from app.models.config_models import ModelConfig
from services.optimizer import ParamLayout, TrainState
from utils.errors import FormatError, ShapeError, UnsupportedFormatError

logger = logging.getLogger(__name__)

FORMAT_NAME = "dano-checkpoint"
FORMAT_VERSION = 1

PathLike = Union[str, Path]


class LayoutBlock(BaseModel):
    name: str
    shape: List[int]


class CheckpointDocument(BaseModel):
    format: Literal["dano-checkpoint"] = FORMAT_NAME
    format_version: int = FORMAT_VERSION
    config: Dict[str, Union[int, str, None]]
    epoch: int
    step: int
    rng_seed: int
    layout: List[LayoutBlock]
    params: List[str]
    adam_m: List[str]
    adam_v: List[str]
    frozen: List[int]
    metadata: Dict[str, str] = {}


def _encode(values: np.ndarray) -> List[str]:
    return [format(float(v), ".17g") for v in values]


def _decode(values: List[str], name: str) -> np.ndarray:
    try:
        return np.array([float(v) for v in values], dtype=np.float64)
    except ValueError as e:
        raise FormatError(f"checkpoint field {name!r}: {e}") from e


def to_document(ts: TrainState) -> CheckpointDocument:
    return CheckpointDocument(
        config=ts.cfg.model_dump(mode="json"),
        epoch=ts.epoch,
        step=ts.step,
        rng_seed=ts.rng_seed,
        layout=[LayoutBlock(name=name, shape=list(shape)) for name, shape in ts.layout.blocks],
        params=_encode(ts.params),
        adam_m=_encode(ts.adam_m),
        adam_v=_encode(ts.adam_v),
        frozen=np.flatnonzero(ts.frozen_mask).tolist(),
        metadata=dict(ts.metadata),
    )


def from_document(doc: CheckpointDocument) -> TrainState:
    if doc.format_version != FORMAT_VERSION:
        raise UnsupportedFormatError(f"checkpoint format version {doc.format_version}, this build reads {FORMAT_VERSION}")
    cfg = ModelConfig.model_validate(doc.config)
    layout = ParamLayout(tuple((block.name, tuple(block.shape)) for block in doc.layout))
    expected = ParamLayout.for_config(cfg)
    if layout != expected:
        raise ShapeError(f"checkpoint layout {layout.blocks} does not match its config ({expected.blocks})")
    frozen = np.zeros(layout.size, dtype=bool)
    if doc.frozen and (min(doc.frozen) < 0 or max(doc.frozen) >= layout.size):
        raise FormatError(f"frozen index outside 0..{layout.size - 1}")
    frozen[doc.frozen] = True
    return TrainState(
        cfg=cfg,
        layout=layout,
        params=_decode(doc.params, "params"),
        adam_m=_decode(doc.adam_m, "adam_m"),
        adam_v=_decode(doc.adam_v, "adam_v"),
        frozen_mask=frozen,
        step=doc.step,
        epoch=doc.epoch,
        rng_seed=doc.rng_seed,
        metadata=dict(doc.metadata),
    )


def dumps_checkpoint(ts: TrainState) -> str:
    return to_document(ts).model_dump_json(indent=1) + "\n"


def loads_checkpoint(text: str, path: PathLike = "<text>") -> TrainState:
    try:
        doc = CheckpointDocument.model_validate_json(text)
    except ValidationError as e:
        first = e.errors()[0]
        location = ".".join(str(part) for part in first["loc"])
        raise FormatError(f"invalid checkpoint ({location}: {first['msg']})", path=str(path)) from e
    return from_document(doc)


def save_checkpoint(ts: TrainState, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    # Readers only ever see a complete file
    partial = path.with_suffix(path.suffix + ".tmp")
    partial.write_text(dumps_checkpoint(ts), encoding="utf-8")
    partial.replace(path)
    logger.debug(f"Saved checkpoint epoch {ts.epoch} to {path}")
    return path


def load_checkpoint(path: PathLike) -> TrainState:
    return loads_checkpoint(Path(path).read_text(encoding="utf-8"), path)
