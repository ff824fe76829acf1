"""
Encoded datasets and their cache file.

Cache layout (UTF-8 text):

    # dano-featureset 1
    # {"format_version": 1, "n_classes": 10, "n_features": 16, "rows": 1980, "metadata": {...}}
    tag,label,f1,...,fd
    train,3,-1.2345678901234567,...

Floats are written with 17 significant digits so a load reproduces the
arrays exactly.
"""
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, ValidationError

from pipelines.splits import TEST, TRAIN, VAL
from utils.errors import FormatError, InvalidValueError, ShapeError

logger = logging.getLogger(__name__)

MAGIC_LINE = "# dano-featureset 1"
FORMAT_VERSION = 1
ANGLE_SLACK = 1e-9

PathLike = Union[str, Path]


class FeatureSetHeader(BaseModel):
    model_config = ConfigDict(extra="forbid")

    format_version: int = FORMAT_VERSION
    n_classes: int = Field(ge=2)
    n_features: int = Field(ge=1)
    rows: int = Field(ge=0)
    metadata: Dict[str, Any] = Field(default_factory=dict)


@dataclass(eq=False)
class Split:
    X: np.ndarray
    y: np.ndarray

    @property
    def size(self) -> int:
        return int(self.y.size)


@dataclass(eq=False)
class FeatureSet:
    """Angle-encoded rows with class labels and a split tag per row"""

    features: np.ndarray
    labels: np.ndarray
    tags: np.ndarray
    n_classes: int
    metadata: Dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.tags = np.asarray(self.tags).astype(str)
        if self.features.ndim != 2:
            raise ShapeError(f"features must be (N, d), got shape {self.features.shape}")
        rows = self.features.shape[0]
        if self.labels.shape != (rows,) or self.tags.shape != (rows,):
            raise ShapeError(
                f"{rows} feature rows but labels {self.labels.shape} and tags {self.tags.shape}"
            )
        self.check()

    def check(self) -> None:
        if not np.all(np.isfinite(self.features)):
            raise InvalidValueError("features must be finite")
        if np.any(np.abs(self.features) > np.pi + ANGLE_SLACK):
            raise InvalidValueError("features must lie in [-pi, pi]")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.n_classes):
            raise InvalidValueError(f"labels must lie in 0..{self.n_classes - 1}")
        unknown = set(np.unique(self.tags)) - {TRAIN, VAL, TEST}
        if unknown:
            raise InvalidValueError(f"unknown split tags {sorted(unknown)}")

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def has_split(self, tag: str) -> bool:
        return bool(np.any(self.tags == tag))

    def split(self, tag: str) -> Split:
        mask = self.tags == tag
        return Split(self.features[mask], self.labels[mask])

    def split_sizes(self) -> Dict[str, int]:
        return {tag: int(np.count_nonzero(self.tags == tag)) for tag in (TRAIN, VAL, TEST)}


def _format_row(tag: str, label: int, values: np.ndarray) -> str:
    return ",".join([tag, str(int(label))] + [format(float(v), ".17g") for v in values])


def render_feature_set(fs: FeatureSet) -> str:
    header = FeatureSetHeader(
        n_classes=fs.n_classes, n_features=fs.n_features, rows=fs.labels.size, metadata=fs.metadata,
    )
    columns = ",".join(["tag", "label"] + [f"f{i}" for i in range(1, fs.n_features + 1)])
    lines = [MAGIC_LINE, "# " + header.model_dump_json(), columns]
    lines.extend(_format_row(t, y, x) for t, y, x in zip(fs.tags, fs.labels, fs.features))
    return "\n".join(lines) + "\n"


def save_feature_set(fs: FeatureSet, path: PathLike) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_feature_set(fs), encoding="utf-8")
    logger.info(f"Wrote feature set ({fs.labels.size} rows, sizes {fs.split_sizes()}) to {path}")
    return path


def parse_feature_set(text: str, path: PathLike = "<text>") -> FeatureSet:
    lines = text.splitlines()
    if len(lines) < 3 or lines[0] != MAGIC_LINE:
        raise FormatError("missing feature-set magic line", offset=0, path=str(path))
    if not lines[1].startswith("# "):
        raise FormatError("missing feature-set header", offset=len(lines[0]) + 1, path=str(path))
    try:
        header = FeatureSetHeader.model_validate_json(lines[1][2:])
    except ValidationError as e:
        raise FormatError(f"invalid feature-set header: {e.errors()[0]['msg']}", path=str(path)) from e

    body: List[str] = [line for line in lines[3:] if line]
    if len(body) != header.rows:
        raise FormatError(f"header promises {header.rows} rows, file has {len(body)}", path=str(path))
    features = np.zeros((header.rows, header.n_features))
    labels = np.zeros(header.rows, dtype=np.int64)
    tags = []
    for index, line in enumerate(body):
        cells = line.split(",")
        if len(cells) != header.n_features + 2:
            raise FormatError(f"row {index + 1} has {len(cells)} cells, expected {header.n_features + 2}",
                              path=str(path))
        try:
            labels[index] = int(cells[1])
            features[index] = [float(c) for c in cells[2:]]
        except ValueError as e:
            raise FormatError(f"row {index + 1}: {e}", path=str(path)) from e
        tags.append(cells[0])
    return FeatureSet(features, labels, np.array(tags), header.n_classes, header.metadata)


def load_feature_set(path: PathLike) -> FeatureSet:
    fs = parse_feature_set(Path(path).read_text(encoding="utf-8"), path)
    logger.info(f"Loaded feature set from {path}: {fs.split_sizes()}")
    return fs
