"""
IDX reader for the MNIST image and label files.

Layout (big-endian): u32 magic, u32 count, then u32 rows and u32 cols for
images, followed by unsigned bytes stored row-wise.
"""
import logging
import struct
from pathlib import Path
from typing import Tuple, Union

import numpy as np

from utils.errors import FormatError, InvalidValueError

logger = logging.getLogger(__name__)

IMAGE_MAGIC = 0x00000803
LABEL_MAGIC = 0x00000801
MAX_LABEL = 9

PathLike = Union[str, Path]


def _read_u32(data: bytes, offset: int, path: PathLike) -> int:
    if offset + 4 > len(data):
        raise FormatError("truncated header field", offset=offset, path=str(path))
    (value,) = struct.unpack_from(">I", data, offset)
    return value


def parse_idx_images(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """N x rows x cols uint8 array from raw image-file bytes"""
    magic = _read_u32(data, 0, path)
    if magic != IMAGE_MAGIC:
        raise FormatError(f"bad image magic 0x{magic:08x}, expected 0x{IMAGE_MAGIC:08x}", offset=0, path=str(path))
    count = _read_u32(data, 4, path)
    rows = _read_u32(data, 8, path)
    cols = _read_u32(data, 12, path)
    body = 16
    needed = count * rows * cols
    if len(data) - body < needed:
        raise FormatError(
            f"image body holds {len(data) - body} bytes, header promises {needed}",
            offset=len(data), path=str(path),
        )
    pixels = np.frombuffer(data, dtype=np.uint8, count=needed, offset=body)
    return pixels.reshape(count, rows, cols).copy()


def parse_idx_labels(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """Length-N uint8 labels from raw label-file bytes"""
    magic = _read_u32(data, 0, path)
    if magic != LABEL_MAGIC:
        raise FormatError(f"bad label magic 0x{magic:08x}, expected 0x{LABEL_MAGIC:08x}", offset=0, path=str(path))
    count = _read_u32(data, 4, path)
    body = 8
    if len(data) - body < count:
        raise FormatError(
            f"label body holds {len(data) - body} bytes, header promises {count}",
            offset=len(data), path=str(path),
        )
    labels = np.frombuffer(data, dtype=np.uint8, count=count, offset=body).copy()
    bad = np.flatnonzero(labels > MAX_LABEL)
    if bad.size:
        raise InvalidValueError(f"label {labels[bad[0]]} at index {bad[0]} exceeds {MAX_LABEL} in {path}")
    return labels


def load_idx(images_path: PathLike, labels_path: PathLike) -> Tuple[np.ndarray, np.ndarray]:
    """
    Read an MNIST image/label file pair.

    Raises:
        FormatError: bad magic, truncated body or differing item counts
        InvalidValueError: a label byte above 9
    """
    images = parse_idx_images(Path(images_path).read_bytes(), images_path)
    labels = parse_idx_labels(Path(labels_path).read_bytes(), labels_path)
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels",
            offset=4, path=str(labels_path),
        )
    logger.info(f"Loaded {images.shape[0]} IDX images of {images.shape[1]}x{images.shape[2]} from {images_path}")
    return images, labels
