"""
Binary PGM (P5) reading and writing through Pillow
"""
import io
import logging
from pathlib import Path
from typing import Union

import numpy as np
from PIL import Image, UnidentifiedImageError

from utils.errors import FormatError, InvalidValueError, UnsupportedFormatError

logger = logging.getLogger(__name__)

PGM_MAGIC = b"P5"

PathLike = Union[str, Path]


def parse_pgm(data: bytes, path: PathLike = "<bytes>") -> np.ndarray:
    """H x W uint8 matrix from the bytes of a P5 file with maxval <= 255"""
    if data[:2] != PGM_MAGIC:
        raise FormatError(f"bad magic {data[:2]!r}, expected {PGM_MAGIC!r}", offset=0, path=str(path))
    try:
        image = Image.open(io.BytesIO(data))
        image.load()
    except UnidentifiedImageError as e:
        raise FormatError(f"unreadable PGM header: {e}", offset=2, path=str(path)) from e
    except (OSError, ValueError, SyntaxError) as e:
        raise FormatError(f"short or damaged PGM body: {e}", offset=len(data), path=str(path)) from e

    # 16-bit samples come back as I / I;16 modes
    if image.mode != "L":
        raise UnsupportedFormatError(
            f"PGM mode {image.mode} (maxval above 255) is not supported", offset=2, path=str(path),
        )
    return np.asarray(image, dtype=np.uint8).copy()


def load_pgm(path: PathLike) -> np.ndarray:
    """
    Read a P5 grayscale image; '#' comment lines in the header are skipped.

    Raises:
        FormatError: magic other than P5, unreadable header or short body
        UnsupportedFormatError: maxval above 255
    """
    return parse_pgm(Path(path).read_bytes(), path)


def write_pgm(path: PathLike, image: np.ndarray) -> Path:
    """Write a 2-D array as P5; float input is clipped to [0, 255] and rounded."""
    image = np.asarray(image)
    if image.ndim != 2:
        raise InvalidValueError(f"PGM output must be 2-D, got shape {image.shape}")
    if image.dtype != np.uint8:
        image = np.clip(np.rint(image), 0, 255).astype(np.uint8)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(image).save(path, format="PPM")
    logger.debug(f"Wrote {image.shape[1]}x{image.shape[0]} PGM to {path}")
    return path
