"""
Image downsampling and the affine map from features to rotation angles
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np

from utils.errors import InvalidValueError, ShapeError

logger = logging.getLogger(__name__)


def avg_pool(image: np.ndarray, factor: int = 7) -> np.ndarray:
    """
    Mean of each factor x factor block, divided by 255. Works on one image
    (H, W) or a stack (N, H, W).
    """
    image = np.asarray(image)
    if image.ndim not in (2, 3):
        raise ShapeError(f"expected (H, W) or (N, H, W) pixels, got shape {image.shape}")
    height, width = image.shape[-2:]
    if factor < 1 or height % factor or width % factor:
        raise InvalidValueError(f"image {height}x{width} is not divisible by pooling factor {factor}")
    blocks = image.astype(np.float64).reshape(
        image.shape[:-2] + (height // factor, factor, width // factor, factor)
    )
    return blocks.mean(axis=(-3, -1)) / 255.0


@dataclass(frozen=True, eq=False)
class AngleScaler:
    """Per-feature min/max of the training split and the target interval"""

    minimum: np.ndarray
    maximum: np.ndarray
    lo: float
    hi: float

    @classmethod
    def fit(cls, train: np.ndarray, lo: float = -np.pi, hi: float = np.pi) -> "AngleScaler":
        train = np.asarray(train, dtype=np.float64)
        if train.ndim != 2 or train.shape[0] == 0:
            raise ShapeError(f"scaler needs a non-empty (N, d) matrix, got shape {train.shape}")
        if not np.all(np.isfinite(train)):
            raise InvalidValueError("features must be finite before rescaling")
        if not lo < hi:
            raise InvalidValueError(f"target interval [{lo}, {hi}] is empty")
        scaler = cls(train.min(axis=0), train.max(axis=0), float(lo), float(hi))
        constant = np.flatnonzero(scaler.constant_features)
        if constant.size:
            logger.warning(f"Constant features {constant.tolist()} map to 0")
        return scaler

    @property
    def constant_features(self) -> np.ndarray:
        return self.maximum == self.minimum

    def transform(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.shape[-1] != self.minimum.size:
            raise ShapeError(f"{X.shape[-1]} features given, scaler was fit on {self.minimum.size}")
        if not np.all(np.isfinite(X)):
            raise InvalidValueError("features must be finite before rescaling")
        span = np.where(self.constant_features, 1.0, self.maximum - self.minimum)
        mapped = self.lo + (X - self.minimum) * ((self.hi - self.lo) / span)
        mapped = np.clip(mapped, self.lo, self.hi)
        return np.where(self.constant_features, 0.0, mapped)


def rescale_to_angles(features: np.ndarray, lo: float = -np.pi, hi: float = np.pi,
                      reference: Optional[np.ndarray] = None) -> np.ndarray:
    """
    Map each feature linearly so the reference rows' min/max land on lo/hi.
    reference defaults to features itself; values outside the reference range
    are clamped, constant features become 0.
    """
    scaler = AngleScaler.fit(features if reference is None else reference, lo, hi)
    return scaler.transform(features)
