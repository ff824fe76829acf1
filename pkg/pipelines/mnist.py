"""
MNIST feature pipeline: first N samples, 7x7 average pooling to 4x4,
random train/test split, affine map onto [0, pi].
"""
import logging
from pathlib import Path
from typing import Union

import numpy as np

from pipelines.feature_set import FeatureSet
from pipelines.idx import load_idx
from pipelines.images import AngleScaler, avg_pool
from pipelines.splits import TRAIN, random_split
from storage.digest import file_digest
from utils.errors import InvalidValueError

logger = logging.getLogger(__name__)

DEFAULT_LIMIT = 10_000
DEFAULT_TEST_COUNT = 1_000
POOL_FACTOR = 7
N_CLASSES = 10

PathLike = Union[str, Path]


def build_mnist_features(images_path: PathLike, labels_path: PathLike, limit: int = DEFAULT_LIMIT,
                         test_count: int = DEFAULT_TEST_COUNT, seed: int = 0,
                         factor: int = POOL_FACTOR) -> FeatureSet:
    """
    Encode the first `limit` samples of an IDX pair as pooled angles.

    The scaler is fit on the training rows only; test rows are clamped to
    the same [0, pi] interval. There is no validation split.
    """
    images, labels = load_idx(images_path, labels_path)
    if limit < 1:
        raise InvalidValueError(f"sample limit must be positive, got {limit}")
    if images.shape[0] < limit:
        logger.warning(f"Only {images.shape[0]} samples available, fewer than the limit {limit}")
    images = images[:limit]
    labels = labels[:limit].astype(np.int64)

    pooled = avg_pool(images, factor).reshape(images.shape[0], -1)
    tags = random_split(pooled.shape[0], test_count, seed)
    scaler = AngleScaler.fit(pooled[tags == TRAIN], lo=0.0, hi=np.pi)
    features = scaler.transform(pooled)

    metadata = {
        "source": "mnist",
        "images_digest": file_digest(images_path),
        "labels_digest": file_digest(labels_path),
        "limit": int(images.shape[0]),
        "test_count": int(test_count),
        "seed": int(seed),
        "downsampling": f"average pooling {factor}x{factor}, divided by 255",
        "scaling": "train min/max mapped to [0, pi], others clamped",
    }
    logger.info(f"MNIST features: {features.shape[0]} rows x {features.shape[1]} angles")
    return FeatureSet(features, labels, tags, N_CLASSES, metadata)
