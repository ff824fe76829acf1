"""
Seeded train/val/test assignment
"""
import logging
from typing import Dict, Optional, Sequence

import numpy as np

from utils.errors import InvalidValueError
from utils.validation import ConfigValidator

logger = logging.getLogger(__name__)

TRAIN = "train"
VAL = "val"
TEST = "test"
SPLIT_NAMES = {2: (TRAIN, TEST), 3: (TRAIN, VAL, TEST)}


def _largest_remainder(total: int, fractions: np.ndarray) -> np.ndarray:
    exact = fractions * total
    counts = np.floor(exact).astype(np.int64)
    short = total - int(counts.sum())
    # Stable sort keeps earlier splits first on equal remainders
    order = np.argsort(-(exact - counts), kind="stable")
    counts[order[:short]] += 1
    return counts


def _split_counts(class_sizes: Dict[int, int], fractions: np.ndarray) -> Dict[int, np.ndarray]:
    """Per-class counts that sum to the global largest-remainder targets"""
    total = sum(class_sizes.values())
    targets = _largest_remainder(total, fractions)
    counts = {label: np.floor(fractions * size).astype(np.int64) for label, size in class_sizes.items()}
    assigned = sum(counts.values())

    for label in sorted(class_sizes):
        leftover = class_sizes[label] - int(counts[label].sum())
        used = np.zeros(len(fractions), dtype=bool)
        for _ in range(leftover):
            deficit = np.where(used | (fractions == 0), np.iinfo(np.int64).min, targets - assigned)
            pick = int(np.argmax(deficit))
            counts[label][pick] += 1
            assigned[pick] += 1
            used[pick] = True
    return counts


def stratified_split(labels: Sequence[int], fractions: Sequence[float], seed: int,
                     names: Optional[Sequence[str]] = None) -> np.ndarray:
    """
    Split tags per sample: every class is divided in proportion to fractions
    (within one sample), and the split sizes match the global proportional
    allocation exactly.

    Raises:
        InvalidValueError: fractions do not sum to 1, or a class has fewer
            samples than there are non-empty splits
    """
    labels = np.asarray(labels)
    if labels.size == 0:
        raise InvalidValueError("cannot split an empty label set")
    fractions = np.asarray(fractions, dtype=np.float64)
    ok, message = ConfigValidator.validate_fractions(fractions.tolist())
    if not ok:
        raise InvalidValueError(message)
    names = tuple(names) if names is not None else SPLIT_NAMES.get(fractions.size)
    if names is None or len(names) != fractions.size:
        raise InvalidValueError(f"need one split name per fraction, got {names} for {fractions.size}")

    classes, sizes = np.unique(labels, return_counts=True)
    needed = int(np.count_nonzero(fractions))
    small = [int(c) for c, size in zip(classes, sizes) if size < needed]
    if small:
        raise InvalidValueError(f"classes {small} have fewer samples than the {needed} splits")

    counts = _split_counts({int(c): int(s) for c, s in zip(classes, sizes)}, fractions)
    rng = np.random.default_rng(seed)
    tags = np.empty(labels.size, dtype=object)
    for label in sorted(counts):
        members = rng.permutation(np.flatnonzero(labels == label))
        bounds = np.concatenate([[0], np.cumsum(counts[label])])
        for index, name in enumerate(names):
            tags[members[bounds[index]:bounds[index + 1]]] = name

    summary = {name: int(np.count_nonzero(tags == name)) for name in names}
    logger.info(f"Stratified split of {labels.size} samples: {summary}")
    return tags.astype(str)


def random_split(n_samples: int, test_count: int, seed: int) -> np.ndarray:
    """Seeded shuffle; the first test_count shuffled samples are tagged test."""
    if not 0 < test_count < n_samples:
        raise InvalidValueError(f"test count {test_count} must lie strictly between 0 and {n_samples}")
    tags = np.full(n_samples, TRAIN, dtype=object)
    order = np.random.default_rng(seed).permutation(n_samples)
    tags[order[:test_count]] = TEST
    return tags.astype(str)
