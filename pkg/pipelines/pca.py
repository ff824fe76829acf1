"""
Standardize-then-PCA for wide image matrices.

With D pixels far above N samples, the principal directions come from the
N x N Gram matrix: if G u = w u with G = X X^T, then X^T u is an eigenvector
of X^T X with the same eigenvalue.
"""
import logging
from dataclasses import dataclass
from enum import Enum

import numpy as np

from utils.errors import InvalidValueError, ShapeError

logger = logging.getLogger(__name__)

SIGMA_FLOOR = 1e-8
RANK_TOL = 1e-12


class PcaMethod(str, Enum):
    AUTO = "auto"
    GRAM = "gram"
    COVARIANCE = "covariance"


@dataclass(frozen=True, eq=False)
class PcaModel:
    """mean and scale have length D; components is d x D with orthonormal rows"""

    mean: np.ndarray
    scale: np.ndarray
    components: np.ndarray
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self) -> int:
        return self.components.shape[0]

    @property
    def n_features(self) -> int:
        return self.components.shape[1]


def standardize(X: np.ndarray):
    """Per-feature mean and population std (floored at SIGMA_FLOOR)"""
    mean = X.mean(axis=0)
    scale = np.maximum(X.std(axis=0), SIGMA_FLOOR)
    return mean, scale, (X - mean) / scale


def _fix_signs(components: np.ndarray) -> np.ndarray:
    # Largest-magnitude entry of every row positive
    pivots = np.argmax(np.abs(components), axis=1)
    signs = np.sign(components[np.arange(components.shape[0]), pivots])
    signs[signs == 0] = 1.0
    return components * signs[:, None]


def _top_gram(Xs: np.ndarray, d: int):
    gram = Xs @ Xs.T
    values, vectors = np.linalg.eigh(gram)
    order = np.argsort(values)[::-1][:d]
    values = values[order]
    directions = (Xs.T @ vectors[:, order]).T
    norms = np.linalg.norm(directions, axis=1)
    return values, directions, norms, float(np.trace(gram))


def _top_covariance(Xs: np.ndarray, d: int):
    scatter = Xs.T @ Xs
    values, vectors = np.linalg.eigh(scatter)
    order = np.argsort(values)[::-1][:d]
    directions = vectors[:, order].T
    return values[order], directions, np.linalg.norm(directions, axis=1), float(np.trace(scatter))


def pca_fit(X: np.ndarray, d: int = 16, method: PcaMethod = PcaMethod.AUTO) -> PcaModel:
    """
    Fit on the training matrix X (N x D): standardize, then keep the top-d
    principal directions.

    Raises:
        InvalidValueError: N < d, or fewer than d non-degenerate directions
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ShapeError(f"PCA input must be (N, D), got shape {X.shape}")
    n_samples, n_features = X.shape
    if d < 1 or n_samples < d or n_features < d:
        raise InvalidValueError(f"cannot extract d={d} components from {n_samples} samples x {n_features} features")

    mean, scale, Xs = standardize(X)
    method = PcaMethod(method)
    if method is PcaMethod.AUTO:
        method = PcaMethod.GRAM if n_features > n_samples else PcaMethod.COVARIANCE

    if method is PcaMethod.GRAM:
        values, directions, norms, total = _top_gram(Xs, d)
    else:
        values, directions, norms, total = _top_covariance(Xs, d)

    scale_tol = RANK_TOL * max(float(values[0]), 1.0)
    if np.any(values <= scale_tol) or np.any(norms == 0.0):
        raise InvalidValueError(f"data has fewer than d={d} non-degenerate principal directions")

    components = _fix_signs(directions / norms[:, None])
    ratios = values / total if total > 0 else np.zeros_like(values)
    logger.info(
        f"PCA ({method.value}) kept {d} of {n_features} dims, "
        f"explained variance {float(ratios.sum()):.4f}"
    )
    return PcaModel(mean=mean, scale=scale, components=components, explained_variance_ratio=ratios)


def pca_transform(model: PcaModel, X: np.ndarray) -> np.ndarray:
    """components . (x - mean) / scale for every row"""
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != model.n_features:
        raise ShapeError(f"{X.shape[-1]} features given, PCA model expects {model.n_features}")
    return ((X - model.mean) / model.scale) @ model.components.T


def pca_inverse(model: PcaModel, Z: np.ndarray) -> np.ndarray:
    """mean + scale * (components^T . z) for every row"""
    Z = np.asarray(Z, dtype=np.float64)
    if Z.shape[-1] != model.n_components:
        raise ShapeError(f"{Z.shape[-1]} coordinates given, PCA model has {model.n_components} components")
    return model.mean + model.scale * (Z @ model.components)
