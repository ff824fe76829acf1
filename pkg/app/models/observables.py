"""
Numeric parameter records: circuit angles and the two trainable observable families
"""
from dataclasses import dataclass, field

import numpy as np

from simulator.windows import QubitWindow
from utils.errors import InvalidValueError, ShapeError


def _finite(name: str, values: np.ndarray) -> None:
    if not np.all(np.isfinite(values)):
        raise InvalidValueError(f"{name} must contain only finite values")


@dataclass(frozen=True, eq=False)
class CircuitParams:
    """Variational angles theta, shape (L, n), layer-major, radians."""

    theta: np.ndarray

    def __post_init__(self):
        theta = np.array(self.theta, dtype=np.float64)
        if theta.ndim != 2:
            raise ShapeError(f"theta must be an (L, n) matrix, got shape {theta.shape}")
        _finite("theta", theta)
        theta.setflags(write=False)
        object.__setattr__(self, "theta", theta)

    @property
    def depth(self) -> int:
        return self.theta.shape[0]

    @property
    def n_qubits(self) -> int:
        return self.theta.shape[1]

    def check(self, depth: int, n: int) -> None:
        if self.theta.shape != (depth, n):
            raise ShapeError(f"theta shape {self.theta.shape} does not match (L, n) = ({depth}, {n})")


@dataclass(frozen=True, eq=False)
class DiagonalObservable:
    """Eigenvalues Lambda (length 2^k) measured on a qubit window."""

    eigenvalues: np.ndarray
    window: QubitWindow

    def __post_init__(self):
        values = np.array(self.eigenvalues, dtype=np.float64)
        if values.ndim != 1 or values.size != self.window.dim:
            raise ShapeError(
                f"{values.size} eigenvalues do not match window width k={self.window.k} (need {self.window.dim})"
            )
        _finite("eigenvalues", values)
        values.setflags(write=False)
        object.__setattr__(self, "eigenvalues", values)

    @property
    def k(self) -> int:
        return self.window.k


@dataclass(frozen=True, eq=False)
class DenseObservable:
    """
    Packed k-local Hermitian: real diagonal c_ii, upper-triangle real parts
    a_ij and imaginary parts b_ij (row-major over i < j).
    """

    diag: np.ndarray
    upper_re: np.ndarray
    upper_im: np.ndarray
    window: QubitWindow
    _matrix: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        dim = self.window.dim
        pairs = dim * (dim - 1) // 2
        arrays = {}
        for name, expected in (("diag", dim), ("upper_re", pairs), ("upper_im", pairs)):
            values = np.array(getattr(self, name), dtype=np.float64).reshape(-1)
            if values.size != expected:
                raise ShapeError(f"{name} has {values.size} entries, expected {expected} for K={dim}")
            _finite(name, values)
            values.setflags(write=False)
            arrays[name] = values
            object.__setattr__(self, name, values)
        matrix = np.zeros((dim, dim), dtype=np.complex128)
        rows, cols = np.triu_indices(dim, 1)
        matrix[np.arange(dim), np.arange(dim)] = arrays["diag"]
        matrix[rows, cols] = arrays["upper_re"] + 1j * arrays["upper_im"]
        matrix[cols, rows] = arrays["upper_re"] - 1j * arrays["upper_im"]
        matrix.setflags(write=False)
        object.__setattr__(self, "_matrix", matrix)

    @property
    def k(self) -> int:
        return self.window.k

    @property
    def dim(self) -> int:
        return self.window.dim

    @property
    def matrix(self) -> np.ndarray:
        """Unpacked Hermitian; M - M^dagger is exactly zero."""
        return self._matrix

    def packed(self) -> np.ndarray:
        """K^2 parameters in the order diag, upper_re, upper_im."""
        return np.concatenate([self.diag, self.upper_re, self.upper_im])

    @classmethod
    def from_packed(cls, packed: np.ndarray, window: QubitWindow) -> "DenseObservable":
        dim = window.dim
        packed = np.asarray(packed, dtype=np.float64).reshape(-1)
        if packed.size != dim * dim:
            raise ShapeError(f"packed Hermitian needs {dim * dim} values, got {packed.size}")
        pairs = dim * (dim - 1) // 2
        return cls(packed[:dim], packed[dim:dim + pairs], packed[dim + pairs:], window)
