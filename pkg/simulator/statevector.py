"""
Dense n-qubit statevector and the single-state gate / measurement operations.

Operations update the state in place and return it, so calls chain:
apply_cnot(apply_hadamard(new_zero_state(2), 1), 1, 2) is a Bell state.
"""
import math
from typing import Optional

import numpy as np

from simulator import kernels
from simulator.windows import QubitWindow
from utils.errors import CapacityError, InvalidValueError, QubitIndexError, ShapeError
from utils.settings import get_settings

NORM_TOL = 1e-12


class StateVector:
    """2^n complex amplitudes; qubit 1 is the most significant index bit."""

    __slots__ = ("n", "amps")

    def __init__(self, n: int, amps: np.ndarray):
        amps = np.ascontiguousarray(amps, dtype=np.complex128)
        if amps.shape != (1 << n,):
            raise ShapeError(f"expected {1 << n} amplitudes for n={n}, got shape {amps.shape}")
        self.n = n
        self.amps = amps

    def copy(self) -> "StateVector":
        return StateVector(self.n, self.amps.copy())

    def norm(self) -> float:
        return float(np.linalg.norm(self.amps))

    def __repr__(self) -> str:
        return f"StateVector(n={self.n}, norm={self.norm():.12f})"


def check_qubit_count(n: int, cap: Optional[int] = None) -> None:
    cap = get_settings().max_qubits if cap is None else cap
    if not 1 <= n <= cap:
        raise CapacityError(f"qubit count {n} outside 1..{cap} (cap {cap})", cap=cap)


def _check_qubit(s: StateVector, q: int) -> None:
    if not 1 <= q <= s.n:
        raise QubitIndexError(f"qubit {q} outside 1..{s.n}")


def new_zero_state(n: int) -> StateVector:
    """|0...0> on n qubits; CapacityError outside 1..max_qubits."""
    check_qubit_count(n)
    amps = np.zeros(1 << n, dtype=np.complex128)
    amps[0] = 1.0
    return StateVector(n, amps)


def from_amplitudes(amps: np.ndarray, normalize: bool = False) -> StateVector:
    """
    Wrap an existing amplitude vector (length must be a power of two).

    Raises:
        InvalidValueError: norm differs from 1 by more than NORM_TOL and
            normalize is False, or the vector is zero / non-finite
    """
    amps = np.asarray(amps, dtype=np.complex128)
    n = int(round(math.log2(amps.size))) if amps.size else 0
    if amps.ndim != 1 or amps.size < 2 or (1 << n) != amps.size:
        raise ShapeError(f"amplitude count {amps.size} is not 2^n with n >= 1")
    check_qubit_count(n)
    norm = float(np.linalg.norm(amps))
    if not math.isfinite(norm) or norm == 0.0:
        raise InvalidValueError(f"amplitudes must be finite and non-zero, got norm {norm!r}")
    if normalize:
        amps = amps / norm
    elif abs(norm - 1.0) > NORM_TOL:
        raise InvalidValueError(f"amplitudes have norm {norm:.15g}; pass normalize=True to rescale")
    return StateVector(n, amps)


def apply_hadamard(s: StateVector, q: int) -> StateVector:
    _check_qubit(s, q)
    kernels.apply_hadamard(s.amps, s.n, q)
    return s


def apply_ry(s: StateVector, q: int, angle: float) -> StateVector:
    _check_qubit(s, q)
    if not math.isfinite(angle):
        raise InvalidValueError(f"Ry angle must be finite, got {angle!r}")
    kernels.apply_ry(s.amps, s.n, q, angle)
    return s


def apply_cnot(s: StateVector, control: int, target: int) -> StateVector:
    _check_qubit(s, control)
    _check_qubit(s, target)
    if control == target:
        raise InvalidValueError(f"CNOT control and target must differ, both are {control}")
    kernels.apply_cnot(s.amps, s.n, control, target)
    return s


def marginal_probabilities(s: StateVector, w: QubitWindow) -> np.ndarray:
    """Length-2^k outcome distribution on the window; one pass over 2^n amplitudes."""
    w.check(s.n)
    return kernels.marginal_probabilities(s.amps, s.n, w.qubits)


def reduced_density_matrix(s: StateVector, w: QubitWindow) -> np.ndarray:
    """K x K density matrix of the window, O(2^(n+k))."""
    w.check(s.n)
    return kernels.reduced_density_matrix(s.amps, s.n, w.qubits)
