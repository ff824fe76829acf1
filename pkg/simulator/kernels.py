"""
Batched statevector kernels.

Every kernel takes an amplitude array of shape (*batch, 2**n) and updates it
in place. A gate on qubit q pairs amplitudes whose indices differ only in bit
(n - q); reshaping to (*batch, 2**(q-1), 2, 2**(n-q)) exposes that pairing as
a stride-2 axis without copying.
"""
from typing import Tuple, Union

import numpy as np

from simulator.windows import window_axes

Angle = Union[float, np.ndarray]

HADAMARD = np.array([[1.0, 1.0], [1.0, -1.0]]) / np.sqrt(2.0)


def _require_contiguous(amps: np.ndarray) -> None:
    # reshape of a non-contiguous array copies and the in-place update would be lost
    if not amps.flags.c_contiguous:
        raise ValueError("amplitude array must be C-contiguous")


def _pair_view(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    _require_contiguous(amps)
    left = 1 << (q - 1)
    right = 1 << (n - q)
    return amps.reshape(amps.shape[:-1] + (left, 2, right))


def apply_matrix_1q(amps: np.ndarray, n: int, q: int, gate: np.ndarray) -> np.ndarray:
    """Apply a 2x2 gate, or a (*batch, 2, 2) stack of gates, on qubit q."""
    view = _pair_view(amps, n, q)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    gate = np.asarray(gate)
    if gate.ndim == 2:
        g00, g01, g10, g11 = gate[0, 0], gate[0, 1], gate[1, 0], gate[1, 1]
    else:
        g00, g01, g10, g11 = (gate[..., i, j][..., None, None] for i, j in ((0, 0), (0, 1), (1, 0), (1, 1)))
    new0 = g00 * a0 + g01 * a1
    view[..., 1, :] = g10 * a0 + g11 * a1
    view[..., 0, :] = new0
    return amps


def apply_hadamard(amps: np.ndarray, n: int, q: int) -> np.ndarray:
    view = _pair_view(amps, n, q)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    view[..., 0, :] = (a0 + a1) * HADAMARD[0, 0]
    view[..., 1, :] = (a0 - a1) * HADAMARD[0, 0]
    return amps


def apply_ry(amps: np.ndarray, n: int, q: int, angle: Angle, scale: float = 1.0) -> np.ndarray:
    """
    Ry(phi) = [[cos phi/2, -sin phi/2], [sin phi/2, cos phi/2]] on qubit q.
    angle may be a scalar or one angle per batch entry; scale multiplies the
    gate (the adjoint sweep uses 0.5 * Ry(phi + pi) as dRy/dphi).
    """
    angle = np.asarray(angle, dtype=np.float64)
    c = scale * np.cos(angle / 2.0)
    s = scale * np.sin(angle / 2.0)
    if angle.ndim:
        c = c[..., None, None]
        s = s[..., None, None]
    view = _pair_view(amps, n, q)
    a0 = view[..., 0, :].copy()
    a1 = view[..., 1, :]
    new0 = c * a0 - s * a1
    view[..., 1, :] = s * a0 + c * a1
    view[..., 0, :] = new0
    return amps


def _cnot_slices(batch_ndim: int, n: int, control: int, target: int, target_bit: int) -> Tuple:
    index = [slice(None)] * n
    index[control - 1] = 1
    index[target - 1] = target_bit
    return (slice(None),) * batch_ndim + tuple(index)


def apply_cnot(amps: np.ndarray, n: int, control: int, target: int) -> np.ndarray:
    """Flip the target bit of every basis state whose control bit is 1."""
    _require_contiguous(amps)
    batch_ndim = amps.ndim - 1
    tensor = amps.reshape(amps.shape[:-1] + (2,) * n)
    flip0 = _cnot_slices(batch_ndim, n, control, target, 0)
    flip1 = _cnot_slices(batch_ndim, n, control, target, 1)
    held = tensor[flip0].copy()
    tensor[flip0] = tensor[flip1]
    tensor[flip1] = held
    return amps


def marginal_probabilities(amps: np.ndarray, n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """
    Probabilities of the window's basis outcomes, window order, first window
    qubit most significant. Shape (*batch, 2**k).
    """
    batch = amps.shape[:-1]
    nb = len(batch)
    probs = (amps.real ** 2 + amps.imag ** 2).reshape(batch + (2,) * n)
    window, rest = window_axes(n, qubits)
    summed = probs.sum(axis=tuple(nb + axis for axis in rest)) if rest else probs
    # Summation leaves the window axes in ascending qubit order
    ascending = sorted(window)
    order = [nb + ascending.index(axis) for axis in window]
    summed = summed.transpose(tuple(range(nb)) + tuple(order))
    return summed.reshape(batch + (1 << len(qubits),))


def window_matrix_view(amps: np.ndarray, n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """Amplitudes regrouped as (*batch, 2**k, 2**(n-k)): window index x rest index (copy)."""
    batch = amps.shape[:-1]
    nb = len(batch)
    window, rest = window_axes(n, qubits)
    tensor = amps.reshape(batch + (2,) * n)
    perm = tuple(range(nb)) + tuple(nb + a for a in window) + tuple(nb + a for a in rest)
    k = len(qubits)
    return tensor.transpose(perm).reshape(batch + (1 << k, 1 << (n - k)))


def from_window_matrix(grouped: np.ndarray, n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """Inverse of window_matrix_view."""
    batch = grouped.shape[:-2]
    nb = len(batch)
    window, rest = window_axes(n, qubits)
    tensor = grouped.reshape(batch + (2,) * n)
    axes = window + rest
    inverse = [0] * n
    for position, axis in enumerate(axes):
        inverse[axis] = position
    perm = tuple(range(nb)) + tuple(nb + p for p in inverse)
    return np.ascontiguousarray(tensor.transpose(perm)).reshape(batch + (1 << n,))


def reduced_density_matrix(amps: np.ndarray, n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """Partial trace over the qubits outside the window; shape (*batch, K, K)."""
    grouped = window_matrix_view(amps, n, qubits)
    return grouped @ np.conj(np.swapaxes(grouped, -1, -2))


def apply_klocal(amps: np.ndarray, n: int, qubits: Tuple[int, ...], matrix: np.ndarray) -> np.ndarray:
    """Return (matrix on window) x (identity elsewhere) applied to amps, as a new array."""
    grouped = window_matrix_view(amps, n, qubits)
    return from_window_matrix(matrix @ grouped, n, qubits)
