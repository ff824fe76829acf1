"""
Brute-force dense-matrix references.

Everything here builds explicit 2^n x 2^n matrices from Kronecker products,
so it is capped at settings.oracle_max_qubits and only used by tests and the
verify command.
"""
import logging
from dataclasses import dataclass
from functools import reduce
from typing import List, Optional, Sequence, Tuple

import numpy as np

from app.models.config_models import ModelConfig
from app.models.observables import CircuitParams, DiagonalObservable
from services.circuit import Observable, entangling_pairs, resolve_observables
from simulator.kernels import HADAMARD
from simulator.windows import QubitWindow, window_axes
from utils.errors import CapacityError, InvalidValueError, NumericalError, ShapeError
from utils.settings import get_settings

logger = logging.getLogger(__name__)

HERMITIAN_TOL = 1e-10
UNITARY_TOL = 1e-10
BOUND_SLACK = 1e-9


def check_oracle_size(n: int) -> None:
    cap = get_settings().oracle_max_qubits
    if not 1 <= n <= cap:
        raise CapacityError(f"dense oracle supports 1..{cap} qubits, got n={n}", cap=cap)


def ry_matrix(angle: float) -> np.ndarray:
    c, s = np.cos(angle / 2.0), np.sin(angle / 2.0)
    return np.array([[c, -s], [s, c]], dtype=np.complex128)


def gate_on(gate: np.ndarray, q: int, n: int) -> np.ndarray:
    """I_(2^(q-1)) (x) gate (x) I_(2^(n-q))"""
    return np.kron(np.kron(np.eye(1 << (q - 1)), gate), np.eye(1 << (n - q)))


def layer_of(gates: Sequence[np.ndarray]) -> np.ndarray:
    """gates[0] (x) gates[1] (x) ... with qubit 1 leftmost"""
    return reduce(np.kron, gates, np.ones((1, 1), dtype=np.complex128))


def cnot_matrix(n: int, control: int, target: int) -> np.ndarray:
    """Permutation matrix flipping the target bit where the control bit is 1"""
    dim = 1 << n
    source = np.arange(dim)
    flipped = np.where((source >> (n - control)) & 1, source ^ (1 << (n - target)), source)
    matrix = np.zeros((dim, dim), dtype=np.complex128)
    matrix[flipped, source] = 1.0
    return matrix


def dense_circuit_matrix(x: np.ndarray, p: CircuitParams, cfg: ModelConfig) -> np.ndarray:
    """U(theta) V(x) as an explicit matrix; column 0 is the prepared state."""
    n = cfg.n_qubits
    check_oracle_size(n)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (n,):
        raise ShapeError(f"input has shape {x.shape}, expected ({n},)")
    p.check(cfg.depth, n)

    encoder = layer_of([ry_matrix(a) for a in x]) @ layer_of([HADAMARD] * n)
    even, odd = entangling_pairs(n)
    entangler = np.eye(1 << n, dtype=np.complex128)
    for control, target in even + odd:
        entangler = cnot_matrix(n, control, target) @ entangler
    circuit = np.eye(1 << n, dtype=np.complex128)
    for angles in p.theta:
        circuit = layer_of([ry_matrix(a) for a in angles]) @ entangler @ circuit
    return circuit @ encoder


def check_hermitian(H: np.ndarray, tol: float = HERMITIAN_TOL) -> None:
    H = np.asarray(H)
    if H.ndim != 2 or H.shape[0] != H.shape[1]:
        raise ShapeError(f"expected a square matrix, got shape {H.shape}")
    deviation = float(np.max(np.abs(H - H.conj().T))) if H.size else 0.0
    if deviation > tol:
        raise InvalidValueError(f"matrix is not Hermitian (max |H - H^dagger| = {deviation:.3e})")


def dense_expectation(x: np.ndarray, p: CircuitParams, H_full: np.ndarray, cfg: ModelConfig) -> float:
    """<0| V^dagger U^dagger H U V |0> as a literal sandwich product"""
    check_hermitian(H_full)
    if H_full.shape != (1 << cfg.n_qubits,) * 2:
        raise ShapeError(f"observable is {H_full.shape}, circuit acts on {1 << cfg.n_qubits} amplitudes")
    psi = dense_circuit_matrix(x, p, cfg)[:, 0]
    value = np.vdot(psi, H_full @ psi)
    if abs(value.imag) >= HERMITIAN_TOL:
        raise NumericalError("expectation of a Hermitian matrix came out complex", residual=abs(value.imag))
    return float(value.real)


def window_first_order(n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """perm[i] = index of standard basis state i when the window qubits are moved to the front"""
    window, rest = window_axes(n, qubits)
    basis = np.arange(1 << n)
    perm = np.zeros(1 << n, dtype=np.int64)
    for axis in window + rest:
        perm = (perm << 1) | ((basis >> (n - 1 - axis)) & 1)
    return perm


def embed_klocal(H_local: np.ndarray, w: QubitWindow, n: int) -> np.ndarray:
    """H_local on the window qubits (window order), identity elsewhere"""
    check_oracle_size(n)
    w.check(n)
    H_local = np.asarray(H_local, dtype=np.complex128)
    if H_local.shape != (w.dim, w.dim):
        raise ShapeError(f"local matrix is {H_local.shape}, window of k={w.k} needs {w.dim}x{w.dim}")
    window_first = np.kron(H_local, np.eye(1 << (n - w.k)))
    perm = window_first_order(n, w.qubits)
    return window_first[np.ix_(perm, perm)]


def observable_matrix(obs: Observable, n: int) -> np.ndarray:
    """Full 2^n x 2^n matrix of a windowed observable"""
    if isinstance(obs, DiagonalObservable):
        return embed_klocal(np.diag(obs.eigenvalues), obs.window, n)
    return embed_klocal(obs.matrix, obs.window, n)


def dense_forward(x: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]],
                  cfg: ModelConfig) -> np.ndarray:
    """Output vector z computed through explicit matrices"""
    return np.array([
        dense_expectation(x, p, observable_matrix(o, cfg.n_qubits), cfg)
        for o in resolve_observables(cfg, obs)
    ])


def spectral_norm(M: np.ndarray, tol: float = 1e-10, max_iter: int = 10_000, block: int = 8) -> float:
    """
    Largest singular value by block power iteration on M^dagger M.

    Each step multiplies an orthonormal block of `block` vectors by M^dagger M,
    re-orthonormalises it and takes the top Ritz value of the projected Gram
    matrix. The top value then converges at rate (s_(block+1) / s_1)^2 per
    step, so clusters of up to `block` nearly equal singular values do not
    stall it; with block >= the column count the first Ritz value is exact.

    Raises:
        NumericalError: relative change of the estimate still above tol after max_iter steps
    """
    M = np.asarray(M, dtype=np.complex128)
    if M.ndim != 2:
        raise ShapeError(f"expected a matrix, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise InvalidValueError("matrix entries must be finite")
    if block < 1:
        raise InvalidValueError(f"block size must be positive, got {block}")
    if M.size == 0 or not np.any(M):
        return 0.0

    gram = M.conj().T @ M
    dim = gram.shape[0]
    width = min(block, dim)
    # Fixed start keeps the result reproducible
    rng = np.random.default_rng(0)
    Q, _ = np.linalg.qr(rng.standard_normal((dim, width)) + 1j * rng.standard_normal((dim, width)))
    estimate = None
    residual = np.inf
    for _ in range(max_iter):
        Q, _ = np.linalg.qr(gram @ Q)
        updated = float(np.linalg.eigvalsh(Q.conj().T @ gram @ Q)[-1])
        if updated <= 0.0:
            return 0.0
        if estimate is not None:
            residual = abs(updated - estimate) / updated
            if residual <= tol:
                return float(np.sqrt(updated))
        estimate = updated
    raise NumericalError(f"power iteration did not converge in {max_iter} iterations", residual=residual)


def check_unitary(U: np.ndarray, name: str = "U", tol: float = UNITARY_TOL) -> None:
    U = np.asarray(U)
    if U.ndim != 2 or U.shape[0] != U.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {U.shape}")
    deviation = float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))
    if deviation > tol:
        raise InvalidValueError(f"{name} is not unitary (max |{name}^dagger {name} - I| = {deviation:.3e})")


@dataclass(frozen=True)
class BoundCheck:
    """lhs = ||U^dagger L U - V^dagger L V||, rhs = 2 ||L|| ||U - V||"""

    lhs: float
    rhs: float
    holds: bool


def check_hermitian_bound(U: np.ndarray, V: np.ndarray, eigenvalues: np.ndarray) -> BoundCheck:
    """Perturbation bound between two diagonalisations sharing the spectrum `eigenvalues`"""
    check_unitary(U, "U")
    check_unitary(V, "V")
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64).reshape(-1)
    if eigenvalues.size != U.shape[0] or U.shape != V.shape:
        raise ShapeError(f"U {U.shape}, V {V.shape} and {eigenvalues.size} eigenvalues disagree")
    spectrum = np.diag(eigenvalues).astype(np.complex128)
    lhs = spectral_norm(U.conj().T @ spectrum @ U - V.conj().T @ spectrum @ V)
    lam_norm = float(np.max(np.abs(eigenvalues))) if eigenvalues.size else 0.0
    rhs = 2.0 * lam_norm * spectral_norm(U - V)
    return BoundCheck(lhs=lhs, rhs=rhs, holds=lhs <= rhs + BOUND_SLACK)


def diagonalize_hermitian(H: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """(eigenvalues ascending, U) with H = U^dagger diag(eigenvalues) U"""
    check_hermitian(H)
    eigenvalues, vectors = np.linalg.eigh(H)
    return eigenvalues, vectors.conj().T


def random_unitary(dim: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-distributed unitary: QR of a complex Gaussian matrix with the R-diagonal phases removed"""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / np.sqrt(2.0)
    q, r = np.linalg.qr(z)
    phases = np.diag(r) / np.abs(np.diag(r))
    return q * phases[None, :]


def random_hermitian(dim: int, rng: np.random.Generator) -> np.ndarray:
    a = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
    return (a + a.conj().T) / 2.0


def embedded_spectrum(eigenvalues: np.ndarray, n: int) -> List[float]:
    """Expected spectrum of a k-local diagonal embedded in n qubits: each value 2^(n-k) times"""
    eigenvalues = np.asarray(eigenvalues, dtype=np.float64)
    k = int(np.log2(eigenvalues.size))
    return sorted(np.repeat(eigenvalues, 1 << (n - k)).tolist())
