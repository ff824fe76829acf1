"""
Classifier circuit: angle encoding, brickwork ansatz, observable families and
the forward pass producing the output vector z (one entry per sliding window).
"""
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np

from app.models.config_models import MeasurementMode, ModelConfig
from app.models.observables import CircuitParams, DenseObservable, DiagonalObservable
from simulator import kernels
from simulator.statevector import StateVector, check_qubit_count
from simulator.windows import QubitWindow, sliding_windows, window_index_map
from utils.errors import InvalidValueError, ShapeError

logger = logging.getLogger(__name__)

Observable = Union[DiagonalObservable, DenseObservable]

PAULI_Z = np.array([1.0, -1.0])


@dataclass(frozen=True)
class ParamCount:
    circuit: int
    observable: int

    @property
    def total(self) -> int:
        return self.circuit + self.observable


def entangling_pairs(n: int) -> Tuple[List[Tuple[int, int]], List[Tuple[int, int]]]:
    """CNOT (control, target) pairs of one brickwork block: (1,2),(3,4),... then (2,3),(4,5),... (no wrap)."""
    even = [(q, q + 1) for q in range(1, n, 2)]
    odd = [(q, q + 1) for q in range(2, n, 2)]
    return even, odd


def _check_angles(x: np.ndarray, n: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1:] != (n,):
        raise ShapeError(f"input has {x.shape[-1] if x.ndim else 0} features, expected n={n}")
    if not np.all(np.isfinite(x)):
        raise InvalidValueError("input angles must be finite")
    return x


# --- batched primitives, amplitudes shaped (B, 2^n) -------------------------

def encode_batch(X: np.ndarray, n: int) -> np.ndarray:
    """V(x)|0> for every row of X: Hadamard on each wire, then Ry(x_j) on wire j."""
    X = _check_angles(X, n)
    if X.ndim != 2:
        raise ShapeError(f"batch input must be (B, n), got shape {X.shape}")
    amps = np.zeros((X.shape[0], 1 << n), dtype=np.complex128)
    amps[:, 0] = 1.0
    for q in range(1, n + 1):
        kernels.apply_hadamard(amps, n, q)
    for q in range(1, n + 1):
        kernels.apply_ry(amps, n, q, X[:, q - 1])
    return amps


def apply_entangler(amps: np.ndarray, n: int) -> np.ndarray:
    even, odd = entangling_pairs(n)
    for control, target in even + odd:
        kernels.apply_cnot(amps, n, control, target)
    return amps


def apply_entangler_inverse(amps: np.ndarray, n: int) -> np.ndarray:
    even, odd = entangling_pairs(n)
    for control, target in reversed(even + odd):
        kernels.apply_cnot(amps, n, control, target)
    return amps


def variational_batch(amps: np.ndarray, n: int, theta: np.ndarray) -> np.ndarray:
    """U(theta) in place: per layer, even CNOTs, odd CNOTs, then Ry(theta[l, j]) on wire j."""
    for layer in theta:
        apply_entangler(amps, n)
        for q in range(1, n + 1):
            kernels.apply_ry(amps, n, q, layer[q - 1])
    return amps


def prepare_batch(X: np.ndarray, params: CircuitParams, n: int) -> np.ndarray:
    if params.n_qubits != n:
        raise ShapeError(f"theta has {params.n_qubits} columns, expected n={n}")
    return variational_batch(encode_batch(X, n), n, params.theta)


def measure_batch(amps: np.ndarray, n: int, observables: Sequence[Observable]) -> np.ndarray:
    """z for each state: shape (B, m)."""
    columns = []
    for obs in observables:
        if isinstance(obs, DiagonalObservable):
            probs = kernels.marginal_probabilities(amps, n, obs.window.qubits)
            columns.append(probs @ obs.eigenvalues)
        else:
            rho = kernels.reduced_density_matrix(amps, n, obs.window.qubits)
            # tr(rho H) = sum_ab rho_ab H_ba
            columns.append(np.einsum("...ab,ba->...", rho, obs.matrix).real)
    return np.stack(columns, axis=-1)


def apply_observable(amps: np.ndarray, n: int, obs: Observable) -> np.ndarray:
    """O psi with O the observable embedded on its window (identity elsewhere)."""
    if isinstance(obs, DiagonalObservable):
        return amps * obs.eigenvalues[window_index_map(n, obs.window.qubits)]
    return kernels.apply_klocal(amps, n, obs.window.qubits, obs.matrix)


def weighted_observable_apply(amps: np.ndarray, n: int, observables: Sequence[Observable],
                              weights: np.ndarray) -> np.ndarray:
    """(sum_j weights[b, j] O_j) psi_b for each batch row b."""
    if observables and all(isinstance(o, DiagonalObservable) for o in observables):
        # Sum of embedded diagonals is diagonal: build it once per row
        diagonal = np.zeros(amps.shape, dtype=np.float64)
        for j, obs in enumerate(observables):
            diagonal += weights[:, j, None] * obs.eigenvalues[window_index_map(n, obs.window.qubits)][None, :]
        return diagonal * amps
    out = np.zeros_like(amps)
    for j, obs in enumerate(observables):
        out += weights[:, j, None] * apply_observable(amps, n, obs)
    return out


# --- single-state operations -------------------------------------------------

def encode(x: np.ndarray) -> StateVector:
    """(tensor Ry(x_j)) (tensor H) |0...0>."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError(f"input must be a vector, got shape {x.shape}")
    n = x.size
    check_qubit_count(n)
    return StateVector(n, encode_batch(x[None, :], n)[0])


def variational_layers(s: StateVector, p: CircuitParams) -> StateVector:
    if p.n_qubits != s.n:
        raise ShapeError(f"theta has {p.n_qubits} columns, state has n={s.n}")
    variational_batch(s.amps, s.n, p.theta)
    return s


def _check_window(s: StateVector, window: QubitWindow) -> None:
    window.check(s.n)


def expect_diagonal(s: StateVector, o: DiagonalObservable) -> float:
    """sum_m lambda_m p_m over the window marginal, O(2^n)."""
    _check_window(s, o.window)
    probs = kernels.marginal_probabilities(s.amps, s.n, o.window.qubits)
    return float(probs @ o.eigenvalues)


def expect_dense(s: StateVector, o: DenseObservable) -> float:
    """tr(rho_w H), O(2^(n+k))."""
    _check_window(s, o.window)
    rho = kernels.reduced_density_matrix(s.amps, s.n, o.window.qubits)
    value = np.einsum("ab,ba->", rho, o.matrix)
    if abs(value.imag) > 1e-10:
        logger.warning(f"dense expectation has imaginary residue {value.imag:.3e}")
    return float(value.real)


def expect(s: StateVector, o: Observable) -> float:
    if isinstance(o, DiagonalObservable):
        return expect_diagonal(s, o)
    return expect_dense(s, o)


def unpack_hermitian(o: DenseObservable) -> np.ndarray:
    """K x K Hermitian from the packed (c_ii, a_ij, b_ij) parameters."""
    return o.matrix.copy()


# --- observable families -----------------------------------------------------

def parity_eigenvalues(k: int) -> np.ndarray:
    """Eigenvalues of Z^(tensor k): (-1)^popcount(m)."""
    m = np.arange(1 << k)
    bits = np.zeros_like(m)
    for t in range(k):
        bits ^= (m >> t) & 1
    return 1.0 - 2.0 * bits


def pauli_z_observables(cfg: ModelConfig) -> List[DiagonalObservable]:
    return [DiagonalObservable(PAULI_Z, w) for w in sliding_windows(cfg.n_qubits, 1, cfg.n_windows)]


def init_observables(cfg: ModelConfig) -> List[Observable]:
    """Parity initialisation: every mode starts as the Z^(tensor k) measurement."""
    if cfg.mode is MeasurementMode.VQC:
        return pauli_z_observables(cfg)
    windows = sliding_windows(cfg.n_qubits, cfg.locality, cfg.n_windows)
    parity = parity_eigenvalues(cfg.locality)
    if cfg.mode is MeasurementMode.DANO:
        return [DiagonalObservable(parity, w) for w in windows]
    pairs = cfg.observable_dim * (cfg.observable_dim - 1) // 2
    return [DenseObservable(parity, np.zeros(pairs), np.zeros(pairs), w) for w in windows]


def init_circuit_params(cfg: ModelConfig, rng: np.random.Generator) -> CircuitParams:
    """theta i.i.d. uniform on (-pi, pi)."""
    return CircuitParams(rng.uniform(-np.pi, np.pi, size=(cfg.depth, cfg.n_qubits)))


def resolve_observables(cfg: ModelConfig, observables: Optional[Sequence[Observable]]) -> List[Observable]:
    """Observables to measure for cfg; VQC always uses fixed Pauli-Z."""
    if cfg.mode is MeasurementMode.VQC:
        return pauli_z_observables(cfg)
    if observables is None:
        raise InvalidValueError(f"mode {cfg.mode.value} needs trainable observables")
    observables = list(observables)
    if len(observables) != cfg.n_windows:
        raise ShapeError(f"{len(observables)} observables given, config has m={cfg.n_windows}")
    expected = DiagonalObservable if cfg.mode is MeasurementMode.DANO else DenseObservable
    for obs in observables:
        if not isinstance(obs, expected):
            raise ShapeError(f"mode {cfg.mode.value} expects {expected.__name__}, got {type(obs).__name__}")
        if obs.window.k != cfg.locality:
            raise ShapeError(f"observable window width {obs.window.k} does not match k={cfg.locality}")
        obs.window.check(cfg.n_qubits)
    return observables


def forward(x: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]],
            cfg: ModelConfig) -> np.ndarray:
    """z_j = <O_j> on U(theta) V(x)|0>; length m."""
    return forward_batch(np.asarray(x, dtype=np.float64)[None, :], p, obs, cfg)[0]


def forward_batch(X: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]],
                  cfg: ModelConfig) -> np.ndarray:
    """Outputs for every row of X: shape (B, m)."""
    observables = resolve_observables(cfg, obs)
    p.check(cfg.depth, cfg.n_qubits)
    amps = prepare_batch(X, p, cfg.n_qubits)
    return measure_batch(amps, cfg.n_qubits, observables)


def count_params(cfg: ModelConfig) -> ParamCount:
    """circuit = L n; observable = m 2^k (dano), m 4^k (ano), 0 (vqc)."""
    circuit = cfg.depth * cfg.n_qubits
    if cfg.mode is MeasurementMode.DANO:
        observable = cfg.n_windows * (1 << cfg.locality)
    elif cfg.mode is MeasurementMode.ANO:
        observable = cfg.n_windows * (1 << (2 * cfg.locality))
    else:
        observable = 0
    return ParamCount(circuit=circuit, observable=observable)
