"""
Randomized self-checks run by the verify command.

Each suite draws its own instances from a seeded generator, compares the
simulator against an independent reference and reports the worst error
against a fixed tolerance.
"""
import logging
from typing import Callable, Dict, List, Optional, Sequence

import numpy as np
from pydantic import BaseModel, Field

from app.models.config_models import LossKind, MeasurementMode, ModelConfig
from app.models.observables import CircuitParams, DenseObservable, DiagonalObservable
from pipelines.feature_set import Split
from services import oracle
from services.circuit import count_params, expect_dense, expect_diagonal, forward, parity_eigenvalues
from services.gradients import grad_dense_observable, grad_lambda, grad_theta_adjoint, grad_theta_parameter_shift
from services.optimizer import TrainState
from services.trainer import batch_gradient, dataset_loss
from simulator.statevector import StateVector, from_amplitudes
from simulator.windows import QubitWindow, sliding_windows
from utils.errors import InvalidValueError

logger = logging.getLogger(__name__)

MODES = (MeasurementMode.VQC, MeasurementMode.DANO, MeasurementMode.ANO)


class SuiteResult(BaseModel):
    suite: str
    cases: int
    max_error: float
    tolerance: float
    verdict: str

    @property
    def passed(self) -> bool:
        return self.verdict == "pass"


class VerifyReport(BaseModel):
    seed: int
    inject_fault: bool = False
    suites: List[SuiteResult] = Field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(s.passed for s in self.suites)


SuiteFn = Callable[[np.random.Generator, int, bool], float]


class Suite:
    """A named randomized check with its tolerance and default size"""

    def __init__(self, name: str, tolerance: float, default_cases: int, fn: SuiteFn):
        self.name = name
        self.tolerance = tolerance
        self.default_cases = default_cases
        self.fn = fn

    def run(self, rng: np.random.Generator, cases: Optional[int] = None, fault: bool = False) -> SuiteResult:
        cases = self.default_cases if cases is None else cases
        error = float(self.fn(rng, cases, fault))
        ok = np.isfinite(error) and error <= self.tolerance
        return SuiteResult(
            suite=self.name, cases=cases, max_error=error, tolerance=self.tolerance,
            verdict="pass" if ok else "fail",
        )


SUITES: Dict[str, Suite] = {}


def suite(name: str, tolerance: float, default_cases: int):
    def register(fn: SuiteFn) -> SuiteFn:
        SUITES[name] = Suite(name, tolerance, default_cases, fn)
        return fn
    return register


# --- random instances --------------------------------------------------------

def random_state(n: int, rng: np.random.Generator) -> StateVector:
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return from_amplitudes(amps, normalize=True)


def random_window(n: int, k: int, rng: np.random.Generator) -> QubitWindow:
    return QubitWindow(tuple(int(q) + 1 for q in rng.choice(n, size=k, replace=False)))


def random_observables(cfg: ModelConfig, rng: np.random.Generator):
    windows = sliding_windows(cfg.n_qubits, cfg.locality, cfg.n_windows)
    dim = cfg.observable_dim
    if cfg.mode is MeasurementMode.DANO:
        return [DiagonalObservable(rng.standard_normal(dim), w) for w in windows]
    if cfg.mode is MeasurementMode.ANO:
        return [DenseObservable.from_packed(rng.standard_normal(dim * dim), w) for w in windows]
    return None


def random_model(rng: np.random.Generator, n: int, mode: MeasurementMode, max_depth: int = 3,
                 max_k: int = 3, n_classes: Optional[int] = None, min_depth: int = 0):
    k = 1 if mode is MeasurementMode.VQC else int(rng.integers(1, min(n, max_k) + 1))
    m = int(rng.integers(max(1, n_classes or 1), n + 1))
    cfg = ModelConfig(
        n_qubits=n, locality=k, depth=int(rng.integers(min_depth, max_depth + 1)), mode=mode,
        n_windows=m, n_classes=n_classes,
    )
    params = CircuitParams(rng.uniform(-np.pi, np.pi, size=(cfg.depth, n)))
    x = rng.uniform(-np.pi, np.pi, size=n)
    return cfg, params, random_observables(cfg, rng), x


# --- suites ------------------------------------------------------------------

@suite("oracle_equivalence", tolerance=1e-10, default_cases=100)
def oracle_equivalence(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Simulator forward pass vs explicit circuit matrices, n = 2..6, all modes"""
    worst = 0.0
    for index in range(cases):
        n = 2 + index % 5
        cfg, params, obs, x = random_model(rng, n, MODES[index % 3])
        z = forward(x, params, obs, cfg)
        if fault:
            z = -z
        worst = max(worst, float(np.max(np.abs(z - oracle.dense_forward(x, params, obs, cfg)))))
    return worst


@suite("diagonal_dense_agreement", tolerance=1e-12, default_cases=200)
def diagonal_dense_agreement(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """expect_dense(diag(lambda)) against expect_diagonal(lambda)"""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 7))
        window = random_window(n, int(rng.integers(1, n + 1)), rng)
        eigenvalues = rng.standard_normal(window.dim)
        s = random_state(n, rng)
        pairs = window.dim * (window.dim - 1) // 2
        dense = DenseObservable(eigenvalues, np.zeros(pairs), np.zeros(pairs), window)
        diff = expect_dense(s, dense) - expect_diagonal(s, DiagonalObservable(eigenvalues, window))
        worst = max(worst, abs(diff))
    return worst


@suite("rayleigh", tolerance=1e-12, default_cases=1000)
def rayleigh(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Worst excursion of a diagonal expectation outside [min lambda, max lambda]"""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 7))
        window = random_window(n, int(rng.integers(1, n + 1)), rng)
        eigenvalues = rng.uniform(-5.0, 5.0, size=window.dim)
        z = expect_diagonal(random_state(n, rng), DiagonalObservable(eigenvalues, window))
        worst = max(worst, eigenvalues.min() - z, z - eigenvalues.max())
    return max(worst, 0.0)


@suite("vqc_subset", tolerance=1e-14, default_cases=50)
def vqc_subset(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """1-local DANO with lambda = (+1, -1) reproduces the Pauli-Z classifier"""
    worst = 0.0
    for index in range(cases):
        n = 1 + index % 6
        vqc_cfg, params, _, x = random_model(rng, n, MeasurementMode.VQC)
        dano_cfg = vqc_cfg.model_copy(update={"mode": MeasurementMode.DANO})
        windows = sliding_windows(n, 1, vqc_cfg.n_windows)
        obs = [DiagonalObservable(parity_eigenvalues(1), w) for w in windows]
        z_vqc = forward(x, params, None, vqc_cfg)
        if fault:
            z_vqc = -z_vqc
        worst = max(worst, float(np.max(np.abs(z_vqc - forward(x, params, obs, dano_cfg)))))
    return worst


def _central_difference(f: Callable[[np.ndarray], float], point: np.ndarray, h: float) -> np.ndarray:
    grad = np.zeros_like(point)
    for i in range(point.size):
        step = np.zeros_like(point)
        step[i] = h
        grad[i] = (f(point + step) - f(point - step)) / (2.0 * h)
    return grad


@suite("gradient_lambda", tolerance=1e-8, default_cases=20)
def gradient_lambda(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Marginals against central differences of the diagonal expectation in lambda"""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.choice([2, 4, 6]))
        window = random_window(n, int(rng.integers(1, min(n, 3) + 1)), rng)
        s = random_state(n, rng)
        fd = _central_difference(
            lambda lam: expect_diagonal(s, DiagonalObservable(lam, window)), rng.standard_normal(window.dim), 1e-4,
        )
        worst = max(worst, float(np.max(np.abs(grad_lambda(s, window) - fd))))
    return worst


@suite("gradient_dense", tolerance=1e-8, default_cases=20)
def gradient_dense(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Packed Hermitian gradient against central differences"""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.choice([2, 4]))
        window = random_window(n, int(rng.integers(1, 3)), rng)
        s = random_state(n, rng)
        fd = _central_difference(
            lambda packed: expect_dense(s, DenseObservable.from_packed(packed, window)),
            rng.standard_normal(window.dim ** 2), 1e-4,
        )
        worst = max(worst, float(np.max(np.abs(grad_dense_observable(s, window) - fd))))
    return worst


@suite("adjoint_vs_shift", tolerance=1e-9, default_cases=50)
def adjoint_vs_shift(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Adjoint sweep against the two-point parameter-shift rule"""
    worst = 0.0
    for index in range(cases):
        cfg, params, obs, x = random_model(rng, 2 + index % 4, MODES[index % 3])
        diff = grad_theta_adjoint(x, params, obs, cfg) - grad_theta_parameter_shift(x, params, obs, cfg)
        if diff.size:
            worst = max(worst, float(np.max(np.abs(diff))))
    return worst


@suite("loss_gradient_fd", tolerance=1e-5, default_cases=6)
def loss_gradient_fd(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Batch loss gradient against central differences on n = 4 models (relative error)"""
    worst = 0.0
    for index in range(cases):
        mode = MODES[index % 3]
        kind = LossKind.CROSS_ENTROPY if index % 2 == 0 else LossKind.MSE
        # depth >= 1 so a VQC model always has trainable parameters
        cfg, params, obs, _ = random_model(rng, 4, mode, max_depth=2, max_k=2, n_classes=2, min_depth=1)
        ts = TrainState.initial(cfg, params, obs, rng_seed=0)
        X = rng.uniform(-np.pi, np.pi, size=(3, 4))
        y = rng.integers(0, 2, size=3)
        _, grad = batch_gradient(ts, X, y, kind)

        def loss_at(flat: np.ndarray) -> float:
            moved = TrainState.initial(cfg, params, obs, rng_seed=0)
            moved.params[:] = flat
            return dataset_loss(moved, Split(X, y), kind)

        fd = _central_difference(loss_at, ts.params.copy(), 1e-6)
        if fd.size == 0:
            continue
        scale = max(float(np.max(np.abs(fd))), 1.0)
        worst = max(worst, float(np.max(np.abs(grad - fd))) / scale)
    return worst


# (n, k, L, m, mode) -> (total, observable) for the n = 16, L = 6 reference models
PARAMETER_TABLE = [
    ((16, 2, 6, 16, MeasurementMode.DANO), 160, 64),
    ((16, 4, 6, 16, MeasurementMode.DANO), 352, 256),
    ((16, 6, 6, 16, MeasurementMode.DANO), 1120, 1024),
    ((16, 8, 6, 16, MeasurementMode.DANO), 4192, 4096),
    ((16, 10, 6, 16, MeasurementMode.DANO), 16480, 16384),
    ((16, 2, 6, 16, MeasurementMode.ANO), 352, 256),
    ((16, 4, 6, 16, MeasurementMode.ANO), 4192, 4096),
    ((16, 6, 6, 16, MeasurementMode.ANO), 65632, 65536),
    ((16, 8, 6, 16, MeasurementMode.ANO), 1048672, 1048576),
    ((16, 1, 6, 16, MeasurementMode.VQC), 96, 0),
]


@suite("parameter_counts", tolerance=0.0, default_cases=len(PARAMETER_TABLE))
def parameter_counts(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Closed-form counts against the reference totals (number of mismatches)"""
    mismatches = 0
    for (n, k, depth, m, mode), total, observable in PARAMETER_TABLE[:cases]:
        counts = count_params(ModelConfig(n_qubits=n, locality=k, depth=depth, n_windows=m, mode=mode))
        mismatches += int(counts.total != total or counts.observable != observable)
    return float(mismatches)


@suite("hermitian_bound", tolerance=oracle.BOUND_SLACK, default_cases=1000)
def hermitian_bound(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """||U^dagger L U - V^dagger L V|| <= 2 ||L|| ||U - V|| on random unitaries, dims 2..16"""
    worst = 0.0
    for index in range(cases):
        dim = int(rng.integers(2, 17))
        U = oracle.random_unitary(dim, rng)
        if index % 2:
            V = oracle.random_unitary(dim, rng)
        else:
            # nearby unitary: U exp(i eps H)
            values, vectors = np.linalg.eigh(oracle.random_hermitian(dim, rng))
            V = U @ (vectors * np.exp(1j * 1e-3 * values)[None, :]) @ vectors.conj().T
        check = oracle.check_hermitian_bound(U, V, rng.uniform(-3.0, 3.0, size=dim))
        worst = max(worst, check.lhs - check.rhs)
    return max(worst, 0.0)


@suite("embed_spectrum", tolerance=1e-12, default_cases=30)
def embed_spectrum(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """Embedded k-local diagonal carries each eigenvalue 2^(n-k) times"""
    worst = 0.0
    for _ in range(cases):
        n = int(rng.integers(1, 7))
        window = random_window(n, int(rng.integers(1, n + 1)), rng)
        eigenvalues = rng.standard_normal(window.dim)
        full = oracle.embed_klocal(np.diag(eigenvalues), window, n)
        found = np.sort(np.linalg.eigvalsh(full))
        worst = max(worst, float(np.max(np.abs(found - oracle.embedded_spectrum(eigenvalues, n)))))
    return worst


@suite("diagonalize_roundtrip", tolerance=1e-10, default_cases=100)
def diagonalize_roundtrip(rng: np.random.Generator, cases: int, fault: bool) -> float:
    """H = U^dagger diag(eigenvalues) U for random Hermitian matrices"""
    worst = 0.0
    for _ in range(cases):
        H = oracle.random_hermitian(int(rng.integers(2, 17)), rng)
        eigenvalues, U = oracle.diagonalize_hermitian(H)
        rebuilt = U.conj().T @ np.diag(eigenvalues) @ U
        worst = max(worst, float(np.max(np.abs(rebuilt - H))))
    return worst


def run_verification(seed: int = 0, suites: Optional[Sequence[str]] = None, cases: Optional[int] = None,
                     inject_fault: bool = False) -> VerifyReport:
    """
    Run the named suites (all when None). `cases` overrides every suite's
    default size; inject_fault flips the sign of simulator outputs.
    """
    names = list(SUITES) if not suites else list(suites)
    unknown = [name for name in names if name not in SUITES]
    if unknown:
        raise InvalidValueError(f"unknown verify suites {unknown}; available: {sorted(SUITES)}")

    report = VerifyReport(seed=seed, inject_fault=inject_fault)
    order = list(SUITES)
    for name in names:
        # Seed depends on the suite, not on which other suites were selected
        rng = np.random.default_rng([seed, order.index(name)])
        result = SUITES[name].run(rng, cases, inject_fault)
        report.suites.append(result)
        level = logging.INFO if result.passed else logging.ERROR
        logger.log(level, f"{name}: {result.verdict} ({result.cases} cases, "
                          f"max error {result.max_error:.3e}, tolerance {result.tolerance:.0e})")
    return report
