"""
Measurement-cost benchmark: marginal-based diagonal readout against
reduced-density-matrix dense readout over all m windows, plus the adjoint
vs parameter-shift gradient comparison.
"""
import logging
from dataclasses import asdict, dataclass
from typing import Dict, Iterable, List, Sequence

import numpy as np

from app.models.config_models import MeasurementMode, ModelConfig
from app.models.observables import CircuitParams
from services.circuit import init_observables, measure_batch
from services.gradients import grad_theta_adjoint, grad_theta_parameter_shift
from simulator.statevector import check_qubit_count
from utils.metrics import Timings, stopwatch

logger = logging.getLogger(__name__)

MEASUREMENT_COLUMNS = ["n", "k", "m", "repeats", "dano_seconds", "ano_seconds", "ratio", "dano_flops", "ano_flops"]
GRADIENT_COLUMNS = ["n", "depth", "repeats", "adjoint_seconds", "shift_seconds", "speedup"]


def dano_flops(n: int) -> int:
    return n * (1 << n)


def ano_flops(n: int, k: int) -> int:
    return n * (1 << (n + k))


@dataclass
class MeasurementRow:
    n: int
    k: int
    m: int
    repeats: int
    dano_seconds: float
    ano_seconds: float
    ratio: float
    dano_flops: int
    ano_flops: int

    def to_dict(self) -> Dict:
        return asdict(self)


@dataclass
class GradientRow:
    n: int
    depth: int
    repeats: int
    adjoint_seconds: float
    shift_seconds: float
    speedup: float

    def to_dict(self) -> Dict:
        return asdict(self)


def random_states(n: int, count: int, rng: np.random.Generator) -> np.ndarray:
    amps = rng.standard_normal((count, 1 << n)) + 1j * rng.standard_normal((count, 1 << n))
    amps /= np.linalg.norm(amps, axis=1, keepdims=True)
    return np.ascontiguousarray(amps)


def bench_measurement(n: int, k: int, repeats: int = 3, states: int = 1, seed: int = 0) -> MeasurementRow:
    """Mean wall time to measure all m = n windows of random states in both modes"""
    check_qubit_count(n)
    rng = np.random.default_rng([seed, n, k])
    amps = random_states(n, states, rng)
    observables = {
        mode: init_observables(ModelConfig(n_qubits=n, locality=k, depth=0, mode=mode))
        for mode in (MeasurementMode.DANO, MeasurementMode.ANO)
    }
    # One untimed pass per mode
    for obs in observables.values():
        measure_batch(amps, n, obs)
    timings = Timings()
    for _ in range(repeats):
        for mode, obs in observables.items():
            with stopwatch() as clock:
                measure_batch(amps, n, obs)
            timings.record(mode.value, clock["seconds"])

    dano = timings.mean(MeasurementMode.DANO.value)
    ano = timings.mean(MeasurementMode.ANO.value)
    row = MeasurementRow(
        n=n, k=k, m=n, repeats=repeats, dano_seconds=dano, ano_seconds=ano,
        ratio=ano / dano if dano > 0 else float("inf"),
        dano_flops=dano_flops(n), ano_flops=ano_flops(n, k),
    )
    logger.info(f"bench n={n} k={k}: dano {dano:.4e}s ano {ano:.4e}s ratio {row.ratio:.2f}")
    return row


def bench_grid(ns: Iterable[int], ks: Iterable[int], repeats: int = 3, states: int = 1,
               seed: int = 0) -> List[MeasurementRow]:
    """One row per (n, k) cell with k <= n"""
    ks = list(ks)
    return [
        bench_measurement(n, k, repeats, states, seed)
        for n in ns for k in ks if k <= n
    ]


def bench_gradients(n: int, depth: int = 6, repeats: int = 1, seed: int = 0) -> GradientRow:
    """Wall time of one full theta Jacobian by adjoint sweep and by parameter shift"""
    rng = np.random.default_rng([seed, n, depth])
    cfg = ModelConfig(n_qubits=n, locality=1, depth=depth, mode=MeasurementMode.DANO)
    params = CircuitParams(rng.uniform(-np.pi, np.pi, size=(depth, n)))
    obs = init_observables(cfg)
    x = rng.uniform(-np.pi, np.pi, size=n)
    timings = Timings()
    for _ in range(repeats):
        with stopwatch() as clock:
            grad_theta_adjoint(x, params, obs, cfg)
        timings.record("adjoint", clock["seconds"])
        with stopwatch() as clock:
            grad_theta_parameter_shift(x, params, obs, cfg)
        timings.record("shift", clock["seconds"])
    adjoint = timings.mean("adjoint")
    shift = timings.mean("shift")
    row = GradientRow(
        n=n, depth=depth, repeats=repeats, adjoint_seconds=adjoint, shift_seconds=shift,
        speedup=shift / adjoint if adjoint > 0 else float("inf"),
    )
    logger.info(f"gradient bench n={n} L={depth}: adjoint {adjoint:.4e}s shift {shift:.4e}s")
    return row


def rows_to_table(rows: Sequence, columns: Sequence[str]) -> List[List[str]]:
    """Header plus string cells, floats in repr form"""
    table = [list(columns)]
    for row in rows:
        values = row.to_dict()
        table.append([repr(values[c]) if isinstance(values[c], float) else str(values[c]) for c in columns])
    return table
