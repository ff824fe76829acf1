"""
Training state and the Adam update.

All trainable values live in one flat float64 vector; ParamLayout records
which slice is theta and which is the observable block so the state can be
unflattened back into CircuitParams and observables.
"""
import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.models.config_models import MeasurementMode, ModelConfig
from app.models.observables import CircuitParams, DenseObservable, DiagonalObservable
from services.circuit import Observable, pauli_z_observables
from simulator.windows import sliding_windows
from utils.errors import ShapeError

logger = logging.getLogger(__name__)

THETA = "theta"
LAMBDA = "lambda"
HERMITIAN = "hermitian"


@dataclass(frozen=True)
class ParamLayout:
    """Ordered (name, shape) blocks of the flat parameter vector."""

    blocks: Tuple[Tuple[str, Tuple[int, ...]], ...]

    @classmethod
    def for_config(cls, cfg: ModelConfig) -> "ParamLayout":
        blocks = [(THETA, (cfg.depth, cfg.n_qubits))]
        if cfg.mode is MeasurementMode.DANO:
            blocks.append((LAMBDA, (cfg.n_windows, cfg.observable_dim)))
        elif cfg.mode is MeasurementMode.ANO:
            blocks.append((HERMITIAN, (cfg.n_windows, cfg.observable_dim ** 2)))
        return cls(tuple(blocks))

    @property
    def size(self) -> int:
        return sum(int(np.prod(shape)) for _, shape in self.blocks)

    def slices(self) -> Dict[str, slice]:
        out = {}
        offset = 0
        for name, shape in self.blocks:
            width = int(np.prod(shape))
            out[name] = slice(offset, offset + width)
            offset += width
        return out

    def names(self) -> List[str]:
        return [name for name, _ in self.blocks]

    def shape_of(self, name: str) -> Tuple[int, ...]:
        return dict(self.blocks)[name]

    def mask_for(self, frozen: Sequence[str]) -> np.ndarray:
        """Boolean mask with every entry of the named blocks set."""
        mask = np.zeros(self.size, dtype=bool)
        spans = self.slices()
        for name in frozen:
            if name not in spans:
                raise ShapeError(f"layout has no block {name!r}; blocks are {self.names()}")
            mask[spans[name]] = True
        return mask


def flatten(params: CircuitParams, observables: Optional[Sequence[Observable]], cfg: ModelConfig) -> np.ndarray:
    parts = [params.theta.reshape(-1)]
    if cfg.mode is MeasurementMode.DANO:
        parts.extend(o.eigenvalues for o in observables)
    elif cfg.mode is MeasurementMode.ANO:
        parts.extend(o.packed() for o in observables)
    return np.concatenate(parts).astype(np.float64)


@dataclass(frozen=True, eq=False)
class TrainState:
    """
    Parameters, Adam moments and bookkeeping for one run.

    adam_m / adam_v share the parameter layout; entries under frozen_mask are
    never written by adam_step.
    """

    cfg: ModelConfig
    layout: ParamLayout
    params: np.ndarray
    adam_m: np.ndarray
    adam_v: np.ndarray
    frozen_mask: np.ndarray
    step: int = 0
    epoch: int = 0
    rng_seed: int = 0
    metadata: Dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        size = self.layout.size
        for name in ("params", "adam_m", "adam_v", "frozen_mask"):
            value = getattr(self, name)
            if value.shape != (size,):
                raise ShapeError(f"{name} has shape {value.shape}, layout needs ({size},)")

    @classmethod
    def initial(cls, cfg: ModelConfig, params: CircuitParams, observables: Optional[Sequence[Observable]],
                rng_seed: int, frozen: Sequence[str] = ()) -> "TrainState":
        layout = ParamLayout.for_config(cfg)
        flat = flatten(params, observables, cfg)
        return cls(
            cfg=cfg,
            layout=layout,
            params=flat,
            adam_m=np.zeros_like(flat),
            adam_v=np.zeros_like(flat),
            frozen_mask=layout.mask_for(frozen),
            rng_seed=rng_seed,
        )

    def block(self, name: str) -> np.ndarray:
        return self.params[self.layout.slices()[name]].reshape(self.layout.shape_of(name))

    def circuit_params(self) -> CircuitParams:
        return CircuitParams(self.block(THETA))

    def observables(self) -> List[Observable]:
        """Observables in window order; VQC yields the fixed Pauli-Z set."""
        cfg = self.cfg
        if cfg.mode is MeasurementMode.VQC:
            return pauli_z_observables(cfg)
        windows = sliding_windows(cfg.n_qubits, cfg.locality, cfg.n_windows)
        if cfg.mode is MeasurementMode.DANO:
            return [DiagonalObservable(row, w) for row, w in zip(self.block(LAMBDA), windows)]
        return [DenseObservable.from_packed(row, w) for row, w in zip(self.block(HERMITIAN), windows)]

    def unflatten(self) -> Tuple[CircuitParams, List[Observable]]:
        return self.circuit_params(), self.observables()


def adam_step(ts: TrainState, grads: np.ndarray, lr: float, beta1: float = 0.9, beta2: float = 0.999,
              eps: float = 1e-8) -> TrainState:
    """Bias-corrected Adam on every unfrozen entry; frozen params and moments are copied through."""
    grads = np.asarray(grads, dtype=np.float64)
    if grads.shape != ts.params.shape:
        raise ShapeError(f"gradient shape {grads.shape} does not match parameters {ts.params.shape}")

    step = ts.step + 1
    live = ~ts.frozen_mask
    g = grads[live]

    m = ts.adam_m.copy()
    v = ts.adam_v.copy()
    params = ts.params.copy()
    m[live] = beta1 * m[live] + (1.0 - beta1) * g
    v[live] = beta2 * v[live] + (1.0 - beta2) * (g * g)

    bc1 = 1.0 - beta1 ** step
    bc2 = 1.0 - beta2 ** step
    denom = np.sqrt(v[live] / bc2) + eps
    params[live] = params[live] - (lr / bc1) * m[live] / denom
    return replace(ts, params=params, adam_m=m, adam_v=v, step=step)
