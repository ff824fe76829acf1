"""
Losses, the mini-batch Adam loop, evaluation and the rescue branch.

A mini-batch is cut into fixed-size chunks of samples. Chunks run on a
thread pool and their gradients are summed in chunk order, so the result
does not depend on the number of threads.
"""
import logging
from concurrent.futures import Executor, ThreadPoolExecutor
from dataclasses import dataclass, replace
from typing import Callable, List, Optional, Tuple

import numpy as np

from app.models.config_models import Hyperparams, LossKind, MeasurementMode, ModelConfig
from pipelines.feature_set import FeatureSet, Split
from pipelines.splits import TEST, TRAIN, VAL
from services.circuit import init_circuit_params, init_observables, measure_batch, prepare_batch
from services.gradients import loss_vjp
from services.optimizer import THETA, TrainState, adam_step
from utils.errors import InvalidValueError, ShapeError
from utils.logging_config import ContextLogger
from utils.metrics import Metrics, stopwatch
from utils.validation import ConfigValidator

logger = logging.getLogger(__name__)

CHUNK_SIZE = 8
EVAL_CHUNK_SIZE = 64
DEFAULT_RESCUE_K = 8

EpochCallback = Callable[[TrainState, Metrics], None]


# --- losses ------------------------------------------------------------------

def mse_loss(z: np.ndarray, y: np.ndarray) -> float:
    """(1/|D|) sum_i ||z_i - y_i||^2; a 1-D pair is a batch of one."""
    z, y = _as_batch(z, y)
    return float(np.sum((z - y) ** 2) / z.shape[0])


def mse_loss_grad(z: np.ndarray, y: np.ndarray) -> np.ndarray:
    """dL/dz = 2 (z - y) / |D|, shaped like z"""
    z_in = np.asarray(z, dtype=np.float64)
    z, y = _as_batch(z, y)
    return (2.0 * (z - y) / z.shape[0]).reshape(z_in.shape)


def _as_batch(z: np.ndarray, y: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if z.shape != y.shape:
        raise ShapeError(f"outputs {z.shape} and targets {y.shape} differ in shape")
    if z.ndim == 1:
        return z[None, :], y[None, :]
    return z, y


def softmax_cross_entropy(logits: np.ndarray, label: int) -> Tuple[float, np.ndarray]:
    """Max-shifted cross entropy of one sample and its gradient softmax - onehot"""
    logits = np.asarray(logits, dtype=np.float64)
    losses, grads = cross_entropy_batch(logits[None, :], np.asarray([label]))
    return float(losses[0]), grads[0]


def cross_entropy_batch(logits: np.ndarray, labels: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Per-sample losses (B,) and gradients (B, C)"""
    n_classes = logits.shape[-1]
    if n_classes < 2:
        raise InvalidValueError(f"cross entropy needs at least 2 classes, got {n_classes}")
    labels = np.asarray(labels, dtype=np.int64)
    if np.any(labels < 0) or np.any(labels >= n_classes):
        raise InvalidValueError(f"labels must lie in 0..{n_classes - 1}")
    shifted = logits - logits.max(axis=-1, keepdims=True)
    exp = np.exp(shifted)
    total = exp.sum(axis=-1)
    rows = np.arange(labels.size)
    losses = np.log(total) - shifted[rows, labels]
    grads = exp / total[:, None]
    grads[rows, labels] -= 1.0
    return losses, grads


def per_sample_loss(Z: np.ndarray, labels: np.ndarray, n_classes: int,
                    kind: LossKind) -> Tuple[float, np.ndarray]:
    """
    Summed loss over the rows of Z and the unscaled dLoss/dZ per row.

    Cross entropy reads the first n_classes outputs as logits; MSE targets
    the one-hot label vector over all m outputs.
    """
    d_outputs = np.zeros_like(Z)
    if kind is LossKind.CROSS_ENTROPY:
        losses, grads = cross_entropy_batch(Z[:, :n_classes], labels)
        d_outputs[:, :n_classes] = grads
        return float(losses.sum()), d_outputs
    targets = np.zeros_like(Z)
    targets[np.arange(labels.size), labels] = 1.0
    diff = Z - targets
    return float(np.sum(diff ** 2)), 2.0 * diff


# --- state -------------------------------------------------------------------

def init_state(cfg: ModelConfig, seed: int) -> TrainState:
    """Uniform theta in (-pi, pi) from the seed, parity-initialised observables"""
    rng = np.random.default_rng(seed)
    return TrainState.initial(cfg, init_circuit_params(cfg, rng), init_observables(cfg), rng_seed=seed)


def _chunks(n_rows: int, size: int) -> List[slice]:
    return [slice(start, min(start + size, n_rows)) for start in range(0, n_rows, size)]


def _check_split(cfg: ModelConfig, split: Split, name: str) -> None:
    if cfg.n_classes is None:
        raise InvalidValueError("model configuration has no class count (n_classes)")
    if split.size == 0:
        raise InvalidValueError(f"{name} split is empty")
    if split.X.shape[1] != cfg.n_qubits:
        raise ShapeError(f"{name} rows have {split.X.shape[1]} features, model has n={cfg.n_qubits}")
    if split.y.max() >= cfg.n_classes:
        raise InvalidValueError(f"{name} labels reach {int(split.y.max())}, model has C={cfg.n_classes}")


def _chunk_gradient(ts: TrainState, X: np.ndarray, y: np.ndarray, kind: LossKind,
                    scale: float) -> Tuple[float, np.ndarray]:
    cfg = ts.cfg
    params, observables = ts.unflatten()
    amps = prepare_batch(X, params, cfg.n_qubits)
    Z = measure_batch(amps, cfg.n_qubits, observables)
    loss_sum, d_outputs = per_sample_loss(Z, y, cfg.n_classes, kind)
    d_theta, d_obs = loss_vjp(amps, params, observables, cfg, d_outputs * scale)
    parts = [d_theta.reshape(-1)]
    if d_obs is not None:
        parts.append(d_obs.reshape(-1))
    return loss_sum, np.concatenate(parts)


def batch_gradient(ts: TrainState, X: np.ndarray, y: np.ndarray, kind: LossKind,
                   executor: Optional[Executor] = None) -> Tuple[float, np.ndarray]:
    """Mean loss of the batch and its gradient over the flat parameter vector"""
    scale = 1.0 / y.size
    spans = _chunks(y.size, CHUNK_SIZE)
    jobs = [(ts, X[span], y[span], kind, scale) for span in spans]
    if executor is None:
        results = [_chunk_gradient(*job) for job in jobs]
    else:
        results = list(executor.map(lambda job: _chunk_gradient(*job), jobs))
    loss = 0.0
    grad = np.zeros(ts.layout.size)
    for chunk_loss, chunk_grad in results:
        loss += chunk_loss
        grad += chunk_grad
    return loss * scale, grad


def _outputs(ts: TrainState, X: np.ndarray, executor: Optional[Executor]) -> np.ndarray:
    params, observables = ts.unflatten()
    n = ts.cfg.n_qubits

    def run(span: slice) -> np.ndarray:
        return measure_batch(prepare_batch(X[span], params, n), n, observables)

    spans = _chunks(X.shape[0], EVAL_CHUNK_SIZE)
    blocks = [run(s) for s in spans] if executor is None else list(executor.map(run, spans))
    return np.concatenate(blocks, axis=0)


def evaluate(ts: TrainState, split: Split, executor: Optional[Executor] = None) -> float:
    """Fraction of rows whose argmax over the first C outputs equals the label"""
    if split.size == 0:
        raise InvalidValueError("cannot evaluate on an empty split")
    _check_split(ts.cfg, split, "evaluation")
    logits = _outputs(ts, split.X, executor)[:, :ts.cfg.n_classes]
    correct = int(np.count_nonzero(np.argmax(logits, axis=1) == split.y))
    return correct / split.size


def dataset_loss(ts: TrainState, split: Split, kind: LossKind = LossKind.CROSS_ENTROPY,
                 executor: Optional[Executor] = None) -> float:
    """Mean loss over a whole split"""
    _check_split(ts.cfg, split, "loss")
    Z = _outputs(ts, split.X, executor)
    loss_sum, _ = per_sample_loss(Z, split.y, ts.cfg.n_classes, kind)
    return loss_sum / split.size


def epoch_metrics(ts: TrainState, dataset: FeatureSet, kind: LossKind, epoch: int,
                  executor: Optional[Executor] = None) -> Metrics:
    train = dataset.split(TRAIN)
    val = dataset.split(VAL)
    test = dataset.split(TEST)
    return Metrics(
        epoch=epoch,
        train_loss=dataset_loss(ts, train, kind, executor),
        train_accuracy=evaluate(ts, train, executor),
        val_accuracy=evaluate(ts, val, executor) if val.size else None,
        test_accuracy=evaluate(ts, test, executor) if test.size else None,
    )


# --- epoch loop --------------------------------------------------------------

def _run_epochs(ts: TrainState, dataset: FeatureSet, hp: Hyperparams, last_epoch: int,
                on_epoch: Optional[EpochCallback], run_log: ContextLogger) -> Tuple[TrainState, List[Metrics]]:
    train = dataset.split(TRAIN)
    _check_split(ts.cfg, train, "training")
    history: List[Metrics] = []
    with ThreadPoolExecutor(max_workers=hp.threads) as executor:
        for epoch in range(ts.epoch + 1, last_epoch + 1):
            with stopwatch() as clock:
                order = np.random.default_rng([hp.seed, epoch]).permutation(train.size)
                for start in range(0, train.size, hp.batch_size):
                    rows = order[start:start + hp.batch_size]
                    _, grad = batch_gradient(ts, train.X[rows], train.y[rows], hp.loss, executor)
                    ts = adam_step(ts, grad, hp.lr, hp.beta1, hp.beta2, hp.eps)
                ts = replace(ts, epoch=epoch)
                metrics = epoch_metrics(ts, dataset, hp.loss, epoch, executor)
            metrics.wall_seconds = clock["seconds"]
            history.append(metrics)
            run_log.info(
                f"Epoch {epoch}/{last_epoch} loss={metrics.train_loss:.6f} "
                f"train_acc={metrics.train_accuracy:.4f} test_acc={metrics.test_accuracy}",
                epoch=epoch,
            )
            if on_epoch is not None:
                on_epoch(ts, metrics)
    return ts, history


def _run_logger(ts: TrainState, **context) -> ContextLogger:
    run_log = ContextLogger(logger)
    run_log.set_context(mode=ts.cfg.mode.value, k=ts.cfg.locality, seed=ts.rng_seed, **context)
    return run_log


def train(cfg: ModelConfig, dataset: FeatureSet, hp: Hyperparams, on_epoch: Optional[EpochCallback] = None,
          state: Optional[TrainState] = None) -> Tuple[TrainState, List[Metrics]]:
    """
    Mini-batch Adam over every unfrozen parameter for epochs state.epoch+1
    through hp.epochs. Shuffles use default_rng([seed, epoch]).

    Raises:
        InvalidValueError: empty training split or labels outside 0..C-1
    """
    ts = state if state is not None else init_state(cfg, hp.seed)
    if ts.cfg != cfg:
        raise InvalidValueError("training state was built for a different model configuration")
    return _run_epochs(ts, dataset, hp, hp.epochs, on_epoch, _run_logger(ts))


def resume(ts: TrainState, dataset: FeatureSet, hp: Hyperparams,
           on_epoch: Optional[EpochCallback] = None) -> Tuple[TrainState, List[Metrics]]:
    """Continue a checkpointed run up to hp.epochs"""
    if ts.epoch >= hp.epochs:
        logger.warning(f"Checkpoint is at epoch {ts.epoch}; nothing to do for {hp.epochs} epochs")
    return _run_epochs(ts, dataset, hp, hp.epochs, on_epoch, _run_logger(ts, resumed_from=ts.epoch))


@dataclass
class RescueResult:
    state: TrainState
    history: List[Metrics]
    baseline: Metrics
    frozen_vqc: Metrics


def rescue_config(vqc: ModelConfig, k: int) -> ModelConfig:
    return ModelConfig(
        n_qubits=vqc.n_qubits,
        locality=k,
        depth=vqc.depth,
        mode=MeasurementMode.DANO,
        n_windows=vqc.n_windows,
        n_classes=vqc.n_classes,
    )


def rescue(checkpoint: TrainState, dataset: FeatureSet, hp: Hyperparams, switch_epoch: Optional[int] = None,
           total_epochs: Optional[int] = None, k: int = DEFAULT_RESCUE_K,
           on_epoch: Optional[EpochCallback] = None) -> RescueResult:
    """
    Freeze the circuit of a pure-VQC checkpoint and train a fresh k-local
    diagonal observable (parity initialised) from switch_epoch+1 to total_epochs.

    Raises:
        InvalidValueError: checkpoint not from a vqc run, or taken at an
            epoch other than switch_epoch
    """
    if checkpoint.cfg.mode is not MeasurementMode.VQC:
        raise InvalidValueError(f"rescue needs a vqc checkpoint, got mode {checkpoint.cfg.mode.value}")
    switch_epoch = checkpoint.epoch if switch_epoch is None else switch_epoch
    if checkpoint.epoch != switch_epoch:
        raise InvalidValueError(f"checkpoint is at epoch {checkpoint.epoch}, switch epoch is {switch_epoch}")
    total_epochs = hp.epochs if total_epochs is None else total_epochs
    problems = ConfigValidator.collect(ConfigValidator.validate_switch_epoch(switch_epoch, total_epochs))
    if problems:
        raise InvalidValueError(problems[0])

    cfg = rescue_config(checkpoint.cfg, k)
    branch = TrainState.initial(
        cfg, checkpoint.circuit_params(), init_observables(cfg), rng_seed=checkpoint.rng_seed, frozen=[THETA],
    )
    branch = replace(branch, epoch=switch_epoch, metadata={"branch": "rescue", "parent_epoch": str(switch_epoch)})
    run_log = _run_logger(branch, branch="rescue", switch_epoch=switch_epoch)

    with ThreadPoolExecutor(max_workers=hp.threads) as executor:
        frozen_vqc = epoch_metrics(checkpoint, dataset, hp.loss, switch_epoch, executor)
        baseline = epoch_metrics(branch, dataset, hp.loss, switch_epoch, executor)
    run_log.info(
        f"Frozen VQC test_acc={frozen_vqc.test_accuracy}; DANO k={k} baseline test_acc={baseline.test_accuracy}"
    )

    ts, history = _run_epochs(branch, dataset, replace_epochs(hp, total_epochs), total_epochs, on_epoch, run_log)
    return RescueResult(state=ts, history=history, baseline=baseline, frozen_vqc=frozen_vqc)


def replace_epochs(hp: Hyperparams, epochs: int) -> Hyperparams:
    return hp.model_copy(update={"epochs": epochs})
