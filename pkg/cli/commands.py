"""
Command implementations behind main.py.

Every command takes the parsed argparse namespace and returns a process exit
status. Run configuration comes from an optional key=value file, overridden
by explicit flags, and is validated before any compute starts.
"""
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Set, Tuple, Union

import numpy as np
from dotenv import dotenv_values

from app.models.config_models import MeasurementMode, RunConfig, validate_run_config
from pipelines.feature_set import FeatureSet, load_feature_set, save_feature_set
from pipelines.mnist import build_mnist_features
from pipelines.splits import TEST, TRAIN, VAL
from pipelines.yaleb import build_yaleb_features
from services.benchmark import GRADIENT_COLUMNS, MEASUREMENT_COLUMNS, bench_gradients, bench_grid, rows_to_table
from services.circuit import count_params
from services.optimizer import THETA, TrainState
from services.trainer import DEFAULT_RESCUE_K, evaluate, rescue, resume, train
from services.verification import run_verification
from storage.checkpoint import load_checkpoint
from storage.digest import blob_digest, file_digest
from storage.interface import BEST, DirectoryRunStorage, RunStorage, epoch_checkpoint_name
from utils.errors import ConfigError, InvalidValueError
from utils.logging_config import ContextLogger
from utils.metrics import Metrics
from utils.settings import get_settings

logger = logging.getLogger(__name__)

# argparse destinations that map onto RunConfig fields
RUN_FIELDS = (
    "mode", "n", "k", "depth", "m", "classes", "seed", "epochs", "batch", "lr", "beta1", "beta2", "eps",
    "loss", "threads", "dataset", "out", "run_id", "switch_epoch", "checkpoint",
)
BRANCH_COLUMNS = ["branch_id", "switch_epoch", "parent_run", "theta_digest"]


# --- configuration -----------------------------------------------------------

def read_config_file(path: Optional[str]) -> Dict[str, str]:
    """Flat key=value file; keys are lower-cased and dashes become underscores"""
    if not path:
        return {}
    if not Path(path).is_file():
        raise ConfigError([f"config file {path} does not exist"])
    values = dotenv_values(path)
    return {key.strip().lower().replace("-", "_"): value for key, value in values.items() if value is not None}


def load_run_config(args: Any) -> Tuple[RunConfig, Set[str]]:
    """
    Merge the config file with explicit flags (flags win) and validate.

    Returns:
        (validated RunConfig, names of the keys that were given explicitly)
    """
    merged: Dict[str, Any] = read_config_file(getattr(args, "config", None))
    for name in RUN_FIELDS:
        value = getattr(args, name, None)
        if value is not None:
            merged[name] = value
    settings = get_settings()
    explicit = {key for key, value in merged.items() if value not in (None, "")}
    merged.setdefault("threads", settings.default_threads)
    merged.setdefault("out", settings.output_root)
    return validate_run_config(merged), explicit


def default_run_id(config: RunConfig) -> str:
    if config.mode is MeasurementMode.VQC:
        return f"vqc-L{config.depth}-s{config.seed}"
    return f"{config.mode.value}-k{config.k}-L{config.depth}-s{config.seed}"


def require_dataset(config: RunConfig) -> FeatureSet:
    if config.dataset is None:
        raise ConfigError(["dataset: a feature-set cache is required (run prep-data first)"])
    if not config.dataset.is_file():
        raise ConfigError([f"dataset: {config.dataset} does not exist"])
    return load_feature_set(config.dataset)


def wall_time_enabled(args: Any) -> bool:
    return get_settings().record_wall_time and not getattr(args, "no_wall_time", False)


def _print_json(payload: Dict) -> None:
    sys.stdout.write(json.dumps(payload, indent=2, sort_keys=True) + "\n")


# --- prep-data ---------------------------------------------------------------

def cmd_prep_data(args: Any) -> int:
    """Build a FeatureSet cache plus a .meta.json sidecar from raw MNIST or Yale-B files"""
    if args.source == "mnist":
        features = build_mnist_features(
            args.images, args.labels, limit=args.limit, test_count=args.test_count, seed=args.seed or 0,
        )
    else:
        reconstruct_dir = Path(args.out).parent / "reconstructions" if args.reconstruct else None
        features = build_yaleb_features(
            args.root,
            n_subjects=args.subjects_count,
            d=args.components,
            seed=args.seed or 0,
            max_azimuth=args.max_azimuth,
            subjects=args.subjects,
            threads=args.threads or get_settings().default_threads,
            reconstruct=args.reconstruct,
            reconstruct_dir=reconstruct_dir,
        )

    out = save_feature_set(features, args.out)
    sidecar = out.with_name(out.name + ".meta.json")
    meta = {
        **features.metadata,
        "rows": int(features.labels.size),
        "n_features": features.n_features,
        "n_classes": features.n_classes,
        "split_sizes": features.split_sizes(),
        "cache_digest": file_digest(out),
    }
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    logger.info(f"Pipeline metadata written to {sidecar}")
    _print_json({"cache": str(out), "metadata": str(sidecar), "split_sizes": features.split_sizes()})
    return 0


# --- train / resume ----------------------------------------------------------

class RunRecorder:
    """Epoch callback: metrics row, per-epoch checkpoint and the best checkpoint"""

    def __init__(self, storage: RunStorage, run_id: str,
                 extra: Union[Sequence[str], Callable[[TrainState], List[str]], None] = None,
                 metadata: Optional[Dict[str, str]] = None):
        self.storage = storage
        self.run_id = run_id
        self.extra = extra
        self.metadata = {"run_id": run_id, **(metadata or {})}
        self.best_score: Optional[float] = None
        self.best_epoch: Optional[int] = None

    @staticmethod
    def score(metrics: Metrics) -> Optional[float]:
        """Validation accuracy, or test accuracy for datasets without a validation split"""
        return metrics.val_accuracy if metrics.val_accuracy is not None else metrics.test_accuracy

    @staticmethod
    def row_score(row: Dict[str, str]) -> Optional[float]:
        """score() for a metrics CSV row"""
        value = row.get("val_acc") or row.get("test_acc")
        return float(value) if value else None

    def seed(self, rows: Sequence[Dict[str, str]]) -> None:
        """Best epoch of an earlier session of this run; best.json is restored from its epoch checkpoint"""
        for row in rows:
            score = self.row_score(row)
            if score is not None and (self.best_score is None or score > self.best_score):
                self.best_score = score
                self.best_epoch = int(row["epoch"])
        if self.best_epoch is None:
            return
        name = epoch_checkpoint_name(self.best_epoch)
        if name in self.storage.list_checkpoints(self.run_id):
            self.storage.save_checkpoint(self.run_id, BEST, self.storage.load_checkpoint(self.run_id, name))

    def __call__(self, ts: TrainState, metrics: Metrics) -> None:
        ts = replace(ts, metadata={**ts.metadata, **self.metadata})
        extra = self.extra(ts) if callable(self.extra) else (self.extra or [])
        self.storage.append_metrics(self.run_id, metrics, extra)
        self.storage.save_checkpoint(self.run_id, epoch_checkpoint_name(metrics.epoch), ts)
        score = self.score(metrics)
        if score is not None and (self.best_score is None or score > self.best_score):
            self.best_score = score
            self.best_epoch = metrics.epoch
            self.storage.save_checkpoint(self.run_id, BEST, ts)


def cmd_train(args: Any) -> int:
    """Train from scratch (or resume from --checkpoint) and record the run"""
    config, _ = load_run_config(args)
    dataset = require_dataset(config)
    run_id = config.run_id or default_run_id(config)
    model_cfg = config.to_model_config()
    hp = config.to_hyperparams()

    counts = count_params(model_cfg)
    run_log = ContextLogger(logger, run_id=run_id, mode=config.mode.value)
    run_log.info(f"Parameters: circuit {counts.circuit}, observable {counts.observable}, total {counts.total}")

    storage = DirectoryRunStorage(config.out, include_wall_time=wall_time_enabled(args))
    inputs = {"dataset": file_digest(config.dataset)}
    recorder = RunRecorder(storage, run_id)

    if config.checkpoint is not None:
        state = load_checkpoint(config.checkpoint)
        if state.cfg != model_cfg:
            raise ConfigError([f"checkpoint: {config.checkpoint} was written for a different model configuration"])
        inputs["checkpoint"] = file_digest(config.checkpoint)
        # Rows up to the checkpoint epoch stay; later ones are recomputed
        recorder.seed(storage.reopen_run(run_id, config.snapshot(), inputs, through_epoch=state.epoch))
        run_log.bind(resumed_from=state.epoch).info(f"Resuming from epoch {state.epoch}")
        ts, history = resume(state, dataset, hp, on_epoch=recorder)
    else:
        storage.create_run(run_id, config.snapshot(), inputs)
        ts, history = train(model_cfg, dataset, hp, on_epoch=recorder)

    _print_json({
        "run_id": run_id,
        "run_dir": str(storage.run_dir(run_id)),
        "params": {"circuit": counts.circuit, "observable": counts.observable, "total": counts.total},
        "epochs": len(history),
        "best_epoch": recorder.best_epoch,
        "final": history[-1].to_dict() if history else None,
    })
    return 0


# --- rescue ------------------------------------------------------------------

def theta_digest(ts: TrainState) -> str:
    return blob_digest(np.ascontiguousarray(ts.block(THETA)).tobytes())


def cmd_rescue(args: Any) -> int:
    """Branch a pure-VQC checkpoint into a frozen-circuit DANO run"""
    config, explicit = load_run_config(args)
    if config.checkpoint is None:
        raise ConfigError(["checkpoint: rescue needs the VQC checkpoint taken at the switch epoch"])
    dataset = require_dataset(config)
    parent = load_checkpoint(config.checkpoint)
    if parent.cfg.mode is not MeasurementMode.VQC:
        raise InvalidValueError(f"rescue needs a vqc checkpoint, got mode {parent.cfg.mode.value}")

    k = config.k if "k" in explicit else DEFAULT_RESCUE_K
    if not 1 <= k <= parent.cfg.n_qubits:
        raise ConfigError([f"k: {k} must lie in 1..{parent.cfg.n_qubits}, the qubit count of the parent model"])
    switch_epoch = config.switch_epoch if "switch_epoch" in explicit else parent.epoch
    parent_run = parent.metadata.get("run_id", config.checkpoint.parent.parent.name)
    branch_id = config.run_id or f"{parent_run}-rescue-k{k}-e{switch_epoch}"
    hp = config.to_hyperparams()

    storage = DirectoryRunStorage(config.out, include_wall_time=wall_time_enabled(args))
    snapshot = {**config.snapshot(), "k": str(k), "mode": MeasurementMode.DANO.value,
                "switch_epoch": str(switch_epoch), "parent_run": parent_run}
    storage.create_run(
        branch_id, snapshot,
        {"dataset": file_digest(config.dataset), "parent_checkpoint": file_digest(config.checkpoint)},
        extra_columns=BRANCH_COLUMNS,
    )
    recorder = RunRecorder(
        storage, branch_id,
        extra=lambda ts: [branch_id, str(switch_epoch), parent_run, theta_digest(ts)],
        metadata={"parent_run": parent_run},
    )

    result = rescue(parent, dataset, hp, switch_epoch=switch_epoch, total_epochs=config.epochs,
                    k=k, on_epoch=recorder)
    storage.write_document(branch_id, "branch", {
        "branch_id": branch_id,
        "parent_run": parent_run,
        "switch_epoch": switch_epoch,
        "k": k,
        "theta_digest": theta_digest(parent),
        "frozen_vqc": result.frozen_vqc.to_dict(),
        "baseline": result.baseline.to_dict(),
    })
    _print_json({
        "branch_id": branch_id,
        "run_dir": str(storage.run_dir(branch_id)),
        "frozen_vqc_test_acc": result.frozen_vqc.test_accuracy,
        "baseline_test_acc": result.baseline.test_accuracy,
        "final": result.history[-1].to_dict() if result.history else None,
    })
    return 0


# --- eval --------------------------------------------------------------------

def cmd_eval(args: Any) -> int:
    """Accuracy of a checkpoint on every non-empty split of a feature set"""
    ts = load_checkpoint(args.checkpoint)
    dataset = load_feature_set(args.dataset)
    accuracies = {
        tag: evaluate(ts, dataset.split(tag))
        for tag in (TRAIN, VAL, TEST) if dataset.has_split(tag)
    }
    _print_json({"checkpoint": str(args.checkpoint), "epoch": ts.epoch, "accuracy": accuracies})
    return 0


# --- verify ------------------------------------------------------------------

def cmd_verify(args: Any) -> int:
    """Run the randomized self-checks; exit status 1 when any suite fails"""
    report = run_verification(
        seed=args.seed or 0, suites=args.suite, cases=args.cases, inject_fault=args.inject_fault,
    )
    payload = {**report.model_dump(), "passed": report.passed}
    if args.report:
        Path(args.report).parent.mkdir(parents=True, exist_ok=True)
        Path(args.report).write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
        logger.info(f"Verify report written to {args.report}")
    _print_json(payload)
    return 0 if report.passed else 1


# --- bench -------------------------------------------------------------------

def _write_table(table: List[List[str]], out: Optional[str]) -> None:
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        with open(out, "w", encoding="utf-8", newline="") as handle:
            csv.writer(handle, lineterminator="\n").writerows(table)
        logger.info(f"Benchmark table written to {out}")
    else:
        csv.writer(sys.stdout, lineterminator="\n").writerows(table)


def cmd_bench(args: Any) -> int:
    """Time diagonal vs dense window measurement over an (n, k) grid"""
    rows = bench_grid(args.n, args.k, repeats=args.repeats, states=args.states, seed=args.seed or 0)
    _write_table(rows_to_table(rows, MEASUREMENT_COLUMNS), args.out)
    if args.gradients:
        grad_rows = [bench_gradients(n, depth=args.depth, repeats=args.repeats, seed=args.seed or 0)
                     for n in args.n]
        grad_out = str(Path(args.out).with_name(Path(args.out).stem + "_gradients.csv")) if args.out else None
        _write_table(rows_to_table(grad_rows, GRADIENT_COLUMNS), grad_out)
    return 0
