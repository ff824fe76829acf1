"""
Configuration models for the classifier, the optimizer and CLI runs
"""
from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Mapping, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator

from utils.errors import ConfigError
from utils.settings import get_settings
from utils.validation import ConfigValidator


class MeasurementMode(str, Enum):
    """How the circuit output is measured."""
    VQC = "vqc"     # fixed Pauli-Z per qubit
    DANO = "dano"   # trainable diagonal k-local eigenvalues
    ANO = "ano"     # trainable dense k-local Hermitian


class LossKind(str, Enum):
    CROSS_ENTROPY = "ce"
    MSE = "mse"


def mode_value(mode: Any) -> str:
    """Lower-case mode string for an enum member or raw text"""
    if isinstance(mode, Enum):
        return str(mode.value)
    return str(mode or "").strip().lower()


class ModelConfig(BaseModel):
    """
    Shape of a classifier: n qubits, locality k, circuit depth L, measurement
    mode, number of sliding windows m and number of classes C.
    """
    model_config = ConfigDict(frozen=True)

    n_qubits: int
    locality: int = 1
    depth: int = Field(default=6, ge=0)
    mode: MeasurementMode = MeasurementMode.DANO
    n_windows: Optional[int] = None
    # None for a bare circuit without a classification head
    n_classes: Optional[int] = None

    @model_validator(mode="before")
    @classmethod
    def apply_mode_defaults(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        data = dict(data)
        # Pure VQC measures Pauli-Z on single qubits
        if mode_value(data.get("mode")) == MeasurementMode.VQC.value:
            data["locality"] = 1
        if data.get("n_windows") is None and data.get("n_qubits") is not None:
            data["n_windows"] = data["n_qubits"]
        return data

    @model_validator(mode="after")
    def check_shape(self) -> "ModelConfig":
        problems = ConfigValidator.model_shape_problems(
            self.n_qubits, self.locality, self.n_windows, self.n_classes,
            cap=get_settings().max_qubits,
        )
        if problems:
            raise ValueError("; ".join(problems))
        return self

    @property
    def m(self) -> int:
        return self.n_windows

    @property
    def observable_dim(self) -> int:
        """K = 2^k"""
        return 1 << self.locality


class Hyperparams(BaseModel):
    """Optimizer and loop settings"""
    model_config = ConfigDict(frozen=True)

    lr: float = Field(default=0.01, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    batch_size: int = Field(default=32, ge=1)
    epochs: int = Field(default=50, ge=0)
    loss: LossKind = LossKind.CROSS_ENTROPY
    seed: int = 0
    threads: int = Field(default=1, ge=1)


class RunConfig(BaseModel):
    """Everything a CLI run needs, validated before any compute."""
    model_config = ConfigDict(extra="forbid")

    mode: MeasurementMode = MeasurementMode.DANO
    n: int = 16
    k: int = 4
    depth: int = Field(default=6, ge=0)
    m: Optional[int] = None
    classes: int = 10
    seed: int = 0
    epochs: int = Field(default=50, ge=0)
    batch: int = Field(default=32, ge=1)
    lr: float = Field(default=0.01, gt=0)
    beta1: float = Field(default=0.9, ge=0, lt=1)
    beta2: float = Field(default=0.999, ge=0, lt=1)
    eps: float = Field(default=1e-8, gt=0)
    loss: LossKind = LossKind.CROSS_ENTROPY
    threads: int = Field(default=1, ge=1)
    dataset: Optional[Path] = None
    out: Path = Path("runs")
    run_id: Optional[str] = None
    switch_epoch: int = Field(default=30, ge=0)
    checkpoint: Optional[Path] = None

    def to_model_config(self) -> ModelConfig:
        return ModelConfig(
            n_qubits=self.n,
            locality=self.k,
            depth=self.depth,
            mode=self.mode,
            n_windows=self.m,
            n_classes=self.classes,
        )

    def to_hyperparams(self) -> Hyperparams:
        return Hyperparams(
            lr=self.lr, beta1=self.beta1, beta2=self.beta2, eps=self.eps,
            batch_size=self.batch, epochs=self.epochs, loss=self.loss,
            seed=self.seed, threads=self.threads,
        )

    def snapshot(self) -> Dict[str, str]:
        """Flat key=value view written into run directories"""
        return {
            key: "" if value is None else str(value.value if isinstance(value, Enum) else value)
            for key, value in self.model_dump().items()
        }


def _as_int(value: Any) -> Optional[int]:
    try:
        return int(value)
    except (TypeError, ValueError):
        return None


def validate_run_config(values: Mapping[str, Any]) -> RunConfig:
    """
    Validate a merged config mapping, reporting field errors and cross-field
    rule violations together.

    Raises:
        ConfigError: listing every problem found
    """
    problems: List[str] = []
    config: Optional[RunConfig] = None
    cleaned = {key: value for key, value in values.items() if value is not None and value != ""}

    try:
        config = RunConfig.model_validate(cleaned)
    except ValidationError as exc:
        for error in exc.errors():
            location = ".".join(str(part) for part in error["loc"]) or "config"
            problems.append(f"{location}: {error['msg']}")

    mode = mode_value(cleaned.get("mode", MeasurementMode.DANO))
    n = _as_int(cleaned.get("n", 16))
    k = 1 if mode == MeasurementMode.VQC.value else _as_int(cleaned.get("k", 4))
    m = _as_int(cleaned.get("m")) if cleaned.get("m") is not None else n
    problems.extend(ConfigValidator.model_shape_problems(
        n, k, m, _as_int(cleaned.get("classes", 10)), cap=get_settings().max_qubits,
    ))

    if problems:
        raise ConfigError(problems)
    return config
