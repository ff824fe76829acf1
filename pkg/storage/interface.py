"""
Run storage: config snapshot, input digests, metrics CSV and checkpoints per run
"""
import csv
import io
import json
import logging
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from services.optimizer import TrainState
from storage.checkpoint import dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from utils.errors import InvalidValueError
from utils.metrics import CSV_COLUMNS, Metrics

logger = logging.getLogger(__name__)

CONFIG_FILE = "config.env"
INPUTS_FILE = "inputs.json"
METRICS_FILE = "metrics.csv"
CHECKPOINT_DIR = "checkpoints"
BEST = "best"


def epoch_checkpoint_name(epoch: int) -> str:
    return f"epoch_{epoch:04d}"


def render_config(snapshot: Dict[str, str]) -> str:
    """key=value lines, sorted, readable back with dotenv"""
    return "".join(f"{key}={value}\n" for key, value in sorted(snapshot.items()))


def metrics_line(metrics: Metrics, include_wall_time: bool, extra: Sequence[str] = ()) -> str:
    buffer = io.StringIO()
    csv.writer(buffer, lineterminator="\n").writerow(metrics.csv_row(include_wall_time) + list(extra))
    return buffer.getvalue()


def rows_through_epoch(text: str, through_epoch: int) -> Tuple[List[str], List[Dict[str, str]]]:
    """(header, rows with epoch <= through_epoch) of a metrics CSV"""
    reader = csv.DictReader(io.StringIO(text))
    rows = [row for row in reader if int(row["epoch"]) <= through_epoch]
    return list(reader.fieldnames or CSV_COLUMNS), rows


def render_metrics(header: Sequence[str], rows: Sequence[Dict[str, str]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([row[column] for column in header] for row in rows)
    return buffer.getvalue()


class RunStorage(ABC):
    """Abstract interface for run artifacts"""

    def __init__(self, include_wall_time: bool = True):
        self.include_wall_time = include_wall_time

    @abstractmethod
    def create_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   extra_columns: Sequence[str] = ()) -> None:
        """Start a run: write the config snapshot, input digests and CSV header"""
        pass

    @abstractmethod
    def reopen_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   through_epoch: int) -> List[Dict[str, str]]:
        """
        Continue an existing run: refresh the snapshot and digests, drop metrics
        rows after through_epoch and return the rows kept. Creates the run when
        it does not exist yet.
        """
        pass

    @abstractmethod
    def append_metrics(self, run_id: str, metrics: Metrics, extra: Sequence[str] = ()) -> None:
        """Append one epoch row"""
        pass

    @abstractmethod
    def read_metrics(self, run_id: str) -> List[Dict[str, str]]:
        """Metrics rows as dicts keyed by column"""
        pass

    @abstractmethod
    def save_checkpoint(self, run_id: str, name: str, ts: TrainState) -> str:
        """Store a checkpoint under name; returns its location"""
        pass

    @abstractmethod
    def load_checkpoint(self, run_id: str, name: str) -> TrainState:
        pass

    @abstractmethod
    def list_checkpoints(self, run_id: str) -> List[str]:
        pass

    @abstractmethod
    def write_document(self, run_id: str, name: str, payload: Dict) -> str:
        """Store a JSON document (report, branch record) next to the run"""
        pass


class InMemoryRunStorage(RunStorage):
    """Keeps everything in dictionaries (tests, dry runs)"""

    def __init__(self, include_wall_time: bool = True):
        super().__init__(include_wall_time)
        self.snapshots: Dict[str, Dict[str, str]] = {}
        self.inputs: Dict[str, Dict[str, str]] = {}
        self.metrics: Dict[str, List[str]] = {}
        self.checkpoints: Dict[str, Dict[str, str]] = {}
        self.documents: Dict[str, Dict[str, Dict]] = {}

    def create_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   extra_columns: Sequence[str] = ()) -> None:
        self.snapshots[run_id] = dict(snapshot)
        self.inputs[run_id] = dict(inputs)
        self.metrics[run_id] = [",".join(CSV_COLUMNS + list(extra_columns)) + "\n"]
        self.checkpoints[run_id] = {}
        self.documents[run_id] = {}

    def reopen_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   through_epoch: int) -> List[Dict[str, str]]:
        if run_id not in self.snapshots:
            self.create_run(run_id, snapshot, inputs)
            return []
        self.snapshots[run_id] = dict(snapshot)
        self.inputs[run_id] = dict(inputs)
        header, rows = rows_through_epoch("".join(self.metrics[run_id]), through_epoch)
        self.metrics[run_id] = render_metrics(header, rows).splitlines(keepends=True)
        return rows

    def _require(self, run_id: str) -> None:
        if run_id not in self.snapshots:
            raise InvalidValueError(f"unknown run {run_id!r}")

    def append_metrics(self, run_id: str, metrics: Metrics, extra: Sequence[str] = ()) -> None:
        self._require(run_id)
        self.metrics[run_id].append(metrics_line(metrics, self.include_wall_time, extra))

    def read_metrics(self, run_id: str) -> List[Dict[str, str]]:
        self._require(run_id)
        return list(csv.DictReader(io.StringIO("".join(self.metrics[run_id]))))

    def save_checkpoint(self, run_id: str, name: str, ts: TrainState) -> str:
        self._require(run_id)
        self.checkpoints[run_id][name] = dumps_checkpoint(ts)
        return f"memory://{run_id}/{name}"

    def load_checkpoint(self, run_id: str, name: str) -> TrainState:
        self._require(run_id)
        if name not in self.checkpoints[run_id]:
            raise InvalidValueError(f"run {run_id!r} has no checkpoint {name!r}")
        return loads_checkpoint(self.checkpoints[run_id][name])

    def list_checkpoints(self, run_id: str) -> List[str]:
        self._require(run_id)
        return sorted(self.checkpoints[run_id])

    def write_document(self, run_id: str, name: str, payload: Dict) -> str:
        self._require(run_id)
        self.documents[run_id][name] = json.loads(json.dumps(payload))
        return f"memory://{run_id}/{name}.json"


class DirectoryRunStorage(RunStorage):
    """
    One directory per run under root:

        <root>/<run_id>/config.env
        <root>/<run_id>/inputs.json
        <root>/<run_id>/metrics.csv
        <root>/<run_id>/checkpoints/epoch_0001.json ... best.json
    """

    def __init__(self, root: Union[str, Path], include_wall_time: bool = True):
        super().__init__(include_wall_time)
        self.root = Path(root)

    def run_dir(self, run_id: str) -> Path:
        return self.root / run_id

    def _require(self, run_id: str) -> Path:
        path = self.run_dir(run_id)
        if not path.is_dir():
            raise InvalidValueError(f"run directory {path} does not exist")
        return path

    def create_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   extra_columns: Sequence[str] = ()) -> None:
        path = self.run_dir(run_id)
        path.mkdir(parents=True, exist_ok=True)
        (path / CONFIG_FILE).write_text(render_config(snapshot), encoding="utf-8")
        (path / INPUTS_FILE).write_text(json.dumps(inputs, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        (path / METRICS_FILE).write_text(",".join(CSV_COLUMNS + list(extra_columns)) + "\n", encoding="utf-8")
        logger.info(f"Created run directory {path}")

    def reopen_run(self, run_id: str, snapshot: Dict[str, str], inputs: Dict[str, str],
                   through_epoch: int) -> List[Dict[str, str]]:
        path = self.run_dir(run_id)
        metrics_path = path / METRICS_FILE
        if not metrics_path.is_file():
            self.create_run(run_id, snapshot, inputs)
            return []
        (path / CONFIG_FILE).write_text(render_config(snapshot), encoding="utf-8")
        (path / INPUTS_FILE).write_text(json.dumps(inputs, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        header, rows = rows_through_epoch(metrics_path.read_text(encoding="utf-8"), through_epoch)
        with metrics_path.open("w", encoding="utf-8", newline="") as handle:
            handle.write(render_metrics(header, rows))
        logger.info(f"Reopened run directory {path} with {len(rows)} earlier epochs")
        return rows

    def append_metrics(self, run_id: str, metrics: Metrics, extra: Sequence[str] = ()) -> None:
        path = self._require(run_id) / METRICS_FILE
        with path.open("a", encoding="utf-8", newline="") as handle:
            handle.write(metrics_line(metrics, self.include_wall_time, extra))

    def read_metrics(self, run_id: str) -> List[Dict[str, str]]:
        path = self._require(run_id) / METRICS_FILE
        with path.open(encoding="utf-8", newline="") as handle:
            return list(csv.DictReader(handle))

    def checkpoint_path(self, run_id: str, name: str) -> Path:
        return self.run_dir(run_id) / CHECKPOINT_DIR / f"{name}.json"

    def save_checkpoint(self, run_id: str, name: str, ts: TrainState) -> str:
        self._require(run_id)
        return str(save_checkpoint(ts, self.checkpoint_path(run_id, name)))

    def load_checkpoint(self, run_id: str, name: str) -> TrainState:
        path = self.checkpoint_path(run_id, name)
        if not path.is_file():
            raise InvalidValueError(f"checkpoint {path} does not exist")
        return load_checkpoint(path)

    def list_checkpoints(self, run_id: str) -> List[str]:
        folder = self._require(run_id) / CHECKPOINT_DIR
        if not folder.is_dir():
            return []
        return sorted(p.stem for p in folder.glob("*.json"))

    def write_document(self, run_id: str, name: str, payload: Dict) -> str:
        path = self._require(run_id) / f"{name}.json"
        path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n", encoding="utf-8")
        return str(path)


def open_storage(root: Optional[Union[str, Path]], include_wall_time: bool = True) -> RunStorage:
    """Directory storage under root, or in-memory storage when root is None"""
    if root is None:
        return InMemoryRunStorage(include_wall_time)
    return DirectoryRunStorage(root, include_wall_time)
