"""
Tests for checkpoints, run storage and content digests
"""
import json

import numpy as np
import pytest

from app.models.config_models import MeasurementMode, ModelConfig
from services.optimizer import THETA, TrainState
from services.trainer import init_state
from storage.checkpoint import dumps_checkpoint, load_checkpoint, loads_checkpoint, save_checkpoint
from storage.digest import blob_digest, file_digest
from storage.interface import (
    BEST,
    CONFIG_FILE,
    INPUTS_FILE,
    METRICS_FILE,
    DirectoryRunStorage,
    InMemoryRunStorage,
    epoch_checkpoint_name,
    open_storage,
)
from utils.errors import FormatError, InvalidValueError, ShapeError, UnsupportedFormatError
from utils.metrics import CSV_COLUMNS, Metrics


def trained_state(mode=MeasurementMode.DANO, frozen=()) -> TrainState:
    cfg = ModelConfig(n_qubits=3, locality=2, depth=2, mode=mode, n_classes=2)
    base = init_state(cfg, seed=5)
    ts = TrainState.initial(cfg, base.circuit_params(), base.observables(), rng_seed=5, frozen=frozen)
    gen = np.random.default_rng(11)
    ts.params[:] = gen.standard_normal(ts.params.size) / 3.0
    ts.adam_m[:] = gen.standard_normal(ts.params.size) * 1e-3
    ts.adam_v[:] = gen.random(ts.params.size) * 1e-6
    ts.metadata["run_id"] = "unit"
    return ts


class TestCheckpoint:
    """JSON checkpoint documents"""

    @pytest.mark.parametrize("mode", [MeasurementMode.VQC, MeasurementMode.DANO, MeasurementMode.ANO])
    def test_round_trip_is_bit_exact(self, mode):
        """Test save then load restores every double exactly"""
        ts = trained_state(mode)
        loaded = loads_checkpoint(dumps_checkpoint(ts))
        assert loaded.cfg == ts.cfg
        assert loaded.params.tobytes() == ts.params.tobytes()
        assert loaded.adam_m.tobytes() == ts.adam_m.tobytes()
        assert loaded.adam_v.tobytes() == ts.adam_v.tobytes()
        assert loaded.metadata == {"run_id": "unit"}

    def test_frozen_indices_survive(self, tmp_path):
        """Test frozen blocks survive a round trip"""
        ts = trained_state(frozen=[THETA])
        loaded = load_checkpoint(save_checkpoint(ts, tmp_path / "ck" / "a.json"))
        assert np.array_equal(loaded.frozen_mask, ts.frozen_mask)
        assert loaded.frozen_mask.sum() == 6

    def test_save_leaves_no_partial_file(self, tmp_path):
        """Test no temporary file is left behind"""
        save_checkpoint(trained_state(), tmp_path / "a.json")
        assert [p.name for p in tmp_path.iterdir()] == ["a.json"]

    def test_floats_written_as_strings(self):
        """Test floats are stored as decimal strings"""
        doc = json.loads(dumps_checkpoint(trained_state()))
        assert doc["format"] == "dano-checkpoint"
        assert all(isinstance(v, str) for v in doc["params"])

    def test_unknown_version(self):
        """Test a newer format version is unsupported"""
        doc = json.loads(dumps_checkpoint(trained_state()))
        doc["format_version"] = 2
        with pytest.raises(UnsupportedFormatError):
            loads_checkpoint(json.dumps(doc))

    def test_invalid_json(self):
        """Test malformed JSON is a format error"""
        with pytest.raises(FormatError):
            loads_checkpoint("{not json")

    def test_missing_field(self):
        """Test a missing field is a format error"""
        doc = json.loads(dumps_checkpoint(trained_state()))
        del doc["params"]
        with pytest.raises(FormatError):
            loads_checkpoint(json.dumps(doc))

    def test_layout_must_match_config(self):
        """Test parameter counts must match the config"""
        doc = json.loads(dumps_checkpoint(trained_state()))
        doc["layout"][0]["shape"] = [3, 3]
        with pytest.raises(ShapeError):
            loads_checkpoint(json.dumps(doc))

    def test_non_numeric_value(self):
        """Test a non-numeric value is a format error"""
        doc = json.loads(dumps_checkpoint(trained_state()))
        doc["params"][0] = "abc"
        with pytest.raises(FormatError):
            loads_checkpoint(json.dumps(doc))


class TestDigest:
    """git-compatible blob digests"""

    def test_empty_blob(self):
        """Test the empty blob digest"""
        assert blob_digest(b"") == "e69de29bb2d1d6434b8b29ae775ad8c2e48c5391"

    def test_hello(self):
        """Test the digest of hello plus a newline"""
        assert blob_digest(b"hello\n") == "ce013625030ba8dba906f756967f9e9ca394464a"

    def test_file_digest_matches_content(self, tmp_path):
        """Test file and in-memory digests agree"""
        path = tmp_path / "x.txt"
        path.write_bytes(b"hello\n")
        assert file_digest(path) == blob_digest(b"hello\n")


class TestMetricsRow:
    """CSV rows for one epoch"""

    def test_columns(self):
        """Test the metrics column order"""
        assert CSV_COLUMNS == ["epoch", "train_loss", "train_acc", "val_acc", "test_acc", "wall_seconds"]

    def test_row_without_wall_time(self):
        """Test wall time can be left blank"""
        row = Metrics(3, 0.5, 0.75, None, 0.25, wall_seconds=1.5).csv_row(include_wall_time=False)
        assert row == ["3", "0.5", "0.75", "", "0.25", ""]

    def test_accuracy_range(self):
        """Test accuracies outside [0, 1] are rejected"""
        with pytest.raises(ValueError):
            Metrics(1, 0.1, 1.5)


@pytest.fixture(params=["memory", "directory"])
def storage(request, tmp_path):
    if request.param == "memory":
        return InMemoryRunStorage(include_wall_time=False)
    return DirectoryRunStorage(tmp_path / "runs", include_wall_time=False)


class TestRunStorage:
    """Both storage backends behave the same"""

    def test_metrics_round_trip(self, storage):
        """Test metrics rows read back as written"""
        storage.create_run("r1", {"n": "3"}, {"dataset": "abc"})
        storage.append_metrics("r1", Metrics(1, 0.7, 0.5, 0.5, 0.25, wall_seconds=2.0))
        storage.append_metrics("r1", Metrics(2, 0.6, 0.75, 1.0, 0.5, wall_seconds=2.0))
        rows = storage.read_metrics("r1")
        assert [row["epoch"] for row in rows] == ["1", "2"]
        assert rows[1]["val_acc"] == "1.0"
        assert rows[0]["wall_seconds"] == ""

    def test_extra_columns(self, storage):
        """Test extra branch columns are stored"""
        storage.create_run("r1", {}, {}, extra_columns=["branch_id", "theta_digest"])
        storage.append_metrics("r1", Metrics(1, 0.7, 0.5), extra=["b", "deadbeef"])
        row = storage.read_metrics("r1")[0]
        assert (row["branch_id"], row["theta_digest"]) == ("b", "deadbeef")

    def test_checkpoints(self, storage):
        """Test checkpoints are listed and loaded"""
        storage.create_run("r1", {}, {})
        ts = trained_state()
        storage.save_checkpoint("r1", epoch_checkpoint_name(1), ts)
        storage.save_checkpoint("r1", BEST, ts)
        assert storage.list_checkpoints("r1") == ["best", "epoch_0001"]
        assert storage.load_checkpoint("r1", BEST).params.tobytes() == ts.params.tobytes()

    def test_missing_checkpoint(self, storage):
        """Test loading an absent checkpoint fails"""
        storage.create_run("r1", {}, {})
        with pytest.raises(InvalidValueError):
            storage.load_checkpoint("r1", "epoch_0009")

    def test_unknown_run(self, storage):
        """Test writing to an unknown run fails"""
        with pytest.raises(InvalidValueError):
            storage.append_metrics("nope", Metrics(1, 0.1, 0.5))

    def test_write_document(self, storage):
        """Test JSON documents are stored next to the run"""
        storage.create_run("r1", {}, {})
        assert storage.write_document("r1", "branch", {"k": 4}).endswith("branch.json")

    def test_reopen_keeps_rows_up_to_epoch(self, storage):
        """Reopening drops only the rows after the resume epoch"""
        storage.create_run("r1", {"epochs": "3"}, {"dataset": "abc"})
        for epoch in (1, 2, 3):
            storage.append_metrics("r1", Metrics(epoch, 0.5, 0.5, 0.25 * epoch, 0.5))
        kept = storage.reopen_run("r1", {"epochs": "5"}, {"dataset": "abc"}, through_epoch=2)
        assert [row["epoch"] for row in kept] == ["1", "2"]
        storage.append_metrics("r1", Metrics(3, 0.4, 0.5, 0.5, 0.5))
        rows = storage.read_metrics("r1")
        assert [row["epoch"] for row in rows] == ["1", "2", "3"]
        assert rows[2]["train_loss"] == "0.4"

    def test_reopen_keeps_extra_columns(self, storage):
        """Branch columns survive a reopen"""
        storage.create_run("r1", {}, {}, extra_columns=["branch_id"])
        storage.append_metrics("r1", Metrics(1, 0.7, 0.5), extra=["b"])
        storage.reopen_run("r1", {}, {}, through_epoch=1)
        assert storage.read_metrics("r1")[0]["branch_id"] == "b"

    def test_reopen_unknown_run_creates_it(self, storage):
        """Resuming into a fresh run id starts an empty metrics table"""
        assert storage.reopen_run("fresh", {}, {}, through_epoch=4) == []
        assert storage.read_metrics("fresh") == []


class TestDirectoryLayout:
    """Files written under a run directory"""

    def test_files(self, tmp_path):
        """Test config.env, inputs.json and the metrics header"""
        storage = open_storage(tmp_path)
        storage.create_run("r1", {"n": "3", "mode": "dano"}, {"dataset": "abc"})
        run = tmp_path / "r1"
        assert (run / CONFIG_FILE).read_text() == "mode=dano\nn=3\n"
        assert json.loads((run / INPUTS_FILE).read_text()) == {"dataset": "abc"}
        assert (run / METRICS_FILE).read_text() == ",".join(CSV_COLUMNS) + "\n"

    def test_checkpoint_path(self, tmp_path):
        """Test epoch checkpoint file names"""
        storage = DirectoryRunStorage(tmp_path)
        storage.create_run("r1", {}, {})
        storage.save_checkpoint("r1", epoch_checkpoint_name(12), trained_state())
        assert (tmp_path / "r1" / "checkpoints" / "epoch_0012.json").is_file()

    def test_reopen_rewrites_snapshot(self, tmp_path):
        """config.env and inputs.json describe the resumed session"""
        storage = DirectoryRunStorage(tmp_path)
        storage.create_run("r1", {"epochs": "3"}, {"dataset": "abc"})
        storage.reopen_run("r1", {"epochs": "5"}, {"dataset": "abc", "checkpoint": "def"}, through_epoch=3)
        assert (tmp_path / "r1" / CONFIG_FILE).read_text() == "epochs=5\n"
        assert json.loads((tmp_path / "r1" / INPUTS_FILE).read_text())["checkpoint"] == "def"

    def test_open_storage_without_root(self):
        """Test no root gives in-memory storage"""
        assert isinstance(open_storage(None), InMemoryRunStorage)
