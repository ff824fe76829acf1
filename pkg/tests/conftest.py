import os
import struct
import sys

import numpy as np
import pytest

# Ensure test runner can import project modules from the repository root
root = os.path.abspath(os.path.join(os.path.dirname(__file__), '..'))
if root not in sys.path:
    sys.path.insert(0, root)

from pipelines.feature_set import FeatureSet  # noqa: E402


def idx_images_bytes(images: np.ndarray) -> bytes:
    count, rows, cols = images.shape
    return struct.pack(">IIII", 0x00000803, count, rows, cols) + images.astype(np.uint8).tobytes()


def idx_labels_bytes(labels: np.ndarray) -> bytes:
    return struct.pack(">II", 0x00000801, len(labels)) + np.asarray(labels, dtype=np.uint8).tobytes()


def pgm_bytes(image: np.ndarray, maxval: int = 255, comment: bool = False) -> bytes:
    rows, cols = image.shape
    header = b"P5\n" + (b"# synthetic\n" if comment else b"") + f"{cols} {rows}\n{maxval}\n".encode()
    return header + image.astype(np.uint8).tobytes()


def random_state(n: int, rng: np.random.Generator) -> np.ndarray:
    amps = rng.standard_normal(1 << n) + 1j * rng.standard_normal(1 << n)
    return amps / np.linalg.norm(amps)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def toy_dataset():
    """Two separable classes on 2 qubits with train/val/test rows"""
    gen = np.random.default_rng(7)
    rows = []
    labels = []
    tags = []
    for tag, count in (("train", 16), ("val", 4), ("test", 4)):
        for i in range(count):
            label = i % 2
            centre = -1.2 if label == 0 else 1.2
            rows.append(np.clip(centre + 0.2 * gen.standard_normal(2), -np.pi, np.pi))
            labels.append(label)
            tags.append(tag)
    return FeatureSet(np.array(rows), np.array(labels), np.array(tags), n_classes=2)


@pytest.fixture
def mnist_files(tmp_path):
    """40 synthetic 28x28 digits with labels 0..9 written as an IDX pair"""
    gen = np.random.default_rng(3)
    images = gen.integers(0, 256, size=(40, 28, 28))
    labels = np.arange(40) % 10
    images_path = tmp_path / "images.idx3-ubyte"
    labels_path = tmp_path / "labels.idx1-ubyte"
    images_path.write_bytes(idx_images_bytes(images))
    labels_path.write_bytes(idx_labels_bytes(labels))
    return images_path, labels_path


@pytest.fixture
def yale_root(tmp_path):
    """Four subjects with six easy-lighting 8x6 PGM images each"""
    folder = tmp_path / "yaleb"
    folder.mkdir()
    gen = np.random.default_rng(5)
    for subject in (1, 2, 3, 5):
        base = gen.integers(0, 256, size=(8, 6))
        for index, azimuth in enumerate((0, 5, 10, 15, 20, -20)):
            image = np.clip(base + gen.integers(-20, 21, size=(8, 6)), 0, 255)
            sign = "+" if azimuth >= 0 else "-"
            name = f"yaleB{subject:02d}_P00A{sign}{abs(azimuth):03d}E+{index:02d}.pgm"
            (folder / name).write_bytes(pgm_bytes(image))
        # Hard lighting, filtered out
        (folder / f"yaleB{subject:02d}_P00A+110E+00.pgm").write_bytes(pgm_bytes(base))
    return folder
