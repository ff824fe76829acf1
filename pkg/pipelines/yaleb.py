"""
Extended Yale-B feature pipeline.

Images are the cropped P5 files named yaleBxx_P00A+025E+10.pgm. Only
non-ambient images with |azimuth| below the cutoff are kept; the chosen
subjects become classes 0..C-1 in ascending subject order.
"""
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np

from pipelines.feature_set import FeatureSet
from pipelines.images import AngleScaler
from pipelines.pca import PcaModel, pca_fit, pca_inverse, pca_transform
from pipelines.pgm import load_pgm, write_pgm
from pipelines.splits import TRAIN, stratified_split
from storage.digest import blob_digest
from utils.errors import InvalidValueError, ShapeError

logger = logging.getLogger(__name__)

FILENAME_PATTERN = re.compile(
    r"^yaleB(?P<subject>\d+)_P(?P<pose>\d+)(?:A(?P<azimuth>[+-]\d+)E(?P<elevation>[+-]\d+)|_(?P<ambient>Ambient))\.pgm$",
    re.IGNORECASE,
)
DEFAULT_FRACTIONS = (0.8, 0.1, 0.1)
MAX_AZIMUTH = 25

PathLike = Union[str, Path]


@dataclass(frozen=True)
class YaleImageInfo:
    subject: int
    pose: int
    azimuth: Optional[int]
    elevation: Optional[int]

    @property
    def ambient(self) -> bool:
        return self.azimuth is None


def parse_yale_filename(name: str) -> Optional[YaleImageInfo]:
    """Subject, pose and light direction from a file name; None if it does not follow the convention"""
    match = FILENAME_PATTERN.match(Path(name).name)
    if not match:
        return None
    if match.group("ambient"):
        return YaleImageInfo(int(match.group("subject")), int(match.group("pose")), None, None)
    return YaleImageInfo(
        int(match.group("subject")),
        int(match.group("pose")),
        int(match.group("azimuth")),
        int(match.group("elevation")),
    )


def easy_lighting(info: YaleImageInfo, max_azimuth: int = MAX_AZIMUTH) -> bool:
    return not info.ambient and abs(info.azimuth) < max_azimuth


def scan_images(root: PathLike, max_azimuth: int = MAX_AZIMUTH) -> Dict[int, List[Path]]:
    """Easy-lighting image paths per subject, sorted by path"""
    by_subject: Dict[int, List[Path]] = {}
    skipped = 0
    for path in sorted(Path(root).rglob("*")):
        if not path.is_file() or path.suffix.lower() != ".pgm":
            continue
        info = parse_yale_filename(path.name)
        if info is None or not easy_lighting(info, max_azimuth):
            skipped += 1
            continue
        by_subject.setdefault(info.subject, []).append(path)
    logger.info(f"Found {sum(len(v) for v in by_subject.values())} easy-lighting images "
                f"for {len(by_subject)} subjects ({skipped} files skipped)")
    return by_subject


def choose_subjects(available: Sequence[int], count: int, seed: int,
                    subjects: Optional[Sequence[int]] = None) -> List[int]:
    """Explicit subjects if given, else a seeded draw of `count` subjects; ascending"""
    available = sorted(available)
    if subjects:
        missing = sorted(set(subjects) - set(available))
        if missing:
            raise InvalidValueError(f"subjects {missing} have no easy-lighting images")
        return sorted(set(subjects))
    if count > len(available):
        raise InvalidValueError(f"asked for {count} subjects, only {len(available)} available")
    rng = np.random.default_rng(seed)
    return sorted(int(s) for s in rng.choice(available, size=count, replace=False))


def _load_all(paths: Sequence[Path], threads: int) -> np.ndarray:
    with ThreadPoolExecutor(max_workers=max(1, threads)) as executor:
        images = list(executor.map(load_pgm, paths))
    shapes = {image.shape for image in images}
    if len(shapes) != 1:
        raise ShapeError(f"images differ in size: {sorted(shapes)}")
    return np.stack(images)


def write_reconstructions(model: PcaModel, images: np.ndarray, labels: np.ndarray, count: int,
                          out_dir: PathLike) -> List[Path]:
    """Inverse-PCA of the first image of each of the first `count` classes"""
    out_dir = Path(out_dir)
    shape = images.shape[1:]
    written = []
    for label in range(count):
        rows = np.flatnonzero(labels == label)
        if rows.size == 0:
            continue
        flat = images[rows[0]].reshape(1, -1).astype(np.float64)
        restored = pca_inverse(model, pca_transform(model, flat)).reshape(shape)
        written.append(write_pgm(out_dir / f"class{label:02d}_original.pgm", images[rows[0]]))
        written.append(write_pgm(out_dir / f"class{label:02d}_reconstructed.pgm", restored))
    logger.info(f"Wrote {len(written)} reconstruction images to {out_dir}")
    return written


def build_yaleb_features(root: PathLike, n_subjects: int = 10, d: int = 16,
                         fractions: Tuple[float, ...] = DEFAULT_FRACTIONS, seed: int = 0,
                         max_azimuth: int = MAX_AZIMUTH, subjects: Optional[Sequence[int]] = None,
                         threads: int = 1, reconstruct: int = 0,
                         reconstruct_dir: Optional[PathLike] = None) -> FeatureSet:
    """
    Flatten, standardize and project to d PCA coordinates, then map onto
    [-pi, pi]. PCA and the angle scaler see the training rows only.
    """
    by_subject = scan_images(root, max_azimuth)
    chosen = choose_subjects(list(by_subject), n_subjects, seed, subjects)

    paths: List[Path] = []
    labels: List[int] = []
    for label, subject in enumerate(chosen):
        paths.extend(by_subject[subject])
        labels.extend([label] * len(by_subject[subject]))
    labels_arr = np.asarray(labels, dtype=np.int64)

    images = _load_all(paths, threads)
    flat = images.reshape(images.shape[0], -1).astype(np.float64)
    tags = stratified_split(labels_arr, fractions, seed)
    train = tags == TRAIN

    model = pca_fit(flat[train], d)
    coords = pca_transform(model, flat)
    features = AngleScaler.fit(coords[train], -np.pi, np.pi).transform(coords)

    if reconstruct:
        if reconstruct_dir is None:
            raise InvalidValueError("reconstruction output directory is required")
        write_reconstructions(model, images, labels_arr, min(reconstruct, len(chosen)), reconstruct_dir)

    listing = "\n".join(str(p.relative_to(root)) for p in paths).encode("utf-8")
    metadata = {
        "source": "yaleb",
        "subjects": chosen,
        "images": int(images.shape[0]),
        "image_shape": list(images.shape[1:]),
        "file_list_digest": blob_digest(listing),
        "max_azimuth": int(max_azimuth),
        "fractions": list(fractions),
        "seed": int(seed),
        "pca_components": int(d),
        "explained_variance": float(model.explained_variance_ratio.sum()),
        "explained_variance_ratio": model.explained_variance_ratio.tolist(),
        "scaling": "train min/max mapped to [-pi, pi], others clamped",
    }
    return FeatureSet(features, labels_arr, tags, len(chosen), metadata)
