"""
Tests for the dataset pipelines: IDX, PGM, pooling, rescaling, PCA, splits and the feature-set cache
"""
import json

import numpy as np
import pytest

from conftest import idx_images_bytes, idx_labels_bytes, pgm_bytes
from pipelines.feature_set import FeatureSet, load_feature_set, parse_feature_set, render_feature_set, save_feature_set
from pipelines.idx import load_idx, parse_idx_images, parse_idx_labels
from pipelines.images import AngleScaler, avg_pool, rescale_to_angles
from pipelines.mnist import build_mnist_features
from pipelines.pca import PcaMethod, pca_fit, pca_inverse, pca_transform, standardize
from pipelines.pgm import load_pgm, parse_pgm, write_pgm
from pipelines.splits import TEST, TRAIN, VAL, random_split, stratified_split
from pipelines.yaleb import build_yaleb_features, choose_subjects, easy_lighting, parse_yale_filename, scan_images
from utils.errors import FormatError, InvalidValueError, UnsupportedFormatError


class TestIdx:
    """IDX image and label files"""

    def test_header_arithmetic(self):
        """Test the header gives count, rows and columns"""
        data = idx_images_bytes(np.zeros((2, 28, 28)))
        assert len(data) == 16 + 1568
        assert parse_idx_images(data).shape == (2, 28, 28)

    def test_bad_magic(self):
        """Test a wrong magic number is a format error"""
        data = b"\x00\x00\x08\x04" + idx_images_bytes(np.zeros((1, 2, 2)))[4:]
        with pytest.raises(FormatError) as exc:
            parse_idx_images(data)
        assert exc.value.offset == 0

    def test_truncated_body(self):
        """Test a short body is a format error"""
        with pytest.raises(FormatError):
            parse_idx_images(idx_images_bytes(np.zeros((2, 4, 4)))[:-1])

    def test_label_above_nine(self):
        """Test labels above 9 are rejected"""
        with pytest.raises(InvalidValueError):
            parse_idx_labels(idx_labels_bytes(np.array([1, 10])))

    def test_count_mismatch(self, tmp_path):
        """Test image and label counts must agree"""
        images = tmp_path / "i"
        labels = tmp_path / "l"
        images.write_bytes(idx_images_bytes(np.zeros((3, 28, 28))))
        labels.write_bytes(idx_labels_bytes(np.array([0, 1])))
        with pytest.raises(FormatError):
            load_idx(images, labels)


class TestPgm:
    """P5 reading and writing via Pillow"""

    def test_two_by_two(self):
        """Test a 2x2 P5 image decodes"""
        image = parse_pgm(pgm_bytes(np.array([[0, 64], [128, 255]])))
        assert image.shape == (2, 2)
        assert image.tolist() == [[0, 64], [128, 255]]

    def test_comment_skipped(self):
        """Test header comments are skipped"""
        image = parse_pgm(pgm_bytes(np.array([[1, 2, 3]]), comment=True))
        assert image.tolist() == [[1, 2, 3]]

    def test_sixteen_bit_unsupported(self):
        """Test 16-bit images are unsupported"""
        data = b"P5\n2 1\n65535\n" + b"\x00\x01\x02\x03"
        with pytest.raises(UnsupportedFormatError):
            parse_pgm(data)

    def test_wrong_magic(self):
        """Test a non-P5 file is a format error"""
        with pytest.raises(FormatError):
            parse_pgm(b"P2\n1 1\n255\n0\n")

    def test_write_then_load(self, tmp_path):
        """Test a written image loads back unchanged"""
        image = np.arange(12, dtype=np.uint8).reshape(3, 4) * 20
        path = write_pgm(tmp_path / "out" / "img.pgm", image)
        assert path.read_bytes()[:2] == b"P5"
        assert np.array_equal(load_pgm(path), image)


class TestImageFeatures:
    """Average pooling and angle rescaling"""

    def test_zero_and_full_images(self):
        """Test black and white images pool to 0 and 1"""
        assert np.array_equal(avg_pool(np.zeros((28, 28))), np.zeros((4, 4)))
        assert np.allclose(avg_pool(np.full((28, 28), 255)), np.ones((4, 4)))

    def test_single_bright_pixel(self):
        """Test one bright pixel lands in its block"""
        image = np.zeros((28, 28))
        image[10, 20] = 255
        pooled = avg_pool(image)
        assert np.count_nonzero(pooled) == 1
        assert pooled[1, 2] == pytest.approx(1 / 49)

    def test_indivisible_shape(self):
        """Test pooling needs a divisible image size"""
        with pytest.raises(InvalidValueError):
            avg_pool(np.zeros((27, 28)))

    def test_rescale_extremes(self):
        """Test train minima and maxima map to -pi and pi"""
        angles = rescale_to_angles(np.array([[0.0], [1.0], [0.5]]))
        assert np.allclose(angles.ravel(), [-np.pi, np.pi, 0.0])

    def test_constant_feature_maps_to_zero(self):
        """Test a constant feature maps to zero"""
        angles = rescale_to_angles(np.array([[2.0, 0.0], [2.0, 1.0]]))
        assert np.array_equal(angles[:, 0], [0.0, 0.0])

    def test_out_of_range_rows_are_clamped(self):
        """Test values beyond the train range are clamped"""
        scaler = AngleScaler.fit(np.array([[0.0], [1.0]]), 0.0, np.pi)
        assert np.allclose(scaler.transform(np.array([[-1.0], [2.0]])).ravel(), [0.0, np.pi])


class TestPca:
    """Standardized PCA fit, transform and inverse"""

    def test_rank_one_line(self):
        """Test points on a line give one dominant direction"""
        t = np.linspace(-2, 3, 12)
        X = np.column_stack([t, 2 * t + 1])
        model = pca_fit(X, 1)
        direction = model.components[0]
        assert abs(abs(direction[0]) - abs(direction[1])) < 1e-12
        assert np.max(np.abs(pca_inverse(model, pca_transform(model, X)) - X)) < 1e-10

    @pytest.mark.parametrize("method", [PcaMethod.GRAM, PcaMethod.COVARIANCE])
    def test_rows_orthonormal(self, rng, method):
        """Test component rows are orthonormal"""
        model = pca_fit(rng.standard_normal((30, 12)), 4, method)
        assert np.max(np.abs(model.components @ model.components.T - np.eye(4))) < 1e-8

    def test_projection_variance_is_top_eigenvalues(self, rng):
        """Test projected variances are the top eigenvalues"""
        X = rng.standard_normal((50, 20))
        model = pca_fit(X, 5)
        _, _, Xs = standardize(X)
        eigenvalues = np.sort(np.linalg.eigvalsh(Xs.T @ Xs / 50))[::-1][:5]
        assert np.allclose(pca_transform(model, X).var(axis=0), eigenvalues, atol=1e-8)

    def test_gram_and_covariance_agree(self, rng):
        """Test the Gram and covariance routes agree"""
        X = rng.standard_normal((15, 10))
        gram = pca_fit(X, 3, PcaMethod.GRAM)
        cov = pca_fit(X, 3, PcaMethod.COVARIANCE)
        assert np.allclose(gram.components, cov.components, atol=1e-8)

    def test_zero_coordinates_give_mean(self, rng):
        """Test zero coordinates reconstruct the mean"""
        X = rng.standard_normal((20, 6))
        model = pca_fit(X, 3)
        assert np.allclose(pca_inverse(model, np.zeros((1, 3)))[0], model.mean)

    def test_transform_of_inverse_is_identity(self, rng):
        """Test transform after inverse returns the coordinates"""
        model = pca_fit(rng.standard_normal((20, 6)), 3)
        Z = rng.standard_normal((4, 3))
        assert np.max(np.abs(pca_transform(model, pca_inverse(model, Z)) - Z)) < 1e-10

    def test_error_non_increasing_in_d(self, rng):
        """Test reconstruction error never grows with d"""
        X = rng.standard_normal((25, 8))
        errors = []
        for d in range(1, 8):
            model = pca_fit(X, d)
            errors.append(np.sum((pca_inverse(model, pca_transform(model, X)) - X) ** 2))
        assert all(later <= earlier + 1e-9 for earlier, later in zip(errors, errors[1:]))

    def test_too_few_samples(self, rng):
        """Test d above the sample count is rejected"""
        with pytest.raises(InvalidValueError):
            pca_fit(rng.standard_normal((3, 10)), 5)

    def test_rank_deficient(self):
        """Test degenerate data is rejected"""
        X = np.tile(np.arange(5.0), (8, 1)) + np.arange(8.0)[:, None]
        with pytest.raises(InvalidValueError):
            pca_fit(X, 3)


class TestSplits:
    """Stratified and random splitting"""

    def test_full_yale_sizes(self):
        """Test 80/10/10 sizes for a full subject"""
        labels = np.repeat(np.arange(10), 198)
        tags = stratified_split(labels, (0.8, 0.1, 0.1), seed=0)
        assert [int(np.sum(tags == t)) for t in (TRAIN, VAL, TEST)] == [1584, 198, 198]

    def test_same_seed_same_tags(self):
        """Test a fixed seed gives the same tags"""
        labels = np.repeat(np.arange(4), 13)
        assert np.array_equal(stratified_split(labels, (0.8, 0.1, 0.1), 5), stratified_split(labels, (0.8, 0.1, 0.1), 5))

    def test_each_class_proportional(self):
        """Test every class is split in proportion"""
        labels = np.repeat(np.arange(7), [11, 12, 13, 14, 15, 16, 17])
        fractions = np.array([0.8, 0.1, 0.1])
        tags = stratified_split(labels, fractions, seed=3)
        for label in range(7):
            members = tags[labels == label]
            counts = np.array([np.sum(members == t) for t in (TRAIN, VAL, TEST)])
            assert np.all(np.abs(counts - fractions * members.size) <= 1)

    def test_fractions_must_sum_to_one(self):
        """Test fractions not summing to one are rejected"""
        with pytest.raises(InvalidValueError):
            stratified_split(np.zeros(10), (0.5, 0.2, 0.2), 0)

    def test_random_split(self):
        """Test the plain random train/test split"""
        tags = random_split(100, 10, seed=1)
        assert np.sum(tags == TEST) == 10
        assert np.array_equal(tags, random_split(100, 10, seed=1))


class TestFeatureSetCache:
    """Text cache format"""

    def feature_set(self):
        features = np.array([[0.1, -np.pi], [np.pi, 1 / 3], [0.0, 2.0]])
        return FeatureSet(features, np.array([0, 1, 1]), np.array([TRAIN, VAL, TEST]), 2, {"source": "test"})

    def test_exact_reload(self, tmp_path):
        """Test a saved cache reloads exactly"""
        fs = self.feature_set()
        loaded = load_feature_set(save_feature_set(fs, tmp_path / "fs.csv"))
        assert np.array_equal(loaded.features, fs.features)
        assert np.array_equal(loaded.labels, fs.labels)
        assert loaded.tags.tolist() == fs.tags.tolist()
        assert loaded.metadata == {"source": "test"}

    def test_header_lines(self):
        """Test the magic and JSON header lines"""
        lines = render_feature_set(self.feature_set()).splitlines()
        assert lines[0] == "# dano-featureset 1"
        assert json.loads(lines[1][2:])["rows"] == 3
        assert lines[2] == "tag,label,f1,f2"

    def test_rendering_is_deterministic(self):
        """Test saving twice gives identical bytes"""
        assert render_feature_set(self.feature_set()) == render_feature_set(self.feature_set())

    def test_row_count_mismatch(self):
        """Test a header row count mismatch is a format error"""
        text = render_feature_set(self.feature_set())
        with pytest.raises(FormatError):
            parse_feature_set(text.rsplit("\n", 2)[0] + "\n")

    def test_angles_out_of_range(self):
        """Test features outside [-pi, pi] are rejected"""
        with pytest.raises(InvalidValueError):
            FeatureSet(np.array([[4.0]]), np.array([0]), np.array([TRAIN]), 2)

    def test_unknown_tag(self):
        """Test an unknown split tag is rejected"""
        with pytest.raises(InvalidValueError):
            FeatureSet(np.array([[0.0]]), np.array([0]), np.array(["holdout"]), 2)


class TestMnistPipeline:
    """IDX to pooled angle features"""

    def test_build(self, mnist_files):
        """Test the MNIST pipeline shapes and splits"""
        fs = build_mnist_features(*mnist_files, limit=30, test_count=5, seed=2)
        assert fs.features.shape == (30, 16)
        assert fs.split_sizes() == {TRAIN: 25, VAL: 0, TEST: 5}
        assert fs.features.min() >= 0.0
        assert fs.features.max() <= np.pi
        assert fs.metadata["source"] == "mnist"

    def test_same_seed_same_cache(self, mnist_files, tmp_path):
        """Test a fixed seed gives the same cache"""
        first = render_feature_set(build_mnist_features(*mnist_files, limit=30, test_count=5, seed=2))
        second = render_feature_set(build_mnist_features(*mnist_files, limit=30, test_count=5, seed=2))
        assert first == second


class TestYalePipeline:
    """Yale-B file names, subject selection and PCA features"""

    def test_parse_filename(self):
        """Test subject, azimuth and elevation parsing"""
        info = parse_yale_filename("yaleB07_P00A-010E+20.pgm")
        assert (info.subject, info.azimuth, info.elevation) == (7, -10, 20)
        assert easy_lighting(info)
        assert parse_yale_filename("yaleB07_P00_Ambient.pgm").ambient
        assert parse_yale_filename("notes.txt") is None

    def test_hard_lighting_filtered(self, yale_root):
        """Test hard-lighting images are filtered out"""
        by_subject = scan_images(yale_root)
        assert sorted(by_subject) == [1, 2, 3, 5]
        assert all(len(paths) == 6 for paths in by_subject.values())

    def test_choose_subjects(self):
        """Test seeded subject choice and explicit subjects"""
        chosen = choose_subjects([1, 2, 3, 5], 3, seed=4)
        assert chosen == sorted(chosen) and len(chosen) == 3
        assert choose_subjects([1, 2, 3, 5], 3, seed=4) == chosen
        assert choose_subjects([1, 2, 3, 5], 0, seed=0, subjects=[5, 1]) == [1, 5]
        with pytest.raises(InvalidValueError):
            choose_subjects([1, 2], 3, seed=0)

    def test_build(self, yale_root, tmp_path):
        """Test the Yale-B pipeline shapes, splits and metadata"""
        fs = build_yaleb_features(yale_root, n_subjects=4, d=4, seed=1, reconstruct=2,
                                  reconstruct_dir=tmp_path / "recon")
        assert fs.features.shape == (24, 4)
        assert fs.n_classes == 4
        assert fs.split_sizes() == {TRAIN: 19, VAL: 3, TEST: 2}
        assert np.all(np.abs(fs.features) <= np.pi)
        assert fs.metadata["subjects"] == [1, 2, 3, 5]
        ratios = fs.metadata["explained_variance_ratio"]
        assert len(ratios) == 4
        assert ratios == sorted(ratios, reverse=True)
        assert sum(ratios) == pytest.approx(fs.metadata["explained_variance"])
        assert len(list((tmp_path / "recon").glob("*.pgm"))) == 4
