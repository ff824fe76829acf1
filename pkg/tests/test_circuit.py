"""
Tests for the classifier circuit, observables and parameter counts
"""
import numpy as np
import pytest

from app.models.config_models import MeasurementMode, ModelConfig
from app.models.observables import CircuitParams, DenseObservable, DiagonalObservable
from conftest import random_state
from services.circuit import (
    count_params,
    encode,
    expect,
    expect_dense,
    expect_diagonal,
    forward,
    forward_batch,
    init_observables,
    parity_eigenvalues,
    unpack_hermitian,
    variational_layers,
)
from simulator import QubitWindow, apply_cnot, apply_hadamard, from_amplitudes, new_zero_state
from utils.errors import ShapeError


def dense_from_matrix(matrix: np.ndarray, window: QubitWindow) -> DenseObservable:
    rows, cols = np.triu_indices(matrix.shape[0], 1)
    return DenseObservable(np.diag(matrix).real, matrix[rows, cols].real, matrix[rows, cols].imag, window)


class TestEncoding:
    """Hadamard layer followed by Ry(x_j)"""

    def test_zero_input_is_uniform(self):
        """Test zero angles give the uniform superposition"""
        s = encode(np.zeros(3))
        assert np.allclose(s.amps, np.full(8, 2 ** -1.5), atol=1e-15)

    def test_single_qubit_half_pi(self):
        """Test Ry(pi/2) H|0> lands on |1>"""
        assert np.allclose(encode(np.array([np.pi / 2])).amps, [0, 1], atol=1e-15)

    def test_non_vector_rejected(self):
        """Test a 2-D input is rejected"""
        with pytest.raises(ShapeError):
            encode(np.zeros((2, 2)))


class TestVariationalLayers:
    """Brickwork CNOTs then Ry per wire"""

    def test_two_qubits_zero_angles_is_one_cnot(self, rng):
        """Test a zero-angle layer on two qubits is a single CNOT"""
        amps = random_state(2, rng)
        s = variational_layers(from_amplitudes(amps.copy()), CircuitParams(np.zeros((1, 2))))
        expected = apply_cnot(from_amplitudes(amps.copy()), 1, 2)
        assert np.allclose(s.amps, expected.amps, atol=1e-15)

    def test_four_qubit_wiring(self, rng):
        """Test the brickwork order (1,2), (3,4), (2,3)"""
        amps = random_state(4, rng)
        s = variational_layers(from_amplitudes(amps.copy()), CircuitParams(np.zeros((1, 4))))
        expected = from_amplitudes(amps.copy())
        for control, target in ((1, 2), (3, 4), (2, 3)):
            apply_cnot(expected, control, target)
        assert np.allclose(s.amps, expected.amps, atol=1e-15)

    def test_theta_width_must_match(self):
        """Test theta rows must have one angle per qubit"""
        with pytest.raises(ShapeError):
            variational_layers(new_zero_state(3), CircuitParams(np.zeros((1, 2))))


class TestObservables:
    """Diagonal and dense expectations"""

    def test_pauli_z_on_zero(self):
        """Test Z on |0> reads +1"""
        o = DiagonalObservable([1.0, -1.0], QubitWindow((1,)))
        assert expect_diagonal(new_zero_state(1), o) == pytest.approx(1.0)

    def test_constant_eigenvalues(self, rng):
        """Test a constant spectrum gives that constant"""
        s = from_amplitudes(random_state(3, rng))
        o = DiagonalObservable(np.full(4, 2.5), QubitWindow((3, 1)))
        assert expect_diagonal(s, o) == pytest.approx(2.5, abs=1e-12)

    def test_bell_zz_parity(self):
        """Test the ZZ parity of a Bell state is +1"""
        bell = apply_cnot(apply_hadamard(new_zero_state(2), 1), 1, 2)
        o = DiagonalObservable(parity_eigenvalues(2), QubitWindow((1, 2)))
        assert expect_diagonal(bell, o) == pytest.approx(1.0, abs=1e-12)

    def test_dense_diagonal_matches_diagonal(self, rng):
        """Test dense and diagonal readouts agree on diagonal matrices"""
        s = from_amplitudes(random_state(4, rng))
        w = QubitWindow((2, 4))
        values = rng.standard_normal(4)
        dense = DenseObservable(values, np.zeros(6), np.zeros(6), w)
        assert abs(expect_dense(s, dense) - expect_diagonal(s, DiagonalObservable(values, w))) < 1e-12

    def test_dense_identity_is_one(self, rng):
        """Test the identity observable reads 1"""
        s = from_amplitudes(random_state(3, rng))
        o = DenseObservable(np.ones(4), np.zeros(6), np.zeros(6), QubitWindow((1, 2)))
        assert expect(s, o) == pytest.approx(1.0, abs=1e-12)

    def test_width_mismatch(self):
        """Test eigenvalue count must match the window"""
        with pytest.raises(ShapeError):
            DiagonalObservable([1.0, -1.0, 1.0], QubitWindow((1, 2)))

    def test_parity_eigenvalues(self):
        """Test parity signs for k = 1 and 2"""
        assert np.array_equal(parity_eigenvalues(2), [1, -1, -1, 1])
        assert np.array_equal(parity_eigenvalues(3), [1, -1, -1, 1, -1, 1, 1, -1])


class TestHermitianPacking:
    """unpack_hermitian and the packed parameter order"""

    def test_zeros(self):
        """Test an all-zero vector unpacks to the zero matrix"""
        o = DenseObservable(np.zeros(4), np.zeros(6), np.zeros(6), QubitWindow((1, 2)))
        assert np.array_equal(unpack_hermitian(o), np.zeros((4, 4)))

    def test_pauli_z(self):
        """Test diagonal entries (1, -1) give Pauli Z"""
        o = DenseObservable([1.0, -1.0], [0.0], [0.0], QubitWindow((1,)))
        assert np.array_equal(unpack_hermitian(o), np.diag([1.0, -1.0]))

    def test_exactly_hermitian(self, rng):
        """Test unpacked matrices equal their conjugate transpose"""
        o = DenseObservable(rng.standard_normal(8), rng.standard_normal(28), rng.standard_normal(28),
                            QubitWindow((1, 2, 3)))
        M = unpack_hermitian(o)
        assert np.max(np.abs(M - M.conj().T)) == 0.0

    def test_packed_round_trip(self, rng):
        """Test pack then unpack returns the same matrix"""
        w = QubitWindow((2, 1))
        packed = rng.standard_normal(16)
        assert np.array_equal(DenseObservable.from_packed(packed, w).packed(), packed)

    def test_length_mismatch(self):
        """Test a packed vector of the wrong length is rejected"""
        with pytest.raises(ShapeError):
            DenseObservable(np.zeros(4), np.zeros(5), np.zeros(6), QubitWindow((1, 2)))


class TestForward:
    """forward / forward_batch across the three modes"""

    def test_vqc_matches_pauli_z_expectations(self, rng):
        """Test VQC outputs are the per-qubit Z expectations"""
        cfg = ModelConfig(n_qubits=3, depth=2, mode=MeasurementMode.VQC)
        p = CircuitParams(rng.uniform(-np.pi, np.pi, size=(2, 3)))
        x = rng.uniform(-np.pi, np.pi, size=3)
        z = forward(x, p, None, cfg)
        s = variational_layers(encode(x), p)
        expected = [expect_diagonal(s, DiagonalObservable([1.0, -1.0], QubitWindow((q,)))) for q in (1, 2, 3)]
        assert np.allclose(z, expected, atol=1e-12)

    def test_dano_k1_parity_equals_vqc(self, rng):
        """Test 1-local parity DANO reproduces VQC"""
        p = CircuitParams(rng.uniform(-np.pi, np.pi, size=(2, 4)))
        x = rng.uniform(-np.pi, np.pi, size=4)
        vqc = ModelConfig(n_qubits=4, depth=2, mode=MeasurementMode.VQC)
        dano = ModelConfig(n_qubits=4, locality=1, depth=2, mode=MeasurementMode.DANO)
        assert np.max(np.abs(forward(x, p, None, vqc) - forward(x, p, init_observables(dano), dano))) <= 1e-14

    def test_ano_parity_init_equals_dano(self, rng):
        """Test ANO and DANO agree at the parity initialisation"""
        p = CircuitParams(rng.uniform(-np.pi, np.pi, size=(1, 4)))
        x = rng.uniform(-np.pi, np.pi, size=4)
        dano = ModelConfig(n_qubits=4, locality=2, depth=1, mode=MeasurementMode.DANO)
        ano = ModelConfig(n_qubits=4, locality=2, depth=1, mode=MeasurementMode.ANO)
        assert np.allclose(forward(x, p, init_observables(dano), dano),
                           forward(x, p, init_observables(ano), ano), atol=1e-12)

    def test_outputs_bounded_by_eigenvalues(self, rng):
        """Test outputs stay inside the eigenvalue range"""
        cfg = ModelConfig(n_qubits=4, locality=2, depth=2, mode=MeasurementMode.DANO)
        windows = [o.window for o in init_observables(cfg)]
        obs = [DiagonalObservable(rng.uniform(-3, 3, size=4), w) for w in windows]
        p = CircuitParams(rng.uniform(-np.pi, np.pi, size=(2, 4)))
        Z = forward_batch(rng.uniform(-np.pi, np.pi, size=(5, 4)), p, obs, cfg)
        for j, o in enumerate(obs):
            assert np.all(Z[:, j] >= o.eigenvalues.min() - 1e-12)
            assert np.all(Z[:, j] <= o.eigenvalues.max() + 1e-12)

    def test_batch_matches_single(self, rng):
        """Test the batched forward pass matches per-sample calls"""
        cfg = ModelConfig(n_qubits=3, locality=2, depth=1, mode=MeasurementMode.ANO)
        obs = [dense_from_matrix(np.eye(4) * 0.5, o.window) for o in init_observables(cfg)]
        p = CircuitParams(rng.uniform(-np.pi, np.pi, size=(1, 3)))
        X = rng.uniform(-np.pi, np.pi, size=(3, 3))
        Z = forward_batch(X, p, obs, cfg)
        for row, x in zip(Z, X):
            assert np.allclose(row, forward(x, p, obs, cfg), atol=1e-14)

    def test_wrong_observable_count(self, rng):
        """Test one observable per window is required"""
        cfg = ModelConfig(n_qubits=3, locality=1, depth=1, mode=MeasurementMode.DANO)
        obs = init_observables(cfg)[:2]
        with pytest.raises(ShapeError):
            forward(np.zeros(3), CircuitParams(np.zeros((1, 3))), obs, cfg)


class TestParameterCounts:
    """Reference totals for n = 16, L = 6"""

    @pytest.mark.parametrize("k,total", [(2, 160), (4, 352), (6, 1120), (8, 4192), (10, 16480)])
    def test_dano(self, k, total):
        """Test DANO parameter totals"""
        assert count_params(ModelConfig(n_qubits=16, locality=k, depth=6, mode=MeasurementMode.DANO)).total == total

    @pytest.mark.parametrize("k,total", [(2, 352), (4, 4192), (6, 65632), (8, 1048672)])
    def test_ano(self, k, total):
        """Test ANO parameter totals"""
        assert count_params(ModelConfig(n_qubits=16, locality=k, depth=6, mode=MeasurementMode.ANO)).total == total

    def test_vqc(self):
        """Test VQC has circuit parameters only"""
        counts = count_params(ModelConfig(n_qubits=16, depth=6, mode=MeasurementMode.VQC))
        assert (counts.circuit, counts.observable, counts.total) == (96, 0, 96)

    @pytest.mark.parametrize("k,observable", [(4, 256), (6, 1024), (8, 4096), (10, 16384)])
    def test_dano_observable_counts(self, k, observable):
        """Test DANO observable counts grow as m 2^k"""
        cfg = ModelConfig(n_qubits=16, locality=k, depth=6, mode=MeasurementMode.DANO)
        assert count_params(cfg).observable == observable
