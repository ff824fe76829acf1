"""
Exact derivatives of the outputs z.

Observable parameters enter z linearly, so their gradients are marginals
(diagonal) or reduced-density-matrix entries (dense). Circuit angles use
either the two-point parameter-shift rule or an adjoint sweep that undoes the
circuit gate by gate; both return the same (L, n, m) Jacobian.
"""
import logging
from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from app.models.config_models import MeasurementMode, ModelConfig
from app.models.observables import CircuitParams, DiagonalObservable
from services.circuit import (
    Observable,
    apply_entangler_inverse,
    apply_observable,
    forward_batch,
    prepare_batch,
    resolve_observables,
    weighted_observable_apply,
)
from simulator import kernels
from simulator.statevector import StateVector
from simulator.windows import QubitWindow

logger = logging.getLogger(__name__)

SHIFT = np.pi / 2


@dataclass
class GradientBundle:
    """d_theta[l, q, j] = dz_j/dtheta_lq; observable blocks are per window."""

    d_theta: np.ndarray
    d_lambda: Optional[np.ndarray] = None
    d_dense: Optional[np.ndarray] = None


def grad_lambda(s: StateVector, w: QubitWindow) -> np.ndarray:
    """dz/dlambda_m = p_m: the window marginal."""
    w.check(s.n)
    return kernels.marginal_probabilities(s.amps, s.n, w.qubits)


def dense_gradient_from_rho(rho: np.ndarray) -> np.ndarray:
    """
    Gradient of tr(rho H) in the packed order (c_ii, a_ij, b_ij):
    rho_ii, 2 Re rho_ij, 2 Im rho_ij for i < j. rho may carry batch axes.
    """
    dim = rho.shape[-1]
    rows, cols = np.triu_indices(dim, 1)
    diag = np.real(np.diagonal(rho, axis1=-2, axis2=-1))
    upper = rho[..., rows, cols]
    return np.concatenate([diag, 2.0 * upper.real, 2.0 * upper.imag], axis=-1)


def grad_dense_observable(s: StateVector, w: QubitWindow) -> np.ndarray:
    """K^2 gradient of tr(rho_w H) with respect to the packed Hermitian parameters."""
    w.check(s.n)
    return dense_gradient_from_rho(kernels.reduced_density_matrix(s.amps, s.n, w.qubits))


def grad_theta_parameter_shift(x: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]],
                               cfg: ModelConfig) -> np.ndarray:
    """
    [z(theta_i + pi/2) - z(theta_i - pi/2)] / 2 for every angle: 2 L n forward
    passes, evaluated as one batch of shifted circuits per angle.
    """
    observables = resolve_observables(cfg, obs)
    theta = p.theta
    depth, n = theta.shape
    grads = np.zeros((depth, n, len(observables)))
    x = np.asarray(x, dtype=np.float64)
    for layer in range(depth):
        for q in range(n):
            plus = theta.copy()
            plus[layer, q] += SHIFT
            minus = theta.copy()
            minus[layer, q] -= SHIFT
            z_plus = forward_batch(x[None, :], CircuitParams(plus), observables, cfg)[0]
            z_minus = forward_batch(x[None, :], CircuitParams(minus), observables, cfg)[0]
            grads[layer, q] = 0.5 * (z_plus - z_minus)
    return grads


def adjoint_sweep(ket: np.ndarray, bra: np.ndarray, theta: np.ndarray, n: int) -> np.ndarray:
    """
    Reverse pass over U(theta). ket is the final state, bra is O psi; leading
    axes broadcast against each other. Returns 2 Re <bra| dU/dtheta_lq |ket>
    for every angle, shape (L, n, *batch). Both arrays are consumed.
    """
    depth = theta.shape[0]
    batch = np.broadcast_shapes(ket.shape[:-1], bra.shape[:-1])
    grads = np.zeros((depth, n) + batch)
    for layer in range(depth - 1, -1, -1):
        for q in range(n, 0, -1):
            angle = theta[layer, q - 1]
            kernels.apply_ry(ket, n, q, -angle)
            # dRy(phi)/dphi = 0.5 Ry(phi + pi)
            derivative = kernels.apply_ry(ket.copy(), n, q, angle + np.pi, scale=0.5)
            grads[layer, q - 1] = 2.0 * np.sum(np.conj(bra) * derivative, axis=-1).real
            kernels.apply_ry(bra, n, q, -angle)
        apply_entangler_inverse(ket, n)
        apply_entangler_inverse(bra, n)
    return grads


def grad_theta_adjoint(x: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]],
                       cfg: ModelConfig) -> np.ndarray:
    """Same (L, n, m) Jacobian as parameter shift, one reverse sweep with m bras."""
    observables = resolve_observables(cfg, obs)
    n = cfg.n_qubits
    p.check(cfg.depth, n)
    psi = prepare_batch(np.asarray(x, dtype=np.float64)[None, :], p, n)
    bra = np.concatenate([apply_observable(psi, n, o) for o in observables], axis=0)
    return adjoint_sweep(psi, bra, p.theta, n)


def observable_gradients(s: StateVector, observables: Sequence[Observable]) -> GradientBundle:
    """Per-window observable gradients for one state (theta block left empty)."""
    if all(isinstance(o, DiagonalObservable) for o in observables):
        return GradientBundle(
            d_theta=np.zeros(0),
            d_lambda=np.stack([grad_lambda(s, o.window) for o in observables]),
        )
    return GradientBundle(
        d_theta=np.zeros(0),
        d_dense=np.stack([grad_dense_observable(s, o.window) for o in observables]),
    )


def jacobian(x: np.ndarray, p: CircuitParams, obs: Optional[Sequence[Observable]], cfg: ModelConfig,
             method: str = "adjoint") -> GradientBundle:
    """Full GradientBundle for one input."""
    observables = resolve_observables(cfg, obs)
    if method == "adjoint":
        d_theta = grad_theta_adjoint(x, p, observables, cfg)
    elif method == "parameter-shift":
        d_theta = grad_theta_parameter_shift(x, p, observables, cfg)
    else:
        raise ValueError(f"unknown gradient method {method!r}")
    psi = prepare_batch(np.asarray(x, dtype=np.float64)[None, :], p, cfg.n_qubits)[0]
    bundle = observable_gradients(StateVector(cfg.n_qubits, psi), observables)
    bundle.d_theta = d_theta
    if cfg.mode is MeasurementMode.VQC:
        bundle.d_lambda = None
    return bundle


def loss_vjp(amps: np.ndarray, p: CircuitParams, observables: Sequence[Observable], cfg: ModelConfig,
             d_outputs: np.ndarray) -> Tuple[np.ndarray, Optional[np.ndarray]]:
    """
    Pull dLoss/dz back to the parameters for a batch of final states.

    Args:
        amps: (B, 2^n) final states U V |0>; consumed by the sweep
        d_outputs: (B, m) dLoss/dz per sample

    Returns:
        (dLoss/dtheta of shape (L, n), dLoss/d(observable params) of shape
        (m, P) or None in VQC mode), both summed over the batch
    """
    n = cfg.n_qubits
    d_obs = None
    if cfg.mode is MeasurementMode.DANO:
        d_obs = np.stack([
            d_outputs[:, j] @ kernels.marginal_probabilities(amps, n, o.window.qubits)
            for j, o in enumerate(observables)
        ])
    elif cfg.mode is MeasurementMode.ANO:
        d_obs = np.stack([
            d_outputs[:, j] @ dense_gradient_from_rho(kernels.reduced_density_matrix(amps, n, o.window.qubits))
            for j, o in enumerate(observables)
        ])

    bra = weighted_observable_apply(amps, n, observables, d_outputs)
    per_sample = adjoint_sweep(amps, bra, p.theta, n)
    return per_sample.sum(axis=-1), d_obs


__all__ = [
    "GradientBundle",
    "adjoint_sweep",
    "dense_gradient_from_rho",
    "grad_dense_observable",
    "grad_lambda",
    "grad_theta_adjoint",
    "grad_theta_parameter_shift",
    "jacobian",
    "loss_vjp",
    "observable_gradients",
]
