"""
Dense statevector simulation: gates, marginals and reduced density matrices
"""
from simulator.statevector import (
    StateVector,
    apply_cnot,
    apply_hadamard,
    apply_ry,
    from_amplitudes,
    marginal_probabilities,
    new_zero_state,
    reduced_density_matrix,
)
from simulator.windows import QubitWindow, sliding_windows

__all__ = [
    "StateVector",
    "QubitWindow",
    "apply_cnot",
    "apply_hadamard",
    "apply_ry",
    "from_amplitudes",
    "marginal_probabilities",
    "new_zero_state",
    "reduced_density_matrix",
    "sliding_windows",
]
