"""
Cyclic qubit windows and the index tables that map basis states onto them.

Qubits are numbered 1..n and qubit 1 is the most significant bit of a basis
index, so |q1 q2 ... qn> <-> q1*2^(n-1) + ... + qn.
"""
from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from utils.cache import cached
from utils.errors import InvalidValueError, QubitIndexError


@dataclass(frozen=True)
class QubitWindow:
    """Ordered, distinct qubit indices; the first entry is the most significant window bit."""

    qubits: Tuple[int, ...]

    def __post_init__(self):
        qubits = tuple(int(q) for q in self.qubits)
        if not qubits:
            raise QubitIndexError("window must contain at least one qubit")
        if len(set(qubits)) != len(qubits):
            raise QubitIndexError(f"window qubits must be distinct, got {qubits}")
        object.__setattr__(self, "qubits", qubits)

    @property
    def k(self) -> int:
        return len(self.qubits)

    @property
    def dim(self) -> int:
        return 1 << len(self.qubits)

    def check(self, n: int) -> None:
        """Raise QubitIndexError unless every qubit lies in 1..n"""
        bad = [q for q in self.qubits if not 1 <= q <= n]
        if bad:
            raise QubitIndexError(f"window {self.qubits} has qubits {bad} outside 1..{n}")

    def __iter__(self):
        return iter(self.qubits)

    def __len__(self) -> int:
        return len(self.qubits)


def sliding_windows(n: int, k: int, m: int) -> List[QubitWindow]:
    """
    Windows Q_j = (j, j+1, ..., j+k-1) with wrap-around mod n, for j = 1..m.

    Example: (4, 3, 4) -> (1,2,3), (2,3,4), (3,4,1), (4,1,2)
    """
    if not 1 <= k <= n:
        raise InvalidValueError(f"locality k={k} must satisfy 1 <= k <= n={n}")
    if not 1 <= m <= n:
        raise InvalidValueError(f"window count m={m} must satisfy 1 <= m <= n={n}")
    return [
        QubitWindow(tuple(((j - 1 + t) % n) + 1 for t in range(k)))
        for j in range(1, m + 1)
    ]


@cached(max_size=512)
def window_index_map(n: int, qubits: Tuple[int, ...]) -> np.ndarray:
    """
    For every basis index i of an n-qubit register, the window-ordered value
    of the window's bits. Read-only int64 array of length 2^n.
    """
    k = len(qubits)
    basis = np.arange(1 << n, dtype=np.int64)
    index = np.zeros(1 << n, dtype=np.int64)
    for t, q in enumerate(qubits):
        index |= ((basis >> (n - q)) & 1) << (k - 1 - t)
    index.setflags(write=False)
    return index


def window_axes(n: int, qubits: Tuple[int, ...]) -> Tuple[List[int], List[int]]:
    """Tensor axes (0-based, qubit order) of the window and of the remaining qubits"""
    window = [q - 1 for q in qubits]
    rest = [axis for axis in range(n) if axis not in window]
    return window, rest
