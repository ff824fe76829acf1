"""
Cross-field validation rules for model and run configurations.

Each rule returns (is_valid, error_message) so callers can collect every
failure instead of stopping at the first one.
"""
import math
from typing import List, Optional, Sequence, Tuple

Check = Tuple[bool, Optional[str]]


class ConfigValidator:
    """Rules shared by ModelConfig, RunConfig and the data pipelines"""

    @staticmethod
    def validate_qubits(n: int, cap: int) -> Check:
        if n < 1:
            return False, "n (qubits) must be at least 1"
        if n > cap:
            return False, f"n={n} exceeds the qubit cap of {cap}"
        return True, None

    @staticmethod
    def validate_locality(n: int, k: int) -> Check:
        if k < 1:
            return False, "k (locality) must be at least 1"
        if k > n:
            return False, f"k={k} must not exceed n={n}"
        return True, None

    @staticmethod
    def validate_windows(n: int, m: int) -> Check:
        if m < 1:
            return False, "m (window count) must be at least 1"
        if m > n:
            return False, f"m={m} must not exceed n={n}"
        return True, None

    @staticmethod
    def validate_classes(m: int, n_classes: int) -> Check:
        if n_classes < 2:
            return False, "C (classes) must be at least 2"
        if n_classes > m:
            return False, f"C={n_classes} must not exceed the window count m={m}"
        return True, None

    @staticmethod
    def validate_switch_epoch(switch_epoch: int, total_epochs: int) -> Check:
        if switch_epoch < 0:
            return False, "switch epoch must be non-negative"
        if switch_epoch >= total_epochs:
            return False, f"switch epoch {switch_epoch} must be below total epochs {total_epochs}"
        return True, None

    @staticmethod
    def validate_fractions(fractions: Sequence[float]) -> Check:
        if any(f < 0 for f in fractions):
            return False, "split fractions must be non-negative"
        if not math.isclose(sum(fractions), 1.0, rel_tol=0.0, abs_tol=1e-9):
            return False, f"split fractions must sum to 1, got {sum(fractions)!r}"
        return True, None

    @staticmethod
    def collect(*checks: Check) -> List[str]:
        """Error messages of the failed checks, in order"""
        return [message for ok, message in checks if not ok and message]

    @classmethod
    def model_shape_problems(
        cls,
        n: Optional[int],
        k: Optional[int],
        m: Optional[int],
        n_classes: Optional[int],
        cap: int,
    ) -> List[str]:
        """All shape rules that can be evaluated with the values available"""
        checks = []
        if n is not None:
            checks.append(cls.validate_qubits(n, cap))
        if n is not None and k is not None:
            checks.append(cls.validate_locality(n, k))
        if n is not None and m is not None:
            checks.append(cls.validate_windows(n, m))
        if m is not None and n_classes is not None:
            checks.append(cls.validate_classes(m, n_classes))
        return cls.collect(*checks)
