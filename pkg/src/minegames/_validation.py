import numpy as np
from sklearn.utils.validation import check_array

from .core import GameParams, is_valid_state
from .errors import InvalidStateError


def check_states(X, params: GameParams) -> np.ndarray:
    """Validate an ``(n, 2)`` array of ``(a, b)`` states against ``params``."""
    X = check_array(X, dtype=np.int64, ensure_2d=True)
    if X.shape[1] != 2:
        raise ValueError(f"expected states as an (n, 2) array of (a, b), got shape {X.shape}")
    bad = [tuple(row) for row in X if not is_valid_state(row, params)]
    if bad:
        raise InvalidStateError(f"states outside the {params.model.value} state space: {bad[:5]}")
    return X


def check_tolerance(tol, max_iters):
    if not (tol > 0):
        raise ValueError(f"tol must be positive, got {tol!r}")
    if int(max_iters) != max_iters or max_iters < 1:
        raise ValueError(f"max_iters must be a positive integer, got {max_iters!r}")
