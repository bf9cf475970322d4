import numpy as np
from sklearn.utils.validation import check_array

from .exceptions import ShapeError


def check_signal(x, name="signal"):
    """1-D finite float array from a sequence or a single-column 2-D array."""
    arr = check_array(x, ensure_2d=False, dtype=np.float64, input_name=name)
    if arr.ndim == 2:
        if arr.shape[1] != 1:
            raise ShapeError(f"{name} must be one-dimensional (SISO), got shape {arr.shape}")
        arr = arr[:, 0]
    return arr


def check_io(u, y):
    u = check_signal(u, "u")
    y = check_signal(y, "y")
    if u.size != y.size:
        raise ShapeError(f"u and y lengths differ: {u.size} vs {y.size}")
    return u, y
