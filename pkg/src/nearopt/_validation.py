"""Input validation helpers shared by the solvers and estimators."""
import numpy as np


def check_costs(costs, name="costs"):
    """Return ``costs`` as a 1-D float64 array of strictly positive finite values."""
    arr = np.asarray(costs, dtype=np.float64)
    if arr.ndim == 0:
        arr = arr.reshape(1)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must be finite")
    if np.any(arr <= 0):
        raise ValueError(f"{name} must be strictly positive")
    return arr


def check_subset(bits, n, name="subset"):
    """Return ``bits`` as a boolean membership mask of length ``n``.

    Accepts a boolean/0-1 sequence or a string of '0'/'1' characters.
    """
    if isinstance(bits, str):
        if set(bits) - {"0", "1"}:
            raise ValueError(f"{name} string must contain only '0' and '1'")
        arr = np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1")
    else:
        arr = np.asarray(bits)
        if arr.dtype != bool:
            if not np.all(np.isin(arr, (0, 1))):
                raise ValueError(f"{name} must be a 0/1 sequence")
            arr = arr.astype(bool)
    if arr.shape != (n,):
        raise ValueError(f"{name} has length {arr.shape}, expected ({n},)")
    return arr


def check_theta(theta):
    theta = float(theta)
    if not np.isfinite(theta) or theta < 0:
        raise ValueError(f"theta must be a finite non-negative real, got {theta}")
    return theta


def check_positive_int(value, name, minimum=1):
    if int(value) != value or value < minimum:
        raise ValueError(f"{name} must be an integer >= {minimum}, got {value!r}")
    return int(value)


def subset_to_string(bits):
    return "".join("1" if b else "0" for b in bits)
