"""Input validation helpers.

Small checks shared by the functional core, the estimator, and the CLI.
Each returns a validated (and possibly converted) value or raises
ValueError with a message naming the offending argument.
"""

import numpy as np


def check_image(img, name="img", allow_negative=False):
    """Validate an equirectangular radiance image.

    Returns a float64 array of shape (H, W, 3) with H >= 1, W >= 2 and
    all entries finite. Negative values are rejected unless the caller
    opts in (basis projection accepts signed maps; radiance IO and
    decomposition do not).
    """
    arr = np.asarray(img, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise ValueError(f"{name} must have shape (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    if h < 1 or w < 2:
        raise ValueError(f"{name} needs H >= 1 and W >= 2, got {h}x{w}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if not allow_negative and (arr < 0).any():
        raise ValueError(f"{name} contains negative radiance")
    return arr


def check_unit_vectors(dirs, name="dirs", tol=1e-6):
    """Validate an array of unit direction vectors, shape (..., 3)."""
    arr = np.asarray(dirs, dtype=np.float64)
    if arr.shape[-1] != 3:
        raise ValueError(f"{name} must have a trailing axis of size 3")
    norms = np.linalg.norm(arr, axis=-1)
    if not np.allclose(norms, 1.0, atol=tol):
        raise ValueError(f"{name} contains non-unit vectors")
    return arr


def check_distribution(p, n=None, name="p", tol=1e-6):
    """Validate a non-negative vector summing to 1."""
    arr = np.asarray(p, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if n is not None and arr.shape[0] != n:
        raise ValueError(f"{name} must have length {n}, got {arr.shape[0]}")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    if (arr < 0).any():
        raise ValueError(f"{name} contains negative mass")
    if abs(arr.sum() - 1.0) > tol:
        raise ValueError(f"{name} must sum to 1, got {arr.sum():.9g}")
    return arr


def check_finite_vector(z, name="z"):
    """Validate a nonempty one-dimensional array of finite reals."""
    arr = np.asarray(z, dtype=np.float64)
    if arr.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if arr.shape[0] == 0:
        raise ValueError(f"{name} must be nonempty")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr


def check_coeffs(coeffs, name="coeffs"):
    """Validate spherical-harmonic coefficients of shape (3, (K+1)^2).

    Returns (array, order).
    """
    arr = np.asarray(coeffs, dtype=np.float64)
    if arr.ndim != 2 or arr.shape[0] != 3:
        raise ValueError(f"{name} must have shape (3, n_terms), got {arr.shape}")
    n = arr.shape[1]
    order = int(round(np.sqrt(n))) - 1
    if (order + 1) ** 2 != n:
        raise ValueError(f"{name} has {n} terms per channel, not a full square")
    if not np.isfinite(arr).all():
        raise ValueError(f"{name} contains non-finite values")
    return arr, order
