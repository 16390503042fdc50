"""Real spherical harmonics: basis, projection, irradiance, losses.

The basis is real, orthonormal, and free of the Condon-Shortley phase:

    B[k, 0]  = N(k, 0) * P_k(cos theta)
    B[k, m]  = sqrt(2) * N(k, m) * cos(m phi) * P_k^m(cos theta), m > 0
    B[k, -m] = sqrt(2) * N(k, m) * sin(m phi) * P_k^m(cos theta), m > 0

with N(k, m) = sqrt((2k+1)(k-m)! / (4 pi (k+m)!)) and P_k^m the associated
Legendre function without the (-1)^m factor. Coefficients are stored per
channel as a flat vector indexed by k*(k+1)+m, shape (3, (K+1)^2).

Projection integrates against the basis either with per-pixel solid
angles ("solid-angle", the default) or with the uniform weight
4*pi/(W*H) per pixel ("uniform"); the two agree in the limit of dense
rows but differ measurably on coarse grids, so the choice is an explicit
mode everywhere it matters.
"""

import numpy as np

from .geometry import GridGeometry
from .validation import check_coeffs, check_image

MAX_FIT_ORDER = 10

#: Clamped-cosine gains per band for the irradiance transform.
IRRADIANCE_BAND_GAINS = (np.pi, 2.0 * np.pi / 3.0, np.pi / 4.0)

PROJECTION_MODES = ("solid-angle", "uniform")


def n_terms(order):
    """Number of basis functions through band `order`."""
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    return (order + 1) ** 2


def sh_index(k, m):
    """Flat index of the degree-k, order-m basis function: k*(k+1)+m."""
    if abs(m) > k:
        raise ValueError(f"|m| must be <= k, got k={k}, m={m}")
    return k * (k + 1) + m


def _normalization(order):
    """N(k, m) table for all k <= order, shape (order+1, order+1)."""
    out = np.zeros((order + 1, order + 1))
    for k in range(order + 1):
        for m in range(k + 1):
            num = 1.0
            for j in range(k - m + 1, k + m + 1):
                num *= j
            out[k, m] = np.sqrt((2 * k + 1) / (4.0 * np.pi * num))
    return out


def sh_basis(order, dirs):
    """Evaluate all basis functions through `order` at unit directions.

    Parameters
    ----------
    order : int
        Maximum band K >= 0.
    dirs : array, shape (..., 3)
        Unit vectors.

    Returns
    -------
    array, shape (..., (K+1)^2)
    """
    if order < 0:
        raise ValueError(f"order must be >= 0, got {order}")
    dirs = np.asarray(dirs, dtype=np.float64)
    ct = np.clip(dirs[..., 2], -1.0, 1.0)
    st = np.sqrt(np.clip(1.0 - ct * ct, 0.0, 1.0))
    phi = np.arctan2(dirs[..., 1], dirs[..., 0])

    norm = _normalization(order)
    out = np.empty(dirs.shape[:-1] + (n_terms(order),))

    for m in range(order + 1):
        # P_m^m without Condon-Shortley: (2m-1)!! * sin(theta)^m.
        pmm = np.ones_like(ct)
        fact = 1.0
        for _ in range(m):
            pmm = pmm * fact * st
            fact += 2.0
        if m > 0:
            cosm = np.cos(m * phi)
            sinm = np.sin(m * phi)
        plm_prev = pmm
        plm = None
        for k in range(m, order + 1):
            if k == m:
                val = pmm
            elif k == m + 1:
                plm = ct * (2 * m + 1) * pmm
                val = plm
            else:
                plm_next = ((2 * k - 1) * ct * plm - (k + m - 1) * plm_prev) / (
                    k - m
                )
                plm_prev, plm = plm, plm_next
                val = plm_next
            if m == 0:
                out[..., sh_index(k, 0)] = norm[k, 0] * val
            else:
                base = np.sqrt(2.0) * norm[k, m] * val
                out[..., sh_index(k, m)] = base * cosm
                out[..., sh_index(k, -m)] = base * sinm
    return out


def _row_blocks(geom, order, max_elems=2_000_000):
    """Yield (slice, dirs, basis) over row blocks to bound memory."""
    per_row = geom.width * n_terms(order)
    rows = max(1, int(max_elems // max(per_row, 1)))
    all_dirs = geom.directions()
    for start in range(0, geom.height, rows):
        stop = min(start + rows, geom.height)
        dirs = all_dirs[start:stop]
        yield slice(start, stop), dirs, sh_basis(order, dirs)


def _pixel_weights(geom, mode):
    if mode == "solid-angle":
        return geom.solid_angles()
    if mode == "uniform":
        return np.full(geom.height, 4.0 * np.pi / geom.n_pixels)
    raise ValueError(f"mode must be one of {PROJECTION_MODES}, got {mode!r}")


def project_sh(img, order, mode="solid-angle"):
    """Project a radiance map onto the basis through band `order`.

    Returns coefficients of shape (3, (order+1)^2). The solid-angle mode
    integrates I * B against per-pixel solid angles; the uniform mode
    weights every pixel by 4*pi/(W*H).
    """
    img = check_image(img, allow_negative=True)
    geom = GridGeometry.for_image(img)
    w = _pixel_weights(geom, mode)
    coeffs = np.zeros((3, n_terms(order)))
    for rows, _, basis in _row_blocks(geom, order):
        weighted = img[rows] * w[rows, None, None]
        coeffs += np.einsum("hwc,hwn->cn", weighted, basis)
    return coeffs


def reconstruct_sh(coeffs, geom):
    """Evaluate a coefficient set over a grid, shape (H, W, 3).

    Values may be negative where band-limited ringing undershoots.
    """
    coeffs, order = check_coeffs(coeffs)
    out = np.empty((geom.height, geom.width, 3))
    for rows, _, basis in _row_blocks(geom, order):
        out[rows] = np.einsum("cn,hwn->hwc", coeffs, basis)
    return out


def eval_sh(coeffs, dirs):
    """Evaluate a coefficient set at unit directions, shape (..., 3)."""
    coeffs, order = check_coeffs(coeffs)
    basis = sh_basis(order, dirs)
    return np.einsum("cn,...n->...c", coeffs, basis)


def irradiance_coeffs(coeffs):
    """Convolve radiance coefficients with the clamped cosine.

    Scales band k by the clamped-cosine gain (pi, 2*pi/3, pi/4 for bands
    0, 1, 2) and truncates to order 2; missing bands are treated as zero.
    A uniform unit-radiance environment maps to the constant pi.
    """
    coeffs, order = check_coeffs(coeffs)
    out = np.zeros((3, 9))
    shared = min(order, 2)
    out[:, : n_terms(shared)] = coeffs[:, : n_terms(shared)]
    for k, gain in enumerate(IRRADIANCE_BAND_GAINS):
        out[:, k * k : (k + 1) * (k + 1)] *= gain
    return out


def _band_weights(order):
    """Per-term weights 1/(2k+1), shape ((order+1)^2,)."""
    w = np.empty(n_terms(order))
    for k in range(order + 1):
        w[k * k : (k + 1) * (k + 1)] = 1.0 / (2 * k + 1)
    return w


def sh_coeff_loss(pred, gt):
    """Band-weighted squared coefficient error and its gradient.

    loss = sum_c sum_k (1/(2k+1)) * sum_m (pred - gt)^2, gradient
    2*(pred - gt)/(2k+1) with respect to pred.
    """
    pred, order_p = check_coeffs(pred, "pred")
    gt, order_g = check_coeffs(gt, "gt")
    if order_p != order_g:
        raise ValueError(f"order mismatch: pred K={order_p}, gt K={order_g}")
    w = _band_weights(order_p)
    diff = pred - gt
    loss = float(np.sum(w * diff * diff))
    grad = 2.0 * w * diff
    return loss, grad


def _weighted_residual_quadform(diff_coeffs, geom):
    """Mean sin(theta)-weighted squared residual of a coefficient delta.

    Returns (loss, grad) for
    loss = (1/(3*W*H)) * sum_{c,pix} sin(theta_pix) * r_c(pix)^2 with
    r_c = sum_n diff[c, n] * B_n; the gradient is with respect to diff.
    """
    _, order = check_coeffs(diff_coeffs, "diff")
    norm = 1.0 / (3.0 * geom.n_pixels)
    st = np.sin(geom.thetas())
    loss = 0.0
    grad = np.zeros_like(diff_coeffs)
    for rows, _, basis in _row_blocks(geom, order):
        resid = np.einsum("cn,hwn->chw", diff_coeffs, basis)
        wrow = st[rows][None, :, None]
        loss += float(np.sum(wrow * resid * resid))
        grad += 2.0 * np.einsum("chw,hwn->cn", wrow * resid, basis)
    return norm * loss, norm * grad


def sh_reconstruction_loss(pred, gt, geom):
    """Mean weighted squared error of the reconstructed maps.

    Compares the two coefficient sets through their reconstructions on
    `geom`, weighting each pixel by sin(theta) so rows near the poles
    count in proportion to their area. Returns (loss, grad wrt pred).
    """
    pred, order_p = check_coeffs(pred, "pred")
    gt, order_g = check_coeffs(gt, "gt")
    if order_p != order_g:
        raise ValueError(f"order mismatch: pred K={order_p}, gt K={order_g}")
    return _weighted_residual_quadform(pred - gt, geom)


def sh_rendering_loss(pred, gt, geom):
    """Reconstruction loss between the two irradiance transforms.

    Identical to sh_reconstruction_loss applied to the band-scaled
    order-2 truncations; bands above 2 do not contribute and get zero
    gradient. Returns (loss, grad wrt pred).
    """
    pred, order_p = check_coeffs(pred, "pred")
    gt, order_g = check_coeffs(gt, "gt")
    if order_p != order_g:
        raise ValueError(f"order mismatch: pred K={order_p}, gt K={order_g}")
    diff = irradiance_coeffs(pred) - irradiance_coeffs(gt)
    loss, grad9 = _weighted_residual_quadform(diff, geom)
    grad = np.zeros_like(pred)
    shared = min(order_p, 2)
    cols = n_terms(shared)
    gains = np.empty(9)
    for k, gain in enumerate(IRRADIANCE_BAND_GAINS):
        gains[k * k : (k + 1) * (k + 1)] = gain
    grad[:, :cols] = (gains * grad9)[:, :cols]
    return loss, grad


def fit_sh_least_squares(img, order):
    """Solid-angle-weighted least-squares coefficient fit.

    Solves the normal equations of min sum_pix w_pix * ||B c - I||^2 per
    channel. For band-limited inputs this agrees with project_sh up to
    the quadrature error of the grid. Orders above MAX_FIT_ORDER are
    rejected to keep the normal equations well conditioned; a singular
    system (e.g. a grid with fewer pixels than terms) raises LinAlgError.
    """
    if order > MAX_FIT_ORDER:
        raise ValueError(
            f"order must be <= {MAX_FIT_ORDER} for the least-squares fit"
        )
    img = check_image(img, allow_negative=True)
    geom = GridGeometry.for_image(img)
    w = geom.solid_angles()
    n = n_terms(order)
    gram = np.zeros((n, n))
    rhs = np.zeros((n, 3))
    for rows, _, basis in _row_blocks(geom, order):
        flat = basis.reshape(-1, n)
        wf = np.repeat(w[rows], geom.width)
        gram += flat.T @ (flat * wf[:, None])
        rhs += flat.T @ (img[rows].reshape(-1, 3) * wf[:, None])
    return np.linalg.solve(gram, rhs).T
