"""Light-source separation, spherical-Gaussian parameters, and SG losses.

The source decomposition follows three steps: rank pixels by channel-mean
brightness and split off the brightest fraction, reduce the split-off
radiance to (E, R, P) by binning onto a fixed anchor set, and
reconstruct by summing normalized Gaussian lobes at the anchors.

Pixel sums are weighted by per-pixel solid angle in the default mode so
polar rows do not dominate; the "uniform" mode uses bare pixel sums
(weight 1) for comparison against that convention.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConvergenceError
from .geometry import GridGeometry
from .params import DEFAULT_ANGULAR_SIZE, SgParams
from .validation import check_distribution, check_image

SG_MODES = ("solid-angle", "uniform")

#: Wide-kernel preset: kernel count and angular size for smooth fits.
SMOOTH_KERNELS = 9
SMOOTH_ANGULAR_SIZE = 0.2423


@dataclass(frozen=True)
class LightMask:
    """Boolean source mask over a grid; True marks light-source pixels."""

    geom: GridGeometry
    bits: np.ndarray

    @property
    def count(self):
        return int(np.count_nonzero(self.bits))


def separate(img, percentile=0.05):
    """Split a map into its brightest fraction and the remainder.

    Brightness is the channel mean. Exactly ceil(percentile * W * H)
    pixels go to the source image, ties broken by row-major index
    ascending, and sources + ambient reproduces the input bit-exactly.

    Returns (sources, ambient, mask).
    """
    img = check_image(img)
    if not 0 < percentile < 1:
        raise ValueError(f"percentile must be in (0, 1), got {percentile}")
    geom = GridGeometry.for_image(img)
    brightness = img.mean(axis=2)
    n_src = math.ceil(percentile * geom.n_pixels)
    order = np.argsort(-brightness.ravel(), kind="stable")
    bits = np.zeros(geom.n_pixels, dtype=bool)
    bits[order[:n_src]] = True
    bits = bits.reshape(geom.height, geom.width)
    sources = np.where(bits[..., None], img, 0.0)
    ambient = np.where(bits[..., None], 0.0, img)
    return sources, ambient, LightMask(geom=geom, bits=bits)


def _pixel_weights(geom, mode):
    if mode == "solid-angle":
        return geom.solid_angles()
    if mode == "uniform":
        return np.ones(geom.height)
    raise ValueError(f"mode must be one of {SG_MODES}, got {mode!r}")


def decompose_sg(sources, anchors, mode="solid-angle", s=DEFAULT_ANGULAR_SIZE):
    """Reduce a source image to (P, E, R) on the given anchor set.

    T_c sums weight * I_c over pixels; E = ||T||_2, R = T / E, and P bins
    each pixel's weighted brightness onto its nearest anchor (geodesic
    distance, ties to the lower index), normalized to sum 1. An all-zero
    image gives the degenerate zero parameters.
    """
    sources = check_image(sources)
    geom = GridGeometry.for_image(sources)
    w = _pixel_weights(geom, mode)

    weighted = sources * w[:, None, None]
    t = weighted.sum(axis=(0, 1))
    e = float(np.linalg.norm(t))
    if e == 0.0:
        return SgParams(p=np.zeros(anchors.n), e=0.0, r=np.zeros(3), s=s)
    r = t / e

    brightness = sources.mean(axis=2)
    rows, cols = np.nonzero(brightness)
    dirs = geom.directions()[rows, cols]
    contrib = brightness[rows, cols] * w[rows]
    nearest = anchors.nearest(dirs)
    bins = np.zeros(anchors.n)
    np.add.at(bins, nearest, contrib)
    return SgParams(p=bins / bins.sum(), e=e, r=r, s=s)


def normalization_q(s, r=1.0):
    """Reciprocal of the Gaussian lobe's integral over a radius-r sphere.

    q = 1 / (2 pi s r^2 (1 - e^{-2/s})), computed with expm1 so sharp
    kernels (small s) stay exact.
    """
    if s <= 0:
        raise ValueError(f"s must be > 0, got {s}")
    if r <= 0:
        raise ValueError(f"r must be > 0, got {r}")
    return 1.0 / (2.0 * np.pi * s * r * r * -math.expm1(-2.0 / s))


def gaussian_lobe(dirs, center, s):
    """Unnormalized lobe e^{(center . dir - 1)/s} at unit directions."""
    dot = np.asarray(dirs, dtype=np.float64) @ np.asarray(center, dtype=np.float64)
    return np.exp((dot - 1.0) / s)


def reconstruct_gaussian_map(params, anchors, geom):
    """Render SgParams as a map: sum of normalized lobes, colored by R.

    pixel(u) = q(s) * E * R * sum_i P_i e^{(d_i . u - 1)/s}. Each lobe
    integrates to 1 over the sphere, so the per-channel solid-angle
    integral of the output is E * R[c] (up to quadrature error).
    """
    if params.n != anchors.n:
        raise ValueError(
            f"params have {params.n} weights but anchor set has {anchors.n}"
        )
    out = np.zeros((geom.height, geom.width, 3))
    if params.degenerate:
        return out
    active = np.nonzero(params.p)[0]
    if active.size == 0:
        return out
    centers = anchors.directions[active]
    weights = params.p[active]
    scale = normalization_q(params.s) * params.e * params.r
    all_dirs = geom.directions()
    rows = max(1, int(2_000_000 // max(geom.width * active.size, 1)))
    for start in range(0, geom.height, rows):
        stop = min(start + rows, geom.height)
        dot = all_dirs[start:stop] @ centers.T
        mix = np.exp((dot - 1.0) / params.s) @ weights
        out[start:stop] = mix[..., None] * scale
    return out


def masked_l1(pred_p, gt_p):
    """L1 distance restricted to anchors the target leaves empty.

    loss = sum_i [gt_i == 0] * |pred_i - gt_i|; the subgradient at a kink
    is taken as 0. Returns (loss, grad wrt pred).
    """
    pred_p = np.asarray(pred_p, dtype=np.float64)
    gt_p = np.asarray(gt_p, dtype=np.float64)
    if pred_p.shape != gt_p.shape:
        raise ValueError(
            f"length mismatch: pred {pred_p.shape}, gt {gt_p.shape}"
        )
    mask = gt_p == 0.0
    diff = pred_p - gt_p
    loss = float(np.sum(np.abs(diff[mask])))
    grad = np.where(mask, np.sign(diff), 0.0)
    return loss, grad


def sg_l2_losses(pred, gt):
    """Squared-L2 losses on (P, E, R) and their gradients wrt pred.

    Returns ((loss_p, loss_e, loss_r), (grad_p, grad_e, grad_r)).
    """
    if pred.n != gt.n:
        raise ValueError(f"N mismatch: pred {pred.n}, gt {gt.n}")
    dp = pred.p - gt.p
    de = pred.e - gt.e
    dr = pred.r - gt.r
    losses = (float(dp @ dp), float(de * de), float(dr @ dr))
    grads = (2.0 * dp, 2.0 * de, 2.0 * dr)
    return losses, grads


def sml_loss(pred_p, gt_p, anchors, epsilon, tol=1e-6, max_iter=10_000):
    """Entropy-regularized transport cost between anchor distributions.

    Cost between anchors is geodesic distance; the plan is found by
    Sinkhorn iteration in the log domain, stopping when the largest
    potential update falls below `tol` relative to the potential scale.
    Anchors with zero mass on both sides are dropped before iterating.
    Raises ConvergenceError if `max_iter` rounds do not converge.
    """
    pred_p = check_distribution(pred_p, n=anchors.n, name="pred_p")
    gt_p = check_distribution(gt_p, n=anchors.n, name="gt_p")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be > 0, got {epsilon}")

    ia = np.nonzero(pred_p)[0]
    ib = np.nonzero(gt_p)[0]
    a = pred_p[ia]
    b = gt_p[ib]
    cost = anchors.cost_matrix()[np.ix_(ia, ib)]

    log_a = np.log(a)
    log_b = np.log(b)
    f = np.zeros(a.shape[0])
    g = np.zeros(b.shape[0])
    for _ in range(max_iter):
        f_new = -epsilon * _logsumexp((g[None, :] - cost) / epsilon + log_b, axis=1)
        g_new = -epsilon * _logsumexp(
            (f_new[:, None] - cost) / epsilon + log_a[:, None], axis=0
        )
        delta = max(
            np.max(np.abs(f_new - f)), np.max(np.abs(g_new - g))
        )
        f, g = f_new, g_new
        scale = max(1.0, np.max(np.abs(f)), np.max(np.abs(g)))
        if delta / scale < tol:
            break
    else:
        raise ConvergenceError(
            f"Sinkhorn did not converge within {max_iter} iterations"
        )
    log_plan = (f[:, None] + g[None, :] - cost) / epsilon + log_a[:, None] + log_b
    return float(np.sum(np.exp(log_plan) * cost))


def _logsumexp(x, axis):
    m = np.max(x, axis=axis, keepdims=True)
    out = m + np.log(np.sum(np.exp(x - m), axis=axis, keepdims=True))
    return np.squeeze(out, axis=axis)


def smooth_sg_basis(geom, n_kernels=SMOOTH_KERNELS, s=SMOOTH_ANGULAR_SIZE):
    """Per-pixel responses of the wide-kernel preset, shape (H, W, n)."""
    from .geometry import vogel_directions

    centers = vogel_directions(n_kernels)
    dot = geom.directions() @ centers.T
    return normalization_q(s) * np.exp((dot - 1.0) / s)


def smooth_sg_map(amplitudes, geom, s=SMOOTH_ANGULAR_SIZE):
    """Evaluate a wide-kernel mixture with per-kernel RGB amplitudes."""
    amplitudes = np.asarray(amplitudes, dtype=np.float64)
    if amplitudes.ndim != 2 or amplitudes.shape[1] != 3:
        raise ValueError(
            f"amplitudes must have shape (n, 3), got {amplitudes.shape}"
        )
    basis = smooth_sg_basis(geom, n_kernels=amplitudes.shape[0], s=s)
    return np.einsum("hwn,nc->hwc", basis, amplitudes)


def fit_smooth_sg(ambient, n_kernels=SMOOTH_KERNELS, s=SMOOTH_ANGULAR_SIZE):
    """Least-squares RGB amplitudes of the wide-kernel preset.

    Minimizes the solid-angle-weighted squared error between the ambient
    map and the mixture of `n_kernels` fixed normalized kernels. The
    default preset spends 9 * 3 = 27 parameters. A singular normal
    system propagates numpy.linalg.LinAlgError.
    """
    ambient = check_image(ambient)
    geom = GridGeometry.for_image(ambient)
    basis = smooth_sg_basis(geom, n_kernels=n_kernels, s=s).reshape(-1, n_kernels)
    w = np.repeat(geom.solid_angles(), geom.width)
    gram = basis.T @ (basis * w[:, None])
    rhs = basis.T @ (ambient.reshape(-1, 3) * w[:, None])
    return np.linalg.solve(gram, rhs)
