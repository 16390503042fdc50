"""Fidelity metrics, sphere renders, and the round-trip report.

si-RMSE minimizes RMSE over one global scale per comparison (not per
channel), separating directional error from intensity error. The sphere
renders are orthographic unit spheres seen along the fixed -Y axis
(screen x maps to +X, screen up to +Z); pixels off the disc are black.
"""

from dataclasses import dataclass, field

import numpy as np

from .codec import decompose_image, reconstruct_params, sparsify_params
from .geometry import GridGeometry
from .params import CodecConfig
from .sg import masked_l1, sg_l2_losses, sml_loss
from .sh import eval_sh, irradiance_coeffs, sh_coeff_loss, sh_reconstruction_loss, sh_rendering_loss
from .validation import check_image


def rmse(a, b):
    """Root-mean-square difference over all entries."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch: {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def si_rmse(pred, gt):
    """Scale-invariant RMSE: min over alpha of rmse(alpha * pred, gt).

    The optimum is alpha* = <pred, gt> / <pred, pred>, one global scale
    for the whole comparison. An all-zero pred has no scale to fit and
    degenerates to rmse(0, gt).
    """
    pred = np.asarray(pred, dtype=np.float64)
    gt = np.asarray(gt, dtype=np.float64)
    if pred.shape != gt.shape:
        raise ValueError(f"shape mismatch: {pred.shape} vs {gt.shape}")
    denom = float(np.sum(pred * pred))
    if denom == 0.0:
        return rmse(np.zeros_like(pred), gt)
    alpha = float(np.sum(pred * gt)) / denom
    return rmse(alpha * pred, gt)


def _sphere_normals(out_size):
    """Visible-hemisphere normals for the orthographic sphere.

    Returns (normals (S, S, 3), visible (S, S) bool). The camera sits on
    +Y looking along -Y; n.y >= 0 on the visible side.
    """
    t = (np.arange(out_size) + 0.5) / out_size * 2.0 - 1.0
    x = t[None, :]
    z = -t[:, None]
    r2 = x * x + z * z
    visible = r2 <= 1.0
    y = np.sqrt(np.clip(1.0 - r2, 0.0, 1.0))
    normals = np.zeros((out_size, out_size, 3))
    normals[..., 0] = x
    normals[..., 1] = y
    normals[..., 2] = z
    normals[~visible] = 0.0
    return normals, visible


DIFFUSE_ALBEDO = 0.5


def irradiance_quadrature(env, normals):
    """Brute-force cosine-hemisphere irradiance at the given normals.

    Integrates max(n . d, 0) * env over the map's exact solid angles.
    Slow but assumption-free; the reference path for testing the SH
    irradiance route.
    """
    env = check_image(env)
    geom = GridGeometry.for_image(env)
    dirs = geom.directions().reshape(-1, 3)
    weighted = env.reshape(-1, 3) * np.repeat(
        geom.solid_angles(), geom.width
    )[:, None]
    flat_n = normals.reshape(-1, 3)
    out = np.empty((flat_n.shape[0], 3))
    block = max(1, int(4_000_000 // max(dirs.shape[0], 1)))
    for start in range(0, flat_n.shape[0], block):
        stop = min(start + block, flat_n.shape[0])
        cos = np.clip(flat_n[start:stop] @ dirs.T, 0.0, None)
        out[start:stop] = cos @ weighted
    return out.reshape(normals.shape)


def render_diffuse_sphere(env, out_size=64):
    """Gray diffuse unit sphere: albedo * irradiance(n) / pi.

    `env` is either SH coefficients, shape (3, (K+1)^2), rendered
    through the band-scaled irradiance transform, or an equirectangular
    map, rendered by brute-force hemisphere quadrature.
    """
    normals, visible = _sphere_normals(out_size)
    env_arr = np.asarray(env)
    if env_arr.ndim == 2:
        irr = eval_sh(irradiance_coeffs(env_arr), normals)
    elif env_arr.ndim == 3:
        irr = irradiance_quadrature(env_arr, normals)
    else:
        raise ValueError(
            f"env must be coefficients (3, n) or a map (H, W, 3), got "
            f"shape {env_arr.shape}"
        )
    out = DIFFUSE_ALBEDO / np.pi * irr
    out[~visible] = 0.0
    return out


def sample_bilinear(env, dirs):
    """Bilinear equirectangular lookup, wrapping in azimuth.

    Rows are clamped at the poles; columns wrap. Directions map to
    continuous pixel coordinates through the same pixel-center
    convention the grid uses.
    """
    env = check_image(env)
    h, w = env.shape[:2]
    dirs = np.asarray(dirs, dtype=np.float64)
    theta = np.arccos(np.clip(dirs[..., 2], -1.0, 1.0))
    phi = np.mod(np.arctan2(dirs[..., 1], dirs[..., 0]), 2.0 * np.pi)
    fx = phi / (2.0 * np.pi) * w - 0.5
    fy = theta / np.pi * h - 0.5
    x0 = np.floor(fx)
    y0 = np.floor(fy)
    tx = (fx - x0)[..., None]
    ty = (fy - y0)[..., None]
    x0 = x0.astype(np.int64) % w
    x1 = (x0 + 1) % w
    y0 = np.clip(y0.astype(np.int64), 0, h - 1)
    y1 = np.clip(y0 + 1, 0, h - 1)
    top = env[y0, x0] * (1.0 - tx) + env[y0, x1] * tx
    bot = env[y1, x0] * (1.0 - tx) + env[y1, x1] * tx
    return top * (1.0 - ty) + bot * ty


def render_mirror_sphere(env, out_size=64, view=(0.0, 1.0, 0.0)):
    """Mirror unit sphere: env looked up along r = 2(n.v)n - v.

    v points from the surface toward the camera (default +Y, i.e. the
    camera looks along -Y). Off-disc pixels are black.
    """
    env = check_image(env)
    normals, visible = _sphere_normals(out_size)
    v = np.asarray(view, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ValueError("view vector must be nonzero")
    v = v / norm
    ndv = normals @ v
    refl = 2.0 * ndv[..., None] * normals - v
    out = sample_bilinear(env, refl)
    out[~visible] = 0.0
    return out


@dataclass
class RoundTripReport:
    """Metrics of a decompose -> reconstruct cycle against the input.

    `losses` compares the parameters of the reconstruction against the
    parameters of the input (decomposing both with the same settings).
    `degenerate` marks an all-dark source layer. `composite_full` is the
    geometric mean of the two full-map metrics, a derived convenience.
    """

    rmse_full: float
    si_rmse_full: float
    rmse_diffuse: float
    si_rmse_diffuse: float
    rmse_mirror: float
    si_rmse_mirror: float
    losses: dict = field(default_factory=dict)
    degenerate: bool = False

    @property
    def composite_full(self):
        return float(np.sqrt(self.rmse_full * self.si_rmse_full))

    def as_dict(self):
        doc = {
            "rmse_full": self.rmse_full,
            "si_rmse_full": self.si_rmse_full,
            "rmse_diffuse": self.rmse_diffuse,
            "si_rmse_diffuse": self.si_rmse_diffuse,
            "rmse_mirror": self.rmse_mirror,
            "si_rmse_mirror": self.si_rmse_mirror,
            "composite_full": self.composite_full,
            "degenerate": self.degenerate,
            "losses": dict(self.losses),
        }
        return doc


def _param_losses(pred, gt, sml_epsilon=None):
    losses = {}
    losses["sh_coeff"], _ = sh_coeff_loss(pred.sh_coeffs, gt.sh_coeffs)
    geom = GridGeometry(
        width=gt.meta.get("width", 256), height=gt.meta.get("height", 128)
    )
    losses["sh_reconstruction"], _ = sh_reconstruction_loss(
        pred.sh_coeffs, gt.sh_coeffs, geom
    )
    losses["sh_rendering"], _ = sh_rendering_loss(
        pred.sh_coeffs, gt.sh_coeffs, geom
    )
    losses["masked_l1"], _ = masked_l1(pred.sg.p, gt.sg.p)
    (losses["l2_p"], losses["l2_e"], losses["l2_r"]), _ = sg_l2_losses(
        pred.sg, gt.sg
    )
    if sml_epsilon is not None and not (pred.sg.degenerate or gt.sg.degenerate):
        losses["sml"] = sml_loss(
            pred.sg.p, gt.sg.p, gt.anchors, epsilon=sml_epsilon
        )
    return losses


def evaluation_report(
    pred, gt_map, config=None, render_size=32, sml_epsilon=None
):
    """Score a prediction (map or LightParams) against a reference map.

    A predicted map must match the reference dimensions; parameters are
    reconstructed at them. Losses compare the prediction's parameters
    (decomposing a predicted map with the same settings) against the
    reference map's decomposition.
    """
    config = config or CodecConfig()
    gt_map = check_image(gt_map)
    if isinstance(pred, np.ndarray):
        pred_map = check_image(pred)
        if pred_map.shape != gt_map.shape:
            raise ValueError(
                f"dimension mismatch: pred {pred_map.shape}, "
                f"gt {gt_map.shape}"
            )
        pred_params = decompose_image(pred_map, config)
    else:
        pred_params = pred
        pred_map = reconstruct_params(
            pred_params, gt_map.shape[0], gt_map.shape[1], clamp=True
        )
    gt_params = decompose_image(gt_map, config)
    losses = _param_losses(pred_params, gt_params, sml_epsilon=sml_epsilon)

    dif_pred = render_diffuse_sphere(pred_map, out_size=render_size)
    dif_gt = render_diffuse_sphere(gt_map, out_size=render_size)
    mir_pred = render_mirror_sphere(pred_map, out_size=render_size)
    mir_gt = render_mirror_sphere(gt_map, out_size=render_size)

    return RoundTripReport(
        rmse_full=rmse(pred_map, gt_map),
        si_rmse_full=si_rmse(pred_map, gt_map),
        rmse_diffuse=rmse(dif_pred, dif_gt),
        si_rmse_diffuse=si_rmse(dif_pred, dif_gt),
        rmse_mirror=rmse(mir_pred, mir_gt),
        si_rmse_mirror=si_rmse(mir_pred, mir_gt),
        losses=losses,
        degenerate=gt_params.sg.degenerate,
    )


def roundtrip_report(
    pano, config=None, sparsify=False, render_size=32, sml_epsilon=None
):
    """Decompose, reconstruct, and score a panorama against itself.

    The reconstruction is rendered at the configured map size and
    compared to the input via full-map metrics plus diffuse- and
    mirror-sphere renders (each environment rendered at its own
    resolution, spheres at `render_size`). Losses compare the
    reconstruction's own decomposition to the input's. Deterministic.
    """
    config = config or CodecConfig()
    pano = check_image(pano)
    params = decompose_image(pano, config)
    if sparsify:
        params, _ = sparsify_params(params)
    recon = reconstruct_params(
        params, config.map_height, config.map_width, clamp=True
    )

    full_ref = pano
    if pano.shape[:2] != recon.shape[:2]:
        geom = GridGeometry(width=config.map_width, height=config.map_height)
        full_ref = sample_bilinear(pano, geom.directions())

    dif_in = render_diffuse_sphere(pano, out_size=render_size)
    dif_out = render_diffuse_sphere(recon, out_size=render_size)
    mir_in = render_mirror_sphere(pano, out_size=render_size)
    mir_out = render_mirror_sphere(recon, out_size=render_size)

    recon_params = decompose_image(recon, config)
    if sparsify:
        recon_params, _ = sparsify_params(recon_params)
    losses = _param_losses(recon_params, params, sml_epsilon=sml_epsilon)

    return RoundTripReport(
        rmse_full=rmse(recon, full_ref),
        si_rmse_full=si_rmse(recon, full_ref),
        rmse_diffuse=rmse(dif_out, dif_in),
        si_rmse_diffuse=si_rmse(dif_out, dif_in),
        rmse_mirror=rmse(mir_out, mir_in),
        si_rmse_mirror=si_rmse(mir_out, mir_in),
        losses=losses,
        degenerate=params.sg.degenerate,
    )
