"""Parametric HDR-illumination codec.

Decomposes equirectangular HDR panoramas into a joint representation:
low-order spherical harmonics for the smooth ambient light plus a
sparse mixture of sharp spherical Gaussians at fixed anchor directions
for the light sources. Reconstruction, sparsity projection, losses,
metrics, file formats, a scikit-learn-style estimator, and a CLI sit
on top of that decomposition.
"""

from .codec import (
    IlluminationCodec,
    decompose_image,
    reconstruct_params,
    sparsify_params,
)
from .errors import ConvergenceError, FormatError, SchemaError
from .geometry import (
    AnchorSet,
    GridGeometry,
    geodesic,
    vogel_anchors,
    vogel_directions,
)
from .hdr_io import (
    read_hdr,
    read_map,
    read_pfm,
    tonemap,
    write_hdr,
    write_map,
    write_pfm,
    write_preview_png,
)
from .metrics import (
    RoundTripReport,
    evaluation_report,
    render_diffuse_sphere,
    render_mirror_sphere,
    rmse,
    roundtrip_report,
    si_rmse,
)
from .params import (
    CodecConfig,
    LightParams,
    SgParams,
    params_from_dict,
    params_to_dict,
    read_params,
    write_params,
)
from .sg import (
    decompose_sg,
    fit_smooth_sg,
    masked_l1,
    normalization_q,
    reconstruct_gaussian_map,
    separate,
    sg_l2_losses,
    sml_loss,
)
from .sh import (
    fit_sh_least_squares,
    irradiance_coeffs,
    project_sh,
    reconstruct_sh,
    sh_basis,
    sh_coeff_loss,
    sh_index,
    sh_reconstruction_loss,
    sh_rendering_loss,
)
from .sparsity import CredibilityReport, credibility, slsparsemax, sparsemax

__version__ = "0.1.0"

__all__ = [
    "AnchorSet",
    "CodecConfig",
    "ConvergenceError",
    "CredibilityReport",
    "FormatError",
    "GridGeometry",
    "IlluminationCodec",
    "LightParams",
    "RoundTripReport",
    "SchemaError",
    "SgParams",
    "credibility",
    "decompose_image",
    "decompose_sg",
    "evaluation_report",
    "fit_sh_least_squares",
    "fit_smooth_sg",
    "geodesic",
    "irradiance_coeffs",
    "masked_l1",
    "normalization_q",
    "params_from_dict",
    "params_to_dict",
    "project_sh",
    "read_hdr",
    "read_map",
    "read_params",
    "read_pfm",
    "reconstruct_gaussian_map",
    "reconstruct_params",
    "reconstruct_sh",
    "render_diffuse_sphere",
    "render_mirror_sphere",
    "rmse",
    "roundtrip_report",
    "separate",
    "sg_l2_losses",
    "sh_basis",
    "sh_coeff_loss",
    "sh_index",
    "sh_reconstruction_loss",
    "sh_rendering_loss",
    "si_rmse",
    "slsparsemax",
    "sml_loss",
    "sparsemax",
    "sparsify_params",
    "tonemap",
    "vogel_anchors",
    "vogel_directions",
    "write_hdr",
    "write_map",
    "write_params",
    "write_pfm",
    "write_preview_png",
]
