"""End-to-end decomposition pipeline and the estimator wrapper.

`decompose_image` splits a panorama into the brightest-pixel source
layer and the ambient remainder, projects the ambient layer onto the SH
basis, and bins the source layer onto the anchor set as (P, E, R).
`reconstruct_params` renders the sum of both halves back to a map.

`IlluminationCodec` wraps the pipeline in the scikit-learn estimator
protocol: fit() freezes the anchor set, transform() maps a batch of
panoramas to flat parameter rows, inverse_transform() renders rows back
to maps.
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .geometry import GridGeometry, vogel_anchors
from .params import CodecConfig, LightParams, SgParams
from .sg import decompose_sg, reconstruct_gaussian_map, separate
from .sh import n_terms, project_sh, reconstruct_sh
from .sparsity import slsparsemax
from .validation import check_image


def decompose_image(img, config=None, anchors=None, meta=None):
    """Decompose a panorama into joint SH + SG parameters.

    The anchor set is derived from the config unless one is supplied
    (it must then match the configured count and neighborhood size).
    """
    config = config or CodecConfig()
    img = check_image(img)
    if anchors is None:
        anchors = vogel_anchors(config.n_anchors, k_nn=config.k_nn)
    elif anchors.n != config.n_anchors or anchors.k_nn != config.k_nn:
        raise ValueError(
            f"anchor set ({anchors.n}, k_nn={anchors.k_nn}) does not match "
            f"config ({config.n_anchors}, k_nn={config.k_nn})"
        )
    sources, ambient, _ = separate(img, percentile=config.percentile)
    coeffs = project_sh(ambient, config.order, mode=config.mode)
    sg = decompose_sg(
        sources, anchors, mode=config.mode, s=config.angular_size
    )
    full_meta = {
        "width": img.shape[1],
        "height": img.shape[0],
        "mode": config.mode,
        "percentile": config.percentile,
    }
    if meta:
        full_meta.update(meta)
    return LightParams(sh_coeffs=coeffs, sg=sg, anchors=anchors, meta=full_meta)


def sparsify_params(params):
    """Apply the credibility-ordered projection to the distribution.

    The raw projection can leave the simplex when credibility order
    disagrees with value order, so the result is renormalized to keep
    the container invariant (sum P = 1); kappa, tau, and the
    pre-normalization sum land in meta. Degenerate parameters pass
    through unchanged. Returns (params, report or None).
    """
    if params.sg.degenerate:
        return params, None
    p, report = slsparsemax(params.sg.p, params.anchors)
    total = p.sum()
    out = params.with_distribution(p / total)
    out.meta = {
        **params.meta,
        "sparsify_kappa": report.kappa,
        "sparsify_tau": report.tau,
        "sparsify_raw_sum": float(total),
    }
    return out, report


def reconstruct_params(params, height, width, clamp=False):
    """Render parameters back to a map: SH ambient + Gaussian sources.

    SH ringing can undershoot zero; clamp=True floors the output at 0
    (required before writing shared-exponent HDR files).
    """
    geom = GridGeometry(width=width, height=height)
    out = reconstruct_sh(params.sh_coeffs, geom)
    out += reconstruct_gaussian_map(params.sg, params.anchors, geom)
    if clamp:
        np.maximum(out, 0.0, out=out)
    return out


class IlluminationCodec(BaseEstimator, TransformerMixin):
    """Panoramas -> flat illumination-parameter rows and back.

    Each row is [SH coefficients (3*(order+1)^2) | P (n_anchors) | E | R
    (3)], 159 values under the defaults. inverse_transform renders rows
    to (map_height, map_width, 3) maps.
    """

    def __init__(
        self,
        order=2,
        n_anchors=128,
        angular_size=0.0025,
        percentile=0.05,
        k_nn=6,
        mode="solid-angle",
        map_height=128,
        map_width=256,
        sparsify=False,
    ):
        self.order = order
        self.n_anchors = n_anchors
        self.angular_size = angular_size
        self.percentile = percentile
        self.k_nn = k_nn
        self.mode = mode
        self.map_height = map_height
        self.map_width = map_width
        self.sparsify = sparsify

    def _config(self):
        return CodecConfig(
            order=self.order,
            n_anchors=self.n_anchors,
            angular_size=self.angular_size,
            percentile=self.percentile,
            k_nn=self.k_nn,
            mode=self.mode,
            map_height=self.map_height,
            map_width=self.map_width,
        )

    @staticmethod
    def _as_images(X):
        if isinstance(X, np.ndarray) and X.ndim == 3:
            raise ValueError(
                "X must be a sequence of (H, W, 3) images; wrap a single "
                "image in a list"
            )
        return [check_image(img) for img in X]

    @property
    def row_width_(self):
        check_is_fitted(self, "anchors_")
        return 3 * n_terms(self.order) + self.n_anchors + 4

    def fit(self, X, y=None):
        """Validate settings, freeze the anchor set, check the inputs."""
        config = self._config()
        self._as_images(X)
        self.anchors_ = vogel_anchors(config.n_anchors, k_nn=config.k_nn)
        return self

    def decompose(self, img):
        """Single-image decomposition to LightParams."""
        check_is_fitted(self, "anchors_")
        params = decompose_image(img, self._config(), anchors=self.anchors_)
        if self.sparsify:
            params, _ = sparsify_params(params)
        return params

    def transform(self, X):
        """Decompose each image into one flat parameter row."""
        check_is_fitted(self, "anchors_")
        images = self._as_images(X)
        rows = np.empty((len(images), self.row_width_))
        for i, img in enumerate(images):
            params = self.decompose(img)
            rows[i] = self.row_from_params(params)
        return rows

    def inverse_transform(self, Xt):
        """Render parameter rows to maps, shape (n, H, W, 3)."""
        check_is_fitted(self, "anchors_")
        Xt = np.asarray(Xt, dtype=np.float64)
        if Xt.ndim != 2 or Xt.shape[1] != self.row_width_:
            raise ValueError(
                f"expected shape (n, {self.row_width_}), got {Xt.shape}"
            )
        out = np.empty((Xt.shape[0], self.map_height, self.map_width, 3))
        for i, row in enumerate(Xt):
            params = self.params_from_row(row)
            out[i] = reconstruct_params(
                params, self.map_height, self.map_width
            )
        return out

    def row_from_params(self, params):
        return np.concatenate(
            [
                params.sh_coeffs.ravel(),
                params.sg.p,
                [params.sg.e],
                params.sg.r,
            ]
        )

    def params_from_row(self, row):
        check_is_fitted(self, "anchors_")
        row = np.asarray(row, dtype=np.float64)
        if row.shape != (self.row_width_,):
            raise ValueError(
                f"expected shape ({self.row_width_},), got {row.shape}"
            )
        n_sh = 3 * n_terms(self.order)
        coeffs = row[:n_sh].reshape(3, -1)
        p = row[n_sh : n_sh + self.n_anchors]
        e = row[n_sh + self.n_anchors]
        r = row[n_sh + self.n_anchors + 1 :]
        sg = SgParams(p=p, e=e, r=r, s=self.angular_size)
        return LightParams(sh_coeffs=coeffs, sg=sg, anchors=self.anchors_)
