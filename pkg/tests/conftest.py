import numpy as np
import pytest

from lumiparam.geometry import GridGeometry, vogel_anchors
from lumiparam.params import SgParams
from lumiparam.sg import reconstruct_gaussian_map


@pytest.fixture(scope="session")
def anchors128():
    return vogel_anchors(128, k_nn=6)


@pytest.fixture
def make_inmodel_pano(anchors128):
    """Factory for panoramas that are exactly representable by the codec.

    Ambient light is a strictly positive order-2 polynomial of the
    direction (so its SH projection is exact up to quadrature), and the
    sources are Gaussian lobes centered on anchors. The sources carry
    most of the energy so the brightest-pixel mask captures them.
    """

    def make(rng, height=128, width=256, total_energy=20.0, ambient_share=0.05):
        geom = GridGeometry(width=width, height=height)
        nk = int(rng.integers(1, 6))
        idx = rng.choice(anchors128.n, size=nk, replace=False)
        weights = rng.dirichlet(np.ones(nk))
        color = rng.uniform(0.2, 1.0, 3)
        color /= np.linalg.norm(color)
        p = np.zeros(anchors128.n)
        p[idx] = weights
        sg = SgParams(p=p, e=total_energy, r=color, s=0.0025)
        sources = reconstruct_gaussian_map(sg, anchors128, geom)

        d = geom.directions()
        base = 1.0 + 0.3 * d[..., 2] + 0.6 * d[..., 0] * d[..., 1]
        tint = np.array([1.0, 0.9, 0.8])
        tint = tint / tint.sum() * 3.0
        dc = total_energy * ambient_share / (4.0 * np.pi)
        ambient = dc * base[..., None] * tint
        return sources + ambient, sg

    return make
