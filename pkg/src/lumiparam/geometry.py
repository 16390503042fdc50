"""Spherical domain: equirectangular grid geometry and anchor layouts.

Conventions, used everywhere in the package:

* Directions are unit vectors (x, y, z); theta is the polar angle from +Z,
  phi the azimuth from +X toward +Y.
* A pixel (x, y) on a WxH equirectangular grid is sampled at its center:
  theta = pi*(y + 0.5)/H, phi = 2*pi*(x + 0.5)/W, so row 0 is the north
  cap and row H-1 the south cap.
* The per-pixel solid angle is the exact area of the pixel's spherical
  cell, (2*pi/W)*(cos(theta_top) - cos(theta_bottom)). It is proportional
  to sin(theta) of the row center and the cells tile the sphere, so the
  sum over any grid is 4*pi to machine precision.
"""

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

GOLDEN_ANGLE = np.pi * (3.0 - np.sqrt(5.0))


@dataclass(eq=True)
class GridGeometry:
    """Geometry of a WxH equirectangular grid."""

    width: int
    height: int

    def __post_init__(self):
        if self.width < 2 or self.height < 1:
            raise ValueError(
                f"grid needs W >= 2 and H >= 1, got {self.width}x{self.height}"
            )

    @classmethod
    def for_image(cls, img):
        h, w = np.asarray(img).shape[:2]
        return cls(width=w, height=h)

    @property
    def n_pixels(self):
        return self.width * self.height

    def thetas(self):
        """Polar angle at each row center, shape (H,)."""
        return np.pi * (np.arange(self.height) + 0.5) / self.height

    def phis(self):
        """Azimuth at each column center, shape (W,)."""
        return 2.0 * np.pi * (np.arange(self.width) + 0.5) / self.width

    @cached_property
    def _directions(self):
        th = self.thetas()
        ph = self.phis()
        st, ct = np.sin(th), np.cos(th)
        out = np.empty((self.height, self.width, 3))
        out[..., 0] = np.outer(st, np.cos(ph))
        out[..., 1] = np.outer(st, np.sin(ph))
        out[..., 2] = ct[:, None]
        return out

    def directions(self):
        """Unit direction at each pixel center, shape (H, W, 3)."""
        return self._directions

    def direction(self, x, y):
        """Unit direction at pixel center(s) (x, y)."""
        x = np.asarray(x)
        y = np.asarray(y)
        if np.any(x < 0) or np.any(x >= self.width):
            raise ValueError(f"x out of range [0, {self.width})")
        if np.any(y < 0) or np.any(y >= self.height):
            raise ValueError(f"y out of range [0, {self.height})")
        th = np.pi * (y + 0.5) / self.height
        ph = 2.0 * np.pi * (x + 0.5) / self.width
        st = np.sin(th)
        return np.stack([st * np.cos(ph), st * np.sin(ph), np.cos(th)], axis=-1)

    @cached_property
    def _row_solid_angles(self):
        edges = np.pi * np.arange(self.height + 1) / self.height
        return (2.0 * np.pi / self.width) * (np.cos(edges[:-1]) - np.cos(edges[1:]))

    def solid_angle(self, y):
        """Solid angle of any pixel in row y (all pixels in a row share it)."""
        return self._row_solid_angles[y]

    def solid_angles(self):
        """Per-row pixel solid angle, shape (H,). All entries positive."""
        return self._row_solid_angles

    def solid_angle_map(self):
        """Per-pixel solid angle broadcast to (H, W)."""
        return np.broadcast_to(
            self._row_solid_angles[:, None], (self.height, self.width)
        )

    def pixel_from_dir(self, dirs):
        """Map direction(s) to the containing pixel, as (x, y) int arrays.

        Inverse of the center convention under floor-to-cell semantics:
        pixel centers map back to themselves.
        """
        d = np.asarray(dirs, dtype=np.float64)
        z = np.clip(d[..., 2], -1.0, 1.0)
        theta = np.arccos(z)
        phi = np.mod(np.arctan2(d[..., 1], d[..., 0]), 2.0 * np.pi)
        x = np.minimum(
            (phi * self.width / (2.0 * np.pi)).astype(np.int64), self.width - 1
        )
        y = np.minimum(
            (theta * self.height / np.pi).astype(np.int64), self.height - 1
        )
        return x, y


def geodesic(a, b):
    """Great-circle distance between unit vectors, arccos of the clamped dot.

    Broadcasts over leading axes; accepts (..., 3) against (..., 3).
    """
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    dots = np.clip(np.sum(a * b, axis=-1), -1.0, 1.0)
    return np.arccos(dots)


@dataclass
class AnchorSet:
    """Fixed directions on the sphere with precomputed neighborhoods.

    directions: (N, 3) unit vectors.
    neighbors: (N, k_nn) int indices of each anchor's nearest anchors by
        geodesic distance, self excluded, ties broken by ascending index.
    """

    directions: np.ndarray
    neighbors: np.ndarray
    k_nn: int
    generator: str = field(default="vogel-v1")

    @property
    def n(self):
        return self.directions.shape[0]

    def nearest(self, dirs):
        """Index of the nearest anchor for each direction in (..., 3).

        Nearest by geodesic distance; argmax over dot products, which for
        ties returns the lowest index.
        """
        d = np.asarray(dirs, dtype=np.float64)
        flat = d.reshape(-1, 3)
        idx = np.argmax(flat @ self.directions.T, axis=1)
        return idx.reshape(d.shape[:-1])

    def cost_matrix(self):
        """Pairwise geodesic distances between anchors, shape (N, N)."""
        dots = np.clip(self.directions @ self.directions.T, -1.0, 1.0)
        return np.arccos(dots)


def vogel_directions(n):
    """Vogel (Fibonacci) spiral directions, shape (n, 3).

    z_i = 1 - 2*(i + 0.5)/n, phi_i = i * golden angle mod 2*pi.
    Deterministic in n.
    """
    if n < 1:
        raise ValueError(f"need n >= 1 anchors, got {n}")
    i = np.arange(n)
    z = 1.0 - 2.0 * (i + 0.5) / n
    phi = np.mod(i * GOLDEN_ANGLE, 2.0 * np.pi)
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


def vogel_anchors(n, k_nn=6):
    """Build an AnchorSet of n Vogel directions with k_nn neighborhoods.

    Neighbor lists sort by geodesic distance with ties broken by
    ascending index (lexicographic sort on (distance, index)).
    """
    if not 0 <= k_nn <= n - 1:
        raise ValueError(f"k_nn must be in [0, n-1], got {k_nn} for n={n}")
    dirs = vogel_directions(n)
    dots = np.clip(dirs @ dirs.T, -1.0, 1.0)
    dist = np.arccos(dots)
    np.fill_diagonal(dist, np.inf)
    order = np.argsort(dist, axis=1, kind="stable")
    neighbors = order[:, :k_nn].astype(np.int64)
    return AnchorSet(directions=dirs, neighbors=neighbors, k_nn=int(k_nn))
