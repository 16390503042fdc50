"""Parameter containers, defaults, and the JSON parameter-file format.

A parameter file is a version-1 JSON document:

    {
      "version": 1,
      "sh": {"order": K, "coeffs": [[...], [...], [...]]},
      "sg": {"n": N, "s": s, "p": [...], "e": E, "r": [r, g, b]},
      "anchors": {"n": N, "k_nn": k, "generator": "vogel-v1"},
      "meta": {"source": ..., "width": ..., "height": ..., "mode": ...}
    }

Anchor directions are never stored; they are regenerated from the
generator tag, which pins the placement algorithm. Floats are written
as their shortest round-trippable decimals, so write -> read is
numerically lossless.
"""

import json
from dataclasses import dataclass, field, replace

import numpy as np

try:
    import jsonschema
except ImportError:  # pragma: no cover - hard dependency in practice
    jsonschema = None

from .errors import SchemaError
from .geometry import AnchorSet, vogel_anchors
from .validation import check_coeffs

DEFAULT_ORDER = 2
DEFAULT_ANCHORS = 128
DEFAULT_ANGULAR_SIZE = 0.0025
DEFAULT_PERCENTILE = 0.05
DEFAULT_KNN = 6
DEFAULT_MAP_HEIGHT = 128
DEFAULT_MAP_WIDTH = 256

ANCHOR_GENERATOR = "vogel-v1"
PARAM_FILE_VERSION = 1
PARAM_FILE_SUFFIX = ".params.json"

_SIMPLEX_TOL = 1e-9


@dataclass
class SgParams:
    """Sparse light-source parameters: distribution, intensity, color.

    `p` holds the per-anchor share of source brightness, `e` the total
    intensity, `r` the unit color ratio, `s` the kernel angular size.
    An all-dark source region yields the degenerate e = 0 state with p
    and r zeroed.
    """

    p: np.ndarray
    e: float
    r: np.ndarray
    s: float = DEFAULT_ANGULAR_SIZE

    def __post_init__(self):
        self.p = np.asarray(self.p, dtype=np.float64)
        self.r = np.asarray(self.r, dtype=np.float64)
        self.e = float(self.e)
        self.s = float(self.s)
        if self.p.ndim != 1:
            raise ValueError(f"p must be 1-D, got shape {self.p.shape}")
        if self.r.shape != (3,):
            raise ValueError(f"r must have shape (3,), got {self.r.shape}")
        if self.s <= 0:
            raise ValueError(f"s must be > 0, got {self.s}")
        if self.e < 0:
            raise ValueError(f"e must be >= 0, got {self.e}")
        if not (np.all(np.isfinite(self.p)) and np.all(np.isfinite(self.r))):
            raise ValueError("p and r must be finite")
        if self.e == 0.0:
            if np.any(self.p != 0.0) or np.any(self.r != 0.0):
                raise ValueError("degenerate params (e = 0) need zero p and r")
            return
        if np.any(self.p < 0):
            raise ValueError("p must be nonnegative")
        if abs(self.p.sum() - 1.0) > _SIMPLEX_TOL:
            raise ValueError(f"p must sum to 1, got {self.p.sum()!r}")
        norm = float(np.linalg.norm(self.r))
        if abs(norm - 1.0) > _SIMPLEX_TOL:
            raise ValueError(f"r must be a unit vector, got norm {norm!r}")

    @property
    def n(self):
        return self.p.shape[0]

    @property
    def degenerate(self):
        return self.e == 0.0


@dataclass
class LightParams:
    """Joint illumination representation: ambient SH plus sparse SG."""

    sh_coeffs: np.ndarray
    sg: SgParams
    anchors: AnchorSet
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sh_coeffs, self._order = check_coeffs(self.sh_coeffs, "sh_coeffs")
        if self.sg.n != self.anchors.n:
            raise ValueError(
                f"sg has {self.sg.n} weights but anchor set has {self.anchors.n}"
            )

    @property
    def order(self):
        return self._order

    def with_distribution(self, p):
        """Copy with a replacement anchor distribution."""
        return replace(self, sg=replace(self.sg, p=np.asarray(p, dtype=np.float64)))


@dataclass(frozen=True)
class CodecConfig:
    """Decomposition settings; defaults match the reference configuration."""

    order: int = DEFAULT_ORDER
    n_anchors: int = DEFAULT_ANCHORS
    angular_size: float = DEFAULT_ANGULAR_SIZE
    percentile: float = DEFAULT_PERCENTILE
    k_nn: int = DEFAULT_KNN
    mode: str = "solid-angle"
    map_height: int = DEFAULT_MAP_HEIGHT
    map_width: int = DEFAULT_MAP_WIDTH

    def __post_init__(self):
        if self.order < 0:
            raise ValueError(f"order must be >= 0, got {self.order}")
        if self.n_anchors < 1:
            raise ValueError(f"n_anchors must be >= 1, got {self.n_anchors}")
        if self.angular_size <= 0:
            raise ValueError(f"angular_size must be > 0, got {self.angular_size}")
        if not 0 < self.percentile < 1:
            raise ValueError(
                f"percentile must be in (0, 1), got {self.percentile}"
            )
        if not 1 <= self.k_nn <= self.n_anchors - 1:
            raise ValueError(
                f"k_nn must be in [1, {self.n_anchors - 1}], got {self.k_nn}"
            )
        if self.mode not in ("solid-angle", "uniform"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.map_height < 1 or self.map_width < 2:
            raise ValueError("map size must be at least 1 x 2")


PARAM_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["version", "sh", "sg", "anchors"],
    "properties": {
        "version": {"const": PARAM_FILE_VERSION},
        "sh": {
            "type": "object",
            "required": ["order", "coeffs"],
            "properties": {
                "order": {"type": "integer", "minimum": 0},
                "coeffs": {
                    "type": "array",
                    "minItems": 3,
                    "maxItems": 3,
                    "items": {"type": "array", "items": {"type": "number"}},
                },
            },
        },
        "sg": {
            "type": "object",
            "required": ["n", "s", "p", "e", "r"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "s": {"type": "number", "exclusiveMinimum": 0},
                "p": {"type": "array", "items": {"type": "number"}},
                "e": {"type": "number", "minimum": 0},
                "r": {
                    "type": "array",
                    "minItems": 3,
                    "maxItems": 3,
                    "items": {"type": "number"},
                },
            },
        },
        "anchors": {
            "type": "object",
            "required": ["n", "k_nn", "generator"],
            "properties": {
                "n": {"type": "integer", "minimum": 1},
                "k_nn": {"type": "integer", "minimum": 0},
                "generator": {"const": ANCHOR_GENERATOR},
            },
        },
        "meta": {"type": "object"},
    },
}


def _validate_document(doc):
    if jsonschema is None:
        raise RuntimeError("jsonschema is required to validate parameter files")
    validator = jsonschema.Draft202012Validator(PARAM_SCHEMA)
    errors = sorted(validator.iter_errors(doc), key=lambda e: list(e.absolute_path))
    if errors:
        err = errors[0]
        path = "$" + "".join(
            f"[{p!r}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path
        )
        raise SchemaError(f"parameter file invalid at {path}: {err.message}")


def params_to_dict(params):
    """Serialize LightParams to a plain version-1 document."""
    coeffs = params.sh_coeffs
    doc = {
        "version": PARAM_FILE_VERSION,
        "sh": {"order": params.order, "coeffs": coeffs.tolist()},
        "sg": {
            "n": params.sg.n,
            "s": params.sg.s,
            "p": params.sg.p.tolist(),
            "e": params.sg.e,
            "r": params.sg.r.tolist(),
        },
        "anchors": {
            "n": params.anchors.n,
            "k_nn": params.anchors.k_nn,
            "generator": params.anchors.generator,
        },
    }
    if params.meta:
        doc["meta"] = dict(params.meta)
    return doc


def params_from_dict(doc):
    """Parse and validate a version-1 document into LightParams."""
    _validate_document(doc)
    sg_doc = doc["sg"]
    anc_doc = doc["anchors"]
    if len(sg_doc["p"]) != sg_doc["n"]:
        raise SchemaError(
            f"parameter file invalid at $.sg.p: expected {sg_doc['n']} entries,"
            f" got {len(sg_doc['p'])}"
        )
    if sg_doc["n"] != anc_doc["n"]:
        raise SchemaError(
            "parameter file invalid at $.anchors.n: anchor count"
            f" {anc_doc['n']} does not match sg.n {sg_doc['n']}"
        )
    coeffs = np.asarray(doc["sh"]["coeffs"], dtype=np.float64)
    expected = (doc["sh"]["order"] + 1) ** 2
    if coeffs.ndim != 2 or coeffs.shape[1] != expected:
        raise SchemaError(
            "parameter file invalid at $.sh.coeffs: expected 3 rows of"
            f" {expected} values for order {doc['sh']['order']}"
        )
    sg = SgParams(
        p=np.asarray(sg_doc["p"], dtype=np.float64),
        e=sg_doc["e"],
        r=np.asarray(sg_doc["r"], dtype=np.float64),
        s=sg_doc["s"],
    )
    anchors = vogel_anchors(anc_doc["n"], k_nn=anc_doc["k_nn"])
    return LightParams(
        sh_coeffs=coeffs, sg=sg, anchors=anchors, meta=dict(doc.get("meta", {}))
    )


def write_params(path, params):
    doc = params_to_dict(params)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(doc, fh, indent=1)
        fh.write("\n")


def read_params(path):
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"not a JSON document: {exc}") from exc
    if not isinstance(doc, dict):
        raise SchemaError("parameter file must be a JSON object")
    return params_from_dict(doc)
