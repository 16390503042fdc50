"""Readers and writers for HDR radiance maps.

Supported formats:

* Radiance RGBE (.hdr): shared-exponent 8-bit mantissas. Reading accepts
  flat and adaptively run-length encoded scanlines; writing emits flat
  scanlines. A component with exponent byte e > 0 decodes to
  (m + 0.5) * 2**(e - 136); e == 0 is black. Encoding stores
  floor(c * 2**(8 - exp)) under the pixel's shared frexp exponent, which
  bounds the round-trip error by 2**-8 relative to the pixel maximum.
* PFM (.pfm): 3-channel IEEE float32, rows stored bottom to top, sign of
  the scale line selects endianness; lossless for float32 data.

Previews are tone-mapped 8-bit PNGs: clamp(exposure*v, 0, 1)**(1/gamma),
scaled to 255 and rounded half up.
"""

import numpy as np

from .errors import FormatError
from .validation import check_image

_RGBE_MAGICS = (b"#?RADIANCE", b"#?RGBE")


def _decode_rgbe(rgbe):
    """Map uint8 (..., 4) RGBE samples to float64 (..., 3) radiance."""
    rgbe = np.asarray(rgbe, dtype=np.uint8)
    m = rgbe[..., :3].astype(np.float64)
    e = rgbe[..., 3].astype(np.int64)
    scale = np.where(e > 0, np.ldexp(1.0, e - 136), 0.0)
    return (m + 0.5) * scale[..., None] * (e[..., None] > 0)


def _encode_rgbe(img):
    """Map float64 (..., 3) radiance to uint8 (..., 4) RGBE samples."""
    img = np.asarray(img, dtype=np.float64)
    mx = img.max(axis=-1)
    mant, exp = np.frexp(mx)
    # Exponent byte must fit in [1, 255]; tiny maxima flush to black.
    e = exp + 128
    valid = (mx > 0) & (e >= 1)
    if (e > 255).any():
        raise ValueError("radiance too large for the shared-exponent format")
    scale = np.ldexp(1.0, np.where(valid, 8 - exp, 0))
    m = np.floor(img * scale[..., None])
    m = np.clip(m, 0, 255)
    out = np.zeros(img.shape[:-1] + (4,), dtype=np.uint8)
    out[..., :3] = np.where(valid[..., None], m, 0).astype(np.uint8)
    out[..., 3] = np.where(valid, e, 0).astype(np.uint8)
    return out


def _parse_hdr_header(data):
    """Parse an RGBE header; returns (width, height, data_offset)."""
    if not data.startswith(_RGBE_MAGICS):
        raise FormatError("not a Radiance RGBE stream (bad magic)", offset=0)
    pos = data.index(b"\n") + 1
    # Header lines up to the first blank line.
    while True:
        end = data.find(b"\n", pos)
        if end < 0:
            raise FormatError("unterminated header", offset=pos)
        line = data[pos:end]
        pos = end + 1
        if line == b"":
            break
    end = data.find(b"\n", pos)
    if end < 0:
        raise FormatError("missing resolution line", offset=pos)
    parts = data[pos:end].split()
    if len(parts) != 4 or parts[0] != b"-Y" or parts[2] != b"+X":
        raise FormatError(
            "unsupported resolution line (only '-Y H +X W')", offset=pos
        )
    try:
        height, width = int(parts[1]), int(parts[3])
    except ValueError:
        raise FormatError("non-numeric resolution", offset=pos) from None
    if height < 1 or width < 2:
        raise FormatError(f"bad resolution {width}x{height}", offset=pos)
    return width, height, end + 1


def _read_rle_scanline(data, pos, width):
    """Decode one adaptively RLE-coded scanline into (W, 4) uint8."""
    row = np.empty((4, width), dtype=np.uint8)
    for comp in range(4):
        filled = 0
        while filled < width:
            if pos >= len(data):
                raise FormatError("truncated scanline", offset=pos)
            code = data[pos]
            pos += 1
            if code > 128:
                count = code - 128
                if filled + count > width:
                    raise FormatError("run overflows scanline", offset=pos - 1)
                if pos >= len(data):
                    raise FormatError("truncated run", offset=pos)
                row[comp, filled : filled + count] = data[pos]
                pos += 1
            else:
                count = code
                if count == 0:
                    raise FormatError("zero-length literal run", offset=pos - 1)
                if filled + count > width:
                    raise FormatError("run overflows scanline", offset=pos - 1)
                if pos + count > len(data):
                    raise FormatError("truncated literal run", offset=pos)
                row[comp, filled : filled + count] = np.frombuffer(
                    data, dtype=np.uint8, count=count, offset=pos
                )
                pos += count
            filled += count
    return row.T, pos


def read_hdr(path):
    """Read a Radiance RGBE file into a float64 (H, W, 3) radiance array."""
    with open(path, "rb") as fh:
        data = fh.read()
    width, height, pos = _parse_hdr_header(data)
    rows = []
    for _ in range(height):
        if pos + 4 > len(data):
            raise FormatError("truncated pixel data", offset=pos)
        head = data[pos : pos + 4]
        if (
            head[0] == 2
            and head[1] == 2
            and (head[2] << 8 | head[3]) == width
            and 8 <= width <= 0x7FFF
        ):
            row, pos = _read_rle_scanline(data, pos + 4, width)
        else:
            need = width * 4
            if pos + need > len(data):
                raise FormatError("truncated flat scanline", offset=pos)
            row = np.frombuffer(
                data, dtype=np.uint8, count=need, offset=pos
            ).reshape(width, 4)
            pos += need
        rows.append(row)
    return _decode_rgbe(np.stack(rows, axis=0))


def write_hdr(path, img):
    """Write radiance to a Radiance RGBE file with flat scanlines."""
    img = check_image(img)
    h, w = img.shape[:2]
    rgbe = _encode_rgbe(img)
    with open(path, "wb") as fh:
        fh.write(b"#?RADIANCE\n")
        fh.write(b"FORMAT=32-bit_rle_rgbe\n")
        fh.write(b"\n")
        fh.write(f"-Y {h} +X {w}\n".encode("ascii"))
        fh.write(rgbe.tobytes())


def read_pfm(path):
    """Read a 3-channel PFM file into a float64 (H, W, 3) array.

    The absolute value of the scale line is applied as a multiplier.
    """
    with open(path, "rb") as fh:
        data = fh.read()

    def next_token(pos):
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise FormatError("truncated header", offset=start)
        return data[start:pos], pos

    magic, pos = next_token(0)
    if magic != b"PF":
        raise FormatError("not a 3-channel PFM stream (bad magic)", offset=0)
    wtok, pos = next_token(pos)
    htok, pos = next_token(pos)
    stok, pos = next_token(pos)
    try:
        width, height, scale = int(wtok), int(htok), float(stok)
    except ValueError:
        raise FormatError("malformed PFM header", offset=pos) from None
    if width < 2 or height < 1 or scale == 0:
        raise FormatError("bad PFM dimensions or scale", offset=pos)
    pos += 1  # single whitespace byte terminates the header
    count = width * height * 3
    dtype = np.dtype("<f4") if scale < 0 else np.dtype(">f4")
    if pos + count * 4 > len(data):
        raise FormatError("truncated PFM pixel data", offset=pos)
    flat = np.frombuffer(data, dtype=dtype, count=count, offset=pos)
    img = flat.reshape(height, width, 3).astype(np.float64)
    img = img[::-1]  # rows are stored bottom to top
    mag = abs(scale)
    if mag != 1.0:
        img = img * mag
    return np.ascontiguousarray(img)


def write_pfm(path, img):
    """Write a (H, W, 3) array to little-endian PFM (scale -1.0)."""
    img = np.asarray(img, dtype=np.float64)
    if img.ndim != 3 or img.shape[2] != 3:
        raise ValueError(f"img must have shape (H, W, 3), got {img.shape}")
    if not np.isfinite(img).all():
        raise ValueError("img contains non-finite values")
    h, w = img.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"PF\n{w} {h}\n-1.0\n".encode("ascii"))
        fh.write(img[::-1].astype("<f4").tobytes())


def tonemap(img, exposure=1.0, gamma=2.2):
    """Map radiance to 8-bit sRGB-style values for previews.

    clamp(exposure * v, 0, 1) ** (1/gamma) scaled to [0, 255] and rounded
    half up.
    """
    if exposure <= 0 or gamma <= 0:
        raise ValueError("exposure and gamma must be positive")
    v = np.clip(np.asarray(img, dtype=np.float64) * exposure, 0.0, 1.0)
    v = v ** (1.0 / gamma)
    return np.floor(v * 255.0 + 0.5).astype(np.uint8)


def write_preview_png(path, img, exposure=1.0, gamma=2.2):
    """Write a tone-mapped PNG preview of a radiance map."""
    from PIL import Image

    img = check_image(img)
    Image.fromarray(tonemap(img, exposure=exposure, gamma=gamma), "RGB").save(
        path, format="PNG"
    )


def read_map(path):
    """Read an HDR map by extension (.hdr/.pic -> RGBE, .pfm -> PFM)."""
    name = str(path).lower()
    if name.endswith((".hdr", ".pic")):
        return read_hdr(path)
    if name.endswith(".pfm"):
        return read_pfm(path)
    raise ValueError(f"unrecognized map extension: {path}")


def write_map(path, img):
    """Write an HDR map by extension (.hdr/.pic -> RGBE, .pfm -> PFM)."""
    name = str(path).lower()
    if name.endswith((".hdr", ".pic")):
        return write_hdr(path, img)
    if name.endswith(".pfm"):
        return write_pfm(path, img)
    raise ValueError(f"unrecognized map extension: {path}")
