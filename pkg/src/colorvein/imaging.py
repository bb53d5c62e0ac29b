"""Raster types, ROI normalization, and template quantization.

All types are immutable after construction (the wrapped arrays are marked
read-only) and every operation here is a pure function.
"""

from __future__ import annotations

import dataclasses
import io
import math
from pathlib import Path

import numpy as np

MIN_DIM = 8

TEMPLATE_LEN = 64
TEMPLATE_MAX = 10.0
TEMPLATE_DECIMALS = 4
TEMPLATE_SCALE = 10 ** TEMPLATE_DECIMALS
#: Distinct representable values per component on the closed interval
#: [-10, 10] at 4 decimals.  Note this is 200_001: the interval endpoints
#: are both representable, one more than the commonly quoted 200_000.
TEMPLATE_VALUES_PER_COMPONENT = int(2 * TEMPLATE_MAX) * TEMPLATE_SCALE + 1

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class ImageFormatError(ValueError):
    """Raised for unreadable, multi-channel, or wrongly sized raster files."""


def _freeze(arr: np.ndarray) -> np.ndarray:
    arr = np.ascontiguousarray(arr)
    arr.flags.writeable = False
    return arr


@dataclasses.dataclass(frozen=True)
class GrayImage:
    """Single-channel raster with row-major float intensities in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
        h, w = arr.shape
        if h < MIN_DIM or w < MIN_DIM:
            raise ValueError(f"image must be at least {MIN_DIM}x{MIN_DIM}, got {h}x{w}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ValueError("intensities must lie in [0, 1]")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape


@dataclasses.dataclass(frozen=True)
class BinaryPattern:
    """Raster of {0, 1} values marking vein pixels."""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.ndim != 2:
            raise ValueError(f"expected a 2-D raster, got shape {arr.shape}")
        h, w = arr.shape
        if h < MIN_DIM or w < MIN_DIM:
            raise ValueError(f"pattern must be at least {MIN_DIM}x{MIN_DIM}, got {h}x{w}")
        if arr.dtype != np.uint8:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("pattern values must be exactly 0 or 1")
            arr = arr.astype(np.uint8)
        elif arr.max(initial=0) > 1:
            raise ValueError("pattern values must be exactly 0 or 1")
        object.__setattr__(self, "data", _freeze(arr))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def shape(self) -> tuple[int, int]:
        return self.data.shape

    def count(self) -> int:
        """Number of vein pixels."""
        return int(self.data.sum())


@dataclasses.dataclass(frozen=True)
class FeatureVector:
    """Protected template: 64 components in [-10, 10], 4-decimal quantized."""

    components: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.components, dtype=np.float64)
        if arr.shape != (TEMPLATE_LEN,):
            raise ValueError(f"expected {TEMPLATE_LEN} components, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("components must be finite")
        if np.abs(arr).max() > TEMPLATE_MAX:
            raise ValueError(f"components must lie in [-{TEMPLATE_MAX}, {TEMPLATE_MAX}]")
        scaled = arr * TEMPLATE_SCALE
        if np.abs(scaled - np.round(scaled)).max() > 1e-6:
            raise ValueError("components must be quantized to 4 decimals")
        object.__setattr__(self, "components", _freeze(arr))


def quantize_template(raw) -> FeatureVector:
    """Clamp 64 reals to [-10, 10] and round half-away-from-zero to 4 decimals."""
    arr = np.asarray(raw, dtype=np.float64)
    if arr.shape != (TEMPLATE_LEN,):
        raise ValueError(f"expected {TEMPLATE_LEN} values, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValueError("raw template contains non-finite values")
    clamped = np.clip(arr, -TEMPLATE_MAX, TEMPLATE_MAX)
    quantized = np.copysign(
        np.floor(np.abs(clamped) * TEMPLATE_SCALE + 0.5), clamped
    ) / TEMPLATE_SCALE
    return FeatureVector(quantized)


# ---------------------------------------------------------------------------
# File IO: binary PGM (P5) and grayscale PNG, bit-exact rescaling
# ---------------------------------------------------------------------------

def _parse_pgm(data: bytes) -> np.ndarray:
    """Parse a binary P5 PGM into a uint8 or uint16 array."""

    pos = 2  # past "P5"
    fields = []

    def skip_ws(p):
        while p < len(data):
            if data[p : p + 1].isspace():
                p += 1
            elif data[p : p + 1] == b"#":
                while p < len(data) and data[p] not in (0x0A, 0x0D):
                    p += 1
            else:
                break
        return p

    while len(fields) < 3:
        pos = skip_ws(pos)
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise ImageFormatError("truncated PGM header")
        try:
            fields.append(int(data[start:pos]))
        except ValueError as exc:
            raise ImageFormatError("malformed PGM header") from exc
    pos += 1  # single whitespace byte after maxval
    width, height, maxval = fields
    if width <= 0 or height <= 0 or not 0 < maxval < 65536:
        raise ImageFormatError("invalid PGM dimensions or maxval")
    dtype = np.dtype(">u2") if maxval > 255 else np.dtype("u1")
    count = width * height
    raw = data[pos : pos + count * dtype.itemsize]
    if len(raw) != count * dtype.itemsize:
        raise ImageFormatError("PGM pixel data truncated")
    arr = np.frombuffer(raw, dtype=dtype).reshape(height, width)
    return arr.astype(np.uint16 if maxval > 255 else np.uint8)


def _load_png(data: bytes) -> np.ndarray:
    from PIL import Image

    try:
        img = Image.open(io.BytesIO(data))
        img.load()
    except Exception as exc:
        raise ImageFormatError(f"unreadable PNG: {exc}") from exc
    if img.mode == "L":
        return np.asarray(img, dtype=np.uint8)
    if img.mode in ("I;16", "I;16B", "I;16L", "I"):
        arr = np.asarray(img)
        if arr.max(initial=0) > 65535 or arr.min(initial=0) < 0:
            raise ImageFormatError("integer PNG exceeds 16-bit range")
        return arr.astype(np.uint16)
    raise ImageFormatError(f"expected single-channel PNG, got mode {img.mode!r}")


def load_gray(path, expected_dims: tuple[int, int] | None = None) -> GrayImage:
    """Load an 8- or 16-bit single-channel PGM/PNG, rescaled to [0, 1].

    Rescaling uses the container's nominal maximum: 8-bit value v maps to
    v/255, 16-bit to v/65535 (never per-image min/max stretching).
    """
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise ImageFormatError(f"cannot read {path}: {exc}") from exc
    if data[:2] == b"P5":
        arr = _parse_pgm(data)
    elif data[: len(_PNG_MAGIC)] == _PNG_MAGIC:
        arr = _load_png(data)
    else:
        raise ImageFormatError(f"{path}: unsupported format (need P5 PGM or grayscale PNG)")
    if expected_dims is not None and arr.shape != tuple(expected_dims):
        raise ImageFormatError(
            f"{path}: expected dims {tuple(expected_dims)}, got {arr.shape}"
        )
    nominal_max = 255.0 if arr.dtype == np.uint8 else 65535.0
    return GrayImage(arr.astype(np.float64) / nominal_max)


def load_pattern(path) -> BinaryPattern:
    """Load a mask file written by :func:`write_pgm`; pixels must be 0 or max."""
    img = load_gray(path)
    data = img.data
    if not np.isin(data, (0.0, 1.0)).all():
        raise ImageFormatError(f"{path}: mask contains values other than 0 and max")
    return BinaryPattern(data.astype(np.uint8))


def write_pgm(img: GrayImage | BinaryPattern, path) -> None:
    """Write an 8-bit binary PGM (patterns are stored as {0, 255})."""
    if isinstance(img, BinaryPattern):
        arr = img.data.astype(np.uint8) * 255
    else:
        arr = np.floor(img.data * 255.0 + 0.5).astype(np.uint8)
    h, w = arr.shape
    header = f"P5\n{w} {h}\n255\n".encode("ascii")
    Path(path).write_bytes(header + arr.tobytes())


# ---------------------------------------------------------------------------
# ROI normalization
# ---------------------------------------------------------------------------

def bilinear_resample(src: np.ndarray, target: tuple[int, int]) -> np.ndarray:
    """Bilinear resampling with half-pixel-center coordinates, edge-clamped."""
    th, tw = int(target[0]), int(target[1])
    h, w = src.shape
    ys = np.clip((np.arange(th) + 0.5) * (h / th) - 0.5, 0.0, h - 1.0)
    xs = np.clip((np.arange(tw) + 0.5) * (w / tw) - 0.5, 0.0, w - 1.0)
    y0 = np.floor(ys).astype(np.intp)
    x0 = np.floor(xs).astype(np.intp)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[:, None]
    fx = (xs - x0)[None, :]
    top = src[np.ix_(y0, x0)] * (1.0 - fx) + src[np.ix_(y0, x1)] * fx
    bot = src[np.ix_(y1, x0)] * (1.0 - fx) + src[np.ix_(y1, x1)] * fx
    return top * (1.0 - fy) + bot * fy


def normalize_roi(img: GrayImage, target: tuple[int, int]) -> GrayImage:
    """Resample to ``target`` (h, w) with bilinear interpolation.

    Half-pixel-center sample coordinates with edge clamping, so resampling
    to the source dims is the exact identity.
    """
    th, tw = int(target[0]), int(target[1])
    if th < MIN_DIM or tw < MIN_DIM:
        raise ValueError(f"target dims must be at least {MIN_DIM}x{MIN_DIM}")
    if (th, tw) == img.shape:
        return img
    out = bilinear_resample(img.data, (th, tw))
    return GrayImage(np.clip(out, 0.0, 1.0))
