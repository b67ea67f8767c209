"""Image transformation operators sharing a single 0-30 magnitude scale.

Every operator is a pure function on ``uint8`` arrays of shape ``(H, W, C)``
with ``C`` in ``{1, 3}``.  An operator owns a parameter range: ``min_val`` is
the parameter at magnitude 0 and ``max_val`` at magnitude 30, and the
magnitude maps linearly between them.  Operators marked ``signed`` mirror the
magnitude-scaled offset around ``min_val`` with a +/-1 sign, so e.g. the
enhancement factor range 1.0 -> 1.9 covers [0.1, 1.9] once signs are drawn.

The per-pixel arithmetic is pinned down exactly so outputs are reproducible
bit for bit across platforms:

* rounding is always round-half-up: ``floor(x + 0.5)``, then saturate to
  [0, 255];
* geometric operators resample by inverse mapping with bilinear
  interpolation about the image center ``((W-1)/2, (H-1)/2)`` and fill
  out-of-bounds samples with mid-gray 128;
* enhancement operators (Color, Contrast, Brightness, Sharpness) first build
  an 8-bit "degenerate" image, then blend
  ``out = degenerate + factor * (image - degenerate)`` in float64 and round
  once, so ``factor == 1.0`` reproduces the input byte for byte;
* grayscale weighting is the integer luma ``(299 R + 587 G + 114 B + 500)
  // 1000``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidMagnitude, UnknownOperator

MAX_MAGNITUDE = 30.0

# Fill for samples falling outside the source image during resampling.
FILL_VALUE = 128


@dataclass(frozen=True)
class TransformOp:
    """One operator: name plus the parameter range endpoints.

    ``min_val`` is the parameter at magnitude 0, ``max_val`` at magnitude 30.
    ``signed`` operators mirror the scaled offset around ``min_val`` with a
    +/-1 sign drawn by the caller.
    """

    name: str
    min_val: float
    max_val: float
    signed: bool


OP_TABLE: dict[str, TransformOp] = {op.name: op for op in (
    TransformOp("Identity", 0.0, 0.0, False),
    TransformOp("AutoContrast", 0.0, 0.0, False),
    TransformOp("Equalize", 0.0, 0.0, False),
    TransformOp("Invert", 0.0, 0.0, False),
    TransformOp("Rotate", 0.0, 30.0, True),
    TransformOp("Posterize", 8.0, 4.0, False),
    TransformOp("Solarize", 256.0, 0.0, False),
    TransformOp("SolarizeAdd", 0.0, 110.0, False),
    TransformOp("Color", 1.0, 1.9, True),
    TransformOp("Contrast", 1.0, 1.9, True),
    TransformOp("Brightness", 1.0, 1.9, True),
    TransformOp("Sharpness", 1.0, 1.9, True),
    TransformOp("ShearX", 0.0, 0.3, True),
    TransformOp("ShearY", 0.0, 0.3, True),
    TransformOp("TranslateX", 0.0, 0.45, True),
    TransformOp("TranslateY", 0.0, 0.45, True),
)}

OP_NAMES: tuple[str, ...] = tuple(OP_TABLE)


def get_op(name: str) -> TransformOp:
    """Look up an operator by name, raising UnknownOperator otherwise."""
    try:
        return OP_TABLE[name]
    except KeyError:
        raise UnknownOperator(f"unknown operator {name!r}; known: "
                              f"{', '.join(OP_NAMES)}") from None


def check_image(image: np.ndarray) -> None:
    """Validate the (H, W, C) uint8 contract shared by all operators."""
    if not isinstance(image, np.ndarray):
        raise ValueError(f"image must be a numpy array, got {type(image)!r}")
    if image.dtype != np.uint8:
        raise ValueError(f"image dtype must be uint8, got {image.dtype}")
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ValueError(f"image must have shape (H, W, 1) or (H, W, 3), "
                         f"got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"image must be non-empty, got shape {image.shape}")


def _check_magnitude(magnitude: float) -> None:
    if not (0.0 <= magnitude <= MAX_MAGNITUDE):
        raise InvalidMagnitude(
            f"magnitude must lie in [0, {MAX_MAGNITUDE:g}], got {magnitude!r}")


def magnitude_to_param(op: TransformOp, magnitude: float, sign: int) -> float:
    """Map a magnitude in [0, 30] onto the operator's parameter range.

    The scaled offset is ``(max_val - min_val) * magnitude / 30``; for signed
    operators the offset is multiplied by ``sign`` (+1 or -1), mirroring the
    parameter around ``min_val``.  ``sign`` is ignored for unsigned operators.
    """
    _check_magnitude(magnitude)
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")
    offset = (op.max_val - op.min_val) * (magnitude / MAX_MAGNITUDE)
    if op.signed:
        offset *= sign
    return op.min_val + offset


def apply_op(op: TransformOp | str, magnitude: float, sign: int,
             image: np.ndarray) -> np.ndarray:
    """Apply one operator at the given magnitude and sign.

    Returns a new array of the same shape and dtype; the input is never
    modified.  ``op`` may be an operator name or a TransformOp (whose range
    is honored, allowing rescaled variants of a known kernel).
    """
    if isinstance(op, str):
        op = get_op(op)
    if op.name not in _KERNELS:
        raise UnknownOperator(f"unknown operator {op.name!r}")
    check_image(image)
    param = magnitude_to_param(op, magnitude, sign)
    return _KERNELS[op.name](image, param)


# --- shared helpers ---------------------------------------------------------

def _to_u8(x: np.ndarray) -> np.ndarray:
    """Round half-up and saturate to the uint8 range."""
    return np.clip(np.floor(x + 0.5), 0.0, 255.0).astype(np.uint8)


def _luma(image: np.ndarray) -> np.ndarray:
    """Integer luma of an RGB image: (299 R + 587 G + 114 B + 500) // 1000."""
    r = image[:, :, 0].astype(np.int64)
    g = image[:, :, 1].astype(np.int64)
    b = image[:, :, 2].astype(np.int64)
    return ((299 * r + 587 * g + 114 * b + 500) // 1000).astype(np.uint8)


def _blend(image: np.ndarray, degenerate: np.ndarray,
           factor: float) -> np.ndarray:
    """out = degenerate + factor * (image - degenerate), rounded half-up.

    ``degenerate`` is an 8-bit image; the arithmetic runs in float64 and is
    rounded exactly once, so factor 1.0 returns the input byte for byte and
    factor 0.0 returns the degenerate.
    """
    base = degenerate.astype(np.float64)
    out = base + factor * (image.astype(np.float64) - base)
    return _to_u8(out)


def _affine_sample(image: np.ndarray, inv: np.ndarray) -> np.ndarray:
    """Resample with an inverse map: output (x, y) reads source (u, v).

    ``inv`` is a 2x3 matrix: ``u = inv[0] . (x, y, 1)``, ``v = inv[1] .
    (x, y, 1)``.  Bilinear interpolation; samples outside the source use
    FILL_VALUE.  An identity map reproduces the input byte for byte.
    """
    h, w, _ = image.shape
    gx, gy = np.meshgrid(np.arange(w, dtype=np.float64),
                         np.arange(h, dtype=np.float64))
    u = inv[0, 0] * gx + inv[0, 1] * gy + inv[0, 2]
    v = inv[1, 0] * gx + inv[1, 1] * gy + inv[1, 2]
    x0 = np.floor(u)
    y0 = np.floor(v)
    fx = u - x0
    fy = v - y0
    x0 = x0.astype(np.int64)
    y0 = y0.astype(np.int64)

    acc = np.zeros(image.shape, dtype=np.float64)
    corners = ((x0, y0, (1.0 - fx) * (1.0 - fy)),
               (x0 + 1, y0, fx * (1.0 - fy)),
               (x0, y0 + 1, (1.0 - fx) * fy),
               (x0 + 1, y0 + 1, fx * fy))
    for xi, yi, weight in corners:
        inside = (xi >= 0) & (xi < w) & (yi >= 0) & (yi < h)
        xc = np.clip(xi, 0, w - 1)
        yc = np.clip(yi, 0, h - 1)
        values = image[yc, xc, :].astype(np.float64)
        values[~inside] = float(FILL_VALUE)
        acc += weight[:, :, None] * values
    return _to_u8(acc)


def _center(image: np.ndarray) -> tuple[float, float]:
    h, w, _ = image.shape
    return (w - 1) / 2.0, (h - 1) / 2.0


# --- kernels ----------------------------------------------------------------

def _identity(image: np.ndarray, _param: float) -> np.ndarray:
    return image.copy()


def _autocontrast(image: np.ndarray, _param: float) -> np.ndarray:
    """Per channel, stretch [min, max] onto [0, 255]; constant channels pass
    through unchanged.  lut[v] = round_half_up((v - lo) * 255 / (hi - lo))."""
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        ch = image[:, :, c]
        lo = int(ch.min())
        hi = int(ch.max())
        if hi <= lo:
            out[:, :, c] = ch
            continue
        scale = 255.0 / (hi - lo)
        lut = _to_u8((np.arange(256, dtype=np.float64) - lo) * scale)
        out[:, :, c] = lut[ch]
    return out


def _equalize(image: np.ndarray, _param: float) -> np.ndarray:
    """Per-channel histogram equalization.

    With hist the 256-bin channel histogram and step = (pixel count - count
    of the brightest occupied bin) // 255:
    lut[i] = min(255, (step // 2 + sum(hist[:i])) // step); channels with a
    single occupied bin or step 0 pass through unchanged.
    """
    out = np.empty_like(image)
    for c in range(image.shape[2]):
        ch = image[:, :, c]
        hist = np.bincount(ch.ravel(), minlength=256).astype(np.int64)
        occupied = hist[hist > 0]
        if occupied.size <= 1:
            out[:, :, c] = ch
            continue
        step = (int(hist.sum()) - int(occupied[-1])) // 255
        if step == 0:
            out[:, :, c] = ch
            continue
        below = np.concatenate(([0], np.cumsum(hist)[:-1]))
        lut = np.minimum((step // 2 + below) // step, 255).astype(np.uint8)
        out[:, :, c] = lut[ch]
    return out


def _invert(image: np.ndarray, _param: float) -> np.ndarray:
    return (255 - image.astype(np.int64)).astype(np.uint8)


def _rotate(image: np.ndarray, degrees: float) -> np.ndarray:
    """Rotate content about the image center.

    Inverse map: source = center + R (output - center) with
    R = [[cos t, sin t], [-sin t, cos t]], t in radians; positive angles
    move content clockwise in pixel coordinates (y growing downward).
    """
    t = math.radians(degrees)
    cos_t = math.cos(t)
    sin_t = math.sin(t)
    cx, cy = _center(image)
    inv = np.array([
        [cos_t, sin_t, cx - cos_t * cx - sin_t * cy],
        [-sin_t, cos_t, cy + sin_t * cx - cos_t * cy],
    ], dtype=np.float64)
    return _affine_sample(image, inv)


def _posterize(image: np.ndarray, bits: float) -> np.ndarray:
    """Keep the top ``int(bits)`` bits of each byte (clamped to [1, 8])."""
    kept = min(max(int(bits), 1), 8)
    mask = np.uint8((0xFF << (8 - kept)) & 0xFF)
    return image & mask


def _solarize(image: np.ndarray, threshold: float) -> np.ndarray:
    """Invert every pixel at or above the threshold; 256 is a no-op."""
    inverted = (255 - image.astype(np.int64)).astype(np.uint8)
    return np.where(image.astype(np.float64) >= threshold, inverted, image)


def _solarize_add(image: np.ndarray, addition: float) -> np.ndarray:
    """Add ``int(addition)`` to every pixel below 128, saturating at 255."""
    add = int(addition)
    shifted = np.clip(image.astype(np.int64) + add, 0, 255).astype(np.uint8)
    return np.where(image < 128, shifted, image)


def _color(image: np.ndarray, factor: float) -> np.ndarray:
    """Blend toward the luma grayscale image; single-channel images pass
    through unchanged (they are their own grayscale)."""
    if image.shape[2] == 1:
        return image.copy()
    gray = _luma(image)
    degenerate = np.repeat(gray[:, :, None], 3, axis=2)
    return _blend(image, degenerate, factor)


def _contrast(image: np.ndarray, factor: float) -> np.ndarray:
    """Blend toward a uniform image at the mean luma (round-half-up)."""
    gray = _luma(image) if image.shape[2] == 3 else image[:, :, 0]
    mean = int(math.floor(float(gray.mean()) + 0.5))
    degenerate = np.full_like(image, np.uint8(mean))
    return _blend(image, degenerate, factor)


def _brightness(image: np.ndarray, factor: float) -> np.ndarray:
    """Blend toward black."""
    return _blend(image, np.zeros_like(image), factor)


def _sharpness(image: np.ndarray, factor: float) -> np.ndarray:
    """Blend toward a smoothed copy.

    The degenerate convolves each channel's interior with the 3x3 kernel
    [[1, 1, 1], [1, 5, 1], [1, 1, 1]] / 13 (rounded half-up to 8 bits);
    border pixels keep their original values.  Images smaller than 3x3 in
    either dimension have no interior, so the degenerate is the input.
    """
    h, w, c = image.shape
    degenerate = image.copy()
    if h >= 3 and w >= 3:
        src = image.astype(np.float64)
        acc = np.zeros((h - 2, w - 2, c), dtype=np.float64)
        kernel = ((1, 1, 1), (1, 5, 1), (1, 1, 1))
        for dy in range(3):
            for dx in range(3):
                acc += kernel[dy][dx] * src[dy:dy + h - 2, dx:dx + w - 2, :]
        degenerate[1:-1, 1:-1, :] = _to_u8(acc / 13.0)
    return _blend(image, degenerate, factor)


def _shear_x(image: np.ndarray, shear: float) -> np.ndarray:
    """Inverse map u = x + shear * (y - cy), v = y."""
    _cx, cy = _center(image)
    inv = np.array([[1.0, shear, -shear * cy],
                    [0.0, 1.0, 0.0]], dtype=np.float64)
    return _affine_sample(image, inv)


def _shear_y(image: np.ndarray, shear: float) -> np.ndarray:
    """Inverse map u = x, v = y + shear * (x - cx)."""
    cx, _cy = _center(image)
    inv = np.array([[1.0, 0.0, 0.0],
                    [shear, 1.0, -shear * cx]], dtype=np.float64)
    return _affine_sample(image, inv)


def _translate_x(image: np.ndarray, fraction: float) -> np.ndarray:
    """Shift content by fraction * width pixels along +x (inverse map
    u = x - fraction * W, v = y)."""
    shift = fraction * image.shape[1]
    inv = np.array([[1.0, 0.0, -shift],
                    [0.0, 1.0, 0.0]], dtype=np.float64)
    return _affine_sample(image, inv)


def _translate_y(image: np.ndarray, fraction: float) -> np.ndarray:
    """Shift content by fraction * height pixels along +y."""
    shift = fraction * image.shape[0]
    inv = np.array([[1.0, 0.0, 0.0],
                    [0.0, 1.0, -shift]], dtype=np.float64)
    return _affine_sample(image, inv)


_KERNELS = {
    "Identity": _identity,
    "AutoContrast": _autocontrast,
    "Equalize": _equalize,
    "Invert": _invert,
    "Rotate": _rotate,
    "Posterize": _posterize,
    "Solarize": _solarize,
    "SolarizeAdd": _solarize_add,
    "Color": _color,
    "Contrast": _contrast,
    "Brightness": _brightness,
    "Sharpness": _sharpness,
    "ShearX": _shear_x,
    "ShearY": _shear_y,
    "TranslateX": _translate_x,
    "TranslateY": _translate_y,
}
