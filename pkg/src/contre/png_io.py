"""PNG decode/encode for the (H, W, C) uint8 images used everywhere here.

Only 8-bit grayscale and 8-bit RGB files are accepted; anything else (palette,
alpha, 16-bit) raises DecodeError rather than being silently converted.
Encoding is lossless, so decode(encode(image)) is the identity.
"""

from __future__ import annotations

import os

import numpy as np
from PIL import Image as PILImage

from .errors import DecodeError
from .image_ops import check_image


def decode_png(path: str | os.PathLike) -> np.ndarray:
    """Read a PNG as (H, W, 1) for grayscale or (H, W, 3) for RGB."""
    try:
        with PILImage.open(path) as im:
            im.load()
            mode = im.mode
            if mode not in ("L", "RGB"):
                raise DecodeError(
                    f"{os.fspath(path)}: unsupported pixel layout {mode!r}; "
                    f"only 8-bit grayscale (L) and RGB are accepted")
            arr = np.asarray(im, dtype=np.uint8)
    except FileNotFoundError:
        raise
    except DecodeError:
        raise
    except Exception as exc:
        raise DecodeError(f"{os.fspath(path)}: not a decodable PNG "
                          f"({exc})") from exc
    if arr.ndim == 2:
        arr = arr[:, :, None]
    return arr


def encode_png(image: np.ndarray, path: str | os.PathLike) -> None:
    """Write an (H, W, 1|3) uint8 array as a grayscale or RGB PNG."""
    check_image(image)
    if image.shape[2] == 1:
        im = PILImage.fromarray(image[:, :, 0], mode="L")
    else:
        im = PILImage.fromarray(image, mode="RGB")
    im.save(os.fspath(path), format="PNG")
