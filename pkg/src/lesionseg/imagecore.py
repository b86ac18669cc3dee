"""Raster primitives: image I/O, color conversions, and the field-of-view mask.

Images are plain numpy arrays throughout the package:

* RGB image  -- ``(h, w, 3)`` uint8
* gray image -- ``(h, w)`` uint8
* binary mask -- ``(h, w)`` bool (True = foreground / lesion)
* label map  -- ``(h, w)`` int32, non-negative region ids; -1 marks pixels
  excluded from all regions (outside the field-of-view mask)
"""

from __future__ import annotations

import io
from pathlib import Path

import numpy as np
from PIL import Image

__all__ = [
    "ImageDecodeError",
    "load_image",
    "decode_image_bytes",
    "save_mask_png",
    "encode_mask_png",
    "save_image_png",
    "load_mask",
    "to_gray",
    "rgb_to_lab",
    "lab_to_rgb",
    "ellipse_mask",
]

# sRGB <-> XYZ (D65) matrices, IEC 61966-2-1
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_XYZ_TO_RGB = np.linalg.inv(_RGB_TO_XYZ)
_D65_WHITE = np.array([0.95047, 1.0, 1.08883])


class ImageDecodeError(ValueError):
    """Raised when an image file cannot be decoded into 8-bit RGB."""


def _check_rgb(img: np.ndarray) -> np.ndarray:
    img = np.asarray(img)
    if img.ndim != 3 or img.shape[2] != 3 or img.dtype != np.uint8:
        raise ValueError(f"expected (h, w, 3) uint8 image, got {img.shape} {img.dtype}")
    return img


def _check_mask(mask: np.ndarray) -> np.ndarray:
    mask = np.asarray(mask)
    if mask.ndim != 2 or mask.dtype != bool:
        raise ValueError(f"expected (h, w) bool mask, got {mask.shape} {mask.dtype}")
    return mask


def _decode_pil(source, origin: str) -> np.ndarray:
    try:
        img = Image.open(source)
        img.load()
    except FileNotFoundError:
        raise
    except OSError as exc:
        raise ImageDecodeError(f"{origin}: cannot decode image: {exc}") from exc
    if img.mode in ("I", "I;16", "I;16B", "I;16L", "I;16N"):
        raise ImageDecodeError(f"{origin}: unsupported bit depth (16-bit), expected 8-bit")
    if img.mode == "F":
        raise ImageDecodeError(f"{origin}: unsupported color type (float samples)")
    if img.mode not in ("1", "L", "LA", "P", "RGB", "RGBA"):
        raise ImageDecodeError(f"{origin}: unsupported color type {img.mode!r}")
    return np.asarray(img.convert("RGB"), dtype=np.uint8)


def load_image(path: str | Path) -> np.ndarray:
    """Load an 8-bit PNG/BMP/JPEG as an (h, w, 3) uint8 RGB array.

    Grayscale images are replicated across channels, alpha channels are
    dropped. Higher bit depths and exotic color types are rejected with
    :class:`ImageDecodeError` naming the offending property.
    """
    path = Path(path)
    return _decode_pil(path, str(path))


def decode_image_bytes(data: bytes, origin: str = "upload") -> np.ndarray:
    """Decode in-memory PNG/BMP/JPEG bytes with the same rules as load_image."""
    return _decode_pil(io.BytesIO(data), origin)


def load_mask(path: str | Path) -> np.ndarray:
    """Load a ground-truth mask image; any nonzero pixel counts as foreground."""
    rgb = load_image(path)
    return rgb.max(axis=2) > 0


def save_mask_png(mask: np.ndarray, path: str | Path) -> None:
    """Write a binary mask as an 8-bit grayscale PNG (foreground=255)."""
    mask = _check_mask(mask)
    out = np.where(mask, 255, 0).astype(np.uint8)
    Image.fromarray(out, mode="L").save(Path(path), format="PNG")


def encode_mask_png(mask: np.ndarray) -> bytes:
    """Binary mask to in-memory 8-bit grayscale PNG bytes (foreground=255)."""
    mask = _check_mask(mask)
    out = np.where(mask, 255, 0).astype(np.uint8)
    buf = io.BytesIO()
    Image.fromarray(out, mode="L").save(buf, format="PNG")
    return buf.getvalue()


def save_image_png(img: np.ndarray, path: str | Path) -> None:
    """Write an RGB image as an 8-bit PNG."""
    img = _check_rgb(img)
    Image.fromarray(img, mode="RGB").save(Path(path), format="PNG")


def to_gray(img: np.ndarray) -> np.ndarray:
    """BT.601 luma: round(0.299 R + 0.587 G + 0.114 B), uint8."""
    img = _check_rgb(img)
    luma = (
        0.299 * img[..., 0].astype(np.float64)
        + 0.587 * img[..., 1]
        + 0.114 * img[..., 2]
    )
    return np.clip(np.floor(luma + 0.5), 0, 255).astype(np.uint8)


def _srgb_to_linear(c: np.ndarray) -> np.ndarray:
    return np.where(c <= 0.04045, c / 12.92, ((c + 0.055) / 1.055) ** 2.4)


def _linear_to_srgb(c: np.ndarray) -> np.ndarray:
    c = np.clip(c, 0.0, 1.0)
    return np.where(c <= 0.0031308, c * 12.92, 1.055 * c ** (1 / 2.4) - 0.055)


def rgb_to_lab(img: np.ndarray) -> np.ndarray:
    """Convert an (h, w, 3) uint8 sRGB image to CIELAB (D65), float64.

    L* is in [0, 100]; a* and b* are unbounded.
    """
    img = _check_rgb(img)
    linear = _srgb_to_linear(img.astype(np.float64) / 255.0)
    xyz = linear @ _RGB_TO_XYZ.T
    t = xyz / _D65_WHITE
    delta = 6.0 / 29.0
    f = np.where(t > delta**3, np.cbrt(t), t / (3 * delta**2) + 4.0 / 29.0)
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def lab_to_rgb(lab: np.ndarray) -> np.ndarray:
    """Inverse of :func:`rgb_to_lab`, back to uint8 sRGB."""
    lab = np.asarray(lab, dtype=np.float64)
    fy = (lab[..., 0] + 16.0) / 116.0
    fx = fy + lab[..., 1] / 500.0
    fz = fy - lab[..., 2] / 200.0
    f = np.stack([fx, fy, fz], axis=-1)
    delta = 6.0 / 29.0
    t = np.where(f > delta, f**3, 3 * delta**2 * (f - 4.0 / 29.0))
    linear = (t * _D65_WHITE) @ _XYZ_TO_RGB.T
    srgb = _linear_to_srgb(linear)
    return np.clip(np.floor(srgb * 255.0 + 0.5), 0, 255).astype(np.uint8)


def ellipse_mask(width: int, height: int) -> np.ndarray:
    """Maximum axis-aligned ellipse inscribed in a width x height image.

    A pixel belongs to the mask iff its center (x+0.5, y+0.5) lies inside the
    ellipse with semi-axes width/2 and height/2 centered on the image. Using
    pixel centers keeps the mask symmetric for even dimensions.
    """
    if width < 1 or height < 1:
        raise ValueError("width and height must be >= 1")
    x = (np.arange(width) + 0.5 - width / 2.0) / (width / 2.0)
    y = (np.arange(height) + 0.5 - height / 2.0) / (height / 2.0)
    return (x[None, :] ** 2 + y[:, None] ** 2) <= 1.0
