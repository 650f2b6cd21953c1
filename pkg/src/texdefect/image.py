"""Image containers, file I/O, grayscale conversion, and training augmentation.

An image is a numpy float64 array of shape (H, W, C) with C in {1, 3} and
every value in [0, 1].  All public functions in the package accept and
return this layout (row-major, channel-interleaved).  Files are read and
written as 8-bit PNG or binary PPM/PGM (maxval 255).

Dataset folders follow the layout

    <category>/train/good      normal images used for training
    <category>/test/good       normal test images
    <category>/test/defect     defective test images (optional *_mask.png
                               ground truth alongside)
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np
from PIL import Image as PILImage
from PIL import UnidentifiedImageError
from scipy.ndimage import affine_transform

__all__ = [
    "ImageError",
    "UnsupportedImageError",
    "CorruptImageError",
    "AugmentSpec",
    "Dataset",
    "as_image",
    "check_image",
    "load_image",
    "save_image",
    "quantize8",
    "to_grayscale",
    "augment",
    "list_image_files",
    "load_folder",
    "load_dataset",
]

_SUPPORTED_SUFFIXES = {".png", ".ppm", ".pgm"}

# Rec.601 luma weights.
_LUMA = np.array([0.299, 0.587, 0.114])


class ImageError(Exception):
    """Base class for image I/O failures."""


class UnsupportedImageError(ImageError):
    """File extension or pixel layout is outside the supported set."""


class CorruptImageError(ImageError):
    """File has a supported extension but its contents cannot be decoded."""


def check_image(image: np.ndarray) -> None:
    """Raise ValueError unless `image` is a valid (H, W, C) image array."""
    if not isinstance(image, np.ndarray):
        raise ValueError(f"image must be a numpy array, got {type(image).__name__}")
    if image.ndim != 3 or image.shape[2] not in (1, 3):
        raise ValueError(f"image must have shape (H, W, 1) or (H, W, 3), got {image.shape}")
    if image.shape[0] < 1 or image.shape[1] < 1:
        raise ValueError(f"image must be at least 1x1, got {image.shape}")
    if not np.issubdtype(image.dtype, np.floating):
        raise ValueError(f"image dtype must be floating, got {image.dtype}")
    if not np.all(np.isfinite(image)):
        raise ValueError("image contains non-finite values")
    if image.min() < 0.0 or image.max() > 1.0:
        raise ValueError("image values must lie in [0, 1]")


def as_image(data) -> np.ndarray:
    """Coerce array-like data to a validated float64 (H, W, C) image.

    2-D input is treated as a single-channel image.
    """
    arr = np.asarray(data, dtype=np.float64)
    if arr.ndim == 2:
        arr = arr[:, :, np.newaxis]
    check_image(arr)
    return arr


def load_image(path) -> np.ndarray:
    """Load an 8-bit PNG or binary PPM/PGM file as a [0, 1] image.

    Raises FileNotFoundError for a missing file, UnsupportedImageError for
    formats outside PNG/PPM/PGM (or 16-bit / alpha / palette layouts), and
    CorruptImageError when the file cannot be decoded.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such image file: {path}")
    if path.suffix.lower() not in _SUPPORTED_SUFFIXES:
        raise UnsupportedImageError(f"unsupported image format: {path.suffix!r} ({path})")
    try:
        with PILImage.open(path) as pil:
            mode = pil.mode
            if mode not in ("L", "RGB"):
                raise UnsupportedImageError(
                    f"unsupported pixel layout {mode!r} in {path} (need 8-bit gray or RGB)"
                )
            raw = np.asarray(pil, dtype=np.uint8)
    except UnidentifiedImageError as exc:
        raise CorruptImageError(f"cannot decode {path}: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise CorruptImageError(f"cannot decode {path}: {exc}") from exc
    data = raw.astype(np.float64) / 255.0
    if data.ndim == 2:
        data = data[:, :, np.newaxis]
    return data


def quantize8(image: np.ndarray) -> np.ndarray:
    """Quantize [0, 1] values to uint8 by round-half-up of value*255."""
    return np.floor(np.clip(image, 0.0, 1.0) * 255.0 + 0.5).astype(np.uint8)


def save_image(image: np.ndarray, path) -> None:
    """Write an image as 8-bit PNG or binary PPM/PGM, chosen by extension.

    PGM requires a single channel and PPM three; PNG accepts both.
    """
    check_image(image)
    path = Path(path)
    suffix = path.suffix.lower()
    if suffix not in _SUPPORTED_SUFFIXES:
        raise UnsupportedImageError(f"unsupported image format: {path.suffix!r} ({path})")
    channels = image.shape[2]
    if suffix == ".pgm" and channels != 1:
        raise UnsupportedImageError(f"PGM requires a single channel, got {channels}")
    if suffix == ".ppm" and channels != 3:
        raise UnsupportedImageError(f"PPM requires three channels, got {channels}")
    raw = quantize8(image)
    if channels == 1:
        pil = PILImage.fromarray(raw[:, :, 0], mode="L")
    else:
        pil = PILImage.fromarray(raw, mode="RGB")
    pil.save(path)


def to_grayscale(image: np.ndarray) -> np.ndarray:
    """Project an RGB image to one channel with Rec.601 luma weights.

    Single-channel input is returned unchanged (as a copy).
    """
    check_image(image)
    if image.shape[2] == 1:
        return image.copy()
    gray = image @ _LUMA
    return gray[:, :, np.newaxis]


@dataclasses.dataclass(frozen=True)
class AugmentSpec:
    """Random shear/zoom/flip augmentation parameters.

    Per call the draw order is fixed: shear factor uniform in
    [-shear_range, +shear_range], zoom factor uniform in
    [1 - zoom_range, 1 + zoom_range], then one boolean draw per enabled
    flip (probability 0.5 each).
    """

    shear_range: float = 0.2
    zoom_range: float = 0.2
    horizontal_flip: bool = True
    vertical_flip: bool = True
    seed: int = 0

    def __post_init__(self):
        if not (0.0 <= self.shear_range < 1.0):
            raise ValueError(f"shear_range must be in [0, 1), got {self.shear_range}")
        if not (0.0 <= self.zoom_range < 1.0):
            raise ValueError(f"zoom_range must be in [0, 1), got {self.zoom_range}")

    @property
    def is_identity(self) -> bool:
        return (
            self.shear_range == 0.0
            and self.zoom_range == 0.0
            and not self.horizontal_flip
            and not self.vertical_flip
        )


def _warp_shear_zoom(image: np.ndarray, shear: float, zoom: float) -> np.ndarray:
    """Shear along x then zoom, both about the image center.

    Bilinear resampling; out-of-bounds samples replicate the nearest edge
    pixel. Output size equals input size.
    """
    h, w, c = image.shape
    center = np.array([(h - 1) / 2.0, (w - 1) / 2.0])
    # Forward map on centered (row, col) coords: shear x' = x + s*y, then
    # scale by zoom.  affine_transform needs the inverse map.
    inv = np.array([[1.0, 0.0], [-shear, 1.0]]) / zoom
    offset = center - inv @ center
    out = np.empty_like(image)
    for ch in range(c):
        out[:, :, ch] = affine_transform(
            image[:, :, ch], inv, offset=offset, order=1, mode="nearest"
        )
    return np.clip(out, 0.0, 1.0)


def augment(image: np.ndarray, spec: AugmentSpec, rng: np.random.Generator) -> np.ndarray:
    """Apply one random shear/zoom/flip draw from `spec` to `image`.

    With an all-identity spec (zero ranges, both flips disabled) the output
    equals the input exactly.  The same rng state always yields the same
    output.
    """
    check_image(image)
    shear = rng.uniform(-spec.shear_range, spec.shear_range)
    zoom = rng.uniform(1.0 - spec.zoom_range, 1.0 + spec.zoom_range)
    flip_h = bool(spec.horizontal_flip and rng.random() < 0.5)
    flip_v = bool(spec.vertical_flip and rng.random() < 0.5)
    out = image
    if shear != 0.0 or zoom != 1.0:
        out = _warp_shear_zoom(out, shear, zoom)
    if flip_h:
        out = out[:, ::-1]
    if flip_v:
        out = out[::-1, :]
    return np.ascontiguousarray(out) if out is not image else image.copy()


def list_image_files(folder) -> list[Path]:
    """Sorted image files directly inside `folder`, skipping *_mask files."""
    folder = Path(folder)
    if not folder.is_dir():
        raise FileNotFoundError(f"no such folder: {folder}")
    files = [
        p
        for p in sorted(folder.iterdir())
        if p.is_file()
        and p.suffix.lower() in _SUPPORTED_SUFFIXES
        and not p.stem.endswith("_mask")
    ]
    return files


def load_folder(folder) -> list[tuple[str, np.ndarray]]:
    """Load every image in a flat folder as (id, image), sorted by name.

    The id is the filename without extension.
    """
    return [(p.stem, load_image(p)) for p in list_image_files(folder)]


@dataclasses.dataclass
class Dataset:
    """A category folder split into train/test normals and test defects.

    Each entry is an (id, image) pair where the id is the path relative to
    the category root, without extension (e.g. "test/defect/003").
    """

    root: Path
    category: str
    train: list[tuple[str, np.ndarray]]
    test_normal: list[tuple[str, np.ndarray]]
    test_defect: list[tuple[str, np.ndarray]]


def _load_split(root: Path, rel: str) -> list[tuple[str, np.ndarray]]:
    folder = root / rel
    if not folder.is_dir():
        return []
    return [(f"{rel}/{p.stem}", load_image(p)) for p in list_image_files(folder)]


def load_dataset(root) -> Dataset:
    """Load a category folder laid out as train/good, test/good, test/defect."""
    root = Path(root)
    if not root.is_dir():
        raise FileNotFoundError(f"no such dataset folder: {root}")
    return Dataset(
        root=root,
        category=root.name,
        train=_load_split(root, "train/good"),
        test_normal=_load_split(root, "test/good"),
        test_defect=_load_split(root, "test/defect"),
    )
