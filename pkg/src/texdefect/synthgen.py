"""Deterministic synthetic texture corpora with injectable defects.

Generates periodic textures (stripes, checker, sinusoid-grid) plus uniform
noise, injects blob or scratch defects confined to the interior beyond the
10-pixel border frame, and writes the standard category layout
train/good, test/good, test/defect (ground-truth masks alongside the
defect images).  Everything derives from explicit seeds, so re-generation
is byte-identical.
"""

from __future__ import annotations

import dataclasses
from pathlib import Path

import numpy as np

from .image import save_image

__all__ = [
    "TextureSpec",
    "DefectSpec",
    "gen_texture",
    "inject_defect",
    "gen_corpus",
    "TEXTURE_BASES",
    "DEFECT_KINDS",
]

TEXTURE_BASES = ("stripes", "checker", "sinusoid-grid")
DEFECT_KINDS = ("blob", "scratch")

# Width of the frame the detector excludes from scoring; defects never
# touch it.
_EXCLUDED_BORDER = 10


@dataclasses.dataclass(frozen=True)
class TextureSpec:
    size: int = 64
    base: str = "sinusoid-grid"
    period: int = 8
    noise_amplitude: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.base not in TEXTURE_BASES:
            raise ValueError(f"base must be one of {TEXTURE_BASES}, got {self.base!r}")
        if self.period < 2:
            raise ValueError(f"period must be >= 2, got {self.period}")
        if self.size % 4:
            raise ValueError(f"size must be divisible by 4, got {self.size}")
        if not (0.0 <= self.noise_amplitude < 0.5):
            raise ValueError(f"noise_amplitude must be in [0, 0.5), got {self.noise_amplitude}")


@dataclasses.dataclass(frozen=True)
class DefectSpec:
    kind: str = "blob"
    extent: int = 10
    contrast: float = 0.4
    count: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.kind not in DEFECT_KINDS:
            raise ValueError(f"kind must be one of {DEFECT_KINDS}, got {self.kind!r}")
        if self.extent < 1:
            raise ValueError(f"extent must be >= 1, got {self.extent}")
        if not (0.0 <= self.contrast <= 1.0):
            raise ValueError(f"contrast must be in [0, 1], got {self.contrast}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


def gen_texture(spec: TextureSpec) -> np.ndarray:
    """Render the base pattern plus uniform noise, clamped to [0, 1]."""
    n, p = spec.size, spec.period
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    if spec.base == "stripes":
        base = np.where((yy % p) < p // 2, 0.75, 0.25).astype(np.float64)
    elif spec.base == "checker":
        cell = p // 2
        base = np.where(((yy // cell) + (xx // cell)) % 2 == 0, 0.75, 0.25).astype(np.float64)
    else:  # sinusoid-grid
        base = 0.5 + 0.2 * (np.sin(2 * np.pi * yy / p) + np.sin(2 * np.pi * xx / p))
    if spec.noise_amplitude > 0:
        rng = np.random.default_rng(spec.seed)
        base = base + rng.uniform(-spec.noise_amplitude, spec.noise_amplitude, size=(n, n))
    return np.clip(base, 0.0, 1.0)[:, :, np.newaxis]


def _blob_mask(n: int, cy: int, cx: int, diameter: int) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    r = diameter / 2.0
    return (yy - cy) ** 2 + (xx - cx) ** 2 <= r * r


def _scratch_mask(n: int, cy: int, cx: int, length: int, angle: float) -> np.ndarray:
    yy, xx = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    dy, dx = np.sin(angle), np.cos(angle)
    # signed distance along / across the segment direction
    t = (yy - cy) * dy + (xx - cx) * dx
    d = np.abs((yy - cy) * dx - (xx - cx) * dy)
    return (np.abs(t) <= length / 2.0) & (d <= 0.75)


def inject_defect(image: np.ndarray, spec: DefectSpec) -> tuple[np.ndarray, np.ndarray]:
    """Blend `count` defect shapes into a copy of `image`.

    Each shape is a flat patch pulled toward whichever of {0, 1} contrasts
    most with the texture underneath, mixed in at `spec.contrast`.  Returns
    (defective image, boolean ground-truth mask).  Shapes always stay
    strictly inside the interior window beyond the 10-pixel frame.
    """
    n = image.shape[0]
    margin = _EXCLUDED_BORDER + 1
    half = int(np.ceil(spec.extent / 2.0))
    lo, hi = margin + half, n - 1 - margin - half
    if lo > hi:
        raise ValueError(
            f"defect extent {spec.extent} too large for the interior of a {n}x{n} image"
        )
    rng = np.random.default_rng(spec.seed)
    mask = np.zeros((n, n), dtype=bool)
    out = image.copy()
    field = out[:, :, 0]
    for _ in range(spec.count):
        cy = int(rng.integers(lo, hi + 1))
        cx = int(rng.integers(lo, hi + 1))
        if spec.kind == "blob":
            shape = _blob_mask(n, cy, cx, spec.extent)
        else:
            angle = float(rng.uniform(0.0, np.pi))
            shape = _scratch_mask(n, cy, cx, spec.extent, angle)
        target = 1.0 if float(field[shape].mean()) < 0.5 else 0.0
        field[shape] = (1.0 - spec.contrast) * field[shape] + spec.contrast * target
        mask |= shape
    return out, mask


def _derive_seed(master: int, split_code: int, index: int) -> int:
    ss = np.random.SeedSequence((int(master), int(split_code), int(index)))
    return int(ss.generate_state(1)[0])


def gen_corpus(
    out_dir,
    texture: TextureSpec,
    defect: DefectSpec,
    n_train: int,
    n_test_normal: int,
    n_test_defect: int,
) -> Path:
    """Write a full category folder of synthetic images; returns its path.

    Per-image texture seeds derive from texture.seed and per-image defect
    seeds from defect.seed, so the corpus is reproducible byte-for-byte.
    Ground-truth masks are written next to each defect image as
    <name>_mask.png.
    """
    if min(n_train, n_test_normal, n_test_defect) < 1:
        raise ValueError("all corpus counts must be >= 1")
    out_dir = Path(out_dir)
    splits = {
        "train/good": n_train,
        "test/good": n_test_normal,
        "test/defect": n_test_defect,
    }
    for rel, count in splits.items():
        folder = out_dir / rel
        folder.mkdir(parents=True, exist_ok=True)
        for i in range(count):
            split_code = list(splits).index(rel)
            tex = dataclasses.replace(
                texture, seed=_derive_seed(texture.seed, split_code, i)
            )
            img = gen_texture(tex)
            if rel == "test/defect":
                dfc = dataclasses.replace(defect, seed=_derive_seed(defect.seed, split_code, i))
                img, mask = inject_defect(img, dfc)
                save_image(
                    mask.astype(np.float64)[:, :, np.newaxis], folder / f"{i:03d}_mask.png"
                )
            save_image(img, folder / f"{i:03d}.png")
    return out_dir
