"""Defect scoring: template differencing, thresholding, and pixel counting.

The pipeline per test image: reconstruct with the autoencoder, convert to
grayscale, high-pass filter at tau, take the absolute difference against a
selected normal reconstructed template's filtered field (scaled to
threshold units, 10-pixel border excluded), binarize at th by strict
comparison, and count the surviving pixels.  Corpus scores are min-max
normalized afterwards.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import autoencoder as ae
from .fourier import highpass_filter
from .image import to_grayscale

__all__ = [
    "DetectionParams",
    "NormalTemplate",
    "ScoreRecord",
    "build_templates",
    "select_template",
    "difference_map",
    "binarize",
    "defect_score",
    "normalize_scores",
    "detect",
    "score_images",
]

DEFAULT_BORDER = 10
DEFAULT_SCALE = 255.0


@dataclasses.dataclass(frozen=True)
class DetectionParams:
    """Tunable surface of the detector: mask side, threshold, border, scale."""

    tau: int = 4
    th: float = 10.0
    border: int = DEFAULT_BORDER
    scale: float = DEFAULT_SCALE

    def __post_init__(self):
        if self.tau < 0:
            raise ValueError(f"tau must be >= 0, got {self.tau}")
        if self.th < 0:
            raise ValueError(f"th must be >= 0, got {self.th}")
        if self.border < 0:
            raise ValueError(f"border must be >= 0, got {self.border}")
        if self.scale <= 0:
            raise ValueError(f"scale must be > 0, got {self.scale}")


@dataclasses.dataclass
class NormalTemplate:
    """A normal image's grayscale reconstruction plus cached filtered fields.

    `filtered(tau)` lazily computes and caches the high-pass magnitude field
    for each tau requested.
    """

    source_id: str
    source_image: np.ndarray
    reconstruction: np.ndarray
    _filtered: dict[int, np.ndarray] = dataclasses.field(default_factory=dict, repr=False)

    def filtered(self, tau: int) -> np.ndarray:
        cached = self._filtered.get(tau)
        if cached is None:
            cached = highpass_filter(self.reconstruction, tau)
            self._filtered[tau] = cached
        return cached


@dataclasses.dataclass
class ScoreRecord:
    image_id: str
    label: str
    raw_count: int
    normalized: float | None = None


def build_templates(model, normal_images, ids=None) -> list[NormalTemplate]:
    """Reconstruct each normal image and wrap it as a template candidate."""
    if not normal_images:
        raise ValueError("no images to build templates from")
    if ids is None:
        ids = [f"{i:03d}" for i in range(len(normal_images))]
    if len(ids) != len(normal_images):
        raise ValueError("ids and normal_images lengths differ")
    recons = ae.forward(model, list(normal_images))
    return [
        NormalTemplate(source_id=str(i), source_image=img, reconstruction=to_grayscale(r))
        for i, img, r in zip(ids, normal_images, recons)
    ]


def difference_map(filtered_input, filtered_template, params: DetectionParams) -> np.ndarray:
    """Scaled absolute difference on the interior window.

    Returns a (N - 2*border) square field of |a - b| * scale; border pixels
    carry no value.
    """
    a = np.asarray(filtered_input, dtype=np.float64)
    b = np.asarray(filtered_template, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"field shapes differ: {a.shape} vs {b.shape}")
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"fields must be square 2-D, got {a.shape}")
    n = a.shape[0]
    w = params.border
    if 2 * w >= n:
        raise ValueError(f"border {w} leaves no interior in a {n}x{n} field")
    interior = np.s_[w : n - w, w : n - w]
    return np.abs(a[interior] - b[interior]) * params.scale


def binarize(diff: np.ndarray, th: float) -> np.ndarray:
    """Map to {0, 1} by strict comparison: 1 iff value > th."""
    if th < 0:
        raise ValueError(f"th must be >= 0, got {th}")
    return (np.asarray(diff) > th).astype(np.uint8)


def defect_score(binary_map: np.ndarray) -> int:
    """Count of set pixels."""
    return int(np.asarray(binary_map).sum())


def normalize_scores(records: list[ScoreRecord]) -> list[ScoreRecord]:
    """Min-max normalize raw counts over the corpus (all zero when degenerate)."""
    if not records:
        raise ValueError("no records to normalize")
    counts = np.array([r.raw_count for r in records], dtype=np.float64)
    lo, hi = counts.min(), counts.max()
    if hi == lo:
        normalized = np.zeros_like(counts)
    else:
        normalized = (counts - lo) / (hi - lo)
    return [
        dataclasses.replace(rec, normalized=float(v)) for rec, v in zip(records, normalized)
    ]


def _filtered_recon(model, image, tau: int) -> np.ndarray:
    recon = ae.forward(model, [image])[0]
    return highpass_filter(to_grayscale(recon), tau)


def detect(image, model, template: NormalTemplate, params: DetectionParams,
           image_id: str = "", label: str = "unknown") -> ScoreRecord:
    """Score one image against a template; `normalized` is left unset."""
    fi = _filtered_recon(model, image, params.tau)
    ft = template.filtered(params.tau)
    diff = difference_map(fi, ft, params)
    count = defect_score(binarize(diff, params.th))
    return ScoreRecord(image_id=image_id, label=label, raw_count=count)


def select_template(templates, holdout_normals, model, params: DetectionParams) -> NormalTemplate:
    """Pick the template with the smallest mean raw count over holdout normals.

    Ties break toward the lexicographically smallest source_id.
    """
    if not templates:
        raise ValueError("no candidate templates")
    if not holdout_normals:
        raise ValueError("no holdout normal images")
    holdout_fields = [_filtered_recon(model, img, params.tau) for img in holdout_normals]
    best = None
    for tmpl in templates:
        ft = tmpl.filtered(params.tau)
        counts = [
            defect_score(binarize(difference_map(fh, ft, params), params.th))
            for fh in holdout_fields
        ]
        key = (float(np.mean(counts)), tmpl.source_id)
        if best is None or key < best[0]:
            best = (key, tmpl)
    return best[1]


def score_images(model, template, params, items, threads: int = 1) -> list[ScoreRecord]:
    """Score (id, label, image) triples and min-max normalize the counts.

    With threads > 1 images are scored concurrently; records keep input
    order either way, so results are identical.
    """
    def one(item):
        image_id, label, image = item
        return detect(image, model, template, params, image_id=image_id, label=label)

    items = list(items)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            records = list(pool.map(one, items))
    else:
        records = [one(item) for item in items]
    return normalize_scores(records) if records else []
