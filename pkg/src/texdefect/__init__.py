"""Texture defect detection via autoencoder reconstruction and Fourier
high-pass template differencing.

Submodules:
    image        image arrays, PNG/PPM/PGM I/O, grayscale, augmentation
    autoencoder  skip-connected conv autoencoder, backprop, Adam, training
    fourier      2D DFT, DC-centering shift, square high-pass mask
    detector     template building/selection, difference maps, scoring
    evaluation   AUC, (tau, th) grid search, ablation, report emission
    synthgen     deterministic synthetic texture corpora with defects
    config       JSON run configuration and manifests
    cli          the `texdefect` command-line entry point
"""

from . import autoencoder, config, detector, evaluation, fourier, image, synthgen
from .autoencoder import (
    ArchitectureDescriptor,
    ModelWeights,
    TrainConfig,
    forward,
    load_checkpoint,
    recon_loss,
    save_checkpoint,
    train,
    train_images,
)
from .detector import (
    DetectionParams,
    NormalTemplate,
    ScoreRecord,
    build_templates,
    detect,
    normalize_scores,
    select_template,
)
from .evaluation import AblationResult, SweepTable, ablate, auc, emit_report, grid_search
from .fourier import HighPassMask, Spectrum, dft2, highpass_filter, idft2, make_mask
from .image import AugmentSpec, Dataset, augment, load_dataset, load_image, save_image, to_grayscale
from .synthgen import DefectSpec, TextureSpec, gen_corpus, gen_texture, inject_defect

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "image",
    "autoencoder",
    "fourier",
    "detector",
    "evaluation",
    "synthgen",
    "config",
    "ArchitectureDescriptor",
    "ModelWeights",
    "TrainConfig",
    "forward",
    "recon_loss",
    "train",
    "train_images",
    "save_checkpoint",
    "load_checkpoint",
    "DetectionParams",
    "NormalTemplate",
    "ScoreRecord",
    "build_templates",
    "select_template",
    "detect",
    "normalize_scores",
    "SweepTable",
    "AblationResult",
    "auc",
    "grid_search",
    "ablate",
    "emit_report",
    "Spectrum",
    "HighPassMask",
    "dft2",
    "idft2",
    "make_mask",
    "highpass_filter",
    "AugmentSpec",
    "Dataset",
    "augment",
    "load_image",
    "save_image",
    "to_grayscale",
    "load_dataset",
    "TextureSpec",
    "DefectSpec",
    "gen_texture",
    "inject_defect",
    "gen_corpus",
]
