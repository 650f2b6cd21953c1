"""ROC/AUC scoring, the (tau, th) grid search, and the ablation harness.

AUC uses the pairwise-probability definition P(score_pos > score_neg) +
0.5 * P(equal), computed exactly via an integer win/tie numerator so the
fast sort-based path agrees bit-for-bit with brute-force pair counting.
The grid search reconstructs every test image once, filters once per tau,
and reuses the sorted difference values across all thresholds.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from .detector import DetectionParams, NormalTemplate, ScoreRecord, difference_map
from .fourier import highpass_filter
from .image import Dataset, to_grayscale

__all__ = [
    "BestCell",
    "SweepTable",
    "AblationResult",
    "auc",
    "grid_search",
    "ablate",
    "emit_report",
    "write_scores_csv",
    "write_sweep_csv",
]


@dataclasses.dataclass(frozen=True)
class BestCell:
    tau: int
    th: float
    auc: float


@dataclasses.dataclass
class SweepTable:
    """AUC over a (tau, th) grid for one category, with the winning cell."""

    category: str
    tau_values: list[int]
    th_values: list[float]
    auc: np.ndarray
    best: BestCell


@dataclasses.dataclass
class AblationResult:
    """Best AUC per pipeline mode for one category."""

    category: str
    fourier_only: BestCell
    recon_only: BestCell
    combined: BestCell

    def modes(self) -> list[tuple[str, BestCell]]:
        return [
            ("fourier_only", self.fourier_only),
            ("recon_only", self.recon_only),
            ("combined", self.combined),
        ]


def auc(labels, scores) -> float:
    """Area under the ROC curve with 0.5 credit per tied pair.

    Exactly equals pairwise counting: the numerator 2*wins + ties is
    accumulated in integers before the single final division.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1 or labels.size == 0:
        raise ValueError("labels and scores must be equal-length non-empty 1-D sequences")
    pos = int((labels == 1).sum())
    neg = int((labels == 0).sum())
    if pos + neg != labels.size:
        raise ValueError("labels must be 0 or 1")
    if pos == 0 or neg == 0:
        raise ValueError("AUC needs at least one positive and one negative label")

    order = np.argsort(scores, kind="stable")
    s = scores[order]
    y = labels[order]
    numerator = 0  # 2*wins + ties, exact in integers
    neg_below = 0
    i = 0
    n = s.size
    while i < n:
        j = i
        while j < n and s[j] == s[i]:
            j += 1
        pos_here = int(y[i:j].sum())
        neg_here = (j - i) - pos_here
        numerator += pos_here * (2 * neg_below + neg_here)
        neg_below += neg_here
        i = j
    return numerator / (2.0 * pos * neg)


def _gray_field(image) -> np.ndarray:
    return to_grayscale(image)[:, :, 0]


def _default_recon(model):
    def recon_fn(images):
        return ae.forward(model, list(images))

    return recon_fn


def _sweep_grid(
    gray_inputs: list[np.ndarray],
    labels: np.ndarray,
    gray_template: np.ndarray,
    tau_values,
    th_values,
    params: DetectionParams,
    threads: int = 1,
) -> tuple[np.ndarray, BestCell]:
    """AUC grid over (tau, th) for fixed grayscale inputs and template.

    Filtered fields are computed once per tau; per image the sorted scaled
    difference values answer every threshold by binary search, which counts
    exactly the pixels a direct strict comparison would.
    """
    tau_values = [int(t) for t in tau_values]
    th_values = [float(t) for t in th_values]
    grid = np.zeros((len(tau_values), len(th_values)))

    def filtered_at(tau):
        def one(g):
            return highpass_filter(g, tau)

        if threads > 1:
            with ThreadPoolExecutor(max_workers=threads) as pool:
                return list(pool.map(one, gray_inputs))
        return [one(g) for g in gray_inputs]

    best = None
    for ti, tau in enumerate(tau_values):
        ft = highpass_filter(gray_template, tau)
        sorted_diffs = [
            np.sort(difference_map(fi, ft, params).ravel()) for fi in filtered_at(tau)
        ]
        for hi, th in enumerate(th_values):
            counts = [d.size - np.searchsorted(d, th, side="right") for d in sorted_diffs]
            value = auc(labels, np.asarray(counts, dtype=np.float64))
            grid[ti, hi] = value
            if best is None or value > best.auc:
                best = BestCell(tau=tau, th=th, auc=value)
    return grid, best


def _test_items(dataset: Dataset):
    items = [(i, 0, img) for i, img in dataset.test_normal]
    items += [(i, 1, img) for i, img in dataset.test_defect]
    if not any(lbl == 0 for _, lbl, _ in items) or not any(lbl == 1 for _, lbl, _ in items):
        raise ValueError("dataset needs both normal and defect test images")
    return items


def grid_search(
    dataset: Dataset,
    model,
    template: NormalTemplate,
    tau_values,
    th_values,
    params: DetectionParams | None = None,
    threads: int = 1,
    recon_fn=None,
) -> SweepTable:
    """Score every test image over the (tau, th) grid and report the best cell.

    Ties break toward the smaller tau, then the smaller th (values are
    swept in ascending order).
    """
    params = params or DetectionParams()
    tau_values = sorted(int(t) for t in tau_values)
    th_values = sorted(float(t) for t in th_values)
    if not tau_values or not th_values:
        raise ValueError("tau_values and th_values must be non-empty")
    items = _test_items(dataset)
    labels = np.array([lbl for _, lbl, _ in items])
    recon_fn = recon_fn or _default_recon(model)
    recons = recon_fn([img for _, _, img in items])
    gray_inputs = [_gray_field(r) for r in recons]
    gray_template = template.reconstruction[:, :, 0]
    grid, best = _sweep_grid(
        gray_inputs, labels, gray_template, tau_values, th_values, params, threads=threads
    )
    return SweepTable(
        category=dataset.category,
        tau_values=tau_values,
        th_values=th_values,
        auc=grid,
        best=best,
    )


def ablate(
    dataset: Dataset,
    model,
    template: NormalTemplate,
    params: DetectionParams | None = None,
    tau_values=range(1, 13),
    th_values=range(2, 21),
    threads: int = 1,
    recon_fn=None,
) -> AblationResult:
    """Best AUC for the fourier-only, reconstruction-only, and combined modes.

    fourier_only high-pass filters the raw grayscale inputs against the
    template's raw source image (no model); recon_only runs the pipeline
    with tau = 0 (reconstruction differences only), sweeping th; combined
    is the full grid search.
    """
    params = params or DetectionParams()
    tau_values = sorted(int(t) for t in tau_values)
    th_values = sorted(float(t) for t in th_values)
    items = _test_items(dataset)
    labels = np.array([lbl for _, lbl, _ in items])
    images = [img for _, _, img in items]
    recon_fn = recon_fn or _default_recon(model)
    gray_recons = [_gray_field(r) for r in recon_fn(images)]
    gray_template = template.reconstruction[:, :, 0]

    _, fourier_best = _sweep_grid(
        [_gray_field(img) for img in images],
        labels,
        _gray_field(template.source_image),
        tau_values,
        th_values,
        params,
        threads=threads,
    )
    _, recon_best = _sweep_grid(
        gray_recons, labels, gray_template, [0], th_values, params, threads=threads
    )
    _, combined_best = _sweep_grid(
        gray_recons, labels, gray_template, tau_values, th_values, params, threads=threads
    )
    return AblationResult(
        category=dataset.category,
        fourier_only=fourier_best,
        recon_only=recon_best,
        combined=combined_best,
    )


# ---------------------------------------------------------------------------
# report emission


def _fmt_th(th: float) -> str:
    return str(int(th)) if float(th) == int(th) else repr(float(th))


def _report_paths(path) -> tuple[Path, Path]:
    base = Path(path)
    if base.suffix in (".csv", ".md"):
        base = base.with_suffix("")
    return base.with_suffix(".csv"), base.with_suffix(".md")


def emit_report(table, path) -> None:
    """Write a CSV and a markdown table mirroring the sweep/ablation layout.

    For a SweepTable rows are tau and columns th (so a 2x2 grid yields a
    3-line CSV including the header); the best cell is bolded exactly once
    in the markdown.  For an AblationResult the CSV is long-format
    category,mode,auc and the markdown has one row per category.
    Re-emitting the same table is byte-identical.
    """
    csv_path, md_path = _report_paths(path)
    if isinstance(table, SweepTable):
        header = "tau," + ",".join(_fmt_th(t) for t in table.th_values)
        lines = [header]
        for ti, tau in enumerate(table.tau_values):
            cells = ",".join(f"{v:.6f}" for v in table.auc[ti])
            lines.append(f"{tau},{cells}")
        csv_path.write_text("\n".join(lines) + "\n")

        md = [
            "| " + " | ".join([table.category or "tau\\th"] + [_fmt_th(t) for t in table.th_values]) + " |",
            "|" + " --- |" * (len(table.th_values) + 1),
        ]
        for ti, tau in enumerate(table.tau_values):
            cells = []
            for hi, th in enumerate(table.th_values):
                text = f"{table.auc[ti, hi]:.4f}"
                if tau == table.best.tau and th == table.best.th:
                    text = f"**{text}**"
                cells.append(text)
            md.append("| " + " | ".join([str(tau)] + cells) + " |")
        md_path.write_text("\n".join(md) + "\n")
    elif isinstance(table, AblationResult):
        lines = ["category,mode,auc"]
        lines += [f"{table.category},{m},{b.auc:.6f}" for m, b in table.modes()]
        csv_path.write_text("\n".join(lines) + "\n")

        names = [m for m, _ in table.modes()]
        values = [b.auc for _, b in table.modes()]
        best_index = int(np.argmax(values))
        cells = [
            f"**{v:.4f}**" if i == best_index else f"{v:.4f}" for i, v in enumerate(values)
        ]
        md = [
            "| category | " + " | ".join(names) + " |",
            "|" + " --- |" * (len(names) + 1),
            "| " + " | ".join([table.category] + cells) + " |",
        ]
        md_path.write_text("\n".join(md) + "\n")
    else:
        raise TypeError(f"cannot emit a report for {type(table).__name__}")


def write_scores_csv(records: list[ScoreRecord], path) -> None:
    lines = ["image_id,label,raw_count,normalized"]
    for r in records:
        norm = "" if r.normalized is None else f"{r.normalized:.6f}"
        lines.append(f"{r.image_id},{r.label},{r.raw_count},{norm}")
    Path(path).write_text("\n".join(lines) + "\n")


def write_sweep_csv(table: SweepTable, path) -> None:
    """Long-format sweep CSV: category,tau,th,auc (one row per grid cell)."""
    lines = ["category,tau,th,auc"]
    for ti, tau in enumerate(table.tau_values):
        for hi, th in enumerate(table.th_values):
            lines.append(f"{table.category},{tau},{_fmt_th(th)},{table.auc[ti, hi]:.6f}")
    Path(path).write_text("\n".join(lines) + "\n")
