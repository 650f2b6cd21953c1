"""Command-line interface: gen / train / templates / detect / sweep / ablate.

Each command reads a JSON config (--config, optional; defaults apply),
writes its outputs under --out, and drops a manifest.json snapshot of the
effective config, arguments, seeds, and tool version next to them.
Passing a manifest as --config reproduces the run.  All commands exit 0 on
success and nonzero with a single-line diagnostic on stderr otherwise.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from . import autoencoder as ae
from . import detector as det
from . import evaluation as ev
from .config import (
    ConfigError,
    RunConfig,
    default_config_dict,
    load_config,
    write_manifest,
)
from .fourier import dft2, highpass_filter, spectrum_to_image
from .image import load_dataset, load_folder, load_image, save_image, to_grayscale
from .synthgen import gen_corpus

__all__ = ["main"]


class CliError(Exception):
    """User-facing command failure; message is printed as the diagnostic."""


def _require_file(path, what: str) -> Path:
    path = Path(path)
    if not path.is_file():
        raise CliError(f"{what} not found: {path}")
    return path


def _require_dir(path, what: str) -> Path:
    path = Path(path)
    if not path.is_dir():
        raise CliError(f"{what} not found: {path}")
    return path


def _load_run_config(args) -> tuple[RunConfig, dict | None]:
    if args.config is None:
        cfg, manifest = RunConfig(), None
    else:
        cfg, manifest = load_config(_require_file(args.config, "config file"))
    if args.seed is not None:
        s = int(args.seed)
        cfg = dataclasses.replace(
            cfg,
            train=dataclasses.replace(
                cfg.train,
                seed=s,
                augment=dataclasses.replace(cfg.train.augment, seed=s + 1),
            ),
            corpus=dataclasses.replace(
                cfg.corpus,
                texture=dataclasses.replace(cfg.corpus.texture, seed=s + 2),
                defect=dataclasses.replace(cfg.corpus.defect, seed=s + 3),
            ),
        )
    return cfg, manifest


def _resolve_threads(args, manifest) -> int:
    if args.threads is not None:
        if args.threads < 1:
            raise CliError(f"--threads must be >= 1, got {args.threads}")
        return args.threads
    if manifest is not None and isinstance(manifest.get("threads"), int):
        return manifest["threads"]
    return 1


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _manifest(args, command, cfg, extra_args, threads):
    write_manifest(
        Path(args.out),
        command,
        extra_args,
        cfg,
        args.seed,
        threads,
        version=__version__,
    )


def _train_images_dir(data_dir: Path) -> Path:
    nested = data_dir / "train" / "good"
    return nested if nested.is_dir() else data_dir


def _load_template(path) -> det.NormalTemplate:
    path = Path(path)
    if path.is_dir():
        path = path / "template.json"
    path = _require_file(path, "template")
    meta = json.loads(path.read_text())
    base = path.parent
    recon = load_image(base / meta["reconstruction"])
    source = load_image(base / meta["source"])
    return det.NormalTemplate(
        source_id=meta["source_id"], source_image=source, reconstruction=to_grayscale(recon)
    )


def _detect_items(input_path: Path):
    """Resolve a dataset dir, flat folder, or single image into scoring items."""
    if input_path.is_file():
        return [(input_path.stem, "unknown", load_image(input_path))]
    if (input_path / "test").is_dir():
        ds = load_dataset(input_path)
        items = [(i, "normal", img) for i, img in ds.test_normal]
        items += [(i, "defect", img) for i, img in ds.test_defect]
        if not items:
            raise CliError(f"no test images under {input_path}")
        return items
    items = [(i, "unknown", img) for i, img in load_folder(input_path)]
    if not items:
        raise CliError(f"no images found in {input_path}")
    return items


def _write_debug(debug_dir: Path, image_id: str, model, template, params, image):
    debug_dir.mkdir(parents=True, exist_ok=True)
    stem = image_id.replace("/", "_")
    recon = ae.forward(model, [image])[0]
    gray = to_grayscale(recon)
    filtered = highpass_filter(gray, params.tau)
    diff = det.difference_map(filtered, template.filtered(params.tau), params)
    binary = det.binarize(diff, params.th)
    save_image(recon, debug_dir / f"{stem}_recon.png")
    save_image(spectrum_to_image(dft2(gray)), debug_dir / f"{stem}_spectrum.png")
    peak = filtered.max()
    scaled = filtered / peak if peak > 0 else filtered
    save_image(scaled[:, :, np.newaxis], debug_dir / f"{stem}_filtered.png")
    save_image(binary.astype(np.float64)[:, :, np.newaxis], debug_dir / f"{stem}_binary.png")


# ---------------------------------------------------------------------------
# commands


def _cmd_gen(args) -> int:
    cfg, _ = _load_run_config(args)
    out = _out_dir(args)
    c = cfg.corpus
    gen_corpus(out, c.texture, c.defect, c.n_train, c.n_test_normal, c.n_test_defect)
    _manifest(args, "gen", cfg, {"out": out}, threads=1)
    total = c.n_train + c.n_test_normal + c.n_test_defect
    print(f"wrote {total} images under {out}")
    return 0


def _cmd_train(args) -> int:
    cfg, _ = _load_run_config(args)
    data = _require_dir(args.data, "dataset folder")
    images_dir = _train_images_dir(data)
    out = _out_dir(args)
    log_path = out / "train_log.csv"

    def progress(epoch, loss):
        if args.verbose:
            print(f"epoch {epoch + 1}/{cfg.train.epochs} mean_loss={loss:.6g}", file=sys.stderr)

    model = ae.train(images_dir, cfg.architecture, cfg.train, log_path=log_path, progress=progress)
    ckpt = out / "model.ckpt"
    ae.save_checkpoint(model, ckpt)
    _manifest(args, "train", cfg, {"data": data, "out": out}, threads=1)
    print(f"wrote {ckpt} ({model.parameter_count()} parameters) and {log_path}")
    return 0


def _cmd_templates(args) -> int:
    cfg, _ = _load_run_config(args)
    ckpt = _require_file(args.checkpoint, "checkpoint")
    data = _require_dir(args.data, "dataset folder")
    out = _out_dir(args)
    model = ae.load_checkpoint(ckpt)
    ds = load_dataset(data)
    if not ds.train:
        raise CliError(f"no template candidates: {data}/train/good is empty or missing")
    if not ds.test_normal:
        raise CliError(f"no holdout normals: {data}/test/good is empty or missing")
    templates = det.build_templates(
        model, [img for _, img in ds.train], ids=[i for i, _ in ds.train]
    )
    chosen = det.select_template(
        templates, [img for _, img in ds.test_normal], model, cfg.detection
    )
    source = next(img for i, img in ds.train if i == chosen.source_id)
    save_image(chosen.reconstruction, out / "template.png")
    save_image(source, out / "template_source.png")
    (out / "template.json").write_text(
        json.dumps(
            {
                "source_id": chosen.source_id,
                "reconstruction": "template.png",
                "source": "template_source.png",
            },
            indent=2,
            sort_keys=True,
        )
        + "\n"
    )
    _manifest(args, "templates", cfg, {"checkpoint": ckpt, "data": data, "out": out}, threads=1)
    print(f"selected template {chosen.source_id} -> {out / 'template.png'}")
    return 0


def _cmd_detect(args) -> int:
    cfg, manifest = _load_run_config(args)
    threads = _resolve_threads(args, manifest)
    ckpt = _require_file(args.checkpoint, "checkpoint")
    template = _load_template(args.template)
    input_path = Path(args.input)
    if not input_path.exists():
        raise CliError(f"input not found: {input_path}")
    out = _out_dir(args)
    model = ae.load_checkpoint(ckpt)
    items = _detect_items(input_path)
    records = det.score_images(model, template, cfg.detection, items, threads=threads)
    scores_path = out / "scores.csv"
    ev.write_scores_csv(records, scores_path)
    if args.debug_dir:
        for image_id, _, image in items:
            _write_debug(Path(args.debug_dir), image_id, model, template, cfg.detection, image)
    _manifest(
        args,
        "detect",
        cfg,
        {"checkpoint": ckpt, "template": args.template, "input": input_path, "out": out},
        threads,
    )
    print(f"scored {len(records)} images -> {scores_path}")
    return 0


def _cmd_sweep(args) -> int:
    cfg, manifest = _load_run_config(args)
    threads = _resolve_threads(args, manifest)
    ckpt = _require_file(args.checkpoint, "checkpoint")
    template = _load_template(args.template)
    data = _require_dir(args.data, "dataset folder")
    out = _out_dir(args)
    model = ae.load_checkpoint(ckpt)
    ds = load_dataset(data)
    table = ev.grid_search(
        ds, model, template, cfg.sweep_taus, cfg.sweep_ths, params=cfg.detection, threads=threads
    )
    ev.write_sweep_csv(table, out / "sweep.csv")
    ev.emit_report(table, out / "report")
    _manifest(
        args,
        "sweep",
        cfg,
        {"checkpoint": ckpt, "template": args.template, "data": data, "out": out},
        threads,
    )
    best = table.best
    print(
        f"swept {len(table.tau_values)}x{len(table.th_values)} cells; "
        f"best tau={best.tau} th={best.th:g} auc={best.auc:.4f} -> {out / 'sweep.csv'}"
    )
    return 0


def _cmd_ablate(args) -> int:
    cfg, manifest = _load_run_config(args)
    threads = _resolve_threads(args, manifest)
    ckpt = _require_file(args.checkpoint, "checkpoint")
    template = _load_template(args.template)
    data = _require_dir(args.data, "dataset folder")
    out = _out_dir(args)
    model = ae.load_checkpoint(ckpt)
    ds = load_dataset(data)
    result = ev.ablate(
        ds,
        model,
        template,
        params=cfg.detection,
        tau_values=cfg.sweep_taus,
        th_values=cfg.sweep_ths,
        threads=threads,
    )
    ev.emit_report(result, out / "ablation")
    _manifest(
        args,
        "ablate",
        cfg,
        {"checkpoint": ckpt, "template": args.template, "data": data, "out": out},
        threads,
    )
    parts = ", ".join(f"{m}={b.auc:.4f} (tau={b.tau}, th={b.th:g})" for m, b in result.modes())
    print(f"ablation: {parts} -> {out / 'ablation.csv'}")
    return 0


def _cmd_init_config(args) -> int:
    text = json.dumps(default_config_dict(), indent=2) + "\n"
    if args.out:
        Path(args.out).write_text(text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="texdefect",
        description="Texture defect detection: train an autoencoder on normal "
        "textures, then score test images by Fourier high-pass template differencing.",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", help="JSON config file or a manifest.json from a previous run")
        p.add_argument("--seed", type=int, help="override the config seeds")
        p.add_argument("--threads", type=int, help="worker threads for corpus scoring (default 1)")
        p.add_argument("--out", required=out_required, help="output directory")

    p = sub.add_parser("gen", help="generate a synthetic texture corpus")
    common(p)
    p.set_defaults(fn=_cmd_gen)

    p = sub.add_parser("train", help="train the autoencoder on normal images")
    p.add_argument("data", help="category folder (train/good is used) or a flat image folder")
    p.add_argument("--verbose", action="store_true", help="print per-epoch loss")
    common(p)
    p.set_defaults(fn=_cmd_train)

    p = sub.add_parser("templates", help="build and select the normal reconstructed template")
    p.add_argument("checkpoint", help="trained model checkpoint")
    p.add_argument("data", help="category folder with train/good and test/good")
    common(p)
    p.set_defaults(fn=_cmd_templates)

    p = sub.add_parser("detect", help="score images for defects")
    p.add_argument("checkpoint", help="trained model checkpoint")
    p.add_argument("template", help="template folder or template.json from `templates`")
    p.add_argument("input", help="image file, flat folder, or category folder")
    p.add_argument("--debug-dir", help="write per-image intermediate PNGs here")
    common(p)
    p.set_defaults(fn=_cmd_detect)

    p = sub.add_parser("sweep", help="grid-search (tau, th) and report AUC per cell")
    p.add_argument("checkpoint", help="trained model checkpoint")
    p.add_argument("template", help="template folder or template.json")
    p.add_argument("data", help="category folder with test/good and test/defect")
    common(p)
    p.set_defaults(fn=_cmd_sweep)

    p = sub.add_parser("ablate", help="compare fourier-only / recon-only / combined modes")
    p.add_argument("checkpoint", help="trained model checkpoint")
    p.add_argument("template", help="template folder or template.json")
    p.add_argument("data", help="category folder with test/good and test/defect")
    common(p)
    p.set_defaults(fn=_cmd_ablate)

    p = sub.add_parser("init-config", help="print or write the default JSON config")
    p.add_argument("--out", help="write to this file instead of stdout")
    p.set_defaults(fn=_cmd_init_config)

    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (CliError, ConfigError, FileNotFoundError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
