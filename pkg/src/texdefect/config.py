"""Declarative JSON run configuration and run manifests.

A config file is a single JSON document with optional sections
"architecture", "train", "detection", "sweep", and "corpus"; missing
fields take the documented defaults.  Validation failures name the
offending field path (e.g. "train.batch_size: must be an integer >= 1").

Every CLI command snapshots its effective config, arguments, seeds, and
tool version into a manifest.json next to its outputs; a manifest can be
passed back as --config to reproduce the run.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

from .autoencoder import ArchitectureDescriptor, TrainConfig
from .detector import DetectionParams
from .image import AugmentSpec
from .synthgen import DefectSpec, TextureSpec

__all__ = [
    "ConfigError",
    "RunConfig",
    "CorpusConfig",
    "default_config_dict",
    "parse_config",
    "load_config",
    "config_to_dict",
    "write_manifest",
    "read_manifest",
]

TOOL_NAME = "texdefect"


class ConfigError(Exception):
    """Invalid configuration; the message starts with the field path."""


@dataclasses.dataclass(frozen=True)
class CorpusConfig:
    texture: TextureSpec = dataclasses.field(default_factory=TextureSpec)
    defect: DefectSpec = dataclasses.field(default_factory=DefectSpec)
    n_train: int = 40
    n_test_normal: int = 15
    n_test_defect: int = 15


@dataclasses.dataclass(frozen=True)
class RunConfig:
    architecture: ArchitectureDescriptor = dataclasses.field(
        default_factory=lambda: ArchitectureDescriptor(
            input_height=256,
            input_width=256,
            input_channels=3,
            encoder_channels=(64, 128, 256, 512, 512),
        )
    )
    train: TrainConfig = dataclasses.field(default_factory=TrainConfig)
    detection: DetectionParams = dataclasses.field(default_factory=DetectionParams)
    sweep_taus: tuple[int, ...] = tuple(range(2, 13))
    sweep_ths: tuple[float, ...] = tuple(float(t) for t in range(2, 21))
    corpus: CorpusConfig = dataclasses.field(default_factory=CorpusConfig)


def default_config_dict() -> dict:
    """The full default configuration as a JSON-ready dictionary."""
    return config_to_dict(RunConfig())


def config_to_dict(cfg: RunConfig) -> dict:
    a, t, d, c = cfg.architecture, cfg.train, cfg.detection, cfg.corpus
    return {
        "architecture": {
            "input_height": a.input_height,
            "input_width": a.input_width,
            "input_channels": a.input_channels,
            "encoder_channels": list(a.encoder_channels),
            "kernel_size": a.kernel_size,
        },
        "train": {
            "learning_rate": t.learning_rate,
            "epochs": t.epochs,
            "batch_size": t.batch_size,
            "lambda_l1": t.lambda_l1,
            "lambda_l2": t.lambda_l2,
            "seed": t.seed,
            "augment": {
                "shear_range": t.augment.shear_range,
                "zoom_range": t.augment.zoom_range,
                "horizontal_flip": t.augment.horizontal_flip,
                "vertical_flip": t.augment.vertical_flip,
                "seed": t.augment.seed,
            },
        },
        "detection": {
            "tau": d.tau,
            "th": d.th,
            "border": d.border,
            "scale": d.scale,
        },
        "sweep": {
            "tau_values": list(cfg.sweep_taus),
            "th_values": list(cfg.sweep_ths),
        },
        "corpus": {
            "size": c.texture.size,
            "base": c.texture.base,
            "period": c.texture.period,
            "noise_amplitude": c.texture.noise_amplitude,
            "seed": c.texture.seed,
            "defect": {
                "kind": c.defect.kind,
                "extent": c.defect.extent,
                "contrast": c.defect.contrast,
                "count": c.defect.count,
                "seed": c.defect.seed,
            },
            "n_train": c.n_train,
            "n_test_normal": c.n_test_normal,
            "n_test_defect": c.n_test_defect,
        },
    }


class _Section:
    """Reads typed fields from one dict level, tracking the field path."""

    def __init__(self, data: dict, path: str):
        if not isinstance(data, dict):
            raise ConfigError(f"{path or 'config'}: must be a JSON object")
        self.data = data
        self.path = path
        self.seen = set()

    def _at(self, key: str) -> str:
        return f"{self.path}.{key}" if self.path else key

    def get(self, key, default, kind, check=None, describe=""):
        self.seen.add(key)
        if key not in self.data:
            return default
        value = self.data[key]
        if kind is float and isinstance(value, int) and not isinstance(value, bool):
            value = float(value)
        if kind is not None and (not isinstance(value, kind) or isinstance(value, bool) and kind is not bool):
            raise ConfigError(f"{self._at(key)}: must be {describe or getattr(kind, '__name__', kind)}")
        if check is not None and not check(value):
            raise ConfigError(f"{self._at(key)}: must be {describe}")
        return value

    def section(self, key) -> "_Section":
        self.seen.add(key)
        return _Section(self.data.get(key, {}), self._at(key))

    def reject_unknown(self):
        unknown = set(self.data) - self.seen
        if unknown:
            key = sorted(unknown)[0]
            raise ConfigError(f"{self._at(key)}: unknown field")


def _int_list(section: _Section, key: str, default):
    section.seen.add(key)
    if key not in section.data:
        return default
    value = section.data[key]
    if not isinstance(value, list) or not value or not all(
        isinstance(v, int) and not isinstance(v, bool) for v in value
    ):
        raise ConfigError(f"{section._at(key)}: must be a non-empty list of integers")
    return value


def parse_config(obj: dict) -> RunConfig:
    """Validate a JSON-shaped dict, applying defaults, and build a RunConfig."""
    root = _Section(obj, "")
    defaults = RunConfig()

    sa = root.section("architecture")
    da = defaults.architecture
    try:
        arch = ArchitectureDescriptor(
            input_height=sa.get("input_height", da.input_height, int, lambda v: v >= 1, "an integer >= 1"),
            input_width=sa.get("input_width", da.input_width, int, lambda v: v >= 1, "an integer >= 1"),
            input_channels=sa.get("input_channels", da.input_channels, int, lambda v: v in (1, 3), "1 or 3"),
            encoder_channels=tuple(_int_list(sa, "encoder_channels", list(da.encoder_channels))),
            kernel_size=sa.get("kernel_size", da.kernel_size, int, lambda v: v >= 1 and v % 2 == 1, "an odd integer >= 1"),
        )
    except ValueError as exc:
        raise ConfigError(f"architecture: {exc}") from exc
    sa.reject_unknown()

    st = root.section("train")
    dt = defaults.train
    sg = st.section("augment")
    dg = dt.augment
    try:
        augment_spec = AugmentSpec(
            shear_range=sg.get("shear_range", dg.shear_range, float, lambda v: 0 <= v < 1, "a number in [0, 1)"),
            zoom_range=sg.get("zoom_range", dg.zoom_range, float, lambda v: 0 <= v < 1, "a number in [0, 1)"),
            horizontal_flip=sg.get("horizontal_flip", dg.horizontal_flip, bool, describe="a boolean"),
            vertical_flip=sg.get("vertical_flip", dg.vertical_flip, bool, describe="a boolean"),
            seed=sg.get("seed", dg.seed, int, describe="an integer"),
        )
    except ValueError as exc:
        raise ConfigError(f"train.augment: {exc}") from exc
    sg.reject_unknown()
    try:
        train_cfg = TrainConfig(
            learning_rate=st.get("learning_rate", dt.learning_rate, float, lambda v: v > 0, "a number > 0"),
            epochs=st.get("epochs", dt.epochs, int, lambda v: v >= 1, "an integer >= 1"),
            batch_size=st.get("batch_size", dt.batch_size, int, lambda v: v >= 1, "an integer >= 1"),
            lambda_l1=st.get("lambda_l1", dt.lambda_l1, float, lambda v: v >= 0, "a number >= 0"),
            lambda_l2=st.get("lambda_l2", dt.lambda_l2, float, lambda v: v >= 0, "a number >= 0"),
            augment=augment_spec,
            seed=st.get("seed", dt.seed, int, describe="an integer"),
        )
    except ValueError as exc:
        raise ConfigError(f"train: {exc}") from exc
    st.reject_unknown()

    sd = root.section("detection")
    dd = defaults.detection
    try:
        detection = DetectionParams(
            tau=sd.get("tau", dd.tau, int, lambda v: v >= 0, "an integer >= 0"),
            th=sd.get("th", dd.th, float, lambda v: v >= 0, "a number >= 0"),
            border=sd.get("border", dd.border, int, lambda v: v >= 0, "an integer >= 0"),
            scale=sd.get("scale", dd.scale, float, lambda v: v > 0, "a number > 0"),
        )
    except ValueError as exc:
        raise ConfigError(f"detection: {exc}") from exc
    sd.reject_unknown()

    ss = root.section("sweep")
    taus = _int_list(ss, "tau_values", list(defaults.sweep_taus))
    ss.seen.add("th_values")
    ths = ss.data.get("th_values", list(defaults.sweep_ths))
    if not isinstance(ths, list) or not ths or not all(
        isinstance(v, (int, float)) and not isinstance(v, bool) for v in ths
    ):
        raise ConfigError("sweep.th_values: must be a non-empty list of numbers")
    ss.reject_unknown()

    sc = root.section("corpus")
    dc = defaults.corpus
    try:
        texture = TextureSpec(
            size=sc.get("size", dc.texture.size, int, lambda v: v >= 4, "an integer >= 4"),
            base=sc.get("base", dc.texture.base, str, describe="a string"),
            period=sc.get("period", dc.texture.period, int, lambda v: v >= 2, "an integer >= 2"),
            noise_amplitude=sc.get("noise_amplitude", dc.texture.noise_amplitude, float, lambda v: 0 <= v < 0.5, "a number in [0, 0.5)"),
            seed=sc.get("seed", dc.texture.seed, int, describe="an integer"),
        )
    except ValueError as exc:
        raise ConfigError(f"corpus: {exc}") from exc
    sf = sc.section("defect")
    df = dc.defect
    try:
        defect = DefectSpec(
            kind=sf.get("kind", df.kind, str, describe="a string"),
            extent=sf.get("extent", df.extent, int, lambda v: v >= 1, "an integer >= 1"),
            contrast=sf.get("contrast", df.contrast, float, lambda v: 0 <= v <= 1, "a number in [0, 1]"),
            count=sf.get("count", df.count, int, lambda v: v >= 1, "an integer >= 1"),
            seed=sf.get("seed", df.seed, int, describe="an integer"),
        )
    except ValueError as exc:
        raise ConfigError(f"corpus.defect: {exc}") from exc
    sf.reject_unknown()
    corpus = CorpusConfig(
        texture=texture,
        defect=defect,
        n_train=sc.get("n_train", dc.n_train, int, lambda v: v >= 1, "an integer >= 1"),
        n_test_normal=sc.get("n_test_normal", dc.n_test_normal, int, lambda v: v >= 1, "an integer >= 1"),
        n_test_defect=sc.get("n_test_defect", dc.n_test_defect, int, lambda v: v >= 1, "an integer >= 1"),
    )
    sc.reject_unknown()
    root.reject_unknown()

    return RunConfig(
        architecture=arch,
        train=train_cfg,
        detection=detection,
        sweep_taus=tuple(taus),
        sweep_ths=tuple(float(t) for t in ths),
        corpus=corpus,
    )


def load_config(path) -> tuple[RunConfig, dict | None]:
    """Load a config file or a run manifest.

    Returns (config, manifest) where manifest is None for a plain config
    file and the decoded manifest dict when `path` points at one.
    """
    path = Path(path)
    if not path.is_file():
        raise FileNotFoundError(f"no such config file: {path}")
    try:
        obj = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: not valid JSON ({exc})") from exc
    if isinstance(obj, dict) and obj.get("tool") == TOOL_NAME and "config" in obj:
        return parse_config(obj["config"]), obj
    return parse_config(obj), None


def write_manifest(out_dir, command: str, args: dict, cfg: RunConfig, seed, threads: int, version: str) -> Path:
    """Snapshot the run (command, args, seeds, config, version) as JSON."""
    manifest = {
        "tool": TOOL_NAME,
        "tool_version": version,
        "command": command,
        "seed": seed,
        "threads": threads,
        "args": {k: str(v) for k, v in args.items()},
        "config": config_to_dict(cfg),
    }
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / "manifest.json"
    path.write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return path


def read_manifest(path) -> dict:
    path = Path(path)
    obj = json.loads(path.read_text())
    if not (isinstance(obj, dict) and obj.get("tool") == TOOL_NAME and "config" in obj):
        raise ConfigError(f"{path}: not a {TOOL_NAME} manifest")
    return obj
