"""Skip-connected convolutional autoencoder with hand-rolled backprop.

The network maps an image to a reconstruction of the same shape:

  encoder   depth blocks of [conv 3x3 same -> ReLU], 2x2 max-pool (stride 2)
            between blocks;
  decoder   mirrors the encoder with [nearest x2 upsample -> channel-concat
            of the same-resolution encoder activation -> conv 3x3 -> ReLU];
  head      final 3x3 conv to the input channel count, then sigmoid.

Gradients are exact analytic derivatives of the combined L1/L2
reconstruction loss; training uses Adam (beta1=0.9, beta2=0.999, eps=1e-8)
and is deterministic for a fixed seed in single-threaded mode.

All layer code follows the dtype of the model parameters.  `backward` and
`forward` on a float64 model run in full double precision (this is what
the finite-difference gradient checks exercise); the training loop casts
its working copy to float32 for speed, then returns float64 weights.
Internally batches are NHWC and scratch buffers are reused across steps.

Checkpoint file layout ("TFR1" format): 4 magic bytes, a uint32
little-endian header length, a JSON header (architecture + step counter),
then the kernel/bias arrays in declaration order followed by the Adam
first- and second-moment arrays, all as raw little-endian float64.
"""

from __future__ import annotations

import dataclasses
import json
import struct
from pathlib import Path

import numpy as np
from scipy.special import expit

from .image import AugmentSpec, augment, load_folder

__all__ = [
    "ArchitectureDescriptor",
    "TrainConfig",
    "ModelWeights",
    "CheckpointError",
    "forward",
    "recon_loss",
    "backward",
    "adam_step",
    "train",
    "train_images",
    "write_train_log",
    "save_checkpoint",
    "load_checkpoint",
    "parameter_count",
]

ADAM_BETA1 = 0.9
ADAM_BETA2 = 0.999
ADAM_EPS = 1e-8

CHECKPOINT_MAGIC = b"TFR1"


class CheckpointError(Exception):
    """Checkpoint file is malformed, truncated, or of the wrong version."""


@dataclasses.dataclass(frozen=True)
class ArchitectureDescriptor:
    """Shape of the autoencoder: input size and encoder channel ladder."""

    input_height: int
    input_width: int
    input_channels: int
    encoder_channels: tuple[int, ...] = (64, 128, 256, 512, 512)
    kernel_size: int = 3

    def __post_init__(self):
        object.__setattr__(self, "encoder_channels", tuple(int(c) for c in self.encoder_channels))
        if self.depth < 2:
            raise ValueError(f"need at least 2 encoder levels, got {self.depth}")
        if any(c < 1 for c in self.encoder_channels):
            raise ValueError(f"encoder channel counts must be positive: {self.encoder_channels}")
        if self.input_channels not in (1, 3):
            raise ValueError(f"input_channels must be 1 or 3, got {self.input_channels}")
        if self.kernel_size < 1 or self.kernel_size % 2 == 0:
            raise ValueError(f"kernel_size must be odd and positive, got {self.kernel_size}")
        factor = 2 ** (self.depth - 1)
        if self.input_height % factor or self.input_width % factor:
            raise ValueError(
                f"input {self.input_height}x{self.input_width} not divisible by "
                f"2^(depth-1) = {factor}"
            )

    @property
    def depth(self) -> int:
        return len(self.encoder_channels)

    def level_resolutions(self) -> list[tuple[int, int]]:
        """Spatial size of each encoder activation, top level to bottleneck."""
        return [
            (self.input_height // 2**i, self.input_width // 2**i) for i in range(self.depth)
        ]


def _layer_plan(arch: ArchitectureDescriptor) -> list[tuple[str, int, int]]:
    """(name, out_channels, in_channels) per conv layer, in declaration order."""
    ec = arch.encoder_channels
    plan = []
    prev = arch.input_channels
    for i, c in enumerate(ec):
        plan.append((f"enc{i}", c, prev))
        prev = c
    for i in range(arch.depth - 2, -1, -1):
        plan.append((f"dec{i}", ec[i], ec[i + 1] + ec[i]))
    plan.append(("out", arch.input_channels, ec[0]))
    return plan


def parameter_count(arch: ArchitectureDescriptor) -> int:
    k2 = arch.kernel_size**2
    return sum(o * i * k2 + o for _, o, i in _layer_plan(arch))


@dataclasses.dataclass(frozen=True)
class TrainConfig:
    """Training loop hyperparameters; defaults follow the reference recipe."""

    learning_rate: float = 1e-4
    epochs: int = 500
    batch_size: int = 16
    lambda_l1: float = 1.0
    lambda_l2: float = 100.0
    augment: AugmentSpec = dataclasses.field(default_factory=AugmentSpec)
    seed: int = 0

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        if self.epochs < 1:
            raise ValueError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ValueError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.lambda_l1 < 0 or self.lambda_l2 < 0:
            raise ValueError("lambda weights must be >= 0")


class ModelWeights:
    """Parameter arrays, architecture, and Adam optimizer state.

    `params` holds [kernel, bias] pairs per conv layer in declaration
    order: encoder top-down, decoder bottleneck-out, output head.  Kernels
    are (out_ch, in_ch, k, k); biases are (out_ch,).
    """

    def __init__(self, arch, params, opt_m=None, opt_v=None, step=0):
        self.arch = arch
        self.params = params
        self.opt_m = opt_m if opt_m is not None else [np.zeros_like(p) for p in params]
        self.opt_v = opt_v if opt_v is not None else [np.zeros_like(p) for p in params]
        self.step = step
        self._check_shapes()

    @property
    def dtype(self):
        return self.params[0].dtype

    def _check_shapes(self):
        k = self.arch.kernel_size
        plan = _layer_plan(self.arch)
        if len(self.params) != 2 * len(plan):
            raise ValueError(f"expected {2 * len(plan)} parameter arrays, got {len(self.params)}")
        for i, (name, out_ch, in_ch) in enumerate(plan):
            kern, bias = self.params[2 * i], self.params[2 * i + 1]
            if kern.shape != (out_ch, in_ch, k, k):
                raise ValueError(
                    f"layer {name}: kernel shape {kern.shape} != {(out_ch, in_ch, k, k)}"
                )
            if bias.shape != (out_ch,):
                raise ValueError(f"layer {name}: bias shape {bias.shape} != {(out_ch,)}")
        for arrs in (self.params, self.opt_m, self.opt_v):
            for a in arrs:
                if not np.all(np.isfinite(a)):
                    raise ValueError("model contains non-finite values")

    @classmethod
    def initialize(cls, arch: ArchitectureDescriptor, seed=0) -> "ModelWeights":
        """He-uniform kernels, zero biases, fresh optimizer state."""
        rng = np.random.default_rng(seed)
        k = arch.kernel_size
        params = []
        for _, out_ch, in_ch in _layer_plan(arch):
            limit = np.sqrt(6.0 / (in_ch * k * k))
            params.append(rng.uniform(-limit, limit, size=(out_ch, in_ch, k, k)))
            params.append(np.zeros(out_ch))
        return cls(arch, params)

    def astype(self, dtype) -> "ModelWeights":
        return ModelWeights(
            self.arch,
            [p.astype(dtype) for p in self.params],
            [m.astype(dtype) for m in self.opt_m],
            [v.astype(dtype) for v in self.opt_v],
            self.step,
        )

    def copy(self) -> "ModelWeights":
        return self.astype(self.dtype)

    def parameter_count(self) -> int:
        return sum(p.size for p in self.params)


# ---------------------------------------------------------------------------
# layer primitives (NHWC batches; dtype follows the input)


def _buf(ws, key, shape, dtype):
    """Fetch a reusable scratch array from ws, or allocate when ws is None."""
    if ws is None:
        return np.empty(shape, dtype)
    arr = ws.get(key)
    if arr is None or arr.shape != shape or arr.dtype != dtype:
        arr = np.empty(shape, dtype)
        ws[key] = arr
    return arr


def _conv_fwd(x, kern, bias, ws, key):
    """Same-padded conv via im2col + one GEMM; returns (out, cache)."""
    b, h, w, c = x.shape
    out_ch, _, k, _ = kern.shape
    p = k // 2
    xp = _buf(ws, key + ".xp", (b, h + 2 * p, w + 2 * p, c), x.dtype)
    xp.fill(0.0)
    xp[:, p : p + h, p : p + w, :] = x
    cols6 = _buf(ws, key + ".cols", (b, h, w, k, k, c), x.dtype)
    for di in range(k):
        for dj in range(k):
            cols6[:, :, :, di, dj, :] = xp[:, di : di + h, dj : dj + w, :]
    cols = cols6.reshape(b * h * w, k * k * c)
    km = kern.transpose(2, 3, 1, 0).reshape(k * k * c, out_ch).astype(x.dtype, copy=False)
    out = _buf(ws, key + ".out", (b, h, w, out_ch), x.dtype)
    np.matmul(cols, km, out=out.reshape(b * h * w, out_ch))
    out += bias.astype(x.dtype, copy=False)
    return out, (x.shape, cols6, km)


def _conv_bwd(dout, cache, ws, key, need_dx=True):
    """Gradient of conv; returns (dx, dkern, dbias); dx is None if skipped."""
    (b, h, w, c), cols6, km = cache
    k = int(np.sqrt(km.shape[0] // c))
    out_ch = km.shape[1]
    p = k // 2
    cols = cols6.reshape(b * h * w, k * k * c)
    dmat = dout.reshape(b * h * w, out_ch)
    dkm = cols.T @ dmat
    dkern = dkm.reshape(k, k, c, out_ch).transpose(3, 2, 0, 1).copy()
    dbias = dmat.sum(axis=0)
    if not need_dx:
        return None, dkern, dbias
    dcols = _buf(ws, key + ".dcols", (b * h * w, k * k * c), dout.dtype)
    np.matmul(dmat, km.T, out=dcols)
    dxp = _buf(ws, key + ".dxp", (b, h + 2 * p, w + 2 * p, c), dout.dtype)
    dxp.fill(0.0)
    dc = dcols.reshape(b, h, w, k, k, c)
    for di in range(k):
        for dj in range(k):
            dxp[:, di : di + h, dj : dj + w, :] += dc[:, :, :, di, dj, :]
    return dxp[:, p : p + h, p : p + w, :], dkern, dbias


def _maxpool_fwd(x, ws, key):
    """2x2 max-pool, stride 2.  Cache keeps the input for argmax routing."""
    b, h, w, c = x.shape
    out = _buf(ws, key + ".pool", (b, h // 2, w // 2, c), x.dtype)
    q = [x[:, i::2, j::2, :] for i in (0, 1) for j in (0, 1)]
    np.maximum(q[0], q[1], out=out)
    np.maximum(out, q[2], out=out)
    np.maximum(out, q[3], out=out)
    return out, (x, out)


def _maxpool_bwd(dout, cache, ws, key):
    """Route gradient to the first maximum of each 2x2 block."""
    x, pooled = cache
    dx = _buf(ws, key + ".dpool", x.shape, dout.dtype)
    dx.fill(0.0)
    taken = np.zeros(pooled.shape, dtype=bool)
    for i in (0, 1):
        for j in (0, 1):
            sel = (x[:, i::2, j::2, :] == pooled) & ~taken
            np.copyto(dx[:, i::2, j::2, :], dout, where=sel)
            taken |= sel
    return dx


def _upsample_into(x, out2):
    """Nearest-neighbor x2 upsample written into a preallocated view."""
    out2[:, 0::2, 0::2, :] = x
    out2[:, 0::2, 1::2, :] = x
    out2[:, 1::2, 0::2, :] = x
    out2[:, 1::2, 1::2, :] = x


def _upsample_bwd(dout):
    """Sum the four fan-out positions of each source pixel."""
    return (
        dout[:, 0::2, 0::2, :]
        + dout[:, 0::2, 1::2, :]
        + dout[:, 1::2, 0::2, :]
        + dout[:, 1::2, 1::2, :]
    )


# ---------------------------------------------------------------------------
# network forward / backward


def _forward_batch(model: ModelWeights, x: np.ndarray, ws=None):
    """Run the full graph on an NHWC batch; returns (output, cache)."""
    depth = model.arch.depth
    params = model.params
    acts = []
    conv_caches = []
    pool_caches = []
    h = x
    for i in range(depth):
        pre, cc = _conv_fwd(h, params[2 * i], params[2 * i + 1], ws, f"enc{i}")
        np.maximum(pre, 0.0, out=pre)
        acts.append(pre)
        conv_caches.append(cc)
        if i < depth - 1:
            h, pc = _maxpool_fwd(pre, ws, f"enc{i}")
            pool_caches.append(pc)
    h = acts[-1]
    dec_caches = []
    splits = []
    for j, level in enumerate(range(depth - 2, -1, -1)):
        skip = acts[level]
        b, sh, sw, sc = skip.shape
        ch_up = h.shape[3]
        cat = _buf(ws, f"dec{level}.cat", (b, sh, sw, ch_up + sc), h.dtype)
        _upsample_into(h, cat[:, :, :, :ch_up])
        cat[:, :, :, ch_up:] = skip
        pi = depth + j
        pre, cc = _conv_fwd(cat, params[2 * pi], params[2 * pi + 1], ws, f"dec{level}")
        np.maximum(pre, 0.0, out=pre)
        splits.append(ch_up)
        dec_caches.append((cc, pre))
        h = pre
    po = 2 * depth - 1
    pre_out, out_cache = _conv_fwd(h, params[2 * po], params[2 * po + 1], ws, "head")
    r = expit(pre_out)
    cache = (acts, conv_caches, pool_caches, dec_caches, splits, out_cache, r)
    return r, cache


def _backward_batch(model, cache, dr, ws=None):
    """Backpropagate dLoss/dOutput through the cached graph."""
    depth = model.arch.depth
    acts, conv_caches, pool_caches, dec_caches, splits, out_cache, r = cache
    grads = [None] * len(model.params)

    dpre = dr * r * (1.0 - r)
    po = 2 * depth - 1
    dh, grads[2 * po], grads[2 * po + 1] = _conv_bwd(dpre, out_cache, ws, "head")

    dacts = [None] * depth
    # decoder ran levels depth-2 .. 0; walk back up toward the bottleneck
    for j in range(depth - 2, -1, -1):
        level = depth - 2 - j
        pi = depth + j
        cc, h_out = dec_caches[j]
        dpre = dh * (h_out > 0.0)
        dcat, grads[2 * pi], grads[2 * pi + 1] = _conv_bwd(dpre, cc, ws, f"dec{level}")
        ch_up = splits[j]
        dacts[level] = dcat[:, :, :, ch_up:].copy()
        dh = _upsample_bwd(dcat[:, :, :, :ch_up])
    dacts[depth - 1] = dh

    for i in range(depth - 1, -1, -1):
        dpre = dacts[i] * (acts[i] > 0.0)
        dx, grads[2 * i], grads[2 * i + 1] = _conv_bwd(
            dpre, conv_caches[i], ws, f"enc{i}", need_dx=(i > 0)
        )
        if i > 0:
            dacts[i - 1] += _maxpool_bwd(dx, pool_caches[i - 1], ws, f"enc{i - 1}")
    return grads


def _to_batch(arch, images, dtype=np.float64) -> np.ndarray:
    shape = (arch.input_height, arch.input_width, arch.input_channels)
    for img in images:
        if img.shape != shape:
            raise ValueError(f"image shape {img.shape} does not match architecture {shape}")
    return np.stack(images).astype(dtype, copy=False)


def forward(model: ModelWeights, batch: list[np.ndarray], chunk: int = 8) -> list[np.ndarray]:
    """Reconstruct a list of (H, W, C) images; outputs lie strictly in (0, 1).

    Large lists are processed `chunk` images at a time to bound scratch
    memory; no layer mixes information across batch entries.
    """
    out = []
    for start in range(0, len(batch), chunk):
        x = _to_batch(model.arch, batch[start : start + chunk], dtype=model.dtype)
        r, _ = _forward_batch(model, x)
        out.extend(np.array(img, dtype=np.float64) for img in r)
    return out


def recon_loss(x: np.ndarray, r: np.ndarray, lambda_l1: float = 1.0, lambda_l2: float = 100.0) -> float:
    """Combined loss lambda_l1 * mean|x - r| + lambda_l2 * mean((x - r)^2).

    Means run over every element, so the lambdas are resolution-independent.
    """
    x = np.asarray(x)
    r = np.asarray(r)
    if x.shape != r.shape:
        raise ValueError(f"shape mismatch: {x.shape} vs {r.shape}")
    d = x - r
    return float(lambda_l1 * np.mean(np.abs(d)) + lambda_l2 * np.mean(d * d))


def _loss_grad(r, t, lambda_l1, lambda_l2):
    d = r - t
    g = lambda_l1 * np.sign(d) + 2.0 * lambda_l2 * d
    g /= r.size
    return g


def backward(model, batch, targets, lambda_l1=1.0, lambda_l2=100.0):
    """Analytic gradients of the mean batch recon_loss w.r.t. every parameter.

    Returns arrays parallel to model.params, in the model's dtype (full
    double precision for a float64 model).
    """
    if len(batch) != len(targets) or not batch:
        raise ValueError("batch and targets must be non-empty and the same length")
    x = _to_batch(model.arch, batch, dtype=model.dtype)
    t = _to_batch(model.arch, targets, dtype=model.dtype)
    r, cache = _forward_batch(model, x)
    dr = _loss_grad(r, t, lambda_l1, lambda_l2)
    return _backward_batch(model, cache, dr)


def adam_step(model: ModelWeights, grads, learning_rate: float) -> ModelWeights:
    """One in-place Adam update with bias correction; returns the model."""
    if len(grads) != len(model.params):
        raise ValueError(f"expected {len(model.params)} gradient arrays, got {len(grads)}")
    model.step += 1
    t = model.step
    c1 = 1.0 - ADAM_BETA1**t
    c2 = 1.0 - ADAM_BETA2**t
    for p, g, m, v in zip(model.params, grads, model.opt_m, model.opt_v):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} does not match parameter {p.shape}")
        m *= ADAM_BETA1
        m += (1.0 - ADAM_BETA1) * g
        v *= ADAM_BETA2
        v += (1.0 - ADAM_BETA2) * (g * g)
        p -= learning_rate * (m / c1) / (np.sqrt(v / c2) + ADAM_EPS)
    return model


def train_images(
    images: list[np.ndarray],
    arch: ArchitectureDescriptor,
    config: TrainConfig,
    log_path=None,
    progress=None,
    lr_schedule=None,
) -> tuple[ModelWeights, list[float]]:
    """Train on in-memory normal images; returns (model, per-epoch mean loss).

    Each step draws a shuffled batch, augments it, and minimizes the
    reconstruction loss of the augmented image against itself.  Compute
    runs in float32 (the returned weights are float64); single threaded
    and bit-reproducible for fixed seeds.

    `lr_schedule`, if given, maps the epoch index to the learning rate for
    that epoch; the default keeps config.learning_rate constant.
    """
    if not images:
        raise ValueError("empty training set")
    shape = (arch.input_height, arch.input_width, arch.input_channels)
    for img in images:
        if img.shape != shape:
            raise ValueError(f"training image shape {img.shape} does not match {shape}")

    init_ss, shuffle_ss = np.random.SeedSequence(config.seed).spawn(2)
    model = ModelWeights.initialize(arch, seed=init_ss).astype(np.float32)
    shuffle_rng = np.random.default_rng(shuffle_ss)
    augment_rng = np.random.default_rng(config.augment.seed)
    # scratch buffers are reused across steps, keyed by batch size so the
    # trailing partial batch does not thrash them
    ws_by_size: dict[int, dict] = {}

    n = len(images)
    losses = []
    for epoch in range(config.epochs):
        lr = config.learning_rate if lr_schedule is None else float(lr_schedule(epoch))
        order = shuffle_rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            chosen = order[start : start + config.batch_size]
            batch = [augment(images[i], config.augment, augment_rng) for i in chosen]
            x = _to_batch(arch, batch, dtype=np.float32)
            ws = ws_by_size.setdefault(len(chosen), {})
            r, cache = _forward_batch(model, x, ws)
            loss = recon_loss(x, r, config.lambda_l1, config.lambda_l2)
            dr = _loss_grad(r, x, config.lambda_l1, config.lambda_l2)
            grads = _backward_batch(model, cache, dr, ws)
            adam_step(model, grads, lr)
            total += loss * len(chosen)
        mean_loss = total / n
        losses.append(mean_loss)
        if progress is not None:
            progress(epoch, mean_loss)
    if log_path is not None:
        write_train_log(losses, log_path)
    return model.astype(np.float64), losses


def write_train_log(losses: list[float], path) -> None:
    lines = ["epoch,mean_loss"]
    lines += [f"{e},{loss!r}" for e, loss in enumerate(losses)]
    Path(path).write_text("\n".join(lines) + "\n")


def train(
    train_dir,
    arch: ArchitectureDescriptor,
    config: TrainConfig,
    log_path=None,
    progress=None,
    lr_schedule=None,
) -> ModelWeights:
    """Train on every image in a flat folder of normal samples."""
    items = load_folder(train_dir)
    if not items:
        raise ValueError(f"no training images in {train_dir}")
    model, _ = train_images(
        [img for _, img in items], arch, config,
        log_path=log_path, progress=progress, lr_schedule=lr_schedule,
    )
    return model


# ---------------------------------------------------------------------------
# checkpoint serialization


def save_checkpoint(model: ModelWeights, path) -> None:
    """Write the TFR1 binary checkpoint (lossless float64)."""
    arch = model.arch
    header = json.dumps(
        {
            "input_height": arch.input_height,
            "input_width": arch.input_width,
            "input_channels": arch.input_channels,
            "encoder_channels": list(arch.encoder_channels),
            "kernel_size": arch.kernel_size,
            "step": model.step,
        },
        sort_keys=True,
    ).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for arrs in (model.params, model.opt_m, model.opt_v):
            for a in arrs:
                fh.write(np.ascontiguousarray(a, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelWeights:
    """Read a TFR1 checkpoint; restores weights and optimizer state exactly."""
    path = Path(path)
    blob = path.read_bytes()
    if len(blob) < 8 or blob[:4] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"not a TFR1 checkpoint: {path}")
    (hlen,) = struct.unpack("<I", blob[4:8])
    if len(blob) < 8 + hlen:
        raise CheckpointError(f"truncated checkpoint header: {path}")
    try:
        header = json.loads(blob[8 : 8 + hlen].decode("utf-8"))
        arch = ArchitectureDescriptor(
            input_height=header["input_height"],
            input_width=header["input_width"],
            input_channels=header["input_channels"],
            encoder_channels=tuple(header["encoder_channels"]),
            kernel_size=header["kernel_size"],
        )
        step = int(header["step"])
    except (KeyError, TypeError, ValueError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"bad checkpoint header in {path}: {exc}") from exc

    k = arch.kernel_size
    shapes = []
    for _, out_ch, in_ch in _layer_plan(arch):
        shapes.append((out_ch, in_ch, k, k))
        shapes.append((out_ch,))
    total = sum(int(np.prod(s)) for s in shapes)
    expected = 8 + hlen + 3 * total * 8
    if len(blob) != expected:
        raise CheckpointError(
            f"truncated or oversized checkpoint: {path} ({len(blob)} bytes, expected {expected})"
        )

    offset = 8 + hlen
    groups = []
    for _ in range(3):
        arrs = []
        for s in shapes:
            count = int(np.prod(s))
            arrs.append(
                np.frombuffer(blob, dtype="<f8", count=count, offset=offset)
                .astype(np.float64)
                .reshape(s)
            )
            offset += count * 8
        groups.append(arrs)
    return ModelWeights(arch, groups[0], groups[1], groups[2], step=step)
