"""2D discrete Fourier transform, DC-centering shift, and square high-pass mask.

Conventions: the forward transform is the unnormalized double sum
F(u,v) = sum_xy f(x,y) exp(-j 2 pi (ux + vy) / N); the inverse carries the
1/N^2 factor.  Transforms operate on single-channel square N x N fields.
A Spectrum tracks whether its DC bin has been shifted to the center
(floor(N/2), floor(N/2)); mask application requires a centered spectrum.
"""

from __future__ import annotations

import dataclasses

import numpy as np

__all__ = [
    "Spectrum",
    "HighPassMask",
    "dft2",
    "idft2",
    "shift",
    "unshift",
    "make_mask",
    "apply_mask",
    "highpass_filter",
    "spectrum_to_image",
]


@dataclasses.dataclass(frozen=True)
class Spectrum:
    """Complex frequency field with a flag marking DC-centered layout."""

    data: np.ndarray
    centered: bool = False

    def __post_init__(self):
        data = np.asarray(self.data, dtype=np.complex128)
        if data.ndim != 2:
            raise ValueError(f"spectrum must be 2-D, got shape {data.shape}")
        if not np.all(np.isfinite(data)):
            raise ValueError("spectrum contains non-finite values")
        object.__setattr__(self, "data", data)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]


def _as_field(image) -> np.ndarray:
    """Accept (N, N) or (N, N, 1) input and return a square 2-D float field."""
    arr = np.asarray(image, dtype=np.float64)
    if arr.ndim == 3:
        if arr.shape[2] != 1:
            raise ValueError(f"transform input must be single-channel, got {arr.shape[2]} channels")
        arr = arr[:, :, 0]
    if arr.ndim != 2:
        raise ValueError(f"transform input must be 2-D, got shape {arr.shape}")
    if arr.shape[0] != arr.shape[1]:
        raise ValueError(f"transform input must be square, got shape {arr.shape}")
    return arr


def dft2(image) -> Spectrum:
    """Forward 2D DFT of a single-channel square image (uncentered layout)."""
    field = _as_field(image)
    return Spectrum(np.fft.fft2(field), centered=False)


def idft2(spectrum: Spectrum) -> np.ndarray:
    """Inverse 2D DFT (with the 1/N^2 factor) of an uncentered spectrum.

    Returns the complex spatial field; downstream consumers take np.abs for
    the per-pixel magnitude.
    """
    if spectrum.centered:
        raise ValueError("idft2 requires an uncentered spectrum; call unshift first")
    return np.fft.ifft2(spectrum.data)


def shift(spectrum: Spectrum) -> Spectrum:
    """Move the DC bin to (floor(H/2), floor(W/2)) by quadrant swap."""
    if spectrum.centered:
        raise ValueError("spectrum is already centered")
    return Spectrum(np.fft.fftshift(spectrum.data), centered=True)


def unshift(spectrum: Spectrum) -> Spectrum:
    """Inverse of shift: move the DC bin back to (0, 0)."""
    if not spectrum.centered:
        raise ValueError("spectrum is not centered")
    return Spectrum(np.fft.ifftshift(spectrum.data), centered=False)


@dataclasses.dataclass(frozen=True)
class HighPassMask:
    """Binary field zeroing a tau x tau square centered on the DC bin.

    The removed square spans [c - tau//2, c - tau//2 + tau - 1] in both
    axes with c = floor(size/2); tau = 0 removes nothing, tau = size
    removes everything.
    """

    size: int
    tau: int
    values: np.ndarray

    @property
    def removed_bins(self) -> int:
        return int(self.size * self.size - self.values.sum())


def make_mask(size: int, tau: int) -> HighPassMask:
    """Build the square low-frequency-removal mask for a size x size spectrum."""
    if size < 1:
        raise ValueError(f"mask size must be >= 1, got {size}")
    if not (0 <= tau <= size):
        raise ValueError(f"tau must be in [0, {size}], got {tau}")
    values = np.ones((size, size), dtype=np.float64)
    if tau > 0:
        start = size // 2 - tau // 2
        values[start : start + tau, start : start + tau] = 0.0
    return HighPassMask(size=size, tau=tau, values=values)


def apply_mask(spectrum: Spectrum, mask: HighPassMask) -> Spectrum:
    """Element-wise multiply a centered spectrum by a binary mask."""
    if not spectrum.centered:
        raise ValueError("apply_mask requires a centered spectrum")
    if spectrum.data.shape != mask.values.shape:
        raise ValueError(
            f"spectrum shape {spectrum.data.shape} does not match mask size {mask.values.shape}"
        )
    return Spectrum(spectrum.data * mask.values, centered=True)


def highpass_filter(image, tau: int) -> np.ndarray:
    """High-pass filter a single-channel square image, returning magnitudes.

    Composition: dft2 -> shift -> square mask(tau) -> unshift -> idft2 ->
    per-pixel modulus.  tau = 0 reproduces the input (round-trip identity);
    tau = N yields an all-zero field.
    """
    field = _as_field(image)
    n = field.shape[0]
    mask = make_mask(n, tau)
    masked = apply_mask(shift(dft2(field)), mask)
    return np.abs(idft2(unshift(masked)))


def spectrum_to_image(spectrum: Spectrum) -> np.ndarray:
    """Render log(1 + |F|) normalized to [0, 1] as an (H, W, 1) image."""
    mag = np.log1p(np.abs(spectrum.data))
    peak = mag.max()
    if peak > 0:
        mag = mag / peak
    return mag[:, :, np.newaxis]
