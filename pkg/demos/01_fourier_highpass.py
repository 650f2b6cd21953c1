#!/usr/bin/env python3
"""Walk through the frequency-domain stage on a synthetic texture.

Builds a periodic texture, looks at its centered spectrum, then applies
square low-frequency masks of growing side length and shows how the
periodic background drains away while a small broadband defect survives.

Writes PNGs under demos/output/01_fourier_highpass/.
"""

from pathlib import Path

import numpy as np

from texdefect.fourier import apply_mask, dft2, highpass_filter, make_mask, shift, spectrum_to_image
from texdefect.image import save_image
from texdefect.synthgen import DefectSpec, TextureSpec, gen_texture, inject_defect

OUT = Path(__file__).parent / "output" / "01_fourier_highpass"


def to_png(field: np.ndarray, path: Path) -> None:
    peak = field.max()
    save_image((field / peak if peak > 0 else field)[:, :, np.newaxis], path)


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    n = 64
    texture = gen_texture(TextureSpec(size=n, base="sinusoid-grid", period=8, noise_amplitude=0.02, seed=3))
    defective, mask = inject_defect(texture, DefectSpec(kind="blob", extent=10, contrast=0.5, seed=4))
    save_image(texture, OUT / "texture.png")
    save_image(defective, OUT / "defective.png")

    spectrum = shift(dft2(defective[:, :, 0]))
    save_image(spectrum_to_image(spectrum), OUT / "spectrum.png")
    print(f"{n}x{n} sinusoid grid (period 8): principal peaks sit {n // 8} bins from DC")

    print(f"{'tau':>4} {'removed bins':>13} {'defect energy':>14} {'background energy':>18}")
    for tau in (0, 2, 4, 8, 16, 20, 28):
        filtered = highpass_filter(defective[:, :, 0], tau)
        to_png(filtered, OUT / f"filtered_tau{tau:02d}.png")
        save_image(spectrum_to_image(apply_mask(spectrum, make_mask(n, tau))), OUT / f"masked_tau{tau:02d}.png")
        defect_energy = float(np.sqrt(np.mean(filtered[mask] ** 2)))
        background_energy = float(np.sqrt(np.mean(filtered[~mask] ** 2)))
        print(f"{tau:>4} {make_mask(n, tau).removed_bins:>13} {defect_energy:>14.4f} {background_energy:>18.4f}")

    print(f"\nwrote images to {OUT}")
    print("the background energy collapses once the mask swallows the texture")
    print("fundamentals (tau > 2 * n/period), leaving the broadband defect dominant;")
    print("in the full pipeline the template difference removes aligned texture")
    print("residue already at much smaller tau.")


if __name__ == "__main__":
    main()
