"""Restoring a blurred 16 x 16 test image.

Writes true, measured and best restored images as graymaps to
``demos_out/images`` together with ``errors.json``. Any image viewer opens
the .pgm files.

Run with ``python demos/04_deblurring_images.py``.
"""

# %%
from pathlib import Path

from gradfilters.experiments import images, method_by_name

out = Path("demos_out/images")
methods = [method_by_name(m, 3000) for m in ("SD", "CGLS", "ISRA", "SD_P", "HMZ_P")]
side = images(out, "blur:N=16,band=3,sigma=1.0", methods, noise=0.01, seed=0)

# %% Unconstrained restorations ring below zero; projected ones cannot.
for name, info in side["images"].items():
    err = "" if info["rel_error"] is None else f"{info['rel_error']:.3f}"
    print(f"{name:<9} error {err:>6}  negative pixels {info['negative_pixels']:>3}")
print("written to", out.resolve())
