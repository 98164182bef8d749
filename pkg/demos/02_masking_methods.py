"""Render the three masking methods side by side on a bundled fixture.

Writes masked_noise.png, masked_neighbor.png, and masked_inpaint.png to
demos/out/, each with every part fully removed so the replacement layer
is visible everywhere.
"""

import io
import pathlib

import numpy as np
from PIL import Image

from spx import fixtures
from spx.masking import MaskKind, MaskingMethod, apply_presence, build_all_layers
from spx.segmentation import active_parts

out = pathlib.Path(__file__).parent / "out"
out.mkdir(exist_ok=True)

image, seg, _ = fixtures.make_instance(0)
n_parts = len(active_parts(seg))

for kind in MaskKind:
    seed = None if kind is MaskKind.INPAINT else 7
    layers = build_all_layers(image, seg, MaskingMethod(kind, seed))
    masked = apply_presence(image, seg, layers, np.zeros(n_parts))
    path = out / f"masked_{kind.value}.png"
    Image.fromarray(masked).save(path)
    print(f"wrote {path} ({kind.value})")
