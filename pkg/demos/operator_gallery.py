"""Render every transform operator at increasing magnitudes.

One synthetic shape image is pushed through each of the 16 operators at
magnitudes 0, 10, 20, and 30 (signed operators use the positive branch), and
the results are tiled into a single contact-sheet PNG.  Magnitude 0 is the
neutral point for every parameterized operator, so the first column repeats
the input; the parameterless operators (AutoContrast, Equalize, Invert)
transform unconditionally.

Run from the repository root:

    python demos/operator_gallery.py --out demo_out/gallery.png
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from contre import OP_NAMES, apply_op, encode_png, make_shapes_dataset

MAGNITUDES = (0.0, 10.0, 20.0, 30.0)
CELL_PAD = 4


def contact_sheet(image: np.ndarray) -> np.ndarray:
    h, w, c = image.shape
    rows = len(OP_NAMES)
    cols = len(MAGNITUDES)
    sheet = np.full(((h + CELL_PAD) * rows + CELL_PAD,
                     (w + CELL_PAD) * cols + CELL_PAD, c), 255,
                    dtype=np.uint8)
    for r, name in enumerate(OP_NAMES):
        for col, magnitude in enumerate(MAGNITUDES):
            tile = apply_op(name, magnitude, 1, image)
            y = CELL_PAD + r * (h + CELL_PAD)
            x = CELL_PAD + col * (w + CELL_PAD)
            sheet[y:y + h, x:x + w] = tile
    return sheet


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--out", default="demo_out/gallery.png")
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()

    images, labels = make_shapes_dataset(1, args.seed)
    image = images[0]
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    encode_png(contact_sheet(image), out)

    print(f"rows ({len(OP_NAMES)} operators): {', '.join(OP_NAMES)}")
    print(f"columns: magnitudes {', '.join(f'{m:g}' for m in MAGNITUDES)}")
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
