"""Regenerate the bundled demo scene and test masks.

Deterministic: pure numpy rasterization, no RNG. Run from the repo root:

    python3 tools/make_assets.py
"""

import json
from pathlib import Path

import numpy as np
from PIL import Image

ROOT = Path(__file__).resolve().parent.parent


def save_mask(bits, path):
    Image.fromarray(np.where(bits, 255, 0).astype(np.uint8), mode="L").save(path)


def disk(size, cx, cy, r):
    yy, xx = np.mgrid[0:size[0], 0:size[1]]
    return (xx - cx) ** 2 + (yy - cy) ** 2 <= r ** 2


def make_demo():
    out = ROOT / "demo"
    out.mkdir(exist_ok=True)
    size = (64, 64)
    # pendant-like blob: a disk hanging under a stem, edges kept inside the mask
    blob = disk(size, 32, 30, 14)
    yy, xx = np.mgrid[0:64, 0:64]
    stem = (np.abs(xx - 32) <= 3) & (yy >= 38) & (yy <= 56)
    shape = blob | stem
    mask = shape.copy()
    for _ in range(4):  # dilate so the drawn outline sits inside the mask
        grown = mask.copy()
        grown[1:, :] |= mask[:-1, :]
        grown[:-1, :] |= mask[1:, :]
        grown[:, 1:] |= mask[:, :-1]
        grown[:, :-1] |= mask[:, 1:]
        mask = grown

    img = np.ones((64, 64, 3))
    img[shape] = (0.95, 0.80, 0.55)
    interior = shape.copy()
    for _ in range(2):  # erode to leave a dark 2px outline
        shrunk = interior.copy()
        shrunk[1:, :] &= interior[:-1, :]
        shrunk[:-1, :] &= interior[1:, :]
        shrunk[:, 1:] &= interior[:, :-1]
        shrunk[:, :-1] &= interior[:, 1:]
        interior = shrunk
    img[shape & ~interior] = (0.15, 0.15, 0.25)
    Image.fromarray(np.round(img * 255).astype(np.uint8), mode="RGB").save(out / "image.png")
    save_mask(mask, out / "mask.png")

    scene = {
        "image": "image.png",
        "bodies": [{
            "mask": "mask.png",
            "density": 0.02,
            "material": {"young": 150.0, "poisson": 0.3},
            "mesh": {"spacing": 8, "max_area": 60, "min_angle": 20},
        }],
        "strokes": [{
            "kind": "wind",
            "path": [[2.0, 28.0], [62.0, 28.0]],
            "strength": 30.0,
            "radius": 26.0,
            "particle_speed": 150.0,
            "emit_rate": 45.0,
            "active": [0.0, 0.4],
        }],
        "rigs": [
            {"kind": "fixed", "anchor": [32.0, 56.0]},
            {"kind": "fixed", "anchor": [32.0, 52.0]},
        ],
        "sim": {"dt": 0.001, "fps": 24, "frame_count": 8, "damping": 1.0},
        "output": {"dir": "out"},
    }
    (out / "scene.json").write_text(json.dumps(scene, indent=2) + "\n")


def make_masks():
    out = ROOT / "tests" / "data" / "masks"
    out.mkdir(parents=True, exist_ok=True)
    size = (96, 96)
    yy, xx = np.mgrid[0:96, 0:96]

    save_mask(disk(size, 47.5, 47.5, 30), out / "disk.png")

    rect = np.zeros(size, bool)
    rect[24:72, 18:78] = True  # 48x60, sides divisible by spacing 12
    save_mask(rect, out / "rect.png")

    ellipse = ((xx - 47.5) / 38.0) ** 2 + ((yy - 47.5) / 24.0) ** 2 <= 1.0
    save_mask(ellipse, out / "ellipse.png")

    blob = disk(size, 36, 40, 22) | disk(size, 60, 54, 20)
    save_mask(blob, out / "blob.png")

    capsule = np.zeros(size, bool)
    capsule |= disk(size, 30, 48, 16)
    capsule |= disk(size, 66, 48, 16)
    capsule |= (np.abs(yy - 48) <= 16) & (xx >= 30) & (xx <= 66)
    save_mask(capsule, out / "capsule.png")


if __name__ == "__main__":
    make_demo()
    make_masks()
    print("assets written to demo/ and tests/data/masks/")
