"""Flat 2D rasterization of scenes to 224x224 RGB PNGs.

The encoding is lossless by construction: shape from mask geometry, size
from extent, color from a fixed distinct palette, material from the
presence of a pure-white specular highlight. Rendering is deterministic
given the rng.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

IMAGE_SIZE = 224
BACKGROUND = (200, 200, 200)
HIGHLIGHT = (255, 255, 255)

COLOR_TABLE = {
    "gray": (87, 87, 87),
    "red": (173, 35, 35),
    "blue": (42, 75, 215),
    "green": (29, 105, 20),
    "brown": (129, 74, 25),
    "purple": (129, 38, 192),
    "cyan": (41, 208, 208),
    "yellow": (255, 238, 51),
}

RADII = {"small": 18, "large": 32}
MIN_GAP = 4
MAX_PLACEMENT_REJECTIONS = 10_000


class PlacementStallError(RuntimeError):
    pass


@dataclass(frozen=True)
class RenderConfig:
    image_size: int = IMAGE_SIZE
    colors: dict = field(default_factory=lambda: dict(COLOR_TABLE))
    radii: dict = field(default_factory=lambda: dict(RADII))
    background: tuple = BACKGROUND


def place_objects(scene, rng, config=RenderConfig()):
    """Non-overlapping integer pixel centers, all shapes fully on canvas."""
    radii = [config.radii[o.size] for o in scene.objects]
    positions = []
    for attempt in range(MAX_PLACEMENT_REJECTIONS):
        positions.clear()
        ok = True
        for r in radii:
            margin = r + 1
            x = int(rng.integers(margin, config.image_size - margin))
            y = int(rng.integers(margin, config.image_size - margin))
            for (px, py), pr in zip(positions, radii):
                if (x - px) ** 2 + (y - py) ** 2 < (r + pr + MIN_GAP) ** 2:
                    ok = False
                    break
            if not ok:
                break
            positions.append((x, y))
        if ok:
            return list(positions)
    raise PlacementStallError(f"no placement found in {MAX_PLACEMENT_REJECTIONS} attempts")


def _draw_object(img, obj, x, y, config):
    r = config.radii[obj.size]
    color = config.colors[obj.color]
    yy, xx = np.mgrid[0:config.image_size, 0:config.image_size]
    if obj.shape == "cube":
        # inscribed in the placement radius so corners stay within r
        s = max(2, int(0.707 * r))
        mask = (np.abs(xx - x) <= s) & (np.abs(yy - y) <= s)
    elif obj.shape == "sphere":
        mask = (xx - x) ** 2 + (yy - y) ** 2 <= r * r
    else:  # cylinder: vertical rectangle with an elliptical cap, inside radius r
        hw = max(2, int(0.6 * r))
        top = int(0.6 * r)
        body = (np.abs(xx - x) <= hw) & (yy - y <= int(0.8 * r)) & (y - yy <= top)
        ch = max(2, int(0.2 * r))
        cap = ((xx - x) / hw) ** 2 + ((yy - (y - top)) / ch) ** 2 <= 1.0
        mask = body | cap
    img[mask] = color
    if obj.material == "metal":
        hr = max(2, r // 4)
        hx, hy = x - r // 3, y - r // 3
        highlight = (xx - hx) ** 2 + (yy - hy) ** 2 <= hr * hr
        img[highlight & mask] = HIGHLIGHT


def render_array(scene, rng, config=RenderConfig()):
    """Render to an (H, W, 3) uint8 array."""
    positions = place_objects(scene, rng, config)
    img = np.empty((config.image_size, config.image_size, 3), dtype=np.uint8)
    img[:] = config.background
    # Draw back-to-front by position; objects never overlap so order only
    # matters for determinism.
    for obj, (x, y) in zip(scene.objects, positions):
        _draw_object(img, obj, x, y, config)
    return img


def render_png(scene, rng, config=RenderConfig()):
    """Render to PNG bytes; byte-identical for identical (scene, seed)."""
    array = render_array(scene, rng, config)
    buf = io.BytesIO()
    Image.fromarray(array).save(buf, format="PNG")
    return buf.getvalue()


def decode_array(img, config=RenderConfig()):
    """Recover the object multiset from a rendered image.

    Intentionally naive: segment non-background pixels, then classify each
    component by geometry (shape), extent (size), highlight (material), and
    nearest palette entry (color).
    """
    from .universe import ObjectSpec, canonicalize

    bg = np.array(config.background, dtype=np.int16)
    fg = np.any(np.abs(img.astype(np.int16) - bg) > 8, axis=2)
    labels, n = _label_components(fg)
    objects = []
    palette = {name: np.array(rgb, dtype=np.int16) for name, rgb in config.colors.items()}
    for comp in range(1, n + 1):
        ys, xs = np.nonzero(labels == comp)
        width = xs.max() - xs.min() + 1
        height = ys.max() - ys.min() + 1
        area = len(xs)
        aspect = height / width
        fill = area / (width * height)
        if aspect > 1.15:
            shape = "cylinder"
        elif fill > 0.95:
            shape = "cube"
        else:
            shape = "sphere"
        # Drawn widths differ per shape (cubes/cylinders are narrower than
        # their nominal placement radius).
        drawn = {
            "sphere": lambda r: 2 * r + 1,
            "cube": lambda r: 2 * max(2, int(0.707 * r)) + 1,
            "cylinder": lambda r: 2 * max(2, int(0.6 * r)) + 1,
        }[shape]
        widths = [drawn(config.radii["small"]), drawn(config.radii["large"])]
        size = "large" if width >= sum(widths) / 2 else "small"
        pixels = img[ys, xs].astype(np.int16)
        white = np.all(pixels == 255, axis=1)
        material = "metal" if white.any() else "rubber"
        body = pixels[~white]
        mean = body.mean(axis=0)
        color = min(palette, key=lambda name: float(np.sum((mean - palette[name]) ** 2)))
        objects.append(ObjectSpec(shape=shape, size=size, material=material, color=color))
    return canonicalize(objects)


def _label_components(mask):
    """4-connected component labeling via flood fill (no scipy dependency)."""
    labels = np.zeros(mask.shape, dtype=np.int32)
    current = 0
    for sy, sx in zip(*np.nonzero(mask)):
        if labels[sy, sx]:
            continue
        current += 1
        stack = [(sy, sx)]
        labels[sy, sx] = current
        while stack:
            y, x = stack.pop()
            for ny, nx in ((y - 1, x), (y + 1, x), (y, x - 1), (y, x + 1)):
                if 0 <= ny < mask.shape[0] and 0 <= nx < mask.shape[1]:
                    if mask[ny, nx] and not labels[ny, nx]:
                        labels[ny, nx] = current
                        stack.append((ny, nx))
        if current > 8:  # scenes have 4 objects; bail out on garbage input
            break
    return labels, current
