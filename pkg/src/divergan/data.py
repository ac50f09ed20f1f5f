"""Procedural caption->image dataset: colored shapes with nuisance factors.

Captions follow the template "a <size> <color> <shape>" (24 distinct
modes). Position and background shade are nuisance factors drawn
independently of the caption, so per-caption diversity in a generator has
to come from the latent code.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import ConfigError, EnumError
from .text import Vocabulary

SIZES = ("small", "large")
COLORS = ("red", "green", "blue", "yellow")
SHAPES = ("circle", "square", "triangle")
NUM_MODES = len(SIZES) * len(COLORS) * len(SHAPES)

PALETTE = {
    "red": (0.85, 0.10, 0.10),
    "green": (0.10, 0.75, 0.15),
    "blue": (0.15, 0.20, 0.85),
    "yellow": (0.90, 0.85, 0.10),
}
RADIUS_FRAC = {"small": 0.14, "large": 0.26}
BG_RANGE = (0.15, 0.75)
VALID_RESOLUTIONS = (16, 32, 64)


@dataclass(frozen=True)
class Attributes:
    size: str
    color: str
    shape: str

    def __post_init__(self):
        if self.size not in SIZES:
            raise EnumError(f"size must be one of {SIZES}, got {self.size!r}")
        if self.color not in COLORS:
            raise EnumError(
                f"color must be one of {COLORS}, got {self.color!r}")
        if self.shape not in SHAPES:
            raise EnumError(
                f"shape must be one of {SHAPES}, got {self.shape!r}")

    @property
    def caption(self) -> str:
        return f"a {self.size} {self.color} {self.shape}"

    @property
    def mode_index(self) -> int:
        return ((SIZES.index(self.size) * len(COLORS)
                 + COLORS.index(self.color)) * len(SHAPES)
                + SHAPES.index(self.shape))

    @classmethod
    def from_mode_index(cls, idx: int) -> "Attributes":
        shape = SHAPES[idx % len(SHAPES)]
        idx //= len(SHAPES)
        color = COLORS[idx % len(COLORS)]
        size = SIZES[idx // len(COLORS)]
        return cls(size, color, shape)


@dataclass(frozen=True)
class Nuisance:
    """Position variates u, v in [0,1] within the valid placement box,
    plus the background gray shade."""

    u: float
    v: float
    bg: float


@dataclass
class CaptionSample:
    image: np.ndarray        # (R, R, 3) in [-1, 1]
    attributes: Attributes
    nuisance: Nuisance

    @property
    def caption(self) -> str:
        return self.attributes.caption


def build_vocabulary() -> Vocabulary:
    return Vocabulary(["a"] + list(SIZES) + list(COLORS) + list(SHAPES))


def _shape_sdf(shape: str, xx, yy, cx, cy, r):
    if shape == "circle":
        return np.sqrt((xx - cx) ** 2 + (yy - cy) ** 2) - r
    if shape == "square":
        half = r * 0.88
        return np.maximum(np.abs(xx - cx), np.abs(yy - cy)) - half
    # equilateral triangle pointing up, circumradius r
    verts = np.array([
        [cx, cy - r],
        [cx - r * np.sqrt(3) / 2, cy + r / 2],
        [cx + r * np.sqrt(3) / 2, cy + r / 2],
    ])
    sdf = np.full_like(xx, -np.inf)
    for k in range(3):
        a, b = verts[k], verts[(k + 1) % 3]
        edge = b - a
        # outward normal under image coordinates (y grows downward)
        normal = np.array([-edge[1], edge[0]])
        normal /= np.linalg.norm(normal)
        dist = (xx - a[0]) * normal[0] + (yy - a[1]) * normal[1]
        sdf = np.maximum(sdf, dist)
    return sdf


def render(attributes: Attributes, nuisance: Nuisance,
           resolution: int) -> np.ndarray:
    """Anti-aliased filled shape over a gray background, in [-1, 1]."""
    if resolution not in VALID_RESOLUTIONS:
        raise ConfigError(
            f"resolution must be one of {VALID_RESOLUTIONS}, got {resolution}")
    r_frac = RADIUS_FRAC[attributes.size]
    margin = r_frac + 0.06
    cx = (margin + nuisance.u * (1.0 - 2.0 * margin)) * resolution
    cy = (margin + nuisance.v * (1.0 - 2.0 * margin)) * resolution
    radius = r_frac * resolution

    coords = np.arange(resolution, dtype=np.float64) + 0.5
    xx, yy = np.meshgrid(coords, coords)
    sdf = _shape_sdf(attributes.shape, xx, yy, cx, cy, radius)
    coverage = np.clip(0.5 - sdf, 0.0, 1.0)[..., None]

    color = np.array(PALETTE[attributes.color])
    bg = np.full(3, nuisance.bg)
    img = bg * (1.0 - coverage) + color * coverage
    return (img * 2.0 - 1.0).astype(np.float32)


def sample_nuisance(rng: np.random.Generator) -> Nuisance:
    return Nuisance(u=float(rng.uniform()), v=float(rng.uniform()),
                    bg=float(rng.uniform(*BG_RANGE)))


def dataset(seed: int, n: int, resolution: int = 32) -> list[CaptionSample]:
    """n samples with uniform attribute modes and independent nuisance."""
    rng = np.random.default_rng(seed)
    samples = []
    for _ in range(n):
        attrs = Attributes.from_mode_index(int(rng.integers(NUM_MODES)))
        nuis = sample_nuisance(rng)
        samples.append(CaptionSample(render(attrs, nuis, resolution),
                                     attrs, nuis))
    return samples


def image_to_uint8(img: np.ndarray) -> np.ndarray:
    """Affine map [-1,1] -> [0,255] with round-half-up."""
    scaled = np.floor(img * 127.5 + 127.5 + 0.5)
    return np.clip(scaled, 0, 255).astype(np.uint8)


def save_png(img: np.ndarray, path: str | Path):
    Image.fromarray(image_to_uint8(img), mode="RGB").save(path)


def export_dataset(samples: list[CaptionSample], out_dir: str | Path):
    """Write one PNG per sample plus a tab-separated index file."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    lines = ["filename\tcaption\tsize\tcolor\tshape"]
    for i, sample in enumerate(samples):
        name = f"sample_{i:05d}.png"
        save_png(sample.image, out / name)
        a = sample.attributes
        lines.append(f"{name}\t{a.caption}\t{a.size}\t{a.color}\t{a.shape}")
    (out / "index.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
