"""Deterministic synthetic text-line generation with controlled degradations.

Glyphs are procedural stroke drawings seeded purely by (char_id, glyph_seed),
so the whole corpus is reproducible bit-for-bit without font files.  Each
rendered line is a 32x280 RGB image: dark strokes on a near-white background,
optionally sheared, stretched, blurred, noised and striped.  The degradation
parameters actually applied are recorded on the sample so evaluation can
re-bucket by them later.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from .errors import LabelTooLongError, UnknownCharacterError

HEIGHT = 32
WIDTH = 280
CELL = 28          # per-glyph advance; 10 glyphs fill the 280px strip exactly
MAX_LABEL_LEN = 10
CJK_BASE = 0x4E00  # alphabet characters start here

# Continue probability of the clipped-geometric label-length draw.  With
# lengths clipped to [1, 10] this puts the mean at ~5.30 characters.
_LENGTH_CONTINUE = 0.8474


@dataclass(frozen=True)
class Stroke:
    """One line segment of a glyph, in unit-cell coordinates."""
    x0: float
    y0: float
    x1: float
    y1: float
    thickness: float  # fraction of the cell size


@dataclass(frozen=True)
class GlyphSpec:
    char_id: int
    strokes: tuple[Stroke, ...]


@dataclass(frozen=True)
class DegradationMeta:
    """Degradation parameters exactly as applied to one sample."""
    blur_sigma: float = 0.0
    noise_std: float = 0.0
    shear_deg: float = 0.0
    stretch_factor: float = 1.0
    stripe_count: int = 0
    contrast: float = 1.0

    def as_dict(self) -> dict:
        return {
            "blur_sigma": self.blur_sigma,
            "noise_std": self.noise_std,
            "shear_deg": self.shear_deg,
            "stretch_factor": self.stretch_factor,
            "stripe_count": self.stripe_count,
            "contrast": self.contrast,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DegradationMeta":
        return cls(
            blur_sigma=float(d["blur_sigma"]),
            noise_std=float(d["noise_std"]),
            shear_deg=float(d["shear_deg"]),
            stretch_factor=float(d["stretch_factor"]),
            stripe_count=int(d["stripe_count"]),
            contrast=float(d["contrast"]),
        )


CLEAN_META = DegradationMeta()


@dataclass
class LineSample:
    id: str
    pixels: np.ndarray  # (32, 280, 3) uint8
    label: str
    meta: DegradationMeta


@dataclass(frozen=True)
class DegradationProfile:
    """Named parameter ranges a corpus draws per-sample degradations from."""
    name: str
    blur: tuple[float, float] = (0.0, 0.0)
    noise: tuple[float, float] = (0.0, 0.0)
    shear: tuple[float, float] = (0.0, 0.0)
    stretch: tuple[float, float] = (1.0, 1.0)
    stripes: tuple[int, int] = (0, 0)
    contrast: tuple[float, float] = (1.0, 1.0)

    def sample(self, rng: np.random.Generator) -> DegradationMeta:
        return DegradationMeta(
            blur_sigma=float(rng.uniform(*self.blur)),
            noise_std=float(rng.uniform(*self.noise)),
            shear_deg=float(rng.uniform(*self.shear)),
            stretch_factor=float(rng.uniform(*self.stretch)),
            stripe_count=int(rng.integers(self.stripes[0], self.stripes[1] + 1)),
            contrast=float(rng.uniform(*self.contrast)),
        )


PROFILES = {
    "clean": DegradationProfile(name="clean"),
    "light": DegradationProfile(
        name="light",
        blur=(0.3, 0.8),
        noise=(0.01, 0.05),
        shear=(-3.0, 3.0),
        stretch=(0.9, 1.1),
        stripes=(0, 0),
        contrast=(0.8, 1.0),
    ),
    # Heavy includes vertical occlusion stripes on top of strong blur/noise.
    "heavy": DegradationProfile(
        name="heavy",
        blur=(0.8, 2.0),
        noise=(0.05, 0.15),
        shear=(-8.0, 8.0),
        stretch=(0.75, 1.25),
        stripes=(1, 4),
        contrast=(0.55, 0.9),
    ),
}


def alphabet_chars(alphabet_size: int) -> list[str]:
    """The first `alphabet_size` characters of the synthetic writing system."""
    if alphabet_size < 1:
        raise ValueError("alphabet_size must be >= 1")
    return [chr(CJK_BASE + i) for i in range(alphabet_size)]


@functools.lru_cache(maxsize=4096)
def make_glyph(char_id: int, glyph_seed: int) -> GlyphSpec:
    """Build the stroke set for one character.

    Pure function of (char_id, glyph_seed): 3-8 segments with endpoints in
    [0.05, 0.95]^2, minimum length 0.25 cell units so every glyph inks at
    least one pixel when rasterized.
    """
    if char_id < 0:
        raise ValueError("char_id must be >= 0")
    rng = np.random.default_rng(np.random.SeedSequence([glyph_seed, char_id]))
    n_strokes = int(rng.integers(3, 9))
    strokes = []
    for _ in range(n_strokes):
        while True:
            x0, y0, x1, y1 = rng.uniform(0.05, 0.95, size=4)
            if (x1 - x0) ** 2 + (y1 - y0) ** 2 >= 0.25**2:
                break
        thickness = float(rng.uniform(0.04, 0.12))
        strokes.append(Stroke(float(x0), float(y0), float(x1), float(y1), thickness))
    return GlyphSpec(char_id=char_id, strokes=tuple(strokes))


@functools.lru_cache(maxsize=4096)
def _glyph_mask(char_id: int, glyph_seed: int) -> np.ndarray:
    """Rasterize a glyph into a CELL x CELL ink-coverage mask in [0, 1]."""
    spec = make_glyph(char_id, glyph_seed)
    ys, xs = np.mgrid[0:CELL, 0:CELL].astype(np.float64)
    # unit coords -> pixel coords with a small inset so thick strokes stay inside
    lo, span = 1.5, CELL - 3.0
    mask = np.zeros((CELL, CELL), dtype=np.float64)
    for s in spec.strokes:
        ax, ay = lo + s.x0 * span, lo + s.y0 * span
        bx, by = lo + s.x1 * span, lo + s.y1 * span
        dx, dy = bx - ax, by - ay
        seg_len2 = dx * dx + dy * dy
        t = ((xs - ax) * dx + (ys - ay) * dy) / seg_len2
        t = np.clip(t, 0.0, 1.0)
        dist = np.hypot(xs - (ax + t * dx), ys - (ay + t * dy))
        radius = 0.5 * s.thickness * span
        cov = np.clip(0.5 + radius - dist, 0.0, 1.0)
        np.maximum(mask, cov, out=mask)
    mask.setflags(write=False)
    return mask


def _shear_stretch(mask: np.ndarray, shear_deg: float, stretch: float) -> np.ndarray:
    """Apply horizontal shear then horizontal stretch to an ink mask."""
    if shear_deg == 0.0 and stretch == 1.0:
        return mask
    h, w = mask.shape
    tan = float(np.tan(np.radians(shear_deg)))
    off = -min(0.0, tan * (h - 1))
    out_w = max(1, int(np.ceil(stretch * (w + abs(tan) * (h - 1)))))
    # output (y, x) samples input at (y, x/stretch - tan*y - off)
    matrix = np.array([[1.0, 0.0], [-tan, 1.0 / stretch]])
    offset = np.array([0.0, -off])
    return ndimage.affine_transform(
        mask, matrix.T, offset=offset, output_shape=(h, out_w),
        order=1, mode="constant", cval=0.0,
    )


def _fit_width(mask: np.ndarray, width: int) -> np.ndarray:
    """Pad right (background) or rescale horizontally to exactly `width`."""
    h, w = mask.shape
    if w == width:
        return mask
    if w < width:
        out = np.zeros((h, width), dtype=mask.dtype)
        out[:, :w] = mask
        return out
    matrix = np.array([[1.0, 0.0], [0.0, w / width]])
    return ndimage.affine_transform(
        mask, matrix.T, output_shape=(h, width), order=1, mode="constant", cval=0.0,
    )


def render_line(
    label: str,
    char_dict,
    meta: DegradationMeta,
    seed: int,
    glyph_seed: int = 0,
) -> LineSample:
    """Render one labelled 32x280 text-line image.

    Glyphs are blitted left to right at a fixed 28px advance, then the strip
    is sheared, stretched, fitted to width 280, blurred, contrast-scaled,
    noised and striped, in that order.  Deterministic per
    (label, meta, seed, glyph_seed).
    """
    if not 1 <= len(label) <= MAX_LABEL_LEN:
        raise LabelTooLongError(
            f"label length {len(label)} outside [1, {MAX_LABEL_LEN}]"
        )
    for ch in label:
        if ch not in char_dict.index_of:
            raise UnknownCharacterError(f"character {ch!r} not in dictionary")

    rng = np.random.default_rng(np.random.SeedSequence([0x11E5, seed]))

    strip = np.zeros((HEIGHT, CELL * len(label)), dtype=np.float64)
    y0 = (HEIGHT - CELL) // 2
    for i, ch in enumerate(label):
        strip[y0:y0 + CELL, i * CELL:(i + 1) * CELL] = _glyph_mask(ord(ch), glyph_seed)

    mask = _shear_stretch(strip, meta.shear_deg, meta.stretch_factor)
    mask = _fit_width(mask, WIDTH)
    if meta.blur_sigma > 0:
        mask = ndimage.gaussian_filter(mask, sigma=meta.blur_sigma)
    mask = np.clip(mask, 0.0, 1.0)

    # compose grayscale: jittered near-white background, near-black ink
    bg = rng.uniform(0.90, 0.99)
    ink = rng.uniform(0.03, 0.16)
    gray = bg + (ink - bg) * mask
    gray = 0.5 + (gray - 0.5) * meta.contrast
    if meta.noise_std > 0:
        gray = gray + rng.normal(0.0, meta.noise_std, size=gray.shape)
    for _ in range(meta.stripe_count):
        x = int(rng.integers(0, WIDTH))
        w = int(rng.integers(2, 7))
        gray[:, x:min(WIDTH, x + w)] = bg
    gray = np.clip(gray, 0.0, 1.0)

    pixels = np.repeat(
        np.round(gray * 255.0).astype(np.uint8)[:, :, None], 3, axis=2
    )
    return LineSample(id=f"{seed:08x}", pixels=pixels, label=label, meta=meta)


def _draw_label(rng: np.random.Generator, chars: list[str]) -> str:
    length = 1
    while length < MAX_LABEL_LEN and rng.random() < _LENGTH_CONTINUE:
        length += 1
    idx = rng.integers(0, len(chars), size=length)
    return "".join(chars[i] for i in idx)


def generate_corpus(
    alphabet_size: int,
    count: int,
    seed: int,
    profile: str | DegradationProfile = "clean",
    glyph_seed: int = 0,
) -> tuple[list[LineSample], list[str]]:
    """Generate `count` labelled line images plus their manifest lines.

    Per-sample seeds derive from the master seed, so sample i is identical
    no matter how many other samples are generated or in what order.
    Returns (samples, manifest_lines) with lines `images/<id>.png\\tlabel`.
    """
    if alphabet_size < 2:
        raise ValueError("alphabet_size must be >= 2")
    if count < 1:
        raise ValueError("count must be >= 1")
    if isinstance(profile, str):
        try:
            profile = PROFILES[profile]
        except KeyError:
            raise ValueError(f"unknown degradation profile {profile!r}") from None

    from .dataset import CharDict  # local import: dataset also imports errors

    chars = alphabet_chars(alphabet_size)
    cdict = CharDict.from_chars(chars)
    samples: list[LineSample] = []
    manifest: list[str] = []
    for i in range(count):
        rng = np.random.default_rng(np.random.SeedSequence([seed, i]))
        label = _draw_label(rng, chars)
        meta = profile.sample(rng)
        render_seed = int(rng.integers(0, 2**63))
        sample = render_line(label, cdict, meta, render_seed, glyph_seed=glyph_seed)
        sample.id = f"{i:06d}"
        samples.append(sample)
        manifest.append(f"images/{sample.id}.png\t{label}")
    return samples, manifest


def write_corpus(samples: list[LineSample], manifest: list[str], out_dir) -> None:
    """Write PNGs, the tab-separated manifest, and per-sample meta.json."""
    import json
    from pathlib import Path

    from PIL import Image

    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    for sample in samples:
        Image.fromarray(sample.pixels, mode="RGB").save(
            out / "images" / f"{sample.id}.png", format="PNG"
        )
    (out / "manifest.txt").write_text(
        "".join(line + "\n" for line in manifest), encoding="utf-8"
    )
    meta = {
        f"images/{s.id}.png": s.meta.as_dict() for s in samples
    }
    (out / "meta.json").write_text(
        json.dumps(meta, indent=1, sort_keys=True), encoding="utf-8"
    )
