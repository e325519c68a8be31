"""Page-image preprocessing and synthetic ground-truth augmentation.

Conventions: gray images are 2-D uint8 arrays with ink dark (0) on a
light background (255); binary images are 2-D bool arrays with True for
ink.  All operations are pure and deterministic, degradations via an
explicit per-recipe seed, so augmented datasets can be regenerated
bit-identically.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

from .project import LineOrigin, LineRecord, LineStatus


class RecipeError(ValueError):
    pass


def read_gray(path: str | Path) -> np.ndarray:
    return np.asarray(Image.open(path).convert("L"))


def write_gray(img: np.ndarray, path: str | Path) -> None:
    Image.fromarray(np.asarray(img, dtype=np.uint8)).save(path)


# ---------------------------------------------------------------------------
# binarization


def otsu_threshold(img: np.ndarray) -> int:
    """Threshold maximizing between-class variance; ties pick the lowest.

    Pixels <= threshold count as ink.  A uniform image yields no valid
    split and returns -1 (everything background).
    """
    hist = np.bincount(img.ravel(), minlength=256).astype(np.float64)
    total = hist.sum()
    omega0 = np.cumsum(hist)  # weight of class <= t
    mu_t = np.cumsum(hist * np.arange(256))
    mu_total = mu_t[-1]
    omega1 = total - omega0
    valid = (omega0 > 0) & (omega1 > 0)
    if not valid.any():
        return -1
    with np.errstate(divide="ignore", invalid="ignore"):
        mu0 = mu_t / omega0
        mu1 = (mu_total - mu_t) / omega1
        sigma_b = omega0 * omega1 * (mu0 - mu1) ** 2
    sigma_b[~valid] = -1.0
    return int(np.argmax(sigma_b))  # argmax returns the first (lowest) maximum


def binarize(
    img: np.ndarray, method: str = "otsu", *, window: int = 31, k: float = 0.2
) -> np.ndarray:
    """Binarize a gray image; True marks ink.

    ``otsu`` uses the global between-class-variance threshold; a
    uniform image comes back all background.  ``sauvola`` thresholds
    locally at mean * (1 + k * (std/128 - 1)) over a window x window
    neighbourhood.
    """
    img = np.asarray(img)
    if img.size == 0:
        raise ValueError("empty image")
    if method == "otsu":
        t = otsu_threshold(img)
        if t < 0:
            return np.zeros(img.shape, dtype=bool)
        return img <= t
    if method == "sauvola":
        f = img.astype(np.float64)
        mean = ndimage.uniform_filter(f, size=window, mode="nearest")
        sq_mean = ndimage.uniform_filter(f * f, size=window, mode="nearest")
        std = np.sqrt(np.maximum(sq_mean - mean * mean, 0.0))
        threshold = mean * (1.0 + k * (std / 128.0 - 1.0))
        return f <= threshold
    raise ValueError(f"unknown binarization method {method!r}")


# ---------------------------------------------------------------------------
# deskew


def _rotate_float(img: np.ndarray, angle: float) -> np.ndarray:
    return ndimage.rotate(img, angle, reshape=False, order=1, mode="constant", cval=0.0)


def deskew(
    img: np.ndarray, range_deg: float = 5.0, step_deg: float = 0.1
) -> tuple[float, np.ndarray]:
    """Estimate and undo page skew.

    Scans candidate rotations in [-range, +range] and keeps the angle
    whose row-projection variance is maximal (sharp text rows line up).
    Ties prefer the smallest |angle|.  Returns the applied correction
    angle and the corrected binary image; a blank page is returned
    unchanged with angle 0.
    """
    img = np.asarray(img, dtype=bool)
    if not img.any():
        return 0.0, img
    f = img.astype(np.float64)
    n_steps = int(round(range_deg / step_deg))
    candidates = [i * step_deg for i in range(-n_steps, n_steps + 1)]
    candidates.sort(key=lambda a: (abs(a), a))  # ties resolved towards 0
    best_angle, best_score = 0.0, -1.0
    for angle in candidates:
        rotated = _rotate_float(f, angle) if angle else f
        score = float(np.var(rotated.sum(axis=1)))
        if score > best_score:
            best_angle, best_score = angle, score
    if best_angle == 0.0:
        return 0.0, img
    corrected = ndimage.rotate(img, best_angle, reshape=False, order=0, mode="constant", cval=False)
    return best_angle, corrected


# ---------------------------------------------------------------------------
# line segmentation


def segment_lines(img: np.ndarray, min_gap_px: int = 4) -> list[tuple[int, int, int, int]]:
    """Line boxes from the valleys of the horizontal ink projection.

    Expects a deskewed binary image.  Returns (x0, y0, x1, y1) boxes
    (end-exclusive), tight around the ink, top-to-bottom and disjoint.
    Bands separated by a gap smaller than ``min_gap_px`` are merged.
    """
    img = np.asarray(img, dtype=bool)
    profile = img.sum(axis=1).astype(np.float64)
    # light smoothing so single noise rows do not split a line
    kernel = np.ones(3) / 3.0
    smooth = np.convolve(profile, kernel, mode="same")
    ink_rows = smooth > 0
    bands: list[list[int]] = []
    start = None
    for y, has_ink in enumerate(ink_rows):
        if has_ink and start is None:
            start = y
        elif not has_ink and start is not None:
            bands.append([start, y])
            start = None
    if start is not None:
        bands.append([start, len(ink_rows)])
    merged: list[list[int]] = []
    for band in bands:
        if merged and band[0] - merged[-1][1] < min_gap_px:
            merged[-1][1] = band[1]
        else:
            merged.append(band)
    boxes = []
    for y0, y1 in merged:
        region = img[y0:y1]
        cols = region.any(axis=0)
        rows = region.any(axis=1)
        if not cols.any():
            continue
        x0 = int(np.argmax(cols))
        x1 = int(len(cols) - np.argmax(cols[::-1]))
        ry0 = y0 + int(np.argmax(rows))
        ry1 = y0 + int(len(rows) - np.argmax(rows[::-1]))
        boxes.append((x0, ry0, x1, ry1))
    return boxes


# ---------------------------------------------------------------------------
# degradations

BLUR_VARIANTS = {1: "box", 2: "gaussian", 3: "motion_h", 4: "motion_v"}


@dataclass(frozen=True)
class DegradationRecipe:
    """One parameterized degradation, reproducible through its seed."""

    kind: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def validate(self) -> None:
        p = self.params
        if self.kind == "identity":
            extra = set(p)
        elif self.kind == "bleedthrough":
            if not 0.0 <= p.get("alpha", -1) <= 1.0:
                raise RecipeError(f"bleedthrough alpha must be in [0,1], got {p.get('alpha')}")
            extra = set(p) - {"alpha"}
        elif self.kind == "blur":
            if p.get("variant") not in BLUR_VARIANTS:
                raise RecipeError(f"blur variant must be 1..4, got {p.get('variant')}")
            if not 1 <= p.get("radius", 0) <= 16:
                raise RecipeError(f"blur radius must be in 1..16, got {p.get('radius')}")
            extra = set(p) - {"variant", "radius"}
        elif self.kind == "char_erosion":
            if not 0.0 < p.get("strength", 0) <= 1.0:
                raise RecipeError(f"erosion strength must be in (0,1], got {p.get('strength')}")
            extra = set(p) - {"strength"}
        elif self.kind == "holes":
            if p.get("count", -1) < 0:
                raise RecipeError("holes count must be >= 0")
            if p.get("radius", 0) < 1:
                raise RecipeError("holes radius must be >= 1")
            extra = set(p) - {"count", "radius"}
        elif self.kind == "binding_shadow":
            if p.get("side") not in ("left", "right"):
                raise RecipeError(f"shadow side must be left/right, got {p.get('side')}")
            if p.get("width", 0) < 1:
                raise RecipeError("shadow width must be >= 1")
            extra = set(p) - {"side", "width"}
        else:
            raise RecipeError(f"unknown degradation kind {self.kind!r}")
        if extra:
            raise RecipeError(f"{self.kind}: unexpected parameters {sorted(extra)}")

    def as_dict(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params), "seed": self.seed}

    @classmethod
    def from_dict(cls, data: dict) -> "DegradationRecipe":
        return cls(kind=data["kind"], params=dict(data.get("params", {})), seed=data.get("seed", 0))


def identity_recipe() -> DegradationRecipe:
    return DegradationRecipe("identity")


def default_recipes(seed: int = 0) -> list[DegradationRecipe]:
    """The degradation battery applied to ground-truth lines."""
    return [
        DegradationRecipe("bleedthrough", {"alpha": 0.25}, seed),
        DegradationRecipe("blur", {"variant": 1, "radius": 1}, seed),
        DegradationRecipe("blur", {"variant": 2, "radius": 1}, seed),
        DegradationRecipe("blur", {"variant": 3, "radius": 2}, seed),
        DegradationRecipe("blur", {"variant": 4, "radius": 2}, seed),
        DegradationRecipe("char_erosion", {"strength": 0.25}, seed),
        DegradationRecipe("holes", {"count": 4, "radius": 3}, seed),
        DegradationRecipe("binding_shadow", {"side": "left", "width": 24}, seed),
        DegradationRecipe("binding_shadow", {"side": "right", "width": 24}, seed),
    ]


def _bleedthrough(img: np.ndarray, alpha: float) -> np.ndarray:
    # verso simulated by the mirrored recto, faded towards white, showing
    # through wherever it is darker than the recto
    donor = img[:, ::-1].astype(np.float64)
    faded = alpha * donor + (1.0 - alpha) * 255.0
    return np.minimum(img.astype(np.float64), faded)


def _blur(img: np.ndarray, variant: int, radius: int) -> np.ndarray:
    f = img.astype(np.float64)
    size = 2 * radius + 1
    name = BLUR_VARIANTS[variant]
    if name == "box":
        return ndimage.uniform_filter(f, size=size, mode="nearest")
    if name == "gaussian":
        return ndimage.gaussian_filter(f, sigma=radius * 0.6, mode="nearest")
    if name == "motion_h":
        return ndimage.uniform_filter1d(f, size=size, axis=1, mode="nearest")
    return ndimage.uniform_filter1d(f, size=size, axis=0, mode="nearest")


def _char_erosion(img: np.ndarray, strength: float, rng: np.random.Generator) -> np.ndarray:
    # eat ink boundary pixels with probability = strength
    ink = img < 128
    boundary = ink & ~ndimage.binary_erosion(ink)
    eat = boundary & (rng.random(img.shape) < strength)
    out = img.astype(np.float64).copy()
    out[eat] = 255.0
    return out

def _holes(img: np.ndarray, count: int, radius: int, rng: np.random.Generator) -> np.ndarray:
    out = img.astype(np.float64).copy()
    h, w = img.shape
    yy, xx = np.ogrid[:h, :w]
    for _ in range(count):
        cy = rng.integers(0, h)
        cx = rng.integers(0, w)
        r = radius * (0.5 + rng.random())
        out[(yy - cy) ** 2 + (xx - cx) ** 2 <= r * r] = 255.0
    return out


def _binding_shadow(img: np.ndarray, side: str, width: int) -> np.ndarray:
    out = img.astype(np.float64).copy()
    w = min(width, img.shape[1])
    ramp = np.linspace(0.35, 1.0, w)  # darkest at the edge
    if side == "left":
        out[:, :w] *= ramp
    else:
        out[:, -w:] *= ramp[::-1]
    return out


def degrade(line: np.ndarray, recipe: DegradationRecipe) -> np.ndarray:
    """Apply one degradation; dimensions preserved, text untouched."""
    recipe.validate()
    line = np.asarray(line, dtype=np.uint8)
    if line.size == 0:
        raise ValueError("empty line image")
    rng = np.random.default_rng(recipe.seed)
    p = recipe.params
    if recipe.kind == "identity":
        out = line.astype(np.float64)
    elif recipe.kind == "bleedthrough":
        out = _bleedthrough(line, p["alpha"])
    elif recipe.kind == "blur":
        out = _blur(line, p["variant"], p["radius"])
    elif recipe.kind == "char_erosion":
        out = _char_erosion(line, p["strength"], rng)
    elif recipe.kind == "holes":
        out = _holes(line, p["count"], p["radius"], rng)
    else:
        out = _binding_shadow(line, p["side"], p["width"])
    return np.clip(np.rint(out), 0, 255).astype(np.uint8)


# ---------------------------------------------------------------------------
# ground-truth expansion


def expand_ground_truth(
    lines: list[LineRecord],
    multiplier: int,
    recipes: list[DegradationRecipe] | None = None,
    seed: int = 0,
    out_dir: str | Path | None = None,
) -> list[LineRecord]:
    """Multiply transcribed lines with degraded copies.

    Emits ``multiplier`` synthetic records per input, tagged with the
    parent id and carrying the parent's gt_text verbatim.  Recipes are
    assigned round-robin over the output sequence, then re-seeded per
    item so every synthetic line is independently reproducible.
    Images land next to their parents unless ``out_dir`` is given.
    """
    if multiplier < 1:
        raise ValueError(f"multiplier must be >= 1, got {multiplier}")
    for rec in lines:
        if rec.gt_text is None:
            raise ValueError(f"line {rec.id} has no ground truth")
    recipes = recipes if recipes else default_recipes()
    for recipe in recipes:
        recipe.validate()
    out: list[LineRecord] = []
    index = 0
    for rec in lines:
        img = read_gray(rec.image_path)
        for k in range(multiplier):
            recipe = replace(recipes[index % len(recipes)], seed=seed + index)
            synthetic_img = degrade(img, recipe)
            syn_id = f"{rec.id}-s{k:02d}"
            target_dir = Path(out_dir) if out_dir else Path(rec.image_path).parent
            target_dir.mkdir(parents=True, exist_ok=True)
            png = target_dir / f"{syn_id}.png"
            write_gray(synthetic_img, png)
            gt_file = target_dir / f"{syn_id}.gt.txt"
            gt_file.write_text(rec.gt_text, encoding="utf-8")
            out.append(
                LineRecord(
                    id=syn_id,
                    page_id=rec.page_id,
                    bbox=rec.bbox,
                    image_path=png,
                    gt_text=rec.gt_text,
                    status=LineStatus.CORRECTED,
                    origin=LineOrigin.SYNTHETIC,
                    parent_id=rec.id,
                )
            )
            index += 1
    return out
