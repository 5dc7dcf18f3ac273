"""Synthetic image classes and the crop (masking) operator."""

from __future__ import annotations

import enum
import functools
from dataclasses import dataclass

import numpy as np

from cul.errors import InvalidArgument
from cul.numerics import make_rng


class Split(str, enum.Enum):
    FORGET = "Forget"
    RETAIN = "Retain"
    HOLDOUT = "Holdout"


@dataclass(frozen=True)
class ToyImage:
    pixels: np.ndarray
    class_id: int
    split: Split

    @property
    def flat(self) -> np.ndarray:
        return self.pixels.reshape(-1)


def stack(images) -> np.ndarray:
    """``(n, H*W)`` array of flattened pixels."""
    return np.stack([img.flat for img in images]) if images else np.zeros((0, 0))


# -- procedural textures -------------------------------------------------------

_KINDS = ("stripes", "checkers", "rings", "blobs")
NOISE_STD = 0.03


def _class_params(seed: int, class_id: int, size: int) -> dict:
    rng = make_rng((seed, class_id, 0xC1A55))
    kind = _KINDS[class_id % len(_KINDS)]
    p = {"kind": kind}
    if kind == "stripes":
        p["angle"] = rng.uniform(0, np.pi)
        p["freq"] = rng.uniform(1.5, 3.0)
    elif kind == "checkers":
        p["fx"] = rng.uniform(1.0, 2.5)
        p["fy"] = rng.uniform(1.0, 2.5)
    elif kind == "rings":
        p["freq"] = rng.uniform(1.0, 2.0)
        p["center"] = rng.uniform(0.3, 0.7, size=2) * (size - 1)
    else:
        p["centers"] = rng.uniform(0.15, 0.85, size=(3, 2)) * (size - 1)
        p["signs"] = rng.choice([-1.0, 1.0], size=3)
        p["width"] = rng.uniform(0.12, 0.2) * size
    p["phase"] = rng.uniform(0, 2 * np.pi)
    return p


def _render(p: dict, size: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    jitter = rng.uniform(-0.5, 0.5)
    phase = p["phase"] + jitter
    kind = p["kind"]
    if kind == "stripes":
        u = xx * np.cos(p["angle"]) + yy * np.sin(p["angle"])
        img = np.sin(2 * np.pi * p["freq"] * u / size + phase)
    elif kind == "checkers":
        img = np.sin(2 * np.pi * p["fx"] * xx / size + phase) * np.sin(
            2 * np.pi * p["fy"] * yy / size + phase
        )
    elif kind == "rings":
        c = p["center"] + rng.uniform(-0.5, 0.5, size=2)
        r = np.hypot(xx - c[0], yy - c[1])
        img = np.sin(2 * np.pi * p["freq"] * r / size + phase)
    else:
        img = np.zeros((size, size))
        for (cx, cy), s in zip(p["centers"], p["signs"]):
            cx, cy = cx + rng.uniform(-0.5, 0.5), cy + rng.uniform(-0.5, 0.5)
            img += s * np.exp(-((xx - cx) ** 2 + (yy - cy) ** 2) / (2 * p["width"] ** 2))
    img = img + NOISE_STD * rng.standard_normal(img.shape)
    img -= img.mean()
    amp = rng.uniform(0.8, 1.0)
    return img * (amp / max(np.abs(img).max(), 1e-12))


def class_images(seed: int, class_id: int, count: int, size: int, split: Split) -> list[ToyImage]:
    p = _class_params(seed, class_id, size)
    rng = make_rng((seed, class_id, 0x5A3E))
    return [ToyImage(_render(p, size, rng), class_id, split) for _ in range(count)]


def build_dataset(n_classes: int, per_class: int, seed: int = 0, size: int = 16):
    """Deterministic synthetic dataset split by class into forget and retain halves.

    Returns ``(forget, retain)`` lists of :class:`ToyImage`. Every image is
    mean-subtracted with pixels in ``[-1, 1]``.
    """
    if n_classes <= 0 or n_classes % 2:
        raise InvalidArgument(f"n_classes must be a positive even number, got {n_classes}")
    if per_class < 2:
        raise InvalidArgument("per_class must be at least 2")
    order = make_rng((seed, 0xF0F)).permutation(n_classes)
    forget_ids = sorted(int(c) for c in order[: n_classes // 2])
    retain_ids = sorted(int(c) for c in order[n_classes // 2 :])
    forget = [im for c in forget_ids for im in class_images(seed, c, per_class, size, Split.FORGET)]
    retain = [im for c in retain_ids for im in class_images(seed, c, per_class, size, Split.RETAIN)]
    return forget, retain


def build_holdout(n_classes: int, per_class: int, first_class: int, seed: int = 0, size: int = 16):
    """Images from classes outside the training set (ids from ``first_class``)."""
    return [
        im
        for c in range(first_class, first_class + n_classes)
        for im in class_images(seed, c, per_class, size, Split.HOLDOUT)
    ]


def substitute_proxy_retain(retain, holdout, fraction: float, seed: int = 0):
    """Replace ``fraction`` of the retain images by held-out ones (proxy retain set)."""
    if not 0 <= fraction <= 1:
        raise InvalidArgument("fraction must lie in [0, 1]")
    n = int(round(fraction * len(retain)))
    if n > len(holdout):
        raise InvalidArgument(f"need {n} holdout images, have {len(holdout)}")
    rng = make_rng((seed, 0x9E7))
    drop = set(int(i) for i in rng.choice(len(retain), size=n, replace=False))
    pick = rng.choice(len(holdout), size=n, replace=False)
    kept = [im for i, im in enumerate(retain) if i not in drop]
    return kept + [holdout[int(i)] for i in pick]


# -- crop operator -------------------------------------------------------------


class CropPattern(str, enum.Enum):
    CENTER = "Center"
    TOP = "Top"
    BOTTOM = "Bottom"
    LEFT = "Left"
    RIGHT = "Right"
    RANDOM_MASK = "RandomMask"
    KEEP_CENTER = "KeepCenter"


@dataclass(frozen=True)
class CropSpec:
    """Which pixels get zeroed.

    ``ratio`` is the fraction of the image area removed, except for
    ``KeepCenter`` (outpainting) where it is the fraction kept. The number of
    affected pixels is ``round(ratio * H * W)``.
    """

    pattern: CropPattern = CropPattern.CENTER
    ratio: float = 0.5
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pattern", CropPattern(self.pattern))
        if not 0 < self.ratio < 1:
            raise InvalidArgument(f"crop ratio must lie in (0, 1), got {self.ratio}")

    def mask(self, height: int, width: int | None = None) -> np.ndarray:
        """Flat 0/1 keep-mask of length ``H*W``."""
        width = height if width is None else width
        return _mask(self.pattern, self.ratio, self.seed, height, width).copy()


def _center_order(h: int, w: int) -> np.ndarray:
    # Chebyshev distance from the center, ties broken by Euclidean distance then index
    yy, xx = np.mgrid[0:h, 0:w]
    dy, dx = np.abs(yy - (h - 1) / 2), np.abs(xx - (w - 1) / 2)
    cheb = np.maximum(dy, dx).ravel()
    eucl = np.hypot(dy, dx).ravel()
    return np.lexsort((np.arange(h * w), eucl, cheb))


@functools.lru_cache(maxsize=64)
def _mask(pattern: CropPattern, ratio: float, seed: int, h: int, w: int) -> np.ndarray:
    n = h * w
    k = int(round(ratio * n))
    idx = np.arange(n).reshape(h, w)
    if pattern is CropPattern.CENTER or pattern is CropPattern.KEEP_CENTER:
        order = _center_order(h, w)
    elif pattern is CropPattern.TOP:
        order = idx.ravel()
    elif pattern is CropPattern.BOTTOM:
        order = idx[::-1].ravel()
    elif pattern is CropPattern.LEFT:
        order = idx.T.ravel()
    elif pattern is CropPattern.RIGHT:
        order = idx[:, ::-1].T.ravel()
    else:
        order = make_rng((seed, 0x3A5C)).permutation(n)
    keep = np.ones(n)
    if pattern is CropPattern.KEEP_CENTER:
        keep[:] = 0.0
        keep[order[:k]] = 1.0
    else:
        keep[order[:k]] = 0.0
    keep.setflags(write=False)
    return keep


def crop(image: ToyImage, spec: CropSpec) -> ToyImage:
    h, w = image.pixels.shape
    keep = _mask(spec.pattern, spec.ratio, spec.seed, h, w).reshape(h, w)
    return ToyImage(image.pixels * keep, image.class_id, image.split)


def crop_batch(x: np.ndarray, spec: CropSpec, height: int, width: int | None = None) -> np.ndarray:
    """Apply the crop to a ``(n, H*W)`` batch."""
    width = height if width is None else width
    return x * _mask(spec.pattern, spec.ratio, spec.seed, height, width)
