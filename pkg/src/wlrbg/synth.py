"""Deterministic synthetic video with exact ground-truth masks.

A smooth static background, one square sprite sweeping the frame in
raster order, windows of frames with no sprite, and a window where the
sprite stops moving. Frame intervals are 1-based and inclusive.
"""
import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from . import seeds
from .errors import ConfigError
from .frames import Dataset, frame_name, vectorize

SPRITE_INTENSITY = 230.0
BACKGROUND_LEVEL = 100.0
BACKGROUND_AMPLITUDE = 40.0


@dataclass(frozen=True)
class SynthSpec:
    height: int = 64
    width: int = 80
    n_frames: int = 120
    sprite_size: int = 12
    empty_ranges: tuple = ((2, 5), (90, 100))
    static_range: tuple = (110, 120)
    noise_sigma: float = 0.0
    illumination: float = 0.0
    background_scale: float = 1.0
    seed: object = 0

    def validate(self):
        if min(self.height, self.width, self.n_frames) < 1:
            raise ConfigError("height, width and n_frames must be positive")
        if not 0 < self.sprite_size <= min(self.height, self.width):
            raise ConfigError(
                f"sprite of size {self.sprite_size} does not fit a "
                f"{self.height}x{self.width} frame"
            )
        if self.noise_sigma < 0:
            raise ConfigError(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.background_scale <= 0:
            raise ConfigError("background_scale must be positive")
        intervals = sorted(self.intervals())
        for first, last in intervals:
            if not 1 <= first <= last <= self.n_frames:
                raise ConfigError(
                    f"interval [{first}, {last}] is outside [1, {self.n_frames}]"
                )
        for (_, last), (first, _) in zip(intervals, intervals[1:]):
            if first <= last:
                raise ConfigError(f"frame intervals overlap at frame {first}")

    def intervals(self):
        ranges = [tuple(r) for r in self.empty_ranges]
        if self.static_range:
            ranges.append(tuple(self.static_range))
        return ranges

    def is_empty(self, frame):
        return any(first <= frame <= last for first, last in self.empty_ranges)

    def is_static(self, frame):
        if not self.static_range:
            return False
        first, last = self.static_range
        return first <= frame <= last


SCENARIOS = {
    "basic": {},
    "noisy-night": {"background_scale": 0.5, "noise_sigma": 8.0},
    "light-switch": {"illumination": 0.5},
}


def scenario_spec(name, **overrides):
    try:
        preset = SCENARIOS[name]
    except KeyError:
        raise ConfigError(
            f"Unrecognized scenario `{name}`; expected one of {', '.join(SCENARIOS)}"
        )
    return dataclasses.replace(SynthSpec(), **{**preset, **overrides})


def background_image(height, width, scale=1.0):
    rows, cols = np.mgrid[0:height, 0:width]
    wave = np.sin(2 * math.pi * rows / height) * np.cos(2 * math.pi * cols / width)
    return np.rint(scale * (BACKGROUND_LEVEL + BACKGROUND_AMPLITUDE * wave))


def sprite_origin(index, spec):
    """Top-left (row, col) of the sprite in 0-based frame `index`.

    The sprite advances half its size per frame along horizontal bands and
    wraps around the right edge.
    """
    step = max(spec.sprite_size // 2, 1)
    pos = index * step
    bands = spec.height // spec.sprite_size
    return (pos // spec.width) % bands * spec.sprite_size, pos % spec.width


def sprite_mask(index, spec):
    mask = np.zeros((spec.height, spec.width), dtype=bool)
    row, col = sprite_origin(index, spec)
    cols = (col + np.arange(spec.sprite_size)) % spec.width
    mask[row : row + spec.sprite_size, cols] = True
    return mask


def frame_mask(frame, spec):
    """Sprite support of 1-based `frame`, empty inside the empty ranges."""
    if spec.is_empty(frame):
        return np.zeros((spec.height, spec.width), dtype=bool)
    if spec.is_static(frame):
        return sprite_mask(spec.static_range[0] - 1, spec)
    return sprite_mask(frame - 1, spec)


def illumination_gain(index, spec):
    if not spec.illumination or spec.n_frames == 1:
        return 1.0
    return 1.0 + spec.illumination * index / (spec.n_frames - 1)


def generate(spec=None):
    spec = spec or SynthSpec()
    spec.validate()
    rng = seeds.get_rng(seeds.derive_seed(spec.seed, "noise"))
    background = background_image(spec.height, spec.width, spec.background_scale)

    frames, masks = [], []
    for index in range(spec.n_frames):
        mask = frame_mask(index + 1, spec)
        image = background * illumination_gain(index, spec)
        image[mask] = SPRITE_INTENSITY
        if spec.noise_sigma:
            image = image + rng.normal(0.0, spec.noise_sigma, image.shape)
        frames.append(vectorize(np.rint(np.clip(image, 0, 255))))
        masks.append(vectorize(np.where(mask, 255.0, 0.0)))

    logging.info(
        f"Generated {spec.n_frames} synthetic {spec.height}x{spec.width} frames"
    )
    return Dataset(
        height=spec.height,
        width=spec.width,
        frames=np.column_stack(frames),
        ground_truth=np.column_stack(masks),
        names=tuple(frame_name(j) for j in range(spec.n_frames)),
    )
