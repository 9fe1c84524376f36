"""Grayscale frame sequences as frames-as-columns matrices.

Each frame is resized, stacked column-major into one column, and the
columns are ordered by file name.
"""
import json
import logging
import pathlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import cv2
import numpy as np
import yaml

from .errors import ConfigError, DataError

FRAME_SUFFIXES = (".pgm", ".png")
MANIFEST_NAME = "manifest.json"
MANIFEST_KEYS = {"height", "width", "n_frames", "frame_glob", "gt_glob"}


@dataclass(frozen=True)
class Dataset:
    height: int
    width: int
    frames: np.ndarray
    ground_truth: np.ndarray = None
    names: tuple = ()

    def __post_init__(self):
        m = self.height * self.width
        if self.frames.ndim != 2 or self.frames.shape[0] != m:
            raise DataError(
                f"frames must have {m} rows for {self.height}x{self.width} frames, "
                f"got shape {self.frames.shape}"
            )
        truth = self.ground_truth
        if truth is not None and truth.shape != self.frames.shape:
            raise DataError(
                f"ground truth shape {self.ground_truth.shape} does not match "
                f"frames shape {self.frames.shape}"
            )
        if not self.names:
            object.__setattr__(
                self, "names", tuple(frame_name(j) for j in range(self.n_frames))
            )
        elif len(self.names) != self.n_frames:
            raise DataError(f"{len(self.names)} names for {self.n_frames} frames")

    @property
    def n_frames(self):
        return self.frames.shape[1]

    @property
    def has_ground_truth(self):
        return self.ground_truth is not None

    def frame(self, j):
        return devectorize(self.frames[:, j], self.height, self.width)

    def mask(self, j):
        if self.ground_truth is None:
            raise DataError("dataset has no ground truth")
        return devectorize(self.ground_truth[:, j], self.height, self.width)


def frame_name(index, prefix="frame"):
    """File stem for 0-based frame `index`; file names count from 1."""
    return f"{prefix}_{index + 1:06d}"


def vectorize(frame):
    frame = np.asarray(frame)
    if frame.ndim != 2:
        raise DataError(f"expected a 2-D frame, got shape {frame.shape}")
    return frame.flatten(order="F")


def devectorize(column, height, width):
    column = np.asarray(column)
    if column.size != height * width:
        raise DataError(
            f"cannot shape {column.size} values into a {height}x{width} frame"
        )
    return column.reshape((height, width), order="F")


def to_luma(image):
    """Single-channel view of `image`; colour goes through BT.601 weights."""
    if image.ndim == 2:
        return image
    if image.ndim == 3 and image.shape[2] == 3:
        return cv2.cvtColor(image, cv2.COLOR_BGR2GRAY)
    if image.ndim == 3 and image.shape[2] == 4:
        return cv2.cvtColor(image, cv2.COLOR_BGRA2GRAY)
    raise DataError(f"unsupported image layout {image.shape}")


def read_image(path):
    path = pathlib.Path(path)
    image = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if image is None:
        raise DataError(f"could not read image {path}")
    image = to_luma(image)
    if image.dtype == np.uint16:
        return image.astype(np.float64) / 257.0
    return image.astype(np.float64)


def resize(image, height, width, interpolation=cv2.INTER_LINEAR):
    if image.shape == (height, width):
        return image
    return cv2.resize(image, (width, height), interpolation=interpolation)


def is_frame_file(path):
    return path.suffix.lower() in FRAME_SUFFIXES


def list_frames(directory, pattern="*"):
    directory = pathlib.Path(directory)
    if not directory.is_dir():
        raise DataError(f"no such frame directory: {directory}")
    return sorted(
        (p for p in directory.glob(pattern) if is_frame_file(p)),
        key=lambda p: p.name,
    )


def _read_all(paths, threads):
    if threads < 1:
        raise ConfigError(f"threads must be at least 1, got {threads}")
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(read_image, paths))


def _check_geometry(images, paths):
    shape = images[0].shape
    for image, path in zip(images, paths):
        if image.shape != shape:
            raise DataError(
                f"{path} is {image.shape[0]}x{image.shape[1]}, "
                f"expected {shape[0]}x{shape[1]} like {paths[0]}"
            )
    return shape


def match_masks(frame_paths, mask_paths):
    by_stem = {p.stem: p for p in mask_paths}
    missing = [p.name for p in frame_paths if p.stem not in by_stem]
    if missing:
        raise DataError(f"no ground-truth mask for {', '.join(missing[:5])}")
    return [by_stem[p.stem] for p in frame_paths]


def read_dataset(frame_paths, mask_paths=None, height=None, width=None, threads=1):
    frame_paths = [pathlib.Path(p) for p in frame_paths]
    if not frame_paths:
        raise DataError("no frames to load")
    images = _read_all(frame_paths, threads)
    source_h, source_w = _check_geometry(images, frame_paths)
    height = height or source_h
    width = width or source_w
    frames = np.column_stack(
        [vectorize(resize(image, height, width)) for image in images]
    )
    logging.info(
        f"Loaded {len(frame_paths)} frames of {source_h}x{source_w} "
        f"as {height}x{width}"
    )

    ground_truth = None
    if mask_paths is not None:
        mask_paths = match_masks(frame_paths, [pathlib.Path(p) for p in mask_paths])
        masks = _read_all(mask_paths, threads)
        _check_geometry(masks, mask_paths)
        ground_truth = np.column_stack(
            [
                vectorize(resize(mask, height, width, cv2.INTER_NEAREST))
                for mask in masks
            ]
        )
        ground_truth = np.where(ground_truth > 127, 255.0, 0.0)

    return Dataset(
        height=height,
        width=width,
        frames=frames,
        ground_truth=ground_truth,
        names=tuple(p.stem for p in frame_paths),
    )


def load_dataset(frames_dir, gt_dir=None, height=None, width=None, threads=1):
    frame_paths = list_frames(frames_dir)
    mask_paths = list_frames(gt_dir) if gt_dir is not None else None
    return read_dataset(frame_paths, mask_paths, height, width, threads)


def load_manifest(path):
    path = pathlib.Path(path)
    try:
        with open(path) as fi:
            manifest = yaml.safe_load(fi)
    except FileNotFoundError:
        raise DataError(f"no such manifest: {path}")
    except yaml.YAMLError as exc:
        raise DataError(f"could not parse manifest {path}: {exc}")
    if not isinstance(manifest, dict):
        raise DataError(f"manifest {path} is not a mapping")
    unknown = set(manifest) - MANIFEST_KEYS
    if unknown:
        raise DataError(
            f"unknown manifest keys in {path}: {', '.join(sorted(unknown))}"
        )
    missing = {"height", "width", "frame_glob"} - set(manifest)
    if missing:
        raise DataError(f"manifest {path} lacks {', '.join(sorted(missing))}")
    return manifest


def manifest_sources(path):
    """Frame and mask paths a manifest points at, relative to its directory."""
    path = pathlib.Path(path)
    manifest = load_manifest(path)
    base = path.parent
    frame_paths = sorted(
        (p for p in base.glob(manifest["frame_glob"]) if is_frame_file(p)),
        key=lambda p: p.name,
    )
    mask_paths = None
    if manifest.get("gt_glob"):
        mask_paths = sorted(base.glob(manifest["gt_glob"]), key=lambda p: p.name)
    expected = manifest.get("n_frames")
    if expected is not None and expected != len(frame_paths):
        raise DataError(
            f"manifest {path} promises {expected} frames, found {len(frame_paths)}"
        )
    return manifest, frame_paths, mask_paths


def load_from_manifest(path, threads=1):
    manifest, frame_paths, mask_paths = manifest_sources(path)
    return read_dataset(
        frame_paths,
        mask_paths,
        height=manifest["height"],
        width=manifest["width"],
        threads=threads,
    )


def to_uint8(matrix):
    return np.clip(np.rint(matrix), 0, 255).astype(np.uint8)


def save_frames(matrix, height, width, out_dir, names=None, suffix=".pgm"):
    matrix = np.asarray(matrix, dtype=np.float64)
    if matrix.ndim != 2 or matrix.shape[0] != height * width:
        raise DataError(
            f"cannot save a {matrix.shape} matrix as {height}x{width} frames"
        )
    out_dir = pathlib.Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise DataError(f"cannot create {out_dir}: {exc}")
    names = names or [frame_name(j) for j in range(matrix.shape[1])]
    pixels = to_uint8(matrix)
    written = []
    for j, name in enumerate(names):
        path = out_dir / f"{name}{suffix}"
        try:
            ok = cv2.imwrite(str(path), devectorize(pixels[:, j], height, width))
        except cv2.error as exc:
            raise DataError(f"could not write {path}: {exc}")
        if not ok:
            raise DataError(f"could not write {path}")
        written.append(path)
    logging.debug(f"Wrote {len(written)} frames to {out_dir}")
    return written


def write_dataset(dataset, out_dir):
    """Write frames/, masks/ and a manifest; returns the manifest path."""
    out_dir = pathlib.Path(out_dir)
    h, w = dataset.height, dataset.width
    save_frames(dataset.frames, h, w, out_dir / "frames", names=dataset.names)
    manifest = {
        "height": h,
        "width": w,
        "n_frames": dataset.n_frames,
        "frame_glob": "frames/*.pgm",
    }
    if dataset.has_ground_truth:
        save_frames(dataset.ground_truth, h, w, out_dir / "masks", names=dataset.names)
        manifest["gt_glob"] = "masks/*.pgm"
    manifest_path = out_dir / MANIFEST_NAME
    with open(manifest_path, "w") as fo:
        json.dump(manifest, fo, indent=2, sort_keys=True)
    return manifest_path
