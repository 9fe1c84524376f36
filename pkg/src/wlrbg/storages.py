import logging
import pathlib
from copy import deepcopy

import msgpack
import numpy as np

from . import frames
from .decompositions import Decomposition
from .errors import DataError


class DatasetNotFoundError(DataError):
    pass


def _default(obj):
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (set, frozenset)):
        return sorted(obj)
    raise TypeError(f"cannot pack {type(obj).__name__}")


def pack_matrix(a):
    if a is None:
        return None
    a = np.asarray(a, dtype=np.float64)
    return {"shape": list(a.shape), "data": a.tobytes(order="F")}


def unpack_matrix(record):
    if record is None:
        return None
    shape = tuple(record["shape"])
    data = np.frombuffer(record["data"], dtype=np.float64)
    return data.reshape(shape, order="F").copy()


def dump_decomposition(decomposition, path):
    record = {
        "method": decomposition.method,
        "background": pack_matrix(decomposition.background),
        "foreground": pack_matrix(decomposition.foreground),
        "foreground_thresholded": pack_matrix(decomposition.foreground_thresholded),
        "svd_count": decomposition.svd_count,
        "metadata": decomposition.metadata,
    }
    with open(path, "wb") as fo:
        msgpack.pack(record, fo, default=_default, use_bin_type=True)


def load_decomposition(path):
    path = pathlib.Path(path)
    try:
        with open(path, "rb") as fi:
            record = msgpack.unpack(fi, raw=False)
    except FileNotFoundError:
        raise DataError(f"no decomposition archive at {path}")
    except (TypeError, ValueError, msgpack.ExtraData) as exc:
        raise DataError(f"corrupt decomposition archive {path}: {exc}")
    return Decomposition(
        background=unpack_matrix(record["background"]),
        foreground=unpack_matrix(record["foreground"]),
        method=record["method"],
        metadata=record["metadata"],
        foreground_thresholded=unpack_matrix(record["foreground_thresholded"]),
        svd_count=record["svd_count"],
    )


class FileStorage:
    """Datasets described by ``<name>.json`` manifests in one directory."""

    def __init__(self, path, threads=1):
        self.path = pathlib.Path(path)
        self.threads = threads

    def list_datasets(self):
        return sorted(fn.stem for fn in self.path.glob("*.json"))

    def manifest_path(self, name):
        path = self.path / f"{name}.json"
        if not path.is_file():
            raise DatasetNotFoundError(name)
        return path

    def resolve_manifest(self, name):
        return frames.load_manifest(self.manifest_path(name))

    def resolve_dataset(self, name):
        return frames.load_from_manifest(self.manifest_path(name), self.threads)


class CompilingFileStorage(FileStorage):
    """Keeps the decoded, resized dataset as ``<name>.mp`` beside its manifest.

    The archive is rebuilt whenever any source file is newer than it.
    """

    def clean(self):
        for name in self.list_datasets():
            (self.path / f"{name}.mp").unlink(missing_ok=True)

    def recompile_datasets(self):
        self.clean()
        for name in self.list_datasets():
            self.resolve_dataset(name)

    def source_mtime(self, name):
        path = self.manifest_path(name)
        _, frame_paths, mask_paths = frames.manifest_sources(path)
        sources = [path, *frame_paths, *(mask_paths or [])]
        return max(fn.stat().st_mtime for fn in sources)

    def resolve_dataset(self, name):
        compiled_fn = self.path / f"{name}.mp"
        mtime = self.source_mtime(name)
        try:
            with open(compiled_fn, "rb") as fi:
                record = msgpack.load(fi, raw=False)
            if record["source_mtime"] < mtime:
                raise ValueError("stale")
            return frames.Dataset(
                height=record["height"],
                width=record["width"],
                frames=unpack_matrix(record["frames"]),
                ground_truth=unpack_matrix(record["ground_truth"]),
                names=tuple(record["names"]),
            )
        except (FileNotFoundError, KeyError, TypeError, ValueError, msgpack.ExtraData):
            logging.debug(f"Compiling dataset {name} into {compiled_fn}")
            dataset = super().resolve_dataset(name)
            record = {
                "source_mtime": mtime,
                "height": dataset.height,
                "width": dataset.width,
                "names": list(dataset.names),
                "frames": pack_matrix(dataset.frames),
                "ground_truth": pack_matrix(dataset.ground_truth),
            }
            with open(compiled_fn, "wb") as fo:
                msgpack.dump(record, fo, use_bin_type=True)
            return dataset


class CachedFileStorage(CompilingFileStorage):
    """Compiling storage with a process-wide in-memory layer.

    Entries are keyed by manifest path and newest source mtime, and every
    caller gets its own copy.
    """

    _datasets = {}

    def resolve_dataset(self, name):
        key = (str(self.manifest_path(name).resolve()), self.source_mtime(name))
        try:
            return deepcopy(self._datasets[key])
        except KeyError:
            self._datasets[key] = super().resolve_dataset(name)
            return self.resolve_dataset(name)
