"""Output directories for decompose, evaluate and compare."""
import logging
import pathlib

from . import frames, methods, metrics, reports, storages, timers
from .errors import ConfigError, DataError

ARCHIVE_NAME = "decomposition.mp"
STATE_NAME = "state.json"


def load_manifest_dataset(manifest, threads=1):
    """Load the dataset a manifest describes through the storage caches."""
    manifest = pathlib.Path(manifest)
    if manifest.suffix != ".json":
        return frames.load_from_manifest(manifest, threads)
    storage = storages.CachedFileStorage(manifest.parent, threads=threads)
    return storage.resolve_dataset(manifest.stem)


def decompose(dataset, run_config):
    timing = {}
    with timers.timed(timing):
        result = methods.run_method(
            dataset, run_config.method, run_config.params, run_config.seed
        )
    return result, timing["seconds"]


def state_record(result, run_config, seconds):
    decomposition = result.decomposition
    return {
        "method": run_config.method,
        "seed": run_config.seed,
        "manifest": run_config.manifest,
        "params": result.params,
        "history": result.history,
        "selection": result.selection,
        "rank": result.rank,
        "background_rank": decomposition.background_rank(),
        "svd_count": decomposition.svd_count,
        "timing": {"seconds": seconds},
    }


def write_decomposition(result, dataset, out_dir, run_config, seconds):
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    decomposition = result.decomposition
    h, w = dataset.height, dataset.width
    frames.save_frames(
        decomposition.background, h, w, out_dir / "background", names=dataset.names
    )
    frames.save_frames(
        metrics.foreground_image(decomposition.best_foreground),
        h,
        w,
        out_dir / "foreground",
        names=dataset.names,
    )
    storages.dump_decomposition(decomposition, out_dir / ARCHIVE_NAME)
    reports.write_json(
        state_record(result, run_config, seconds), out_dir / STATE_NAME
    )
    logging.info(f"Wrote {run_config.method} decomposition to {out_dir}")


def run_decompose(run_config, threads=1):
    dataset = load_manifest_dataset(run_config.manifest, threads)
    result, seconds = decompose(dataset, run_config)
    write_decomposition(result, dataset, run_config.out, run_config, seconds)
    return result


def run_evaluate(decomposition_dir, manifest, out_dir, threads=1):
    decomposition_dir = pathlib.Path(decomposition_dir)
    dataset = load_manifest_dataset(manifest, threads)
    if not dataset.has_ground_truth:
        raise DataError(f"ground truth required: {manifest} lists no masks")
    decomposition = storages.load_decomposition(decomposition_dir / ARCHIVE_NAME)
    if decomposition.shape != dataset.frames.shape:
        raise DataError(
            f"decomposition shape {decomposition.shape} does not match "
            f"dataset shape {dataset.frames.shape}"
        )
    extra = {}
    state_path = decomposition_dir / STATE_NAME
    if state_path.exists():
        timing = reports.read_json(state_path).get("timing", {})
        extra["seconds"] = timing.get("seconds")
    report = metrics.evaluate(
        dataset,
        decomposition.best_foreground,
        eps1=decomposition.metadata.get("eps1"),
        threads=threads,
    )
    return reports.write_report(report, dataset, decomposition.method, out_dir, extra)


def run_compare(manifest, method_names, out_dir, seed=0, threads=1, params=None):
    """Run each method on one dataset and tabulate timing and mean metrics."""
    if not method_names:
        raise ConfigError("compare needs at least one method")
    dataset = load_manifest_dataset(manifest, threads)
    rows = []
    for method in method_names:
        timing = {}
        with timers.timed(timing):
            result = methods.run_method(
                dataset, method, (params or {}).get(method), seed
            )
        row = {
            "method": method,
            "seconds": timing["seconds"],
            "iterations": result.iterations,
            "svd_count": result.decomposition.svd_count,
        }
        if dataset.has_ground_truth:
            report = metrics.evaluate(
                dataset,
                result.decomposition.best_foreground,
                threads=threads,
                keep_maps=False,
            )
            row.update(
                auc=report.auc,
                mean_psnr=report.mean_psnr,
                mean_mssim=report.mean_mssim,
            )
        rows.append(row)
        logging.info(f"{method}: {row}")

    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    reports.write_comparison_csv(rows, out_dir / "comparison.csv")
    return rows
