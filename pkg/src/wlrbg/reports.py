"""Evaluation artifacts: CSV tables, SSIM map images, JSON and a prose report."""
import csv
import json
import logging
import math
import pathlib

import jinja2
import markdown
import numpy as np

from . import frames
from .errors import DataError

jinja2_env = jinja2.Environment(
    undefined=jinja2.StrictUndefined, trim_blocks=True, lstrip_blocks=True
)

REPORT_TEMPLATE = """\
# Evaluation of `{{ method }}`

{{ n_frames }} frames of {{ height }}x{{ width }} pixels.

| metric | value |
| --- | --- |
| AUC (100 thresholds) | {{ "%.4f"|format(summary.auc) }} |
{% if summary.exact_auc is not none %}
| AUC (every threshold) | {{ "%.4f"|format(summary.exact_auc) }} |
{% endif %}
| mean PSNR (finite frames) | {{ fmt(summary.mean_psnr) }} |
| frames with infinite PSNR | {{ summary.infinite_psnr_frames }} |
| mean MSSIM | {{ "%.4f"|format(summary.mean_mssim) }} |
| mean MSE | {{ "%.4f"|format(summary.mean_mse) }} |
{% if summary.eps1 is not none %}
| foreground threshold | {{ "%.4f"|format(summary.eps1) }} |
{% endif %}
{% if summary.seconds is defined and summary.seconds is not none %}
| decomposition time (s) | {{ "%.3f"|format(summary.seconds) }} |
{% endif %}

## Frames with the lowest MSSIM

| frame | MSE | PSNR | MSSIM |
| --- | --- | --- | --- |
{% for row in worst %}
| {{ row.frame }} | {{ row.mse }} | {{ row.psnr }} | {{ row.mssim }} |
{% endfor %}
"""


def fmt(value, spec=".3f"):
    if value is None:
        return "n/a"
    if math.isinf(value):
        return "inf"
    return format(value, spec)


def jsonable(value):
    """Plain JSON types; non-finite floats become None."""
    if isinstance(value, dict):
        return {str(k): jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple, set, frozenset)):
        items = sorted(value) if isinstance(value, (set, frozenset)) else value
        return [jsonable(v) for v in items]
    if isinstance(value, np.ndarray):
        return jsonable(value.tolist())
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, pathlib.PurePath):
        return str(value)
    if isinstance(value, float) and not math.isfinite(value):
        return None
    return value


def write_json(record, path):
    with open(path, "w") as fo:
        json.dump(jsonable(record), fo, indent=2, sort_keys=True)
        fo.write("\n")


def read_json(path):
    try:
        with open(path) as fi:
            return json.load(fi)
    except FileNotFoundError:
        raise DataError(f"no such file: {path}")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fo:
        writer = csv.writer(fo)
        writer.writerow(header)
        writer.writerows(rows)


def write_roc_csv(points, path):
    write_csv(
        path,
        ["threshold", "tp", "fp", "tn", "fn", "tpr", "fpr"],
        [
            [p.threshold, p.tp, p.fp, p.tn, p.fn, p.tpr, p.fpr]
            for p in points
        ],
    )


def per_frame_rows(report, names):
    return [
        {"frame": name, "mse": mse, "psnr": psnr, "mssim": mssim}
        for name, mse, psnr, mssim in zip(
            names,
            report.per_frame_mse.tolist(),
            report.per_frame_psnr.tolist(),
            report.per_frame_mssim.tolist(),
        )
    ]


def write_per_frame_csv(report, names, path):
    rows = per_frame_rows(report, names)
    write_csv(
        path,
        ["frame", "mse", "psnr", "mssim"],
        [[r["frame"], r["mse"], r["psnr"], r["mssim"]] for r in rows],
    )


def write_tp_fp_csv(report, names, path):
    write_csv(
        path,
        ["frame", "tp", "fp"],
        [
            [name, int(tp), int(fp)]
            for name, tp, fp in zip(names, report.tp, report.fp)
        ],
    )


def write_ssim_maps(report, names, out_dir):
    """SSIM maps as 8-bit images, 0 and below black, 1 white."""
    maps = report.ssim_maps or []
    if not maps:
        return []
    height, width = maps[0].shape
    columns = np.column_stack(
        [frames.vectorize(np.clip(smap, 0.0, 1.0) * 255.0) for smap in maps]
    )
    return frames.save_frames(columns, height, width, out_dir, names=list(names))


def render_markdown(summary, report, dataset, method, n_worst=5):
    rows = per_frame_rows(report, dataset.names)
    worst = [
        {
            "frame": r["frame"],
            "mse": fmt(r["mse"]),
            "psnr": fmt(r["psnr"]),
            "mssim": fmt(r["mssim"], ".4f"),
        }
        for r in sorted(rows, key=lambda row: (row["mssim"], row["frame"]))[:n_worst]
    ]
    context = {
        "method": method,
        "summary": summary,
        "n_frames": dataset.n_frames,
        "height": dataset.height,
        "width": dataset.width,
        "worst": worst,
        "fmt": fmt,
    }
    try:
        return jinja2_env.from_string(REPORT_TEMPLATE).render(context)
    except jinja2.TemplateError as exc:
        logging.error(f"{exc}--Could not render the evaluation report")
        raise


def render_html(text):
    return markdown.markdown(text, extensions=["tables"])


def write_report(report, dataset, method, out_dir, extra=None):
    """Write every evaluation artifact into `out_dir`; returns the summary."""
    out_dir = pathlib.Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    names = dataset.names
    summary = {"method": method, **report.to_summary(), **(extra or {})}

    write_roc_csv(report.roc, out_dir / "roc.csv")
    write_per_frame_csv(report, names, out_dir / "per_frame.csv")
    if report.tp is not None:
        write_tp_fp_csv(report, names, out_dir / "tp_fp.csv")
    write_ssim_maps(report, names, out_dir / "ssim_maps")
    write_json(summary, out_dir / "summary.json")

    text = render_markdown(summary, report, dataset, method)
    (out_dir / "report.md").write_text(text)
    (out_dir / "report.html").write_text(render_html(text))
    logging.info(f"Wrote evaluation of {method} to {out_dir}")
    return summary


COMPARISON_HEADER = [
    "method",
    "seconds",
    "iterations",
    "svd_count",
    "auc",
    "mean_psnr",
    "mean_mssim",
]


def write_comparison_csv(rows, path):
    write_csv(
        path,
        COMPARISON_HEADER,
        [[row.get(key) for key in COMPARISON_HEADER] for row in rows],
    )
