import atexit
import contextlib
import logging
import pathlib
import sys

import click

from . import config, frames, runs, synth
from .errors import ConfigError, WlrbgError

PATH = click.Path(path_type=pathlib.Path)
EXISTING_FILE = click.Path(
    exists=True,
    file_okay=True,
    dir_okay=False,
    readable=True,
    resolve_path=True,
    path_type=pathlib.Path,
)
EXISTING_DIR = click.Path(
    exists=True,
    file_okay=False,
    dir_okay=True,
    readable=True,
    resolve_path=True,
    path_type=pathlib.Path,
)


class CommandError(click.ClickException):
    def __init__(self, message, exit_code):
        super().__init__(message)
        self.exit_code = exit_code


@contextlib.contextmanager
def stage(name):
    """Report library errors as one-line messages with their exit codes."""
    try:
        yield
    except WlrbgError as exc:
        logging.debug(f"{name} failed", exc_info=True)
        raise CommandError(f"{name}: {exc}", exc.exit_code) from exc


def parse_seed(value):
    if value is None:
        return None
    try:
        return int(value)
    except ValueError:
        return value


def parse_interval(text):
    first, sep, last = text.partition("-")
    try:
        return int(first), int(last if sep else first)
    except ValueError:
        raise click.BadParameter(f"expected FIRST-LAST, got `{text}`")


def print_defaults(ctx, param, value):
    if not value or ctx.resilient_parsing:
        return
    click.echo(config.dump_defaults(), nl=False)
    ctx.exit()


@click.group()
@click.option("--debug", is_flag=True)
@click.option("--pdb", is_flag=True)
@click.option(
    "--threads",
    default=1,
    type=click.IntRange(min=1),
    envvar="WLRBG_THREADS",
    show_envvar=True,
    help="Worker threads for frame loading and per-frame metrics. Default 1.",
)
@click.option(
    "--print-defaults",
    is_flag=True,
    expose_value=False,
    is_eager=True,
    callback=print_defaults,
    help="Print every method's default parameters as YAML and exit.",
)
@click.pass_context
def main(ctx, debug, pdb, threads):
    """Background/foreground separation of video by weighted low-rank approximation."""
    logging.basicConfig(level=logging.DEBUG if debug else logging.INFO)
    ctx.obj = {"threads": threads}
    if pdb:

        @atexit.register
        def debug_on_exit():
            if hasattr(sys, "last_traceback"):
                try:
                    import ipdb as pdb
                except ImportError:
                    import pdb
                pdb.pm()


@main.command("synth")
@click.argument("out", type=PATH)
@click.option(
    "--scenario",
    type=click.Choice(sorted(synth.SCENARIOS)),
    default="basic",
    help="Preset to start from. Default basic.",
)
@click.option("--height", type=int, help="Frame height. Default 64.")
@click.option("--width", type=int, help="Frame width. Default 80.")
@click.option("--n-frames", type=int, help="Number of frames. Default 120.")
@click.option("--sprite-size", type=int, help="Sprite side in pixels. Default 12.")
@click.option(
    "--empty",
    multiple=True,
    help="1-based FIRST-LAST frames with no sprite; repeatable. "
    "Default 2-5 and 90-100.",
)
@click.option("--static", help="1-based FIRST-LAST frames where the sprite stops.")
@click.option("--noise-sigma", type=float, help="Gaussian noise level.")
@click.option("--illumination", type=float, help="Illumination ramp amplitude.")
@click.option("--seed", help="Seed for the noise generator. Default 0.")
def synth_command(out, scenario, empty, static, seed, **options):
    """Write a synthetic frame sequence, its masks and a manifest to OUT.

    Example:

    \b
    $ wlrbg synth data/basic
    $ wlrbg synth data/night --scenario noisy-night --seed 3
    """
    overrides = {key: value for key, value in options.items() if value is not None}
    if empty:
        overrides["empty_ranges"] = tuple(parse_interval(text) for text in empty)
    if static:
        overrides["static_range"] = parse_interval(static)
    if seed is not None:
        overrides["seed"] = parse_seed(seed)
    with stage("synth"):
        spec = synth.scenario_spec(scenario, **overrides)
        dataset = synth.generate(spec)
        manifest = frames.write_dataset(dataset, out)
    click.echo(str(manifest))


def build_run_config(config_path, method, manifest, out, seed, params):
    run_config = config.load_run_config(config_path) if config_path else None
    run_config = (run_config or config.RunConfig()).updated(
        method=method,
        manifest=manifest,
        out=out,
        seed=parse_seed(seed),
        params=config.parse_params(params),
    )
    if run_config.manifest is None:
        raise click.UsageError("a dataset manifest is required (--manifest)")
    if run_config.out is None:
        raise click.UsageError("an output directory is required (--out)")
    return run_config


@main.command()
@click.option("--manifest", type=EXISTING_FILE, help="Dataset manifest.")
@click.option(
    "--method",
    type=click.Choice(config.METHOD_NAMES),
    help="Decomposition method. Default wlr-pipeline.",
)
@click.option("--out", type=PATH, help="Output directory.")
@click.option("--seed", help="Seed for every random draw. Default 0.")
@click.option(
    "--param",
    "params",
    multiple=True,
    help="Method parameter as key=value; repeatable.",
)
@click.option(
    "--config",
    "config_path",
    type=EXISTING_FILE,
    help="YAML run config; command-line options override it.",
)
@click.pass_obj
def decompose(obj, manifest, method, out, seed, params, config_path):
    """Split a dataset into background and foreground.

    Writes background/ and foreground/ frames, decomposition.mp and
    state.json into the output directory.

    Example:

    \b
    $ wlrbg decompose --manifest data/basic/manifest.json --out runs/wlr
    $ wlrbg decompose --manifest data/basic/manifest.json --out runs/iealm \\
        --method iealm --param max_iter=200
    """
    with stage("decompose"):
        run_config = build_run_config(config_path, method, manifest, out, seed, params)
    with stage(f"decompose[{run_config.method}]"):
        result = runs.run_decompose(run_config, threads=obj["threads"])
    click.echo(
        f"{run_config.method}: {result.iterations} iterations, "
        f"output in {run_config.out}"
    )


@main.command()
@click.argument("decomposition_dir", type=EXISTING_DIR)
@click.option(
    "--manifest", type=EXISTING_FILE, required=True, help="Dataset manifest."
)
@click.option("--out", type=PATH, required=True, help="Report directory.")
@click.pass_obj
def evaluate(obj, decomposition_dir, manifest, out):
    """Score a decomposition against the dataset's ground-truth masks."""
    with stage("evaluate"):
        summary = runs.run_evaluate(
            decomposition_dir, manifest, out, threads=obj["threads"]
        )
    click.echo(f"AUC {summary['auc']:.4f}, mean MSSIM {summary['mean_mssim']:.4f}")


def parse_method_params(texts):
    """Parse ``method.key=value`` options into per-method override tables."""
    params = {}
    for text in texts:
        key, value = config.parse_param(text)
        method, sep, name = key.partition(".")
        if not sep or not name:
            raise ConfigError(f"expected method.key=value, got `{text}`")
        params.setdefault(config.check_method(method), {})[name] = value
    return params


@main.command()
@click.argument("methods", nargs=-1, type=click.Choice(config.METHOD_NAMES))
@click.option(
    "--manifest", type=EXISTING_FILE, required=True, help="Dataset manifest."
)
@click.option("--out", type=PATH, required=True, help="Output directory.")
@click.option("--seed", default="0", help="Seed for every method. Default 0.")
@click.option(
    "--param",
    "params",
    multiple=True,
    help="Method parameter as method.key=value; repeatable.",
)
@click.pass_obj
def compare(obj, methods, manifest, out, seed, params):
    """Run METHODS on one dataset and write comparison.csv.

    Example:

    \b
    $ wlrbg compare wlr-pipeline iealm apg \\
        --manifest data/basic/manifest.json --out runs/compare
    """
    if not methods:
        raise click.UsageError("name at least one method to compare")
    with stage("compare"):
        rows = runs.run_compare(
            manifest,
            list(methods),
            out,
            seed=parse_seed(seed),
            threads=obj["threads"],
            params=parse_method_params(params),
        )
    for row in rows:
        click.echo(
            f"{row['method']}: {row['seconds']:.3f}s, "
            f"{row['iterations']} iterations, {row['svd_count']} SVDs"
        )
