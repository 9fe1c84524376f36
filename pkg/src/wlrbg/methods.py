"""Named decomposition methods with a uniform calling convention.

Every runner takes ``(dataset, params, seed)`` with `params` already
resolved against the defaults table and returns a `MethodResult`.
"""
import logging
from dataclasses import dataclass, field

from funcy import project

from . import config, pipeline, rpca, seeds, wlr
from .decompositions import Decomposition
from .errors import ConfigError

RPCA_HISTORY_KEYS = (
    "mu_history",
    "residual_history",
    "iterations",
    "debias_sweeps",
    "converged",
)


@dataclass
class MethodResult:
    decomposition: Decomposition
    params: dict
    history: dict = field(default_factory=dict)
    selection: dict = None
    rank: int = None

    @property
    def iterations(self):
        return self.history.get("iterations", 0)


def split_first_block(a, k):
    n = a.shape[1]
    if not 0 < k <= n:
        raise ConfigError(f"k must satisfy 0 < k <= n={n}, got k={k}")
    return a[:, :k], a[:, k:]


def run_wlr_pipeline(dataset, params, seed):
    pipeline_config = pipeline.PipelineConfig(seed=seed, **params)
    decomposition, selection, state = pipeline.run_pipeline(dataset, pipeline_config)
    return MethodResult(
        decomposition=decomposition,
        params=params,
        history=state.to_record(),
        selection=selection.to_record(),
        rank=selection.r,
    )


def run_wlr(dataset, params, seed):
    a = dataset.frames
    a1, a2 = split_first_block(a, params["k"])
    rng = seeds.get_rng(seeds.derive_seed(seed, "weights"))
    w1 = rng.uniform(params["w1_low"], params["w1_high"], size=a1.shape)
    wlr_config = wlr.WlrConfig(
        r=params["r"],
        k=params["k"],
        epsilon=params["epsilon"],
        max_iter=params["max_iter"],
        seed=seeds.derive_seed(seed, "wlr"),
    )
    state, decomposition = wlr.solve_wlr(a1, a2, w1, wlr_config)
    return MethodResult(
        decomposition=decomposition,
        params=params,
        history=state.to_record(),
        rank=params["r"],
    )


def run_gtls(dataset, params, seed):
    a = dataset.frames
    a1, a2 = split_first_block(a, params["k"])
    x = wlr.solve_gtls(a1, a2, params["lambda"], params["r"])
    objective = wlr.gtls_objective(a1, a2, x, params["lambda"])
    decomposition = Decomposition.from_background(
        a, x, "gtls", metadata={"objective": objective}, svd_count=1
    )
    return MethodResult(
        decomposition=decomposition,
        params=params,
        history={"iterations": 0, "objective": objective},
        rank=params["r"],
    )


def run_golub(dataset, params, seed):
    a = dataset.frames
    a1, a2 = split_first_block(a, params["k"])
    x = wlr.golub_solve(a1, a2, params["r"])
    objective = wlr.golub_objective(a1, a2, x)
    decomposition = Decomposition.from_background(
        a, x, "golub", metadata={"objective": objective}, svd_count=2
    )
    return MethodResult(
        decomposition=decomposition,
        params=params,
        history={"iterations": 0, "objective": objective},
        rank=params["r"],
    )


def _rpca_config(params):
    return rpca.RpcaConfig(lam=params.pop("lambda"), **params)


def _run_rpca(solver, dataset, params):
    decomposition = solver(dataset.frames, _rpca_config(dict(params)))
    resolved = {**params, "lambda": decomposition.metadata["lambda"]}
    return MethodResult(
        decomposition=decomposition,
        params=resolved,
        history=project(decomposition.metadata, RPCA_HISTORY_KEYS),
    )


def run_iealm(dataset, params, seed):
    return _run_rpca(rpca.solve_iealm, dataset, params)


def run_apg(dataset, params, seed):
    return _run_rpca(rpca.solve_apg, dataset, params)


def parse_method(method):
    if method == "wlr-pipeline":
        return run_wlr_pipeline
    elif method == "wlr":
        return run_wlr
    elif method == "gtls":
        return run_gtls
    elif method == "golub":
        return run_golub
    elif method == "iealm":
        return run_iealm
    elif method == "apg":
        return run_apg
    else:
        raise ConfigError(
            f"Unrecognized method `{method}`; "
            f"expected one of {', '.join(config.METHOD_NAMES)}"
        )


def run_method(dataset, method, params=None, seed=0):
    runner = parse_method(method)
    params = config.resolve_params(method, params)
    logging.info(f"Running {method} on {dataset.n_frames} frames with {params}")
    return runner(dataset, params, seed)
