"""Method defaults, `--param` parsing and run configuration files."""
import pathlib
from dataclasses import dataclass, field

import yaml
from funcy import omit, project

from .errors import ConfigError

METHOD_NAMES = ("wlr-pipeline", "wlr", "gtls", "golub", "iealm", "apg")

DEFAULTS = {
    "wlr-pipeline": {
        "i1": 2,
        "i2": 1,
        "epsilon": 1e-7,
        "wlr_max_iter": 50,
        "w1_low": 500.0,
        "w1_high": 1000.0,
        "eps1_strategy": "otsu",
    },
    "wlr": {
        "k": 1,
        "r": 2,
        "epsilon": 1e-7,
        "max_iter": 50,
        "w1_low": 500.0,
        "w1_high": 1000.0,
    },
    "gtls": {"k": 1, "r": 2, "lambda": 750.0},
    "golub": {"k": 1, "r": 2},
    "iealm": {
        "lambda": None,
        "mu": 1.5,
        "rho": 1.25,
        "tol": 1e-7,
        "max_iter": 500,
    },
    "apg": {
        "lambda": None,
        "tol": 1e-7,
        "max_iter": 500,
        "eta": 0.9,
        "mu_floor": 1e-6,
        "debias_sweeps": 100,
    },
}

# keys whose default is None but which take a float once set
OPTIONAL_FLOATS = {"lambda"}

RUN_CONFIG_KEYS = {"method", "manifest", "out", "seed", "params"}


def check_method(method):
    if method not in DEFAULTS:
        raise ConfigError(
            f"Unrecognized method `{method}`; expected one of {', '.join(METHOD_NAMES)}"
        )
    return method


def _coerce(method, key, default, value):
    where = f"{method}.{key}"
    if key in OPTIONAL_FLOATS and value is None:
        return None
    if isinstance(default, str):
        if not isinstance(value, str):
            raise ConfigError(f"{where} must be a string, got {value!r}")
        return value
    if isinstance(value, str):
        # YAML 1.1 reads exponents without a dot, like 1e-7, as strings
        try:
            value = float(value)
        except ValueError:
            raise ConfigError(f"{where} must be a number, got {value!r}")
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    if isinstance(default, int):
        if not float(value).is_integer():
            raise ConfigError(f"{where} must be an integer, got {value!r}")
        return int(value)
    return float(value)


def resolve_params(method, overrides=None):
    """Defaults for `method` updated by `overrides`; unknown keys are errors."""
    defaults = DEFAULTS[check_method(method)]
    overrides = dict(overrides or {})
    unknown = omit(overrides, defaults)
    if unknown:
        raise ConfigError(
            f"unknown parameter(s) for {method}: {', '.join(sorted(unknown))}; "
            f"expected {', '.join(defaults)}"
        )
    params = dict(defaults)
    for key, value in project(overrides, defaults).items():
        params[key] = _coerce(method, key, defaults[key], value)
    return params


def parse_param(text):
    key, sep, raw = text.partition("=")
    key = key.strip()
    if not sep or not key:
        raise ConfigError(f"expected key=value, got `{text}`")
    try:
        value = yaml.safe_load(raw) if raw.strip() else None
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse value of {key}: {exc}")
    return key, value


def parse_params(texts):
    params = {}
    for text in texts:
        key, value = parse_param(text)
        params[key] = value
    return params


@dataclass
class RunConfig:
    method: str = "wlr-pipeline"
    manifest: pathlib.Path = None
    out: pathlib.Path = None
    seed: object = 0
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        check_method(self.method)
        if self.manifest is not None:
            self.manifest = pathlib.Path(self.manifest)
        if self.out is not None:
            self.out = pathlib.Path(self.out)

    def resolved_params(self):
        return resolve_params(self.method, self.params)

    def updated(self, **kwargs):
        """A copy with every non-None keyword applied; params are merged."""
        values = {
            "method": self.method,
            "manifest": self.manifest,
            "out": self.out,
            "seed": self.seed,
            "params": dict(self.params),
        }
        for key, value in kwargs.items():
            if value is None:
                continue
            if key == "params":
                values["params"].update(value)
            else:
                values[key] = value
        return RunConfig(**values)


def load_run_config(path):
    path = pathlib.Path(path)
    try:
        with open(path) as fi:
            doc = yaml.safe_load(fi) or {}
    except FileNotFoundError:
        raise ConfigError(f"no such run config: {path}")
    except yaml.YAMLError as exc:
        raise ConfigError(f"could not parse run config {path}: {exc}")
    if not isinstance(doc, dict):
        raise ConfigError(f"run config {path} is not a mapping")
    unknown = set(doc) - RUN_CONFIG_KEYS
    if unknown:
        raise ConfigError(
            f"unknown run config keys in {path}: {', '.join(sorted(unknown))}"
        )
    params = doc.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError(f"params in {path} must be a mapping")
    # relative paths in the file are relative to the file
    for key in ("manifest", "out"):
        if doc.get(key) is not None:
            doc[key] = path.parent / doc[key]
    config = RunConfig(**{**doc, "params": params})
    config.resolved_params()
    return config


def dump_defaults():
    return yaml.safe_dump(
        {method: dict(DEFAULTS[method]) for method in METHOD_NAMES},
        sort_keys=False,
        default_flow_style=False,
    )
