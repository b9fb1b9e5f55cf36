"""Flat ``key = value`` experiment configuration.

One setting per line; ``#`` starts a comment. Values are parsed as JSON
(numbers, lists, ``true``/``false``, quoted strings) and fall back to a bare
string. Unknown or repeated keys are errors that point at the offending line.
"""

import json
from dataclasses import asdict, dataclass, field, fields

from ..exceptions import ConfigError
from ..model import SEQUENCE_KINDS, default_noise_var
from ..solvers import REGULARIZERS

EXPERIMENTS = ("phase", "phase-embed", "roc", "error-dist", "compare-nnls", "joint")
FORMATS = ("csv", "json")


@dataclass
class ExperimentConfig:
    experiment: str = "phase"
    seed: int = None
    N: int = 200
    K: int = 10
    L: int = 14
    M: int = 64
    noise_var: float = None
    gamma_active: float = 1.0
    kind: str = "gaussian"
    b: int = 0
    L_list: list = field(default_factory=lambda: [8, 10, 12, 14])
    K_list: list = field(default_factory=lambda: [5, 10, 20, 40])
    trials: int = 20
    method: str = "covmatch_lp"
    overlay_empirical: bool = False
    n_samples: int = 500
    n_thresholds: int = 201
    threshold_max: float = None
    l_th: float = 0.5
    arms: list = field(default_factory=lambda: ["mle", "nnls"])
    regularizer: str = "none"
    lam: float = 0.0
    eps: float = 0.1
    max_sweeps: int = 500
    tol: float = 1e-4
    threads: int = 1
    out: str = "results"
    format: str = "csv"

    def resolved(self):
        """Copy with derived defaults filled in."""
        data = asdict(self)
        if data["threshold_max"] is None:
            data["threshold_max"] = 2.0 * self.gamma_active
        return ExperimentConfig(**data)

    def noise_for(self, L=None):
        """``noise_var`` if set, else the 10 dB default for sequence length ``L``."""
        if self.noise_var is not None:
            return self.noise_var
        return default_noise_var(self.L if L is None else L, self.gamma_active)

    def to_dict(self):
        return asdict(self)


_INT = ("seed", "N", "K", "L", "M", "b", "trials", "n_samples", "n_thresholds", "max_sweeps", "threads")
_FLOAT = ("noise_var", "gamma_active", "threshold_max", "l_th", "lam", "eps", "tol")
_INT_LIST = ("L_list", "K_list")


def _is_int(v):
    return isinstance(v, int) and not isinstance(v, bool)


def _check_value(key, value, lineno, path):
    def fail(msg):
        raise ConfigError(f"{key}: {msg}", lineno, path)

    if key in _INT:
        if not _is_int(value):
            fail(f"expected an integer, got {value!r}")
        if value < 0 or (value == 0 and key not in ("b", "seed")):
            fail(f"must be {'>= 0' if key in ('b', 'seed') else '> 0'}, got {value}")
    elif key in _FLOAT:
        if value is None and key in ("noise_var", "threshold_max"):
            return value
        if not isinstance(value, (int, float)) or isinstance(value, bool):
            fail(f"expected a number, got {value!r}")
        value = float(value)
        if value < 0 or (value == 0 and key not in ("lam", "l_th")):
            fail(f"must be positive, got {value}")
    elif key in _INT_LIST:
        if not isinstance(value, list) or not value or not all(_is_int(v) and v >= 0 for v in value):
            fail(f"expected a non-empty list of non-negative integers, got {value!r}")
    elif key == "arms":
        if not isinstance(value, list) or not value or not all(v in ("mle", "nnls") for v in value):
            fail(f"expected a non-empty list drawn from ['mle', 'nnls'], got {value!r}")
    elif key == "overlay_empirical":
        if not isinstance(value, bool):
            fail(f"expected true or false, got {value!r}")
    else:
        choices = {
            "experiment": EXPERIMENTS,
            "kind": SEQUENCE_KINDS,
            "method": ("covmatch_lp", "fim_lp"),
            "regularizer": REGULARIZERS,
            "format": FORMATS,
        }.get(key)
        if not isinstance(value, str):
            fail(f"expected a string, got {value!r}")
        if choices is not None and value not in choices:
            fail(f"expected one of {list(choices)}, got {value!r}")
    return value


def parse_config_text(text, path=None):
    """Parse config text into ``(values, line_of_key)``."""
    known = {f.name for f in fields(ExperimentConfig)}
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", lineno, path)
        key, _, rhs = line.partition("=")
        key, rhs = key.strip(), rhs.strip()
        if key not in known:
            raise ConfigError(f"unknown key {key!r}", lineno, path)
        if key in values:
            raise ConfigError(f"duplicate key {key!r} (first set on line {lines[key]})", lineno, path)
        if not rhs:
            raise ConfigError(f"missing value for {key!r}", lineno, path)
        try:
            value = json.loads(rhs)
        except json.JSONDecodeError:
            value = rhs
        values[key] = _check_value(key, value, lineno, path)
        lines[key] = lineno
    return values, lines


def load_config(path=None, text=None, overrides=None):
    """Build an :class:`ExperimentConfig` from a file or text plus CLI overrides.

    Cross-field checks (e.g. ``K <= N``) report the line of the later key.
    """
    if text is None and path is not None:
        try:
            with open(path, encoding="utf-8") as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"cannot read config: {exc}", None, path) from exc
    values, lines = parse_config_text(text or "", path)
    for key, value in (overrides or {}).items():
        if key == "experiment" and "experiment" in values and values["experiment"] != value:
            raise ConfigError(f"config is for experiment {values['experiment']!r}, not {value!r}", lines["experiment"], path)
        if value is not None:
            values[key] = _check_value(key, value, None, "<command line>")
            lines.pop(key, None)
    cfg = ExperimentConfig(**values)

    def line_of(*keys):
        found = [lines[k] for k in keys if k in lines]
        return max(found) if found else None

    if cfg.seed is None:
        raise ConfigError("seed is required (set 'seed' in the config or pass --seed)", None, path)
    if cfg.K > cfg.N:
        raise ConfigError(f"K={cfg.K} exceeds N={cfg.N}", line_of("K", "N"), path)
    if any(k > cfg.N for k in cfg.K_list):
        raise ConfigError(f"K_list has entries above N={cfg.N}", line_of("K_list", "N"), path)
    if cfg.experiment in ("compare-nnls",) and cfg.regularizer != "none":
        raise ConfigError("compare-nnls runs the unregularized MLE; drop 'regularizer'", line_of("regularizer"), path)
    return cfg.resolved()
