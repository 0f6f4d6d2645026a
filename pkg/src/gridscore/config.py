"""Pipeline configuration: a line-oriented ``key = value`` file with ``[section]`` headers.

Blank lines and lines starting with ``#`` are ignored.  Every key has a
default (``DEFAULTS`` below); unknown sections or keys are errors that name
the offending line.

Defaults::

    [generator]  n=3000  strata=26  class_mix=0.637,0.108,0.255  theta_mode=false
                 mislabel_rate=0.03  seed=<global>  orientation=any  border_rate=0.2
                 extraneous_rate=0.1  split_wall_rate=0.05  scribble_strokes=4
                 stroke_width=2  jitter=2  layout=row
    [split]      fraction=0.7  seed=<global>
    [grid]       stage=2  models=<stage preset>  optimizers=<stage preset>
                 epochs=<stage preset>  jobs=1
    [training]   batch_size=32  lr=0.001  beta1=0.9  beta2=0.999  eps=1e-7
                 seed=<global>  shuffle=true
    [irt]        a=0.62  b=0.93  c1=-0.88  c2=0.88  D=1.7  mode=avg  split=0.7
                 seed=<global>
    [output]     dir=runs  data_dir=<dir>/data

``<global>`` is the command-line ``--seed``, else the ``GRIDSCORE_SEED``
environment variable, else 0.
"""

import os

from .errors import ConfigError


def _bool(text):
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"expected a boolean, got {text!r}")


def _list(text):
    return [part.strip() for part in text.split(",") if part.strip()]


def _floats(text):
    return [float(v) for v in _list(text)]


def _ints(text):
    return [int(v) for v in _list(text)]


def _optional_int(text):
    return None if text.strip() == "" else int(text)


def _jitter(text):
    t = text.strip().lower()
    return None if t in ("", "none", "any") else int(t)


def _str(text):
    return text.strip()


SEED = object()

# section -> key -> (parser, default)
DEFAULTS = {
    "generator": {
        "n": (int, 3000),
        "strata": (int, 26),
        "class_mix": (_floats, [0.637, 0.108, 0.255]),
        "theta_mode": (_bool, False),
        "mislabel_rate": (float, 0.03),
        "seed": (_optional_int, SEED),
        "orientation": (_str, "any"),
        "border_rate": (float, 0.2),
        "extraneous_rate": (float, 0.1),
        "split_wall_rate": (float, 0.05),
        "scribble_strokes": (int, 4),
        "stroke_width": (int, 2),
        "jitter": (_jitter, 2),
        "layout": (_str, "row"),
    },
    "split": {
        "fraction": (float, 0.7),
        "seed": (_optional_int, SEED),
    },
    "grid": {
        "stage": (int, 2),
        "models": (_list, None),
        "optimizers": (_list, None),
        "epochs": (_ints, None),
        "jobs": (int, 1),
    },
    "training": {
        "batch_size": (int, 32),
        "lr": (float, 0.001),
        "beta1": (float, 0.9),
        "beta2": (float, 0.999),
        "eps": (float, 1e-7),
        "seed": (_optional_int, SEED),
        "shuffle": (_bool, True),
    },
    "irt": {
        "a": (float, 0.62),
        "b": (float, 0.93),
        "c1": (float, -0.88),
        "c2": (float, 0.88),
        "D": (float, 1.7),
        "mode": (_str, "avg"),
        "split": (float, 0.7),
        "seed": (_optional_int, SEED),
    },
    "output": {
        "dir": (_str, "runs"),
        "data_dir": (_str, None),
    },
}

STAGE_PRESETS = {
    1: {
        "models": [
            "ffn2", "cnn1x2-none", "cnn2x2-none", "cnn2x2-none-dropout",
            "cnn1x2-zero", "cnn2x2-zero", "cnn2x2-zero-dropout",
        ],
        "optimizers": ["adam"],
        "epochs": [25, 50],
    },
    2: {
        "models": ["ffn2", "cnn2x2-none", "cnn2x2-none-dropout", "cnn2x2-zero", "cnn2x2-zero-dropout"],
        "optimizers": ["adam", "nadam", "adamax"],
        "epochs": [50],
    },
    3: {
        "models": ["ffn2-dropout", "ffn3-dropout", "ffn4-dropout"] + [
            f"cnn{c}x{f}-{pad}-dropout"
            for c in range(1, 6)
            for f in range(2, 5)
            for pad in ("zero", "none")
            if not (pad == "none" and c == 5)
        ],
        "optimizers": ["nadam"],
        "epochs": [50],
    },
}


def global_seed(cli_seed=None):
    if cli_seed is not None:
        return int(cli_seed)
    env = os.environ.get("GRIDSCORE_SEED")
    if env is not None and env.strip():
        try:
            return int(env)
        except ValueError:
            raise ConfigError(f"GRIDSCORE_SEED must be an integer, got {env!r}") from None
    return 0


def parse_config(text, seed=None):
    """Parse configuration text into ``{section: {key: value}}`` with defaults filled in."""
    values = {section: {} for section in DEFAULTS}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno)
            section = line[1:-1].strip()
            if section not in DEFAULTS:
                raise ConfigError(f"unknown section [{section}]", line=lineno)
            continue
        key, sep, value = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError("expected key = value", line=lineno, key=key or None)
        if section is None:
            raise ConfigError("key outside of any [section]", line=lineno, key=key)
        if key not in DEFAULTS[section]:
            raise ConfigError(f"unknown key in [{section}]", line=lineno, key=key)
        if key in values[section]:
            raise ConfigError(f"duplicate key in [{section}]", line=lineno, key=key)
        parser, _ = DEFAULTS[section][key]
        try:
            values[section][key] = parser(value.split(" #")[0])
        except ValueError as exc:
            raise ConfigError(f"bad value {value.strip()!r}: {exc}", line=lineno, key=key) from None
    return resolve(values, seed)


def resolve(values, seed=None):
    g = global_seed(seed)
    cfg = {}
    for section, keys in DEFAULTS.items():
        cfg[section] = {}
        for key, (_, default) in keys.items():
            value = values.get(section, {}).get(key, default)
            if value is SEED or (key == "seed" and value is None):
                value = g
            if seed is not None and key == "seed":
                value = g
            cfg[section][key] = value
    stage = cfg["grid"]["stage"]
    if stage not in STAGE_PRESETS:
        raise ConfigError(f"stage must be one of {sorted(STAGE_PRESETS)}", key="stage")
    for key in ("models", "optimizers", "epochs"):
        if cfg["grid"][key] is None:
            cfg["grid"][key] = list(STAGE_PRESETS[stage][key])
    if cfg["output"]["data_dir"] is None:
        cfg["output"]["data_dir"] = os.path.join(cfg["output"]["dir"], "data")
    return cfg


def default_config(seed=None):
    return resolve({}, seed)


def load_config(path, seed=None):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read(), seed)
