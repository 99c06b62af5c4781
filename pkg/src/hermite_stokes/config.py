"""Flat ``section.key = value`` configuration files.

Lines starting with ``#`` or ``;`` are comments. Every key must belong to
the schema below; values are converted to the schema type. Missing keys
take their defaults.
"""
from __future__ import annotations

import configparser

_NONE = ("", "none", "null", "auto")


def _opt(conv):
    def f(s):
        return None if s.strip().lower() in _NONE else conv(s)
    f.__name__ = f"optional {conv.__name__}"
    return f


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _list(s):
    return [x.strip() for x in s.split(",") if x.strip()]


def _floats(s):
    return tuple(float(x) for x in _list(s))


SCHEMA = {
    "run.seed": (int, 0),
    "run.n_modes": (int, 8),
    "run.n_quad": (_opt(int), None),
    "operators.epsilon": (float, 0.25),
    "operators.lambda1_override": (_opt(float), None),
    "operators.cache": (_opt(str), None),
    "estimates.samples": (int, 200),
    "estimates.invariant_samples": (int, 1000),
    "estimates.decay_rate": (float, 1.5),
    "estimates.thm1_alphas": (_floats, (1.0, 0.5, 0.0)),
    "estimates.interp": (_floats, (0.25, 1.0, 0.5)),
    "threshold.nu": (float, 1.0),
    "threshold.f_sup": (_opt(float), None),
    "threshold.gamma": (_opt(float), None),
    "threshold.c": (_opt(float), None),
    "threshold.c_samples": (int, 200),
    "threshold.lambda0_mode": (str, "auto"),
    "threshold.n_sel": (int, 1),
    "threshold.omega": (float, 1.0),
    "force.kind": (str, "zero"),
    "force.amplitude": (_opt(float), None),
    "force.theta": (float, 0.5),
    "force.d_lip": (float, 1.0),
    "force.seed": (_opt(int), None),
    "dissipativity.samples": (int, 500),
    "dissipativity.notions": (_list, ["zero_diss", "diss", "strong", "uniform"]),
    "dissipativity.expect": (_list, ["zero_diss", "diss", "strong", "uniform"]),
    "dissipativity.linear": (str, "consistent"),
    "dissipativity.t": (float, 0.0),
    "dissipativity.lipschitz_pairs": (int, 1000),
    "evolve.dt": (float, 1e-3),
    "evolve.t_end": (float, 1.0),
    "evolve.scheme": (str, "strang_heat_rk2"),
    "evolve.checkpoint_every": (int, 0),
    "evolve.diagnostics_every": (int, 10),
    "evolve.ensemble": (int, 1),
    "evolve.u0": (str, "random_in_ball"),
    "evolve.u0_radius": (float, 0.9),
    "evolve.u0_scale": (float, 1.0),
    "evolve.u0_decay": (float, 1.5),
    "evolve.u0_path": (_opt(str), None),
    "evolve.resume": (_opt(str), None),
    "evolve.nonlinear": (_bool, True),
}


class ConfigError(ValueError):
    """Invalid configuration content."""


def defaults():
    return {k: v for k, (_, v) in SCHEMA.items()}


def parse_config(text):
    """Parse config text into a dict keyed by ``section.key`` with defaults filled in."""
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",),
                                   comment_prefixes=("#", ";"), inline_comment_prefixes=("#",))
    cp.optionxform = str
    try:
        cp.read_string("[_]\n" + text)
    except configparser.Error as exc:
        raise ConfigError(f"malformed config: {exc}") from None
    out = defaults()
    for key, raw in cp["_"].items():
        if key.count(".") != 1:
            raise ConfigError(f"key {key!r} must have the form section.key")
        if key not in SCHEMA:
            raise ConfigError(f"unknown config key {key!r}")
        conv = SCHEMA[key][0]
        try:
            out[key] = conv(raw)
        except ValueError as exc:
            raise ConfigError(f"{key}: {exc}") from None
    validate(out)
    return out


def load_config(path):
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())


def validate(cfg):
    eps = cfg["operators.epsilon"]
    if not 0.0 < eps < 0.5:
        raise ConfigError(f"operators.epsilon = {eps} violates 0 < epsilon < 1/2")
    if cfg["run.n_modes"] < 2:
        raise ConfigError("run.n_modes must be >= 2")
    if cfg["run.n_quad"] is not None and cfg["run.n_quad"] < cfg["run.n_modes"]:
        raise ConfigError("run.n_quad must be >= run.n_modes")
    if cfg["threshold.nu"] <= 0:
        raise ConfigError("threshold.nu must be positive")
    if cfg["threshold.lambda0_mode"] not in ("auto", "fixed"):
        raise ConfigError("threshold.lambda0_mode must be auto or fixed")
    if cfg["force.kind"] not in ("zero", "constant", "hoelder"):
        raise ConfigError("force.kind must be zero, constant or hoelder")
    if cfg["dissipativity.linear"] not in ("consistent", "printed"):
        raise ConfigError("dissipativity.linear must be consistent or printed")
    for k in ("estimates.samples", "estimates.invariant_samples", "dissipativity.samples",
              "evolve.ensemble", "threshold.c_samples", "dissipativity.lipschitz_pairs"):
        if cfg[k] < 1:
            raise ConfigError(f"{k} must be >= 1")
    return cfg


def dump_config(cfg):
    """Render a resolved config back to the flat text form (sorted keys)."""
    lines = []
    for k in sorted(cfg):
        v = cfg[k]
        if isinstance(v, (list, tuple)):
            v = ", ".join(str(x) for x in v)
        lines.append(f"{k} = {'auto' if v is None else v}")
    return "\n".join(lines) + "\n"
