"""Run configuration files: sectioned ``key = value`` text with a versioned header.

Example::

    # kcq-config v1
    [system]
    name = sdof

    [sampling]
    n = 500
    seed = 0

    [integration]
    dt = 0.05
    n_steps = 200

    [qoi]
    names = u_dof0, v_dof0

    [measurement]
    sensors = v_dof0
    noise_sd = 0.03

    [online]
    N_k = 2
    steps = 50, 100, 150, 200

QoI and sensor names use the labels of :class:`kcq.dynamics.QoISpec`:
``u``/``v`` for displacement/velocity, then ``_dof<i>`` or, on the beam,
``w_x<coord>`` (transverse) or ``a_x<coord>`` (axial).
"""
from __future__ import annotations

import configparser
from dataclasses import fields

from .dynamics import QoISpec
from .errors import ConfigError, KcqError
from .pipeline import RunConfig

HEADER = "# kcq-config v1"

# (section, key) -> (RunConfig field, parser)
_INT = int
_FLOAT = float


def _bool(text):
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text):
    return tuple(float(v) for v in text.replace(",", " ").split())


def _ints(text):
    return tuple(int(v) for v in text.replace(",", " ").split())


def _specs(text):
    return tuple(QoISpec.from_label(v.strip()) for v in text.split(",") if v.strip())


SCHEMA = {
    ("system", "name"): ("system", str.strip),
    ("system", "n_elements"): ("n_elements", _INT),
    ("sampling", "n"): ("n", _INT),
    ("sampling", "seed"): ("seed", _INT),
    ("sampling", "preset"): ("preset", str.strip),
    ("sampling", "probes_per_sample"): ("probes_per_sample", _INT),
    ("sampling", "rearrange"): ("rearrange", _bool),
    ("integration", "dt"): ("dt", _FLOAT),
    ("integration", "n_steps"): ("n_steps", _INT),
    ("integration", "tol"): ("tol", _FLOAT),
    ("integration", "max_iter"): ("max_iter", _INT),
    ("integration", "chunk_size"): ("chunk_size", _INT),
    ("integration", "max_failure_fraction"): ("max_failure_fraction", _FLOAT),
    ("qoi", "names"): ("qois", _specs),
    ("measurement", "sensors"): ("sensors", _specs),
    ("measurement", "noise_mean"): ("noise_mean", _floats),
    ("measurement", "noise_sd"): ("noise_sd", _floats),
    ("measurement", "truth_seed"): ("truth_seed", _INT),
    ("measurement", "measurement_seed"): ("measurement_seed", _INT),
    ("online", "N_k"): ("N_k", _INT),
    ("online", "steps"): ("steps", _ints),
    ("online", "ess_min"): ("ess_min", _FLOAT),
}
REQUIRED = [("system", "name"), ("integration", "dt"), ("integration", "n_steps")]
OUTPUT_KEYS = {("output", "dir"), ("measurement", "truth")}


def _parser():
    p = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=(";",))
    p.optionxform = str  # keys are case sensitive (N_k)
    return p


def parse_overrides(pairs):
    """``["section.key=value", ...]`` to a dict keyed by ``(section, key)``."""
    out = {}
    for pair in pairs or []:
        if "=" not in pair or "." not in pair.split("=", 1)[0]:
            raise ConfigError(pair, "overrides must look like section.key=value")
        lhs, value = pair.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        out[(section, key)] = value.strip()
    return out


def read_config_text(text, overrides=None):
    """Parse config text (plus overrides) into ``(RunConfig, extras)``.

    ``extras`` holds the keys that steer the CLI but not the computation,
    such as ``output.dir``.
    """
    first = text.lstrip().splitlines()[0].strip() if text.strip() else ""
    if first != HEADER:
        raise ConfigError("header", f"first line must be {HEADER!r}, got {first!r}")
    parser = _parser()
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise ConfigError("syntax", str(exc)) from exc
    values = {(s, k): v for s in parser.sections() for k, v in parser[s].items()}
    values.update(overrides or {})
    for sec, key in REQUIRED:
        if (sec, key) not in values or not values[(sec, key)].strip():
            raise ConfigError(key, f"required key missing from [{sec}]")
    kwargs, extras = {}, {}
    for (sec, key), raw in values.items():
        if (sec, key) in OUTPUT_KEYS:
            extras[key] = raw.strip()
            continue
        if (sec, key) not in SCHEMA:
            raise ConfigError(f"{sec}.{key}", "unknown configuration key")
        name, conv = SCHEMA[(sec, key)]
        try:
            kwargs[name] = conv(raw)
        except (ValueError, KcqError) as exc:
            raise ConfigError(key, f"cannot parse {raw!r}: {exc}") from exc
    system = kwargs.get("system", "sdof")
    if system == "beam":
        from .pipeline import beam_config
        base = beam_config()
    else:
        base = RunConfig()
    merged = {f.name: getattr(base, f.name) for f in fields(RunConfig)}
    merged.update(kwargs)
    try:
        return RunConfig(**merged), extras
    except ConfigError:
        raise
    except (ValueError, TypeError, KcqError) as exc:
        raise ConfigError("config", str(exc)) from exc


def read_config(path, overrides=None):
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError("config", f"cannot read {path}: {exc}") from exc
    return read_config_text(text, overrides)


def write_config_text(config, extras=None):
    """Render a RunConfig back to config text (round-trips through read_config_text)."""
    by_field = {name: (sec, key) for (sec, key), (name, _) in SCHEMA.items()}
    sections = {}
    for f in fields(RunConfig):
        if f.name not in by_field:
            continue
        sec, key = by_field[f.name]
        val = getattr(config, f.name)
        if isinstance(val, tuple):
            val = ", ".join(v.label if isinstance(v, QoISpec) else repr(v) for v in val)
        elif isinstance(val, float):
            val = repr(val)
        sections.setdefault(sec, []).append(f"{key} = {val}")
    for key, val in (extras or {}).items():
        sec = "output" if key == "dir" else "measurement"
        sections.setdefault(sec, []).append(f"{key} = {val}")
    lines = [HEADER]
    for sec, items in sections.items():
        lines += ["", f"[{sec}]", *items]
    return "\n".join(lines) + "\n"
