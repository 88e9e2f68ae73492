"""Offline database generation and persistence, and the online query stage."""
from __future__ import annotations

import hashlib
import json
import math
import os
import shutil
import tempfile
import warnings
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .database import SCHEMA_VERSION, ResponseDatabase
from .dynamics import QoISpec, integrate, integrate_batch, make_beam_system, make_sdof_system, record_row
from .errors import (
    ConfigError,
    ConvergenceError,
    CorruptionError,
    DegenerateLikelihoodError,
    SampleFailureError,
    SchemaMigrationError,
)
from .estimators import DEFAULT_ESS_MIN, key_condition_quantify, nonconditional_stats
from .measurement import MeasurementModel, MeasurementSet, simulate_measurements
from .randomfield import make_kl_field
from .sampling import ParameterSpace, WeightedSampleSet, gqmc_sample_set, mc_sample_set

SYSTEMS = ("sdof", "beam")


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to rebuild a database and run the online stage."""

    system: str = "sdof"
    n_elements: int = 4
    n: int = 500
    seed: int = 0
    preset: str = "WZ"
    probes_per_sample: int = 1000
    rearrange: bool = True
    dt: float = 0.05
    n_steps: int = 200
    tol: float = 1e-10
    max_iter: int = 50
    qois: tuple = (QoISpec("displacement", dof=0), QoISpec("velocity", dof=0))
    sensors: tuple = (QoISpec("velocity", dof=0),)
    noise_mean: tuple = (0.0,)
    noise_sd: tuple = (0.03,)
    N_k: int = 2
    steps: tuple = (50, 100, 150, 200)
    ess_min: float = DEFAULT_ESS_MIN
    max_failure_fraction: float = 0.001
    chunk_size: int = 256
    truth_seed: int = 1
    measurement_seed: int = 2

    def __post_init__(self):
        object.__setattr__(self, "qois", tuple(self.qois))
        object.__setattr__(self, "sensors", tuple(self.sensors))
        object.__setattr__(self, "noise_mean", tuple(float(v) for v in self.noise_mean))
        object.__setattr__(self, "noise_sd", tuple(float(v) for v in self.noise_sd))
        object.__setattr__(self, "steps", tuple(int(s) for s in self.steps))
        if self.system not in SYSTEMS:
            raise ConfigError("system.name", f"unknown system {self.system!r}; choose from {SYSTEMS}")
        if not (self.dt > 0 and math.isfinite(self.dt)):
            raise ConfigError("dt", f"must be a positive number, got {self.dt!r}")
        if self.n_steps < 1:
            raise ConfigError("n_steps", "must be at least 1")
        if self.n < 1:
            raise ConfigError("n", "must be at least 1")
        if self.system == "beam" and self.n_elements < 2:
            raise ConfigError("n_elements", "the beam needs at least two elements")
        if not self.qois:
            raise ConfigError("qoi.names", "at least one QoI is required")
        if not self.sensors:
            raise ConfigError("measurement.sensors", "at least one sensor is required")
        m = len(self.sensors)
        if len(self.noise_sd) not in (1, m) or len(self.noise_mean) not in (1, m):
            raise ConfigError("measurement.noise_sd", f"give one value or {m} values")
        if any(not s > 0 for s in self.noise_sd):
            raise ConfigError("measurement.noise_sd", "noise sd must be positive")
        if any(not 1 <= s <= self.n_steps for s in self.steps):
            raise ConfigError("online.steps", f"steps must lie in 1..{self.n_steps}")
        if self.N_k < 1:
            raise ConfigError("online.N_k", "must be at least 1")

    @property
    def horizon(self):
        return self.dt * self.n_steps

    def measurement_model(self):
        m = len(self.sensors)
        return MeasurementModel(self.sensors, np.resize(self.noise_mean, m),
                                np.resize(self.noise_sd, m))

    def describe(self):
        d = asdict(self)
        d["qois"] = [q.label for q in self.qois]
        d["sensors"] = [s.label for s in self.sensors]
        return d


def sdof_config(**overrides):
    return replace(RunConfig(), **overrides)


def beam_config(**overrides):
    tip = 3.0
    base = RunConfig(
        system="beam", n_elements=4, n=100, dt=0.001, n_steps=100,
        qois=(QoISpec("displacement", x=tip), QoISpec("velocity", x=tip)),
        sensors=(QoISpec("displacement", x=0.9), QoISpec("displacement", x=2.1)),
        noise_mean=(0.0,), noise_sd=(0.005,), N_k=1, steps=(25, 50, 75, 100),
    )
    return replace(base, **overrides)


def build_system(config):
    if config.system == "sdof":
        return make_sdof_system()
    return make_beam_system(config.n_elements, make_kl_field())


def _check_resolvable(system, config):
    for spec in (*config.qois, *config.sensors):
        record_row(system, spec)


def _channel_rows(system, config):
    """Unique record rows and, per QoI and sensor, the index of its row."""
    specs = []
    for s in (*config.qois, *config.sensors):
        if s not in specs:
            specs.append(s)
    rows = np.stack([record_row(system, s) for s in specs])
    return specs, rows


def _integrate_chunk(system, config, rows, alpha):
    out, failed = integrate_batch(system, alpha, config.dt, config.n_steps, config.tol,
                                  config.max_iter, record=rows, on_failure="mask")
    return out, failed


def _chunks(n, size):
    return [(s, min(s + size, n)) for s in range(0, n, size)]


def _assemble(config, system, sample_set, specs, records, failed, extra_prov=None):
    n = sample_set.n
    bad = np.flatnonzero(failed)
    prov = {
        "system": config.system, "ndof": system.ndof, "dt": config.dt,
        "n_steps": config.n_steps, "tol": config.tol, "max_iter": config.max_iter,
        "seed": config.seed, "generator": sample_set.generator_tag,
        "schema_version": SCHEMA_VERSION, "failed": bad.tolist(),
        "failed_alpha": sample_set.samples[bad].tolist(),
    }
    if config.system == "beam":
        prov["n_elements"] = config.n_elements
    prov.update(extra_prov or {})
    if bad.size:
        if bad.size > config.max_failure_fraction * n:
            raise SampleFailureError(bad.tolist(), n, config.max_failure_fraction)
        warnings.warn(f"{bad.size} of {n} samples failed to integrate and were excluded; "
                      "weights renormalized", stacklevel=3)
        keep = ~failed
        w = sample_set.weights[keep]
        sample_set = WeightedSampleSet(sample_set.samples[keep], w / math.fsum(w),
                                       sample_set.generator_tag, sample_set.seed,
                                       dict(sample_set.info))
        records = records[keep]
    arrays = {s: records[:, i, :] for i, s in enumerate(specs)}
    times = config.dt * np.arange(config.n_steps + 1)
    return ResponseDatabase(
        system.space, sample_set, times, config.qois, [arrays[q] for q in config.qois],
        config.sensors, [arrays[s] for s in config.sensors], prov,
    )


def make_sample_set(config, system=None):
    system = build_system(config) if system is None else system
    return gqmc_sample_set(system.space, config.n, seed=config.seed, preset=config.preset,
                           probes_per_sample=config.probes_per_sample,
                           rearrange=config.rearrange)


def generate_database(config, sample_set=None, system=None):
    """Integrate every sample in memory and return the database."""
    system = build_system(config) if system is None else system
    _check_resolvable(system, config)
    sample_set = make_sample_set(config, system) if sample_set is None else sample_set
    specs, rows = _channel_rows(system, config)
    n = sample_set.n
    records = np.empty((n, rows.shape[0], config.n_steps + 1))
    failed = np.zeros(n, dtype=bool)
    for a, b in _chunks(n, config.chunk_size):
        records[a:b], failed[a:b] = _integrate_chunk(system, config, rows, sample_set.samples[a:b])
    return _assemble(config, system, sample_set, specs, records, failed)


def _atomic_save_npz(path, **arrays):
    fd, tmp = tempfile.mkstemp(dir=os.path.dirname(path), suffix=".tmp")
    os.close(fd)
    try:
        with open(tmp, "wb") as fh:
            np.savez(fh, **arrays)
        os.replace(tmp, path)
    finally:
        if os.path.exists(tmp):
            os.remove(tmp)


def offline_generate(config, out_dir, progress=None):
    """Resumable offline stage.

    Samples integrate in fixed chunks; each finished chunk is journaled under
    ``out_dir/journal`` so a restarted run skips it. The assembled database
    is stored under ``out_dir/database``.
    """
    system = build_system(config)
    _check_resolvable(system, config)
    sample_set = make_sample_set(config, system)
    specs, rows = _channel_rows(system, config)
    journal = os.path.join(out_dir, "journal")
    os.makedirs(journal, exist_ok=True)
    n = sample_set.n
    records = np.empty((n, rows.shape[0], config.n_steps + 1))
    failed = np.zeros(n, dtype=bool)
    for a, b in _chunks(n, config.chunk_size):
        path = os.path.join(journal, f"chunk_{a:08d}_{b:08d}.npz")
        loaded = False
        if os.path.exists(path):
            try:
                with np.load(path) as data:
                    records[a:b] = data["records"]
                    failed[a:b] = data["failed"]
                loaded = True
            except (OSError, ValueError, KeyError):
                loaded = False
        if not loaded:
            rec, fl = _integrate_chunk(system, config, rows, sample_set.samples[a:b])
            _atomic_save_npz(path, records=rec, failed=fl)
            records[a:b], failed[a:b] = rec, fl
        if progress is not None:
            progress(b, n)
    db = _assemble(config, system, sample_set, specs, records, failed,
                   {"config": config.describe()})
    store_database(db, os.path.join(out_dir, "database"))
    return db


# ---------------------------------------------------------------------------
# persistence

_FMT = "%.17g"


def _sha256(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def _write_matrix(path, arr):
    with open(path, "w") as fh:
        np.savetxt(fh, np.atleast_2d(arr), fmt=_FMT, delimiter=",")


def _read_matrix(path, shape):
    try:
        arr = np.loadtxt(path, delimiter=",", ndmin=2)
    except (ValueError, OSError) as exc:
        raise CorruptionError(f"cannot parse {os.path.basename(path)}: {exc}") from exc
    if arr.shape != shape:
        raise CorruptionError(f"{os.path.basename(path)} has shape {arr.shape}, expected {shape}")
    return arr


def store_database(db, path):
    """Write the database directory; ``meta.json`` is written last and records digests."""
    tmp = path + ".partial"
    if os.path.exists(tmp):
        shutil.rmtree(tmp)
    os.makedirs(tmp)
    files = {"samples.csv": db.sample_set.samples, "weights.csv": db.weights[:, None]}
    for i, a in enumerate(db.qoi_values):
        files[f"qoi_{i}.csv"] = a
    for j, a in enumerate(db.sensor_values):
        files[f"sensor_{j}.csv"] = a
    digests = {}
    for name, arr in files.items():
        _write_matrix(os.path.join(tmp, name), arr)
        digests[name] = _sha256(os.path.join(tmp, name))
    meta = {
        "schema_version": SCHEMA_VERSION,
        "n": db.n,
        "dim": db.sample_set.dim,
        "times": [float(t) for t in db.times],
        "space": db.space.describe(),
        "generator_tag": db.sample_set.generator_tag,
        "seed": db.sample_set.seed,
        "qois": [q.label for q in db.qoi_specs],
        "sensors": [s.label for s in db.sensor_specs],
        "provenance": db.provenance,
        "digests": digests,
    }
    with open(os.path.join(tmp, "meta.json"), "w") as fh:
        json.dump(meta, fh, indent=1, sort_keys=True)
    if os.path.exists(path):
        shutil.rmtree(path)
    os.replace(tmp, path)


def load_database(path):
    meta_path = os.path.join(path, "meta.json")
    try:
        with open(meta_path) as fh:
            meta = json.load(fh)
    except FileNotFoundError as exc:
        raise CorruptionError(f"no meta.json in {path}") from exc
    except json.JSONDecodeError as exc:
        raise CorruptionError(f"meta.json is not valid JSON: {exc}") from exc
    version = meta.get("schema_version")
    if version != SCHEMA_VERSION:
        raise SchemaMigrationError(version, SCHEMA_VERSION)
    for name, digest in meta["digests"].items():
        fpath = os.path.join(path, name)
        if not os.path.exists(fpath) or _sha256(fpath) != digest:
            raise CorruptionError(f"{name} is missing or its digest does not match meta.json")
    n, dim, T = meta["n"], meta["dim"], len(meta["times"])
    samples = _read_matrix(os.path.join(path, "samples.csv"), (n, dim))
    weights = _read_matrix(os.path.join(path, "weights.csv"), (n, 1))[:, 0]
    qois = [_read_matrix(os.path.join(path, f"qoi_{i}.csv"), (n, T)) for i in range(len(meta["qois"]))]
    sensors = [_read_matrix(os.path.join(path, f"sensor_{j}.csv"), (n, T))
               for j in range(len(meta["sensors"]))]
    space = ParameterSpace.normal([m["mean"] for m in meta["space"]], [m["sd"] for m in meta["space"]])
    sample_set = WeightedSampleSet(samples, weights, meta["generator_tag"], meta["seed"])
    return ResponseDatabase(
        space, sample_set, np.array(meta["times"]),
        [QoISpec.from_label(q) for q in meta["qois"]], qois,
        [QoISpec.from_label(s) for s in meta["sensors"]], sensors, meta["provenance"],
    )


# ---------------------------------------------------------------------------
# truth runs and the online stage


def truth_alpha(config, system=None):
    system = build_system(config) if system is None else system
    return system.space.sample(1, config.truth_seed)[0]


def synthetic_measurements(config, alpha=None, seed=None, system=None):
    """Simulate the true system at ``alpha`` and return noisy sensor records."""
    system = build_system(config) if system is None else system
    alpha = truth_alpha(config, system) if alpha is None else np.asarray(alpha, dtype=float)
    traj = integrate(system, alpha, config.dt, config.n_steps, config.tol, config.max_iter)
    seed = config.measurement_seed if seed is None else seed
    return simulate_measurements(traj, config.measurement_model(), system, seed), traj


def synthetic_measurement_batch(config, alphas, seeds, system=None):
    """Noisy sensor records for many truth parameters, one noise seed each."""
    system = build_system(config) if system is None else system
    model = config.measurement_model()
    rows = np.stack([record_row(system, s) for s in model.points])
    clean, failed = integrate_batch(system, alphas, config.dt, config.n_steps, config.tol,
                                    config.max_iter, record=rows)
    steps = np.arange(1, config.n_steps + 1)
    times = config.dt * steps
    out = []
    for b, seed in enumerate(seeds):
        noise = np.random.default_rng(seed).standard_normal((steps.size, model.n_points))
        values = clean[b, :, 1:].T + model.noise_mean + model.noise_sd * noise
        out.append(MeasurementSet(steps, values, model, times))
    return out


def online_quantify(db, meas, qoi, steps, N_k, ess_min=DEFAULT_ESS_MIN, grid=None):
    """KCQ results at each requested step; the database is only read."""
    db.check_sensors(meas.model.points)
    out = []
    for k in steps:
        try:
            out.append(key_condition_quantify(db, meas, qoi, int(k), N_k, grid=grid,
                                              ess_min=ess_min))
        except DegenerateLikelihoodError as exc:
            raise DegenerateLikelihoodError(exc.ess, exc.ess_min, qoi.label, int(k)) from exc
    return out


def nonconditional_series(db, qoi, steps, grid=None):
    return [nonconditional_stats(db, qoi, int(k), grid=grid) for k in steps]


__all__ = [
    "RunConfig", "ResponseDatabase", "build_system", "generate_database",
    "offline_generate", "store_database", "load_database", "online_quantify",
    "synthetic_measurements", "truth_alpha", "sdof_config", "beam_config",
    "nonconditional_series", "make_sample_set", "synthetic_measurement_batch",
]
