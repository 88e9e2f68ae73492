"""Noisy sensor models, key-condition selection, and Gaussian error densities."""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, solve_triangular

from .dynamics import QoISpec, qoi_value
from .errors import (
    CoverageError,
    DomainError,
    NonFiniteInputError,
    NonPDCovarianceError,
    ShapeError,
    SizeError,
    ZeroVarianceResponseError,
)

# noise sd at or below this is treated as "noise off" when simulating
NOISE_OFF_SD = 1e-200


@dataclass(frozen=True)
class MeasurementModel:
    """Sensors with independent Gaussian errors, one (mean, sd) per point."""

    points: tuple
    noise_mean: np.ndarray
    noise_sd: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "points", tuple(self.points))
        m = len(self.points)
        mean = np.broadcast_to(np.asarray(self.noise_mean, dtype=float), (m,)).copy()
        sd = np.broadcast_to(np.asarray(self.noise_sd, dtype=float), (m,)).copy()
        if m < 1:
            raise DomainError("a measurement model needs at least one point")
        if not np.all(sd > 0):
            raise DomainError("noise sd must be positive (use 1e-300 for noise off)")
        mean.flags.writeable = False
        sd.flags.writeable = False
        object.__setattr__(self, "noise_mean", mean)
        object.__setattr__(self, "noise_sd", sd)

    @property
    def n_points(self):
        return len(self.points)

    @property
    def labels(self):
        return [p.label for p in self.points]

    @property
    def noise_off(self):
        return self.noise_sd <= NOISE_OFF_SD


@dataclass(frozen=True)
class MeasurementSet:
    """Measured values, one row per step in ``steps`` (1-based step indices)."""

    steps: np.ndarray
    values: np.ndarray
    model: MeasurementModel
    times: np.ndarray

    def __post_init__(self):
        steps = np.asarray(self.steps, dtype=np.int64).ravel()
        values = np.array(self.values, dtype=float, ndmin=2)
        times = np.asarray(self.times, dtype=float).ravel()
        if values.shape != (steps.shape[0], self.model.n_points):
            raise ShapeError(f"values shape {values.shape} does not match "
                             f"{steps.shape[0]} steps x {self.model.n_points} points")
        if times.shape != steps.shape:
            raise ShapeError("times and steps must have equal length")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInputError("measured values must be finite")
        if steps.size and (np.any(np.diff(steps) <= 0) or steps[0] < 1):
            raise DomainError("steps must be strictly increasing and start at 1 or later")
        for name, arr in (("steps", steps), ("values", values), ("times", times)):
            arr.flags.writeable = False
            object.__setattr__(self, name, arr)

    def row_of(self, step):
        pos = np.searchsorted(self.steps, step)
        if pos >= self.steps.size or self.steps[pos] != step:
            raise CoverageError(f"no measurement at step {step}")
        return int(pos)

    def up_to(self, k):
        """Values for steps 1..k as a ``(k, N_m)`` array."""
        rows = [self.row_of(s) for s in range(1, k + 1)]
        return self.values[rows]

    def to_csv(self):
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "time", *self.model.labels])
        for s, t, row in zip(self.steps, self.times, self.values):
            w.writerow([int(s), format(t, ".17g"), *(format(v, ".17g") for v in row)])
        return buf.getvalue()

    def write_csv(self, path):
        with open(path, "w", newline="") as fh:
            fh.write(self.to_csv())

    @classmethod
    def from_csv(cls, text, model):
        rows = list(csv.reader(io.StringIO(text)))
        if not rows or rows[0][:2] != ["step", "time"]:
            raise ShapeError("measurement CSV must start with a step,time header")
        labels = rows[0][2:]
        if labels != model.labels:
            raise CoverageError(f"CSV sensors {labels} do not match model sensors {model.labels}")
        body = [r for r in rows[1:] if r]
        steps = [int(r[0]) for r in body]
        times = [float(r[1]) for r in body]
        values = np.array([[float(v) for v in r[2:]] for r in body]).reshape(len(body), len(labels))
        return cls(steps, values, model, times)

    @classmethod
    def read_csv(cls, path, model):
        with open(path, newline="") as fh:
            return cls.from_csv(fh.read(), model)


def simulate_measurements(true_traj, model, system, seed, steps=None):
    """Sensor readings of ``true_traj`` plus independent Gaussian noise."""
    n_rows = true_traj.states.shape[0]
    steps = np.arange(1, n_rows) if steps is None else np.asarray(steps, dtype=np.int64)
    if steps.size and (steps.min() < 1 or steps.max() >= n_rows):
        raise CoverageError(f"requested steps exceed the trajectory horizon of {n_rows - 1}")
    clean = np.array([[qoi_value(true_traj, p, int(k), system) for p in model.points]
                      for k in steps]).reshape(len(steps), model.n_points)
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(clean.shape)
    values = clean.copy()
    on = ~model.noise_off
    values[:, on] = clean[:, on] + model.noise_mean[on] + model.noise_sd[on] * noise[:, on]
    return MeasurementSet(steps, values, model, true_traj.times[steps])


def _weighted_center(x, w):
    # mean written as x0 + sum w (x - x0) so constant channels center to exactly 0
    x0 = x[0]
    dev = x - x0
    return dev - (w @ dev)


def correlation_coefficients(db, qoi, k, model):
    """Weighted correlation between every sensor reading at steps 1..k and the QoI at k.

    Row i corresponds to step i + 1. Sensor noise variance enters only the
    sensor self-variance.
    """
    if not 1 <= k <= db.n_steps:
        raise CoverageError(f"step {k} outside database horizon 1..{db.n_steps}")
    db.check_sensors(model.points)
    w = db.weights / math.fsum(db.weights)
    u = _weighted_center(db.qoi(qoi)[:, k], w)
    var_u = w @ (u * u)
    if not var_u > 0:
        raise ZeroVarianceResponseError(f"{qoi.label} has zero variance at step {k}")
    r = np.empty((k, model.n_points))
    for j in range(model.n_points):
        h = db.sensor(j)[:, 1 : k + 1]
        hc = _weighted_center(h, w)
        cov = w @ (hc * u[:, None])
        var_h = w @ (hc * hc) + model.noise_sd[j] ** 2
        with np.errstate(invalid="ignore", divide="ignore"):
            rj = cov / np.sqrt(var_h * var_u)
        rj[var_h == 0] = 0.0
        r[:, j] = rj
    return r


@dataclass(frozen=True)
class KeyConditionSelection:
    """Selected (step, point) cells with their measured values and error statistics."""

    entries: tuple
    z: np.ndarray
    mu_beta: np.ndarray
    R_beta: np.ndarray
    correlations: np.ndarray

    @property
    def n_k(self):
        return len(self.entries)


def _selection(entries, meas, model, r_values):
    z = np.array([meas.values[meas.row_of(i), j] for i, j in entries])
    mu = np.array([model.noise_mean[j] for _, j in entries])
    R = np.diag([model.noise_sd[j] ** 2 for _, j in entries])
    for a in (z, mu, R):
        a.flags.writeable = False
    corr = np.asarray(r_values, dtype=float)
    corr.flags.writeable = False
    return KeyConditionSelection(tuple(entries), z, mu, R, corr)


def select_key_conditions(r, meas, N_k, model):
    """The ``N_k`` cells with largest ``|r|``; ties go to the later step, then lower point index."""
    r = np.asarray(r, dtype=float)
    k, m = r.shape
    if not 1 <= N_k <= k * m:
        raise SizeError(f"N_k={N_k} must lie in 1..{k * m}")
    steps, points = np.meshgrid(np.arange(1, k + 1), np.arange(m), indexing="ij")
    absr = np.abs(r).ravel()
    order = np.lexsort((points.ravel(), -steps.ravel(), -absr))[:N_k]
    entries = [(int(steps.ravel()[o]), int(points.ravel()[o])) for o in order]
    return _selection(entries, meas, model, absr[order])


def all_conditions(meas, k, model):
    """Selection of every measured cell at steps 1..k (the full-chain condition)."""
    entries = [(i, j) for i in range(1, k + 1) for j in range(model.n_points)]
    return _selection(entries, meas, model, np.full(len(entries), np.nan))


def gaussian_error_logpdf(beta, sel):
    """Log density of the selected error vector; ``beta`` may be ``(N_k,)`` or ``(n, N_k)``."""
    beta = np.asarray(beta, dtype=float)
    single = beta.ndim == 1
    beta = np.atleast_2d(beta)
    nk = sel.mu_beta.shape[0]
    if beta.shape[1] != nk:
        raise ShapeError(f"beta has {beta.shape[1]} entries, selection has {nk}")
    R = sel.R_beta
    if np.allclose(R, np.diag(np.diag(R)), rtol=0, atol=0):
        d = np.diag(R)
        if not np.all(d > 0) or not np.all(np.isfinite(np.log(d))):
            raise NonPDCovarianceError("error covariance is not positive definite")
        z = (beta - sel.mu_beta) / np.sqrt(d)
        logdet = np.sum(np.log(d))
    else:
        try:
            L, _ = cho_factor(R, lower=True)
        except np.linalg.LinAlgError as exc:
            raise NonPDCovarianceError("error covariance is not positive definite") from exc
        L = np.tril(L)
        z = solve_triangular(L, (beta - sel.mu_beta).T, lower=True).T
        logdet = 2.0 * np.sum(np.log(np.diag(L)))
    out = -0.5 * (nk * math.log(2 * math.pi) + logdet + np.sum(z * z, axis=1))
    return float(out[0]) if single else out


__all__ = [
    "MeasurementModel", "MeasurementSet", "KeyConditionSelection", "QoISpec",
    "simulate_measurements", "correlation_coefficients", "select_key_conditions",
    "all_conditions", "gaussian_error_logpdf", "NOISE_OFF_SD",
]
