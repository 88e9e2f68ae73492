"""The offline response database: samples, weights, and recorded channels."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .dynamics import QoISpec
from .errors import CoverageError, NonFiniteInputError, ShapeError
from .sampling import ParameterSpace, WeightedSampleSet

SCHEMA_VERSION = 1


def _frozen(arr):
    arr = np.array(arr, dtype=float)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class ResponseDatabase:
    """Per-sample QoI and sensor histories, each ``(n, len(times))``.

    Arrays are copied and marked read-only on construction, so online
    queries cannot modify the offline artifact.
    """

    space: ParameterSpace
    sample_set: WeightedSampleSet
    times: np.ndarray
    qoi_specs: tuple
    qoi_values: tuple
    sensor_specs: tuple
    sensor_values: tuple
    provenance: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "times", _frozen(self.times))
        object.__setattr__(self, "qoi_specs", tuple(self.qoi_specs))
        object.__setattr__(self, "sensor_specs", tuple(self.sensor_specs))
        n, T = self.sample_set.n, self.times.shape[0]
        for name in ("qoi_values", "sensor_values"):
            arrays = tuple(_frozen(a) for a in getattr(self, name))
            for a in arrays:
                if a.shape != (n, T):
                    raise ShapeError(f"{name} array has shape {a.shape}, expected {(n, T)}")
                if not np.all(np.isfinite(a)):
                    raise NonFiniteInputError(f"{name} contains non-finite values")
            object.__setattr__(self, name, arrays)
        if len(self.qoi_values) != len(self.qoi_specs):
            raise ShapeError("one value array is needed per QoI spec")
        if len(self.sensor_values) != len(self.sensor_specs):
            raise ShapeError("one value array is needed per sensor spec")

    @classmethod
    def from_arrays(cls, samples, weights, times, qoi=None, sensors=None, space=None,
                    provenance=None):
        """Build a database directly from arrays.

        ``qoi`` and ``sensors`` are lists of ``(QoISpec, array)`` pairs.
        """
        sample_set = WeightedSampleSet(samples, weights, generator_tag="arrays")
        if space is None:
            space = ParameterSpace.standard(sample_set.dim)
        qoi = list(qoi or [])
        sensors = list(sensors or [])
        return cls(space, sample_set, times,
                   tuple(s for s, _ in qoi), tuple(a for _, a in qoi),
                   tuple(s for s, _ in sensors), tuple(a for _, a in sensors),
                   dict(provenance or {}))

    @property
    def n(self):
        return self.sample_set.n

    @property
    def weights(self):
        return self.sample_set.weights

    @property
    def n_steps(self):
        return self.times.shape[0] - 1

    def qoi(self, spec):
        for s, a in zip(self.qoi_specs, self.qoi_values):
            if s == spec:
                return a
        raise CoverageError(f"database has no QoI channel {spec.label}")

    def sensor(self, j):
        if not 0 <= j < len(self.sensor_values):
            raise CoverageError(f"database has no sensor channel {j}")
        return self.sensor_values[j]

    def check_sensors(self, points):
        if tuple(points) != self.sensor_specs:
            raise CoverageError(
                "measurement points "
                f"{[p.label for p in points]} do not match database sensors "
                f"{[p.label for p in self.sensor_specs]}"
            )


__all__ = ["ResponseDatabase", "SCHEMA_VERSION", "QoISpec"]
