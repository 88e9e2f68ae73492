"""Small databases and measurement sets shared by the unit tests."""
import numpy as np

from kcq.database import ResponseDatabase
from kcq.dynamics import QoISpec
from kcq.measurement import MeasurementModel, MeasurementSet

U = QoISpec("displacement", dof=0)
V = QoISpec("velocity", dof=0)


def toy_database(qoi_rows, sensor_rows=None, weights=None, samples=None):
    """Database with one QoI (u_dof0) and, by default, a sensor reading the same channel.

    ``qoi_rows`` is ``(n, T+1)``; column 0 is the initial step.
    """
    q = np.asarray(qoi_rows, dtype=float)
    n, T1 = q.shape
    s = q if sensor_rows is None else np.asarray(sensor_rows, dtype=float)
    w = np.full(n, 1.0 / n) if weights is None else np.asarray(weights, dtype=float)
    a = np.arange(n, dtype=float)[:, None] if samples is None else samples
    return ResponseDatabase.from_arrays(a, w, np.arange(T1, dtype=float), qoi=[(U, q)],
                                        sensors=[(U, s)])


def measurements(values, sd=1.0, mean=0.0, points=(U,)):
    values = np.array(values, dtype=float, ndmin=2)
    if values.shape[0] == 1 and len(points) == 1 and values.shape[1] > 1:
        values = values.T
    model = MeasurementModel(points, np.full(len(points), mean), np.full(len(points), sd))
    steps = np.arange(1, values.shape[0] + 1)
    return MeasurementSet(steps, values, model, steps.astype(float))
