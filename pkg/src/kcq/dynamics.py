"""Second-order dynamical systems and the implicit midpoint integrator.

A system is ``M(a) s' + C(a) s + F(u, a) = f(t, a)`` with ``u' = s``. All
system callables are batch-first: parameter arrays have shape ``(B, dim)``
and displacement arrays ``(B, ndof)``, so many samples step together.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import (
    ConvergenceError,
    DegenerateFrequenciesError,
    DomainError,
    NonFiniteInputError,
    ResolutionError,
    ShapeError,
)
from .randomfield import KLField, field_value, make_kl_field
from .sampling import ParameterSpace


@dataclass(frozen=True)
class QoISpec:
    """A scalar response: displacement or velocity at a dof or a coordinate.

    ``component`` selects the axial or transverse field when ``x`` is used on
    a beam.
    """

    kind: str = "displacement"
    dof: Optional[int] = None
    x: Optional[float] = None
    component: str = "transverse"

    def __post_init__(self):
        if self.kind not in ("displacement", "velocity"):
            raise DomainError(f"QoI kind must be displacement or velocity, got {self.kind!r}")
        if (self.dof is None) == (self.x is None):
            raise DomainError("QoI needs exactly one of dof or x")
        if self.component not in ("transverse", "axial"):
            raise DomainError(f"unknown component {self.component!r}")

    @property
    def label(self):
        short = "u" if self.kind == "displacement" else "v"
        if self.dof is not None:
            return f"{short}_dof{self.dof}"
        comp = "w" if self.component == "transverse" else "a"
        return f"{short}{comp}_x{self.x:g}"

    @classmethod
    def from_label(cls, label):
        head, _, loc = label.partition("_")
        kind = {"u": "displacement", "v": "velocity"}.get(head[:1])
        if kind is None or not loc:
            raise DomainError(f"cannot parse QoI label {label!r}")
        if loc.startswith("dof"):
            return cls(kind, dof=int(loc[3:]))
        comp = {"w": "transverse", "a": "axial"}.get(head[1:2])
        if comp is None or not loc.startswith("x"):
            raise DomainError(f"cannot parse QoI label {label!r}")
        return cls(kind, x=float(loc[1:]), component=comp)


@dataclass(frozen=True)
class StateTrajectory:
    times: np.ndarray
    states: np.ndarray

    @property
    def ndof(self):
        return self.states.shape[1] // 2

    @property
    def displacements(self):
        return self.states[:, : self.ndof]

    @property
    def velocities(self):
        return self.states[:, self.ndof :]


@dataclass(frozen=True)
class DynamicalSystem:
    """Batch-first system description.

    mass, damping : ``alpha (B, dim) -> (B, ndof, ndof)``
    restoring     : ``(u (B, ndof), alpha) -> (B, ndof)``
    tangent       : ``(u, alpha) -> (B, ndof, ndof)``; finite differences if None
    load          : ``(t, alpha) -> (B, ndof)``
    shape_vector  : ``QoISpec -> (ndof,)`` interpolation row N(x)
    """

    name: str
    ndof: int
    space: ParameterSpace
    mass: Callable
    damping: Callable
    restoring: Callable
    load: Callable
    shape_vector: Callable
    param_layout: dict = field(default_factory=dict)
    tangent: Optional[Callable] = None
    energy: Optional[Callable] = None
    initial_state: Optional[Callable] = None
    info: dict = field(default_factory=dict, compare=False)

    def initial(self, alpha):
        alpha = np.atleast_2d(alpha)
        if self.initial_state is None:
            return np.zeros((alpha.shape[0], 2 * self.ndof))
        return self.initial_state(alpha)

    def stiffness(self, u, alpha):
        if self.tangent is not None:
            return self.tangent(u, alpha)
        return fd_jacobian(self.restoring, u, alpha)


def fd_jacobian(restoring, u, alpha, rel_step=1e-7):
    """Central-difference Jacobian of the restoring force, batch-first."""
    B, n = u.shape
    J = np.empty((B, n, n))
    for j in range(n):
        h = rel_step * (1.0 + np.abs(u[:, j]))
        up = u.copy()
        um = u.copy()
        up[:, j] += h
        um[:, j] -= h
        J[:, :, j] = (restoring(up, alpha) - restoring(um, alpha)) / (2 * h)[:, None]
    return J


# ---------------------------------------------------------------------------
# implicit midpoint


def _midpoint_batch(system, alpha, U_prev, t_prev, dt, tol_scale, max_iter, mats):
    """One midpoint step for a batch; returns (U_next, residual, converged).

    Unknown is the midpoint displacement ub; velocity follows from
    ub = u0 + dt/2 * sb and s1 = 2 sb - s0. The velocity half of the state
    equation then reads R(ub) = 0 with
    R = (4/dt) M (ub - u0) - 2 M s0 + 2 C (ub - u0) + dt (F(ub) - f(t_mid)).
    """
    n = system.ndof
    M, C = mats
    u0 = U_prev[:, :n]
    s0 = U_prev[:, n:]
    t_mid = t_prev + 0.5 * dt
    f_mid = system.load(t_mid, alpha)
    tol = tol_scale * (1.0 + np.max(np.abs(U_prev), axis=1))
    ub = u0 + 0.5 * dt * s0
    B = U_prev.shape[0]
    done = np.zeros(B, dtype=bool)
    res = np.full(B, np.inf)
    active = np.arange(B)
    for _ in range(max_iter + 1):
        a = alpha[active]
        du = ub[active] - u0[active]
        Ma = M[active]
        F = system.restoring(ub[active], a)
        R = (
            (4.0 / dt) * np.einsum("bij,bj->bi", Ma, du)
            - 2.0 * np.einsum("bij,bj->bi", Ma, s0[active])
            + 2.0 * np.einsum("bij,bj->bi", C[active], du)
            + dt * (F - f_mid[active])
        )
        # state-space residual of the velocity rows: M^{-1} R / dt * dt
        r_state = np.linalg.solve(Ma, R[..., None])[..., 0]
        r_inf = np.max(np.abs(r_state), axis=1)
        r_inf[~np.isfinite(r_inf)] = np.inf
        res[active] = r_inf
        ok = r_inf <= tol[active]
        done[active[ok]] = True
        active = active[~ok]
        if active.size == 0:
            break
        keep = ~ok
        J = (4.0 / dt) * Ma[keep] + 2.0 * C[active] + dt * system.stiffness(ub[active], alpha[active])
        try:
            delta = np.linalg.solve(J, -R[keep][..., None])[..., 0]
        except np.linalg.LinAlgError:
            break
        step = np.max(np.abs(delta), axis=1)
        ub[active] += delta
        # increments at rounding level: accept, the residual cannot shrink further
        tiny = step <= 4e-16 * (1.0 + np.max(np.abs(ub[active]), axis=1))
        if np.any(tiny):
            done[active[tiny]] = True
            active = active[~tiny]
            if active.size == 0:
                break
    sb = 2.0 * (ub - u0) / dt
    U_next = np.concatenate([2.0 * ub - u0, 2.0 * sb - s0], axis=1)
    bad = ~np.all(np.isfinite(U_next), axis=1)
    done &= ~bad
    return U_next, res, done


def _as_batch(alpha, space_dim):
    alpha = np.array(alpha, dtype=float, ndmin=2)
    if alpha.shape[1] != space_dim:
        raise ShapeError(f"alpha has {alpha.shape[1]} entries, system expects {space_dim}")
    return alpha


def midpoint_step(system, alpha, U_prev, t_prev, dt, tol=1e-10, max_iter=50):
    """Advance a single state by one implicit midpoint step.

    ``tol`` is relative: the velocity-row residual must fall below
    ``tol * (1 + |U_prev|_inf)``.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    U_prev = np.array(U_prev, dtype=float, ndmin=2)
    if not np.all(np.isfinite(U_prev)):
        raise NonFiniteInputError("previous state must be finite")
    alpha = _as_batch(alpha, system.space.dim)
    mats = (system.mass(alpha), system.damping(alpha))
    U, res, ok = _midpoint_batch(system, alpha, U_prev, t_prev, dt, tol, max_iter, mats)
    if not ok[0]:
        raise ConvergenceError(
            f"midpoint step did not converge in {max_iter} iterations (residual {res[0]:.3g})",
            residual=float(res[0]),
        )
    return U[0]


def integrate_batch(system, alpha, dt, n_steps, tol=1e-10, max_iter=50, U0=None,
                    record=None, on_failure="raise", t0=0.0):
    """Integrate a batch of samples.

    ``record`` is an optional ``(R, 2*ndof)`` matrix; when given only
    ``record @ U_k`` is stored, giving an array ``(B, R, n_steps+1)``.
    Otherwise full states ``(B, n_steps+1, 2*ndof)`` are returned. With
    ``on_failure="mask"`` failed samples are frozen and reported in the
    returned boolean mask instead of raising.
    """
    if not dt > 0:
        raise DomainError("dt must be positive")
    if n_steps < 0:
        raise DomainError("n_steps must be non-negative")
    alpha = _as_batch(alpha, system.space.dim)
    B = alpha.shape[0]
    U = system.initial(alpha) if U0 is None else np.array(U0, dtype=float, ndmin=2).copy()
    if U.shape != (B, 2 * system.ndof):
        raise ShapeError(f"initial state shape {U.shape} != {(B, 2 * system.ndof)}")
    if record is None:
        out = np.empty((B, n_steps + 1, 2 * system.ndof))
        out[:, 0] = U
    else:
        record = np.asarray(record, dtype=float)
        out = np.empty((B, record.shape[0], n_steps + 1))
        out[:, :, 0] = U @ record.T
    mats = (system.mass(alpha), system.damping(alpha))
    failed = np.zeros(B, dtype=bool)
    for k in range(1, n_steps + 1):
        live = np.flatnonzero(~failed)
        t_prev = t0 + (k - 1) * dt
        if live.size:
            sub_mats = (mats[0][live], mats[1][live])
            U_new, res, ok = _midpoint_batch(system, alpha[live], U[live], t_prev, dt, tol,
                                             max_iter, sub_mats)
            if not np.all(ok):
                bad = live[~ok]
                if on_failure == "raise":
                    raise ConvergenceError(
                        f"midpoint step {k} did not converge for samples {bad[:5].tolist()} "
                        f"(residual {np.max(res[~ok]):.3g})",
                        residual=float(np.max(res[~ok])), step=k, samples=bad.tolist(),
                    )
                failed[bad] = True
                U_new[~ok] = U[bad]
            U[live] = U_new
        if record is None:
            out[:, k] = U
        else:
            out[:, :, k] = U @ record.T
    return out, failed


def integrate(system, alpha, dt, n_steps, tol=1e-10, max_iter=50, U0=None):
    """Trajectory of one sample; row k is k midpoint steps from ``U0``."""
    alpha = _as_batch(alpha, system.space.dim)[:1]
    if U0 is not None:
        U0 = np.array(U0, dtype=float, ndmin=2)
        if not np.all(np.isfinite(U0)):
            raise NonFiniteInputError("initial state must be finite")
    states, _ = integrate_batch(system, alpha, dt, n_steps, tol, max_iter, U0=U0)
    times = dt * np.arange(n_steps + 1)
    return StateTrajectory(times, states[0])


def record_row(system, spec):
    """Row ``r`` with ``r @ U_k`` equal to the QoI value at step k."""
    N = np.asarray(system.shape_vector(spec), dtype=float)
    row = np.zeros(2 * system.ndof)
    if spec.kind == "displacement":
        row[: system.ndof] = N
    else:
        row[system.ndof :] = N
    return row


def qoi_value(traj, spec, k, system):
    if not 0 <= k < traj.states.shape[0]:
        raise IndexError(f"step {k} outside trajectory of {traj.states.shape[0]} rows")
    N = np.asarray(system.shape_vector(spec), dtype=float)
    vec = traj.displacements[k] if spec.kind == "displacement" else traj.velocities[k]
    nz = np.flatnonzero(N)
    return float(math.fsum(N[nz] * vec[nz]))


# ---------------------------------------------------------------------------
# single degree of freedom


def _dof_vector(ndof, spec):
    if spec.dof is None or not 0 <= spec.dof < ndof:
        raise ResolutionError(f"QoI {spec.label} does not resolve to a dof of a {ndof}-dof system")
    N = np.zeros(ndof)
    N[spec.dof] = 1.0
    return N


def make_sdof_system(mass=5.0, c0=5.0, k0=11.0, amp=10.0, freq=3.0, sd=0.2):
    """Mass-spring-damper with uncertain damping and stiffness.

    ``C = c0 (1 + a_0)``, ``K = k0 (1 + a_1)``, ``f = amp sin(freq t)``,
    starting from rest, with ``a ~ N(0, sd^2)`` independent.
    """
    space = ParameterSpace.normal([0.0, 0.0], [sd, sd])

    def m(alpha):
        return np.full((alpha.shape[0], 1, 1), mass)

    def c(alpha):
        return (c0 * (1.0 + alpha[:, 0]))[:, None, None]

    def stiffness(alpha):
        return k0 * (1.0 + alpha[:, 1])

    def restoring(u, alpha):
        return stiffness(alpha)[:, None] * u

    def tangent(u, alpha):
        return stiffness(alpha)[:, None, None] * np.ones((1, 1, 1))

    def load(t, alpha):
        return np.full((alpha.shape[0], 1), amp * math.sin(freq * t))

    def energy(u, alpha):
        return 0.5 * stiffness(alpha) * u[:, 0] ** 2

    return DynamicalSystem(
        name="sdof", ndof=1, space=space, mass=m, damping=c, restoring=restoring,
        load=load, shape_vector=lambda spec: _dof_vector(1, spec),
        param_layout={"eps": [0, 1]}, tangent=tangent, energy=energy,
        info={"stiffness": stiffness, "mass": mass, "c0": c0, "k0": k0},
    )


def make_linear_system(M, C, K, load=None, U0=None):
    """Deterministic linear system with constant matrices (zero-dim parameters)."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    C = np.atleast_2d(np.asarray(C, dtype=float))
    K = np.atleast_2d(np.asarray(K, dtype=float))
    n = M.shape[0]
    space = ParameterSpace.standard(1)  # a dummy coordinate, ignored
    U0 = None if U0 is None else np.asarray(U0, dtype=float)

    def load_fn(t, alpha):
        if load is None:
            return np.zeros((alpha.shape[0], n))
        return np.broadcast_to(np.asarray(load(t), dtype=float), (alpha.shape[0], n)).copy()

    def initial(alpha):
        if U0 is None:
            return np.zeros((alpha.shape[0], 2 * n))
        return np.tile(U0, (alpha.shape[0], 1))

    return DynamicalSystem(
        name="linear", ndof=n, space=space,
        mass=lambda a: np.broadcast_to(M, (a.shape[0], n, n)).copy(),
        damping=lambda a: np.broadcast_to(C, (a.shape[0], n, n)).copy(),
        restoring=lambda u, a: u @ K.T,
        load=load_fn, shape_vector=lambda spec: _dof_vector(n, spec),
        tangent=lambda u, a: np.broadcast_to(K, (u.shape[0], n, n)).copy(),
        energy=lambda u, a: 0.5 * np.einsum("bi,ij,bj->b", u, K, u),
        initial_state=initial,
    )


# ---------------------------------------------------------------------------
# geometrically nonlinear cantilever beam

_GAUSS_S = np.array([0.5 - 0.5 * math.sqrt(0.6), 0.5, 0.5 + 0.5 * math.sqrt(0.6)])
_GAUSS_W = np.array([5.0, 8.0, 5.0]) / 18.0


def hermite(s, h):
    """Cubic Hermite values on local coordinate s in [0, 1] for element length h."""
    s = np.asarray(s, dtype=float)
    return np.stack([
        1 - 3 * s**2 + 2 * s**3,
        h * (s - 2 * s**2 + s**3),
        3 * s**2 - 2 * s**3,
        h * (-(s**2) + s**3),
    ], axis=-1)


def _element_operators(h):
    """Per Gauss point 6-vectors mapping local dofs (u_a, w_a, t_a, u_b, w_b, t_b)
    to u_x, w_x and w_xx."""
    A = np.zeros((3, 6))
    G = np.zeros((3, 6))
    H2 = np.zeros((3, 6))
    for q, s in enumerate(_GAUSS_S):
        A[q, [0, 3]] = [-1.0 / h, 1.0 / h]
        G[q, [1, 2, 4, 5]] = [(-6 * s + 6 * s**2) / h, 1 - 4 * s + 3 * s**2,
                              (6 * s - 6 * s**2) / h, -2 * s + 3 * s**2]
        H2[q, [1, 2, 4, 5]] = [(-6 + 12 * s) / h**2, (-4 + 6 * s) / h,
                               (6 - 12 * s) / h**2, (-2 + 6 * s) / h]
    return A, G, H2


@dataclass(frozen=True)
class BeamModel:
    """Discrete cantilever: node 0 clamped, nodes 1..n_el carry (u, w, theta)."""

    n_elements: int
    length: float
    area: float
    inertia: float
    density: float
    damping_ratio: float
    q: float
    field: KLField
    nonlinear: bool = True

    @property
    def h(self):
        return self.length / self.n_elements

    @property
    def ndof(self):
        return 3 * self.n_elements

    def element_dofs(self):
        # indices into the padded vector (3 clamped zeros first)
        return np.array([[3 * e + j for j in range(6)] for e in range(self.n_elements)])

    def element_moduli(self, alpha):
        mids = (np.arange(self.n_elements) + 0.5) * self.h
        return field_value(self.field, mids, alpha)

    def _gauss_fields(self, u, alpha):
        B = u.shape[0]
        pad = np.concatenate([np.zeros((B, 3)), u], axis=1)
        d = pad[:, self.element_dofs()]  # (B, E, 6)
        A, G, H2 = _element_operators(self.h)
        ux = np.einsum("bej,qj->beq", d, A)
        wx = np.einsum("bej,qj->beq", d, G)
        wxx = np.einsum("bej,qj->beq", d, H2)
        strain = ux + 0.5 * wx**2 if self.nonlinear else ux
        EA = self.element_moduli(alpha) * self.area
        EI = self.element_moduli(alpha) * self.inertia
        return d, ux, wx, wxx, strain, EA, EI, (A, G, H2)

    def _assemble_vec(self, local):
        B = local.shape[0]
        full = np.zeros((B, self.ndof + 3))
        for e, idx in enumerate(self.element_dofs()):
            full[:, idx] += local[:, e]
        return full[:, 3:]

    def _assemble_mat(self, local):
        B = local.shape[0]
        full = np.zeros((B, self.ndof + 3, self.ndof + 3))
        for e, idx in enumerate(self.element_dofs()):
            full[:, idx[:, None], idx[None, :]] += local[:, e]
        return full[:, 3:, 3:]

    def restoring(self, u, alpha):
        _, _, wx, wxx, strain, EA, EI, (A, G, H2) = self._gauss_fields(u, alpha)
        wq = _GAUSS_W * self.h
        axial = EA[..., None] * strain * wq  # (B, E, Q)
        local = np.einsum("beq,qj->bej", axial, A)
        if self.nonlinear:
            local += np.einsum("beq,qj->bej", axial * wx, G)
        local += np.einsum("beq,qj->bej", EI[..., None] * wxx * wq, H2)
        return self._assemble_vec(local)

    def tangent(self, u, alpha):
        _, _, wx, wxx, strain, EA, EI, (A, G, H2) = self._gauss_fields(u, alpha)
        wq = _GAUSS_W * self.h
        if self.nonlinear:
            v = A[None, None] + wx[..., None] * G[None, None]  # (B, E, Q, 6)
        else:
            v = np.broadcast_to(A, wx.shape + (6,))
        k = np.einsum("beq,beqi,beqj->beij", EA[..., None] * wq, v, v)
        if self.nonlinear:
            k += np.einsum("beq,qi,qj->beij", EA[..., None] * strain * wq, G, G)
        k += np.einsum("beq,qi,qj->beij", np.broadcast_to(EI[..., None] * wq, wx.shape), H2, H2)
        return self._assemble_mat(k)

    def strain_energy(self, u, alpha):
        _, _, _, wxx, strain, EA, EI, _ = self._gauss_fields(u, alpha)
        wq = _GAUSS_W * self.h
        dens = 0.5 * EA[..., None] * strain**2 + 0.5 * EI[..., None] * wxx**2
        return np.sum(dens * wq, axis=(1, 2))

    def mass_matrix(self):
        h, rho = self.h, self.density
        me = np.zeros((6, 6))
        ax = rho * h / 6.0 * np.array([[2.0, 1.0], [1.0, 2.0]])
        me[np.ix_([0, 3], [0, 3])] = ax
        tr = rho * h / 420.0 * np.array([
            [156, 22 * h, 54, -13 * h],
            [22 * h, 4 * h**2, 13 * h, -3 * h**2],
            [54, 13 * h, 156, -22 * h],
            [-13 * h, -3 * h**2, -22 * h, 4 * h**2],
        ])
        me[np.ix_([1, 2, 4, 5], [1, 2, 4, 5])] = tr
        local = np.broadcast_to(me, (1, self.n_elements, 6, 6))
        return self._assemble_mat(local)[0]

    def load_vector(self):
        h = self.h
        fe = np.zeros(6)
        fe[[1, 2, 4, 5]] = -self.q * np.array([h / 2, h**2 / 12, h / 2, -(h**2) / 12])
        local = np.broadcast_to(fe, (1, self.n_elements, 6))
        return self._assemble_vec(local)[0]

    def shape_vector(self, spec):
        N = np.zeros(self.ndof)
        if spec.dof is not None:
            return _dof_vector(self.ndof, spec)
        x = float(spec.x)
        if not (0.0 <= x <= self.length * (1 + 1e-12)):
            raise ResolutionError(f"x={x} lies outside the beam [0, {self.length}]")
        e = min(int(x / self.h), self.n_elements - 1)
        s = x / self.h - e
        if abs(s) < 1e-12:
            s = 0.0
        elif abs(s - 1.0) < 1e-12:
            s = 1.0
        base = 3 * e - 3  # dof index of node e in the reduced vector
        if spec.component == "transverse":
            vals = hermite(s, self.h)
            cols = [base + 1, base + 2, base + 4, base + 5]
        else:
            vals = np.array([1.0 - s, s])
            cols = [base, base + 3]
        for c, v in zip(cols, vals):
            if c >= 0:
                N[c] = v
        return N


def make_beam_system(n_elements=10, field=None, nonlinear=True, load_scale=1.0,
                     length=3.0, width=0.1, density=100.0, damping_per_density=40.0,
                     q=5e4):
    """Clamped-free beam under a uniform downward load with a random modulus field.

    The parameter vector holds the field's standard-normal coefficients.
    Damping is mass proportional, ``C = damping_per_density * M``.
    """
    if n_elements < 2:
        raise DomainError("the beam needs at least two elements")
    field = make_kl_field() if field is None else field
    model = BeamModel(
        n_elements=n_elements, length=length, area=width * width,
        inertia=width**4 / 12.0, density=density,
        damping_ratio=damping_per_density, q=q * load_scale, field=field,
        nonlinear=nonlinear,
    )
    space = ParameterSpace.standard(field.M)
    M = model.mass_matrix()
    C = damping_per_density * M
    f = model.load_vector()
    n = model.ndof

    def load(t, alpha):
        return np.broadcast_to(f, (alpha.shape[0], n)).copy()

    return DynamicalSystem(
        name="beam", ndof=n, space=space,
        mass=lambda a: np.broadcast_to(M, (a.shape[0], n, n)).copy(),
        damping=lambda a: np.broadcast_to(C, (a.shape[0], n, n)).copy(),
        restoring=model.restoring, load=load, shape_vector=model.shape_vector,
        param_layout={"eps": list(range(field.M))}, tangent=model.tangent,
        energy=model.strain_energy, info={"model": model},
    )


# ---------------------------------------------------------------------------
# forcing and damping helpers


def bridge_load(t):
    """Chirp-like pressure ``-1e5 [sin(0.02 (20 - t)^2) - sin(0.02 (20 + t)^2)]``."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise DomainError("bridge load is defined for t >= 0")
    out = -1.0e5 * (np.sin(0.02 * (20.0 - t) ** 2) - np.sin(0.02 * (20.0 + t) ** 2))
    return float(out) if out.ndim == 0 else out


def rayleigh_coefficients(zeta, omegas):
    w1, w2 = (float(w) for w in omegas)
    if not (w1 > 0 and w2 > 0):
        raise DomainError("frequencies must be positive")
    A = np.array([[1.0 / w1, w1], [1.0 / w2, w2]]) / 2.0
    if abs(w1 - w2) <= 1e-12 * max(w1, w2) or abs(np.linalg.det(A)) < 1e-300:
        raise DegenerateFrequenciesError(f"frequencies {w1} and {w2} do not determine a, b")
    a, b = np.linalg.solve(A, [zeta, zeta])
    return float(a), float(b)


def rayleigh_damping(M, K, zeta, omegas):
    """``C = a M + b K`` with ``zeta = (a/w + b w)/2`` at both frequencies."""
    a, b = rayleigh_coefficients(zeta, omegas)
    return a * np.asarray(M, dtype=float) + b * np.asarray(K, dtype=float)
