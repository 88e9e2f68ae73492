"""Truncated Karhunen-Loeve expansion of a 1-D field with exponential covariance.

Covariance ``sigma_E**2 * exp(-c_K |x1 - x2|)`` on the centered interval
``[-a_K, a_K]``. Structure coordinates ``x`` in ``[0, 2 a_K]`` are mapped to
``x - a_K`` before the eigenfunctions are evaluated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, RootBracketingError, ShapeError


def _bisect(fn, lo, hi, index):
    flo = fn(lo)
    fhi = fn(hi)
    if flo == 0.0:
        return lo
    if fhi == 0.0:
        return hi
    if math.copysign(1.0, flo) == math.copysign(1.0, fhi):
        raise RootBracketingError(index)
    for _ in range(2000):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fmid = fn(mid)
        if fmid == 0.0:
            return mid
        if math.copysign(1.0, fmid) == math.copysign(1.0, flo):
            lo, flo = mid, fmid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def kl_eigenpairs(a_K, c_K, sigma_E, M):
    """Roots ``omega_i`` and eigenvalues ``kappa_i`` for i = 1..M.

    Odd i solve ``omega tan(a omega) = c``, even i solve
    ``omega = -c tan(a omega)``. The i-th root lies in
    ``((i-1) pi / (2a), i pi / (2a))``; both equations are multiplied through
    by the cosine so bisection never meets a tangent pole.
    """
    if not (a_K > 0 and c_K > 0 and sigma_E > 0):
        raise DomainError("a_K, c_K and sigma_E must be positive")
    if M < 1:
        raise DomainError("truncation order M must be at least 1")
    omegas = np.empty(M)
    for i in range(1, M + 1):
        lo = (i - 1) * math.pi / (2 * a_K)
        hi = i * math.pi / (2 * a_K)
        if i % 2:
            fn = lambda w: w * math.sin(a_K * w) - c_K * math.cos(a_K * w)  # noqa: E731
        else:
            fn = lambda w: w * math.cos(a_K * w) + c_K * math.sin(a_K * w)  # noqa: E731
        omegas[i - 1] = _bisect(fn, lo, hi, i)
    kappas = 2 * c_K * sigma_E**2 / (omegas**2 + c_K**2)
    return omegas, kappas


@dataclass(frozen=True)
class KLField:
    """Random modulus field ``E0 + scale * sum eps_i sqrt(kappa_i) f_i(x)``.

    With ``relative=True`` (the default) ``scale = E0`` so that ``sigma_E`` is
    a coefficient of variation; otherwise fluctuations are absolute.
    """

    E0: float
    a_K: float
    c_K: float
    sigma_E: float
    M: int
    omegas: np.ndarray
    kappas: np.ndarray
    relative: bool = True

    @property
    def scale(self):
        return self.E0 if self.relative else 1.0

    def norms(self):
        w = self.omegas
        s = np.sin(2 * w * self.a_K) / (2 * w)
        odd = (np.arange(1, self.M + 1) % 2) == 1
        return np.sqrt(np.where(odd, self.a_K + s, self.a_K - s))


def make_kl_field(E0=2e11, a_K=3.0, c_K=0.333, sigma_E=0.2, M=10, relative=True):
    omegas, kappas = kl_eigenpairs(a_K, c_K, sigma_E, M)
    omegas.flags.writeable = False
    kappas.flags.writeable = False
    return KLField(E0, a_K, c_K, sigma_E, M, omegas, kappas, relative)


def eigenfunction_centered(field, i, xi):
    """Normalized eigenfunction i (1-based) at centered coordinate ``xi``."""
    if not 1 <= i <= field.M:
        raise IndexError(f"eigenfunction index {i} outside 1..{field.M}")
    w = field.omegas[i - 1]
    norm = field.norms()[i - 1]
    xi = np.asarray(xi, dtype=float)
    if i % 2:
        return np.cos(w * xi) / norm
    return np.sin(w * xi) / norm


def eigenfunction(field, i, x):
    """Eigenfunction i at structure coordinate ``x`` in ``[0, 2 a_K]``."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0) or np.any(x > 2 * field.a_K):
        raise DomainError(f"x must lie in [0, {2 * field.a_K}]")
    return eigenfunction_centered(field, i, x - field.a_K)


def _basis(field, x):
    # (len(x), M) matrix of sqrt(kappa_i) f_i(x)
    x = np.atleast_1d(np.asarray(x, dtype=float))
    cols = [eigenfunction(field, i, x) for i in range(1, field.M + 1)]
    return np.stack(cols, axis=-1) * np.sqrt(field.kappas)


def field_fluctuation(field, x, eps):
    """``scale * sum eps_i sqrt(kappa_i) f_i(x)``; eps may be ``(M,)`` or ``(B, M)``."""
    eps = np.asarray(eps, dtype=float)
    if eps.shape[-1] != field.M:
        raise ShapeError(f"eps has {eps.shape[-1]} terms, field has M={field.M}")
    basis = _basis(field, x)
    out = field.scale * (eps @ basis.T)
    if np.ndim(x) == 0:
        out = out[..., 0]
    return out


def field_value(field, x, eps):
    return field.E0 + field_fluctuation(field, x, eps)


def pointwise_variance(field, x):
    """Variance of the truncated field at ``x`` under standard-normal eps."""
    basis = _basis(field, x)
    var = field.scale**2 * np.sum(basis**2, axis=-1)
    return var[0] if np.ndim(x) == 0 else var
