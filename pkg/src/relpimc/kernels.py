"""Short-time density-matrix factors for H = sqrt(p^2 + m^2) + V(q).

The free factor is the exact imaginary-time propagator of the relativistic
kinetic term,

    rho_T(dq; tau) = (m tau / (pi s))^((d+1)/2) K_{(d+1)/2}(m s) / (2 tau)^((d-1)/2),
    s = sqrt(tau^2 + |dq|^2),

which reduces to ``(m tau / (pi s)) K_1(m s)`` in one dimension. A slice
carries the additional potential factor ``exp(-tau V(q_from))``. All weights
are returned as logarithms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _pycore

__all__ = [
    "KernelParams",
    "Potential",
    "UnsupportedConfiguration",
    "log_free_kernel",
    "log_local_weight",
    "log_nonrel_kernel",
    "log_slice_weight",
]


class UnsupportedConfiguration(ValueError):
    """Raised for parameter combinations the kernels deliberately do not cover."""


@dataclass(frozen=True)
class KernelParams:
    m: float
    tau: float
    d: int = 1

    def __post_init__(self):
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be positive and finite, got {self.tau!r}")
        if not (math.isfinite(self.m) and self.m >= 0):
            raise ValueError(f"m must be non-negative and finite, got {self.m!r}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d!r}")


@dataclass(frozen=True)
class Potential:
    """Harmonic potential ``V(q) = 0.5 * mass_ref * omega**2 * |q|**2``."""

    omega: float
    mass_ref: float

    def __post_init__(self):
        if self.omega < 0 or self.mass_ref < 0:
            raise ValueError("omega and mass_ref must be non-negative")

    @property
    def coef(self) -> float:
        return 0.5 * self.mass_ref * self.omega * self.omega

    def __call__(self, q) -> float:
        q = np.atleast_1d(np.asarray(q, dtype=float))
        return self.coef * float(q @ q)


def _sq_norm(dq, d: int) -> float:
    dq = np.atleast_1d(np.asarray(dq, dtype=float))
    if dq.shape != (d,):
        raise ValueError(f"displacement must have shape ({d},), got {dq.shape}")
    if not np.all(np.isfinite(dq)):
        raise ValueError("displacement must be finite")
    return float(dq @ dq)


def log_free_kernel(dq, params: KernelParams) -> float:
    """``ln rho_T(dq; tau, m)`` for the free relativistic particle.

    ``m = 0`` is the analytic massless limit, the Cauchy density
    ``tau / (pi (tau^2 + dq^2))``; it is only available for ``d = 1``.
    """
    r2 = _sq_norm(dq, params.d)
    if params.m == 0.0 and params.d != 1:
        raise UnsupportedConfiguration("the massless kernel is only implemented for d = 1")
    return _pycore.log_kernel_r2(r2, float(params.m), float(params.tau), params.d)


def log_slice_weight(q_from, q_to, params: KernelParams, pot: Potential) -> float:
    q_from = np.atleast_1d(np.asarray(q_from, dtype=float))
    q_to = np.atleast_1d(np.asarray(q_to, dtype=float))
    return log_free_kernel(q_to - q_from, params) - params.tau * pot(q_from)


def log_local_weight(q_prev, q, q_next, params: KernelParams, pot: Potential) -> float:
    """Log of the slice-``q`` dependent part of the path weight.

    Differences of this quantity between two values of ``q`` with fixed
    neighbours are exactly the Metropolis log acceptance ratios.
    """
    q_prev = np.atleast_1d(np.asarray(q_prev, dtype=float))
    q = np.atleast_1d(np.asarray(q, dtype=float))
    q_next = np.atleast_1d(np.asarray(q_next, dtype=float))
    return (log_free_kernel(q - q_prev, params) + log_free_kernel(q_next - q, params)
            - params.tau * pot(q))


def log_nonrel_kernel(dq, params: KernelParams) -> float:
    """Gaussian kernel of ``m + p^2/(2m)``, rest-mass factor ``exp(-m tau)`` included."""
    if params.m <= 0:
        raise ValueError("the non-relativistic kernel needs m > 0")
    r2 = _sq_norm(dq, params.d)
    m, tau, d = params.m, params.tau, params.d
    return 0.5 * d * math.log(m / (2.0 * math.pi * tau)) - m * r2 / (2.0 * tau) - m * tau
