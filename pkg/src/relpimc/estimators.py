"""Energy estimators and their statistical errors.

The kinetic estimator of a link with displacement ``dq`` is minus the
tau-derivative of the log free kernel,

    T_link = (m tau / s) K_0(m s) / K_1(m s) + (tau^2 - dq^2) / (tau s^2),
    s = sqrt(tau^2 + dq^2),

averaged over the links of a path. It contains the rest mass. In more
than one dimension the derivative is taken by central differences.
Errors come from a blocking analysis of the per-configuration series.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats

from . import _pycore
from .special_functions import bessel_k01_ratio

__all__ = [
    "EnergyEstimate",
    "blocking_curve",
    "blocking_error",
    "energies",
    "kinetic_energy",
    "kinetic_link_value",
    "mean_covariance",
    "path_kinetic",
    "potential_energy",
    "richardson",
    "total_energy",
]

MIN_BLOCKS = 16
PLATEAU_TOL = 0.10
CHI2_LEVEL = 0.99


@dataclass(frozen=True)
class EnergyEstimate:
    mean: float
    stderr: float
    n_samples: int
    n_blocks: int
    blocking_converged: bool
    method: str = "analytic"

    def shifted(self, offset: float) -> "EnergyEstimate":
        return EnergyEstimate(self.mean + offset, self.stderr, self.n_samples, self.n_blocks,
                              self.blocking_converged, self.method)


def blocking_curve(series) -> list[tuple[int, int, float]]:
    """``(block_size, n_blocks, stderr)`` for each doubling with at least 16 blocks."""
    x = np.asarray(series, dtype=float)
    curve = []
    size = 1
    while len(x) >= MIN_BLOCKS:
        curve.append((size, len(x), math.sqrt(np.var(x, ddof=1) / len(x))))
        x = 0.5 * (x[0:len(x) - 1:2] + x[1::2])
        size *= 2
    return curve


def blocking_error(series) -> tuple[float, float, int, bool]:
    """Blocked standard error of the mean of a correlated series.

    The block size is the first level at which the remaining lag-1
    autocorrelation of the blocked series is statistically insignificant
    (a chi-square test on the per-level autocovariances). The result is
    flagged converged when one more doubling changes the error by less than
    10%.

    Returns ``(mean, stderr, n_blocks, converged)``.
    """
    x = np.asarray(series, dtype=float)
    if x.ndim != 1 or len(x) < 4:
        raise ValueError("blocking needs a one-dimensional series of length >= 4")
    mean = float(np.mean(x))
    if len(x) < MIN_BLOCKS:
        return mean, math.sqrt(np.var(x, ddof=1) / len(x)), len(x), False

    levels = []
    y = x
    while len(y) >= MIN_BLOCKS:
        n = len(y)
        mu = np.mean(y)
        var = np.var(y)
        gamma = np.dot(y[:-1] - mu, y[1:] - mu) / n
        levels.append((n, var, gamma))
        y = 0.5 * (y[0:n - 1:2] + y[1::2])

    if all(var == 0 for _, var, _ in levels):
        return mean, 0.0, levels[0][0], True

    terms = [n * (gamma / var) ** 2 if var > 0 else 0.0 for n, var, gamma in levels]
    tail = np.cumsum(terms[::-1])[::-1]
    depth = len(levels)
    chosen = depth - 1
    for k in range(depth):
        if tail[k] < stats.chi2.ppf(CHI2_LEVEL, depth - k):
            chosen = k
            break

    def se(k):
        n, var, _ = levels[k]
        return math.sqrt(var / (n - 1))

    stderr = se(chosen)
    if chosen + 1 < depth:
        nxt = se(chosen + 1)
        converged = stderr == nxt or abs(nxt - stderr) < PLATEAU_TOL * max(stderr, nxt)
    else:
        converged = False
    return mean, stderr, levels[chosen][0], bool(converged)


def _estimate(series, method="analytic") -> EnergyEstimate:
    mean, stderr, n_blocks, converged = blocking_error(series)
    return EnergyEstimate(mean, stderr, len(series), n_blocks, converged, method)


def kinetic_link_value(dq: float, tau: float, m: float) -> float:
    """Relativistic kinetic estimator for one link in one dimension."""
    if not (tau > 0 and math.isfinite(tau)):
        raise ValueError("tau must be positive")
    if m == 0:
        raise ValueError("the kinetic estimator is not defined for m = 0")
    if not (m > 0 and math.isfinite(m)) or not math.isfinite(dq):
        raise ValueError("m must be positive and dq finite")
    s2 = tau * tau + dq * dq
    s = math.sqrt(s2)
    return (m * tau / s) * bessel_k01_ratio(m * s) + (tau * tau - dq * dq) / (tau * s2)


def path_kinetic(slices, tau: float, m: float) -> float:
    """Average link kinetic estimator of one closed path of shape ``(N, d)``."""
    slices = np.asarray(slices, dtype=float)
    if slices.ndim == 1:
        slices = slices[:, None]
    links = np.roll(slices, -1, axis=0) - slices
    d = slices.shape[1]
    if d == 1:
        return float(np.mean([kinetic_link_value(float(dq), tau, m) for dq in links[:, 0]]))
    if m <= 0:
        raise ValueError("the kinetic estimator is not defined for m = 0")
    return float(np.mean([_pycore.kinetic_r2(float(r @ r), m, tau, d) for r in links]))


def _check_samples(samples):
    if len(samples) == 0:
        raise ValueError("no samples")


def kinetic_energy(samples, config) -> EnergyEstimate:
    """Mean kinetic energy (rest mass included) over stored configurations.

    The per-configuration values were accumulated by the sampling core with
    the same link formula as :func:`path_kinetic`.
    """
    _check_samples(samples)
    if config.m == 0:
        raise ValueError("the kinetic estimator is not defined for m = 0")
    method = "analytic" if config.d == 1 else "finite-difference"
    return _estimate(samples.kinetic, method)


def potential_energy(samples, config) -> EnergyEstimate:
    _check_samples(samples)
    return _estimate(samples.potential)


def mean_covariance(x, y) -> float:
    """Covariance of the sample means of two paired series, blocking-corrected."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if x.shape != y.shape:
        raise ValueError("paired series must have equal length")
    s_sum = blocking_error(x + y)[1]
    s_x = blocking_error(x)[1]
    s_y = blocking_error(y)[1]
    return 0.5 * (s_sum ** 2 - s_x ** 2 - s_y ** 2)


def total_energy(kin: EnergyEstimate, pot: EnergyEstimate, covariance: float) -> EnergyEstimate:
    """Sum of two estimates from the same samples, with their covariance."""
    if kin.n_samples != pot.n_samples:
        raise ValueError("kinetic and potential estimates come from different samples")
    var = kin.stderr ** 2 + pot.stderr ** 2 + 2.0 * covariance
    return EnergyEstimate(kin.mean + pot.mean, math.sqrt(max(var, 0.0)), kin.n_samples,
                          min(kin.n_blocks, pot.n_blocks),
                          kin.blocking_converged and pot.blocking_converged, kin.method)


def energies(samples, config) -> dict[str, EnergyEstimate]:
    """Kinetic, potential and total energy, with and without the rest mass.

    Also reports ``t_minus_2v``, the paired estimate of ``<T> - 2<V>`` used
    for the ultra-relativistic virial check.
    """
    kin = kinetic_energy(samples, config)
    pot = potential_energy(samples, config)
    total = total_energy(kin, pot, mean_covariance(samples.kinetic, samples.potential))
    return {
        "t": kin,
        "t_minus_m": kin.shifted(-config.m),
        "v": pot,
        "e": total,
        "e_minus_m": total.shifted(-config.m),
        "t_minus_2v": _estimate(samples.kinetic - 2.0 * samples.potential, kin.method),
    }


def richardson(coarse: EnergyEstimate, fine: EnergyEstimate) -> EnergyEstimate:
    """Remove the O(tau^2) error from estimates at ``tau`` and ``tau / 2``.

    The two runs must be statistically independent.
    """
    mean = (4.0 * fine.mean - coarse.mean) / 3.0
    stderr = math.sqrt(16.0 * fine.stderr ** 2 + coarse.stderr ** 2) / 3.0
    return EnergyEstimate(mean, stderr, coarse.n_samples + fine.n_samples,
                          min(coarse.n_blocks, fine.n_blocks),
                          coarse.blocking_converged and fine.blocking_converged, fine.method)
