"""Reference values for the one-dimensional relativistic oscillator.

The ground state of ``H = sqrt(p^2 + m^2) + m omega^2 q^2 / 2`` is solved in
momentum space, where the potential becomes ``-(m omega^2 / 2) d^2/dp^2``.
Central differences on a uniform grid with Dirichlet tails turn this into a
symmetric tridiagonal eigenproblem; its lowest eigenpair is found by LAPACK
bisection plus inverse iteration.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy import integrate
from scipy.linalg import eigh_tridiagonal

__all__ = [
    "GridSpec",
    "LAMBDA0",
    "OracleNotConverged",
    "OracleResult",
    "default_grid",
    "free_thermal_kinetic",
    "nonrel_reference",
    "solve_ground_state",
    "ultra_rel_reference",
]

# ground-state constant of |p| + m omega^2 q^2 / 2, in units of (m omega^2)^(1/3)
LAMBDA0 = 0.808617

CONVERGENCE_TOL = 1e-6
TAIL_FRACTION = 0.05
TAIL_TOL = 1e-10


class OracleNotConverged(RuntimeError):
    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


@dataclass(frozen=True)
class GridSpec:
    p_max: float
    n_points: int = 4097

    def __post_init__(self):
        if not (self.p_max > 0 and math.isfinite(self.p_max)):
            raise ValueError("p_max must be positive")
        if self.n_points < 129 or self.n_points % 2 == 0:
            raise ValueError("n_points must be an odd integer >= 129")

    @property
    def spacing(self) -> float:
        return 2.0 * self.p_max / (self.n_points - 1)

    def momenta(self) -> np.ndarray:
        return np.linspace(-self.p_max, self.p_max, self.n_points)

    def refined(self) -> "GridSpec":
        """Half the spacing, same cutoff."""
        return GridSpec(self.p_max, 2 * self.n_points - 1)

    def widened(self) -> "GridSpec":
        """Twice the cutoff, same spacing."""
        return GridSpec(2 * self.p_max, 2 * self.n_points - 1)


def default_grid(m: float, omega: float, n_points: int = 4097) -> GridSpec:
    """Cutoff ten times the larger of the Gaussian and Airy momentum scales.

    The rest mass is deliberately not a scale here: for ``m >> omega`` the
    ground state is Gaussian with width ``sqrt(m omega / 2)``, and a cutoff
    of order ``m`` would only coarsen the grid.
    """
    p_max = 10.0 * max(math.sqrt(m * omega), (m * omega * omega) ** (1.0 / 3.0))
    return GridSpec(p_max, n_points)


@dataclass(frozen=True)
class OracleResult:
    e0: float
    t_mean: float
    v_mean: float
    grid: GridSpec
    converged: bool
    richardson_e0: float
    v_check: float
    tail_weight: float
    shift_refined: float
    shift_widened: float
    kinetic: str = "relativistic"

    def to_dict(self) -> dict:
        out = asdict(self)
        out["grid"] = asdict(self.grid)
        return out


def _kinetic(p, m, kind):
    if kind == "relativistic":
        return np.sqrt(p * p + m * m)
    if kind == "nonrel":
        return m + p * p / (2.0 * m)
    if kind == "ultra":
        return np.abs(p)
    raise ValueError(f"unknown kinetic energy {kind!r}")


def _lowest(m, omega, grid, kind):
    p = grid.momenta()
    h = grid.spacing
    c = m * omega * omega
    t = _kinetic(p, m, kind)
    diag = t + c / (h * h)
    off = np.full(grid.n_points - 1, -c / (2.0 * h * h))
    try:
        vals, vecs = eigh_tridiagonal(diag, off, select="i", select_range=(0, 0))
    except np.linalg.LinAlgError as exc:
        raise OracleNotConverged(f"eigensolver failed: {exc}") from exc
    psi = vecs[:, 0]
    psi = psi / math.sqrt(float(psi @ psi) * h)
    return float(vals[0]), psi, p, t, h


def solve_ground_state(m: float, omega: float, grid: GridSpec | None = None,
                       kinetic: str = "relativistic") -> OracleResult:
    """Lowest eigenpair plus two refinement solves for the convergence check.

    ``kinetic="nonrel"`` swaps in ``m + p^2/(2m)`` and ``kinetic="ultra"``
    uses ``|p|``; the rest of the computation is unchanged.
    """
    if not (m > 0 and omega > 0):
        raise ValueError("m and omega must be positive")
    grid = grid or default_grid(m, omega)
    e0, psi, p, t, h = _lowest(m, omega, grid, kinetic)
    dens = psi * psi * h
    n_tail = max(1, int(round(TAIL_FRACTION * grid.n_points)))
    tail = float(dens[:n_tail].sum() + dens[-n_tail:].sum())
    t_mean = float(dens @ t)
    v_mean = e0 - t_mean
    grad = np.diff(np.concatenate(([0.0], psi, [0.0]))) / h
    v_check = 0.5 * m * omega * omega * float(grad @ grad) * h

    e_ref = _lowest(m, omega, grid.refined(), kinetic)[0]
    e_wide = _lowest(m, omega, grid.widened(), kinetic)[0]
    shift_refined = abs(e_ref - e0) / abs(e0)
    shift_widened = abs(e_wide - e0) / abs(e0)
    result = OracleResult(
        e0=e0, t_mean=t_mean, v_mean=v_mean, grid=grid,
        converged=shift_refined < CONVERGENCE_TOL and shift_widened < CONVERGENCE_TOL,
        richardson_e0=(4.0 * e_ref - e0) / 3.0, v_check=v_check, tail_weight=tail,
        shift_refined=shift_refined, shift_widened=shift_widened, kinetic=kinetic)
    if tail > TAIL_TOL:
        raise OracleNotConverged(
            f"ground state reaches the grid boundary (tail weight {tail:.3g}); increase p_max",
            result.to_dict())
    return result


@dataclass(frozen=True)
class UltraRelReference:
    e0: float
    t_ref: float
    v_ref: float


def ultra_rel_reference(m: float, omega: float) -> UltraRelReference:
    """Ground state of ``|p| + m omega^2 q^2 / 2`` and its virial split."""
    scale = (m * omega * omega) ** (1.0 / 3.0)
    return UltraRelReference(LAMBDA0 * scale, 2.0 * LAMBDA0 / 3.0 * scale, LAMBDA0 / 3.0 * scale)


def nonrel_reference(m: float, omega: float) -> tuple[float, float]:
    """``(m + omega/2, omega/2)``: harmonic ground state with and without rest mass."""
    return m + 0.5 * omega, 0.5 * omega


def free_thermal_kinetic(m: float, beta: float) -> float:
    """Thermal ``<sqrt(p^2 + m^2)>`` of a free particle in one dimension."""
    if not (m >= 0 and beta > 0):
        raise ValueError("need m >= 0 and beta > 0")

    def energy(p):
        return math.sqrt(p * p + m * m)

    def weight(p):
        return math.exp(-beta * (energy(p) - m))

    # split where the Boltzmann factor has fallen by e^-1, e^-10, e^-60
    cuts = [0.0]
    for drop in (1.0, 10.0, 60.0):
        e = m + drop / beta
        cuts.append(math.sqrt(e * e - m * m))
    pieces = list(zip(cuts[:-1], cuts[1:])) + [(cuts[-1], math.inf)]
    num = sum(integrate.quad(lambda p: energy(p) * weight(p), a, b,
                             epsabs=0, epsrel=1e-13, limit=200)[0] for a, b in pieces)
    den = sum(integrate.quad(weight, a, b, epsabs=0, epsrel=1e-13, limit=200)[0]
              for a, b in pieces)
    return num / den
