"""Metropolis sampling of closed imaginary-time paths.

A path of ``n_slices`` positions is updated one slice at a time in
sequential order. Each proposal is a uniform displacement in the cube
``[-width, width]^d``, accepted with probability
``min(1, exp(delta log w))`` where ``w`` is the local weight of the slice.
During burn-in the width is retuned every ``TUNE_WINDOW`` sweeps towards 50%
acceptance; it is frozen before any measurement is taken.

Single-slice moves relax a path fluctuation of wavelength ``lambda`` slices
in a time that grows like ``lambda^2``, which makes the low modes that carry
``<V>`` slow when ``tau`` is small. Unless ``collective_moves`` is off, each
sweep therefore continues with rigid translations of blocks of
``L = 2, 4, 8, ...`` consecutive slices (``L <= n_slices / 2``, blocks
aligned at multiples of ``L``, half-width ``width``), each of which changes
only the two links at the block boundary, and ends with a translation of the
whole path. The latter changes no link at all; the potential weight
factorises as ``exp(-beta c |centroid|^2) * (shape part)`` with
``c = m omega^2 / 2``, so its half-width is twice the conditional centroid
spread ``1 / sqrt(2 beta c)``. Each move is a symmetric-proposal Metropolis
step, so the sequence leaves the path distribution invariant.

Random numbers
--------------
Chain ``c`` of a run with seed ``s`` draws from
``PCG64(SeedSequence(s, spawn_key=(c,)))``. Sweeps are processed in blocks,
and each block draws one array ``rng.random((n_block_sweeps, rows, d + 1))``.
Rows ``0 .. n_slices - 1`` belong to the slices, followed (with collective
moves) by one row per block translation in order of increasing ``L`` and
block start, and one row for the whole-path translation when ``omega > 0``.
In every row the first ``d`` entries give the proposal and the last one the
accept test. Burn-in blocks are ``TUNE_WINDOW`` sweeps long and
measurement blocks ``stride * max(1, MEASURE_BLOCK // stride)`` sweeps (the
final block of each phase may be shorter). This rule is part of the
reproducibility contract and must not change silently.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import _backend, _pycore

__all__ = [
    "ChainState",
    "Path",
    "SamplerFault",
    "Samples",
    "SimulationConfig",
    "TrotterWarning",
    "acceptance_probability",
    "energy_scale",
    "init_chain",
    "run_chain",
    "run_chains",
    "sweep",
    "tune_proposal",
]

TUNE_WINDOW = 50
TUNE_FACTOR = 1.1
TARGET_ACCEPTANCE = 0.5
MEASURE_BLOCK = 500
TROTTER_WARN = 0.2
BETA_GAPS = 10.0
DEFAULT_SLICES = 50


class SamplerFault(RuntimeError):
    """A non-finite log-weight difference; the kernel was used outside its domain."""


class TrotterWarning(UserWarning):
    """The time step is large compared with the physical energy scales."""


def energy_scale(m: float, omega: float) -> float:
    """Heuristic excitation gap ``min(omega, (m omega^2)^(1/3))``."""
    return min(omega, (m * omega * omega) ** (1.0 / 3.0))


@dataclass(frozen=True)
class SimulationConfig:
    """Physical parameters and sampler controls for one (m, omega) point.

    ``beta`` defaults to ``10 / energy_scale(m, omega)`` and ``n_slices`` to
    50. ``proposal_width`` defaults to ``2 * min(tau, sqrt(tau / m))``, the
    width of the free kernel in the two kinematic regimes.
    """

    m: float
    omega: float
    d: int = 1
    beta: float | None = None
    n_slices: int = DEFAULT_SLICES
    n_sweeps: int = 20000
    burn_in_sweeps: int = 2000
    measure_stride: int = 10
    seed: int = 0
    proposal_width: float | None = None
    n_chains: int = 4
    collective_moves: bool = True

    def __post_init__(self):
        if not (math.isfinite(self.m) and self.m >= 0):
            raise ValueError(f"m must be non-negative, got {self.m!r}")
        if self.m == 0 and self.d != 1:
            raise ValueError("m = 0 is only supported for d = 1")
        if not (math.isfinite(self.omega) and self.omega >= 0):
            raise ValueError(f"omega must be non-negative, got {self.omega!r}")
        if self.d not in (1, 2, 3):
            raise ValueError(f"d must be 1, 2 or 3, got {self.d!r}")
        if self.beta is None:
            scale = energy_scale(self.m, self.omega)
            if scale <= 0:
                raise ValueError("beta must be given explicitly when m * omega = 0")
            object.__setattr__(self, "beta", BETA_GAPS / scale)
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be positive, got {self.beta!r}")
        if self.n_slices < 2:
            raise ValueError("n_slices must be at least 2")
        if self.n_sweeps < 0 or self.burn_in_sweeps < 0:
            raise ValueError("sweep counts must be non-negative")
        if self.measure_stride < 1 or self.n_chains < 1:
            raise ValueError("measure_stride and n_chains must be at least 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.proposal_width is None:
            tau = self.tau
            width = tau if self.m == 0 else min(tau, math.sqrt(tau / self.m))
            object.__setattr__(self, "proposal_width", 2.0 * width)
        if not (math.isfinite(self.proposal_width) and self.proposal_width > 0):
            raise ValueError("proposal_width must be positive")
        if self.trotter_number > TROTTER_WARN:
            warnings.warn(
                f"tau * max(m, omega, (m omega^2)^(1/3)) = {self.trotter_number:.3g} "
                f"exceeds {TROTTER_WARN}", TrotterWarning, stacklevel=3)

    @property
    def tau(self) -> float:
        return self.beta / self.n_slices

    @property
    def trotter_number(self) -> float:
        m, w = self.m, self.omega
        return self.tau * max(m, w, (m * w * w) ** (1.0 / 3.0))

    @property
    def pot_coef(self) -> float:
        return 0.5 * self.m * self.omega * self.omega

    @property
    def shift_width(self) -> float:
        """Half-width of the whole-path translation; 0 disables the move."""
        if not self.collective_moves or self.pot_coef == 0:
            return 0.0
        return 2.0 / math.sqrt(2.0 * self.beta * self.pot_coef)

    @property
    def uniform_rows(self) -> int:
        """Uniform rows consumed per sweep."""
        return _pycore.uniform_rows(self.n_slices, self.collective_moves, self.shift_width > 0)

    @property
    def samples_per_chain(self) -> int:
        return self.n_sweeps // self.measure_stride

    def with_slices(self, n_slices: int) -> "SimulationConfig":
        """Same point and controls at a different time step; the width is re-derived."""
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", TrotterWarning)
            return replace(self, n_slices=n_slices, proposal_width=None)


@dataclass
class Path:
    """Closed imaginary-time path; slice ``N - 1`` links back to slice 0."""

    slices: np.ndarray
    tau: float

    closed = True

    def __post_init__(self):
        self.slices = np.ascontiguousarray(self.slices, dtype=np.float64)
        if self.slices.ndim != 2 or self.slices.shape[0] < 2:
            raise ValueError("a path needs shape (N >= 2, d)")
        if not np.all(np.isfinite(self.slices)):
            raise ValueError("path coordinates must be finite")

    def __len__(self):
        return self.slices.shape[0]

    def links(self) -> np.ndarray:
        """Displacements ``q[i+1] - q[i]`` around the closed path."""
        return np.roll(self.slices, -1, axis=0) - self.slices


@dataclass
class ChainState:
    path: Path
    rng: np.random.Generator
    proposal_width: float
    accepted: int = 0
    proposed: int = 0
    burned_in: bool = False
    window_accepted: int = 0
    window_proposed: int = 0

    @property
    def acceptance(self) -> float:
        return self.accepted / self.proposed if self.proposed else 0.0


def chain_rng(seed: int, chain_index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(chain_index,))))


def init_chain(config: SimulationConfig, chain_index: int = 0) -> ChainState:
    """Cold start: every slice at the origin, generator derived from (seed, chain_index)."""
    if chain_index < 0:
        raise ValueError("chain_index must be non-negative")
    path = Path(np.zeros((config.n_slices, config.d)), config.tau)
    return ChainState(path, chain_rng(config.seed, chain_index), float(config.proposal_width))


def acceptance_probability(log_w_old: float, log_w_new: float) -> float:
    """Metropolis rule for a symmetric proposal: ``min(1, w_new / w_old)``."""
    delta = log_w_new - log_w_old
    return 1.0 if delta >= 0 else math.exp(delta)


def _advance(state, config, uniforms, stride=0, out_kin=None, out_pot=None, out_paths=None,
             core=None, lattice=None):
    core = core or _backend.core
    collective = lattice is None and config.collective_moves
    acc, prop, status = core.run_sweeps(
        state.path.slices, float(config.m), config.tau, config.pot_coef,
        state.proposal_width, uniforms, stride, out_kin, out_pot, out_paths, lattice,
        config.shift_width if collective else 0.0, collective)
    state.accepted += acc
    state.proposed += prop
    state.window_accepted += acc
    state.window_proposed += prop
    if status != 0:
        raise SamplerFault(
            f"non-finite log-weight difference (m={config.m}, tau={config.tau}, d={config.d})")
    return state


def sweep(state: ChainState, config: SimulationConfig, n: int = 1, core=None,
          lattice=None) -> ChainState:
    """Perform ``n`` sequential Metropolis passes over all slices, in place.

    ``lattice=(spacing, half_extent)`` confines the chain to a finite lattice
    for exact-enumeration tests; it forces the Python core and skips the
    collective moves.
    """
    rows = config.uniform_rows
    if lattice is not None:
        core = _backend.get_core("python")
        rows = config.n_slices
    uniforms = state.rng.random((n, rows, config.d + 1))
    return _advance(state, config, uniforms, core=core, lattice=lattice)


def tune_proposal(state: ChainState, target: float = TARGET_ACCEPTANCE) -> ChainState:
    """Scale the width by 1.1 towards ``target`` acceptance over the last window."""
    if state.burned_in:
        raise RuntimeError("the proposal width is frozen once burn-in has finished")
    if not 0 < target < 1:
        raise ValueError("target acceptance must lie in (0, 1)")
    if state.window_proposed:
        rate = state.window_accepted / state.window_proposed
        if rate > target:
            state.proposal_width *= TUNE_FACTOR
        elif rate < target:
            state.proposal_width /= TUNE_FACTOR
    state.window_accepted = 0
    state.window_proposed = 0
    return state


def finish_burn_in(state: ChainState) -> ChainState:
    state.burned_in = True
    state.accepted = state.proposed = 0
    state.window_accepted = state.window_proposed = 0
    return state


@dataclass
class ChainResult:
    chain_index: int
    kinetic: np.ndarray
    potential: np.ndarray
    acceptance: float
    proposal_width: float
    paths: np.ndarray | None = None


def run_chain(config: SimulationConfig, chain_index: int = 0, store_paths: bool = False,
              core=None) -> ChainResult:
    """Burn in with tuning, then measure every ``measure_stride`` sweeps."""
    state = init_chain(config, chain_index)
    n, d = config.n_slices, config.d
    rows = config.uniform_rows
    remaining = config.burn_in_sweeps
    while remaining > 0:
        block = min(TUNE_WINDOW, remaining)
        _advance(state, config, state.rng.random((block, rows, d + 1)), core=core)
        tune_proposal(state)
        remaining -= block
    finish_burn_in(state)

    stride = config.measure_stride
    n_meas = config.samples_per_chain
    kinetic = np.empty(n_meas)
    potential = np.empty(n_meas)
    paths = np.empty((n_meas, n, d)) if store_paths else None
    block_len = stride * max(1, MEASURE_BLOCK // stride)
    done = 0
    filled = 0
    while done < config.n_sweeps:
        block = min(block_len, config.n_sweeps - done)
        k = block // stride
        _advance(state, config, state.rng.random((block, rows, d + 1)), stride,
                 kinetic[filled:filled + k], potential[filled:filled + k],
                 paths[filled:filled + k] if store_paths else None, core=core)
        done += block
        filled += k
    return ChainResult(chain_index, kinetic, potential, state.acceptance,
                       state.proposal_width, paths)


@dataclass
class Samples:
    """Measurement records of all chains, concatenated chain-major.

    ``kinetic[i]`` and ``potential[i]`` are the path averages of the link
    kinetic estimator and of ``V`` for stored configuration ``i``; ``paths``
    holds the configurations themselves when requested.
    """

    config: SimulationConfig
    kinetic: np.ndarray
    potential: np.ndarray
    chain: np.ndarray
    acceptance: list = field(default_factory=list)
    proposal_width: list = field(default_factory=list)
    paths: np.ndarray | None = None

    def __len__(self):
        return len(self.kinetic)

    @property
    def mean_acceptance(self) -> float:
        return float(np.mean(self.acceptance)) if self.acceptance else 0.0


def run_chains(config: SimulationConfig, workers: int = 1, first_chain: int = 0,
               store_paths: bool = False, core=None) -> Samples:
    """Run ``config.n_chains`` independent chains and assemble them by chain index.

    Chains ``first_chain .. first_chain + n_chains - 1`` are used, so runs that
    must be statistically independent of each other can take disjoint ranges.
    The result does not depend on ``workers``.
    """
    indices = range(first_chain, first_chain + config.n_chains)
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(lambda c: run_chain(config, c, store_paths, core), indices))
    else:
        results = [run_chain(config, c, store_paths, core) for c in indices]
    results.sort(key=lambda r: r.chain_index)
    return Samples(
        config=config,
        kinetic=np.concatenate([r.kinetic for r in results]),
        potential=np.concatenate([r.potential for r in results]),
        chain=np.concatenate([np.full(len(r.kinetic), r.chain_index) for r in results]),
        acceptance=[r.acceptance for r in results],
        proposal_width=[r.proposal_width for r in results],
        paths=np.concatenate([r.paths for r in results]) if store_paths else None,
    )
