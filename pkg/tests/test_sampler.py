import math
import warnings
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, stats

from relpimc import _backend, _pycore
from relpimc.estimators import blocking_error
from relpimc.kernels import KernelParams, Potential, log_local_weight
from relpimc.sampler import (
    ChainState,
    Path,
    SamplerFault,
    SimulationConfig,
    TrotterWarning,
    acceptance_probability,
    chain_rng,
    energy_scale,
    finish_burn_in,
    init_chain,
    run_chain,
    run_chains,
    sweep,
    tune_proposal,
)

CORES = ["python"] + (["cython"] if _backend.BACKEND == "cython" else [])


def small_config(**kw):
    base = dict(m=1.0, omega=1.0, beta=1.0, n_slices=8, n_sweeps=400, burn_in_sweeps=100,
                measure_stride=4, seed=11, n_chains=2)
    base.update(kw)
    return SimulationConfig(**base)


def test_config_defaults():
    cfg = SimulationConfig(m=1.0, omega=1.0)
    assert cfg.beta == pytest.approx(10.0)
    assert cfg.n_slices == 50
    assert cfg.tau == pytest.approx(0.2)
    assert cfg.proposal_width == pytest.approx(2 * min(0.2, math.sqrt(0.2)))
    cfg = SimulationConfig(m=0.001, omega=1.0)
    assert cfg.beta == pytest.approx(10.0 / energy_scale(0.001, 1.0))
    assert cfg.proposal_width == pytest.approx(2 * cfg.tau)
    assert cfg.pot_coef == pytest.approx(0.0005)


@pytest.mark.parametrize("kw", [
    dict(m=-1.0), dict(omega=-1.0), dict(d=4), dict(m=0.0, d=2), dict(n_slices=1),
    dict(beta=0.0), dict(n_sweeps=-1), dict(measure_stride=0), dict(n_chains=0),
    dict(seed=-1), dict(proposal_width=0.0), dict(m=math.nan),
])
def test_config_validation(kw):
    with pytest.raises(ValueError):
        small_config(**kw)


def test_free_particle_needs_beta():
    with pytest.raises(ValueError):
        SimulationConfig(m=1.0, omega=0.0)
    assert SimulationConfig(m=1.0, omega=0.0, beta=4.0).pot_coef == 0.0


def test_trotter_warning():
    with pytest.warns(TrotterWarning):
        SimulationConfig(m=100.0, omega=1.0, n_slices=10)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SimulationConfig(m=1.0, omega=1.0, n_slices=100)


def test_path_is_closed():
    q = np.array([[0.0], [1.0], [3.0]])
    path = Path(q, 0.1)
    assert path.closed
    assert np.allclose(path.links().ravel(), [1.0, 2.0, -3.0])
    assert path.links().sum() == 0
    with pytest.raises(ValueError):
        Path(np.zeros(3), 0.1)
    with pytest.raises(ValueError):
        Path(np.full((3, 1), np.nan), 0.1)


def test_cold_start():
    cfg = small_config(d=3)
    state = init_chain(cfg, 5)
    assert state.path.slices.shape == (8, 3)
    assert not state.path.slices.any()
    assert state.proposal_width == cfg.proposal_width
    with pytest.raises(ValueError):
        init_chain(cfg, -1)


def test_chain_streams_independent():
    a = chain_rng(7, 0).random(1000)
    b = chain_rng(7, 1).random(1000)
    c = chain_rng(8, 0).random(1000)
    assert not np.array_equal(a, b) and not np.array_equal(a, c)
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.15
    assert np.array_equal(a, chain_rng(7, 0).random(1000))


@pytest.mark.parametrize("core", CORES)
def test_determinism(core):
    cfg = small_config()
    a = run_chains(cfg, core=_backend.get_core(core))
    b = run_chains(cfg, core=_backend.get_core(core))
    assert np.array_equal(a.kinetic, b.kinetic)
    assert np.array_equal(a.potential, b.potential)
    assert a.proposal_width == b.proposal_width


def test_workers_do_not_change_results():
    cfg = small_config(n_chains=3)
    a = run_chains(cfg, workers=1, store_paths=True)
    b = run_chains(cfg, workers=3, store_paths=True)
    assert np.array_equal(a.kinetic, b.kinetic)
    assert np.array_equal(a.paths, b.paths)
    assert np.array_equal(a.chain, b.chain)


@pytest.mark.skipif(len(CORES) < 2, reason="compiled core not built")
@pytest.mark.parametrize("d", [1, 2, 3])
def test_cores_agree_exactly(d):
    cfg = small_config(d=d, m=0.7, omega=1.3)
    py = run_chains(cfg, core=_backend.get_core("python"), store_paths=True)
    cy = run_chains(cfg, core=_backend.get_core("cython"), store_paths=True)
    assert np.array_equal(py.paths, cy.paths)
    assert np.array_equal(py.kinetic, cy.kinetic)
    assert np.array_equal(py.potential, cy.potential)
    assert py.acceptance == cy.acceptance


@pytest.mark.skipif(len(CORES) < 2, reason="compiled core not built")
def test_cores_agree_massless():
    cfg = small_config(m=0.0, omega=0.0, beta=1.0)
    py = run_chains(cfg, core=_backend.get_core("python"), store_paths=True)
    cy = run_chains(cfg, core=_backend.get_core("cython"), store_paths=True)
    assert np.array_equal(py.paths, cy.paths)


def test_run_chains_layout():
    cfg = small_config(n_chains=3, n_sweeps=90, measure_stride=7)
    s = run_chains(cfg, first_chain=4)
    per = 90 // 7
    assert len(s) == 3 * per
    assert list(np.unique(s.chain)) == [4, 5, 6]
    assert all(np.sum(s.chain == c) == per for c in (4, 5, 6))
    assert len(s.acceptance) == 3
    assert all(0.0 <= a <= 1.0 for a in s.acceptance)
    one = run_chain(cfg, 5)
    assert np.array_equal(s.kinetic[s.chain == 5], one.kinetic)


def test_sweep_consumes_fixed_uniform_count():
    cfg = small_config(d=2)
    state = init_chain(cfg, 0)
    sweep(state, cfg, n=3)
    ref = chain_rng(cfg.seed, 0)
    ref.random((3, cfg.uniform_rows, 3))
    assert state.rng.random() == ref.random()
    assert state.proposed == 3 * cfg.n_slices


def test_uniform_row_layout():
    # slices, then blocks of 2, 4, 8 (n // L each), then the whole-path shift
    cfg = SimulationConfig(m=1.0, omega=1.0, n_slices=20)
    assert cfg.uniform_rows == 20 + (10 + 5 + 2) + 1
    assert replace(cfg, collective_moves=False).uniform_rows == 20
    free = SimulationConfig(m=1.0, omega=0.0, beta=2.0, n_slices=20)
    assert free.shift_width == 0.0 and free.uniform_rows == 20 + 17
    assert SimulationConfig(m=1.0, omega=1.0, n_slices=3).uniform_rows == 4
    assert cfg.shift_width == pytest.approx(2.0 / math.sqrt(cfg.beta * cfg.m))


def test_acceptance_probability():
    assert acceptance_probability(0.0, 1.0) == 1.0
    assert acceptance_probability(1.0, 1.0) == 1.0
    assert acceptance_probability(0.0, -2.0) == pytest.approx(math.exp(-2.0))


@pytest.mark.parametrize("core", CORES)
def test_zero_uniform_always_accepts(core):
    path = np.zeros((6, 1))
    u = chain_rng(1, 0).random((20, 6, 2))
    u[..., 1] = 0.0
    acc, prop, status = _backend.get_core(core).run_sweeps(path, 1.0, 0.1, 0.5, 0.3, u, 0)
    assert status == _pycore.OK
    assert acc == prop == 120


@pytest.mark.parametrize("core", CORES)
def test_unit_uniform_accepts_only_uphill(core):
    path = np.zeros((6, 1))
    u = chain_rng(2, 0).random((5, 6, 2))
    u[..., 1] = 1.0
    acc, prop, _ = _backend.get_core(core).run_sweeps(path, 1.0, 0.1, 0.5, 0.3, u, 0)
    # from the cold start every move lowers the weight, so nothing is accepted
    assert acc == 0 and prop == 30
    assert not path.any()


def test_detailed_balance_identity():
    rng = np.random.default_rng(2024)
    params = KernelParams(1.0, 0.1)
    pot = Potential(1.0, 1.0)
    for _ in range(10000):
        qp, q, q_new, qn = rng.normal(scale=2.0, size=4)
        lw = log_local_weight(qp, q, qn, params, pot)
        lw_new = log_local_weight(qp, q_new, qn, params, pot)
        forward = acceptance_probability(lw, lw_new)
        backward = acceptance_probability(lw_new, lw)
        assert forward / backward == pytest.approx(math.exp(lw_new - lw), rel=1e-12)


@pytest.mark.parametrize("core", CORES)
def test_translation_covariance_without_potential(core):
    u = chain_rng(5, 0).random((50, 10, 2))
    a = np.zeros((10, 1))
    b = np.full((10, 1), 0.25)
    ca = _backend.get_core(core).run_sweeps(a, 0.8, 0.2, 0.0, 0.5, u, 0)
    cb = _backend.get_core(core).run_sweeps(b, 0.8, 0.2, 0.0, 0.5, u, 0)
    assert ca == cb
    assert np.allclose(b - a, 0.25, atol=1e-12)


def _collective_run(core, path, cfg, u):
    return _backend.get_core(core).run_sweeps(
        path, cfg.m, cfg.tau, cfg.pot_coef, cfg.proposal_width, u, 0, None, None, None, None,
        cfg.shift_width, True)


@pytest.mark.skipif(len(CORES) < 2, reason="compiled core not built")
@pytest.mark.parametrize("n,d", [(5, 1), (16, 2), (33, 3), (64, 1)])
def test_collective_moves_identical_in_both_cores(n, d):
    cfg = SimulationConfig(m=0.7, omega=1.3, d=d, beta=3.0, n_slices=n)
    u = chain_rng(9, n).random((200, cfg.uniform_rows, d + 1))
    results = []
    for core in CORES:
        path = np.zeros((n, d))
        results.append((_collective_run(core, path, cfg, u), path))
    assert results[0][0] == results[1][0]
    assert np.array_equal(results[0][1], results[1][1])


def _freeze_rows(u, rows):
    # u = 1/2 proposes a zero displacement, which leaves the path untouched
    u[:, rows, :-1] = 0.5
    return u


def test_whole_path_shift_samples_the_centroid_gaussian():
    cfg = SimulationConfig(m=1.0, omega=1.0, beta=2.0, n_slices=6)
    shape = np.random.default_rng(3).normal(scale=0.2, size=(6, 1))
    path = shape - shape.mean()
    rng = chain_rng(4, 0)
    centroids = []
    for _ in range(40):
        u = _freeze_rows(rng.random((1000, cfg.uniform_rows, 2)), slice(0, -1))
        out = np.empty((1000, 6, 1))
        _backend.core.run_sweeps(path, cfg.m, cfg.tau, cfg.pot_coef, cfg.proposal_width, u, 1,
                                 None, None, out, None, cfg.shift_width, True)
        centroids.append(out[:, :, 0].mean(axis=1))
    c = np.concatenate(centroids)
    # the shape never changes, only the centroid moves
    assert np.allclose(path - path.mean(), shape - shape.mean(), atol=1e-12)
    variance = 1.0 / (2.0 * cfg.beta * cfg.pot_coef)
    mean, err = blocking_error(c)[:2]
    assert abs(mean) < 4 * err
    assert np.mean(c * c) == pytest.approx(variance, rel=0.06)


def test_block_translations_sample_the_exact_link_law():
    # n = 4: blocks {0, 1} and {2, 3} move rigidly, so only y = q2 - q1 changes
    m, tau = 1.0, 0.25
    cfg = SimulationConfig(m=m, omega=0.0, beta=4 * tau, n_slices=4, proposal_width=0.6)
    assert cfg.uniform_rows == 4 + 2
    path = np.array([[0.0], [0.1], [0.3], [0.15]])
    c0 = (path[1, 0] - path[0, 0]) + (path[3, 0] - path[2, 0])
    rng = chain_rng(6, 0)
    ys = []
    for _ in range(60):
        u = _freeze_rows(rng.random((1000, 6, 2)), slice(0, 4))
        out = np.empty((1000, 4, 1))
        _backend.core.run_sweeps(path, m, tau, 0.0, cfg.proposal_width, u, 1, None, None, out,
                                 None, 0.0, True)
        ys.append(out[:, 2, 0] - out[:, 1, 0])
    y = np.concatenate(ys)

    def density(x):
        return math.exp(_pycore.log_kernel_r2(x * x, m, tau, 1)
                        + _pycore.log_kernel_r2((x + c0) ** 2, m, tau, 1))

    def moment(k):
        return integrate.quad(lambda x: x ** k * density(x), -np.inf, np.inf, epsabs=0,
                              epsrel=1e-10, limit=400)[0]

    z = moment(0)
    for k in (1, 2):
        mean, err = blocking_error(y ** k)[:2]
        assert abs(mean - moment(k) / z) < 4 * err


@pytest.mark.parametrize("core", CORES)
def test_collective_moves_rejected_in_lattice_mode(core):
    if core == "cython":
        pytest.skip("lattice mode is Python-only")
    path = np.zeros((8, 1))
    u = np.full((1, 8 + 6, 2), 0.5)
    with pytest.raises(ValueError):
        _backend.get_core(core).run_sweeps(path, 1.0, 0.1, 0.0, 0.3, u, 0, lattice=(0.1, 5),
                                           segments=True)


@pytest.mark.parametrize("core", CORES)
def test_uniform_shape_checked(core):
    path = np.zeros((8, 1))
    with pytest.raises(ValueError):
        _backend.get_core(core).run_sweeps(path, 1.0, 0.1, 0.5, 0.3, np.zeros((2, 9, 2)), 0)
    with pytest.raises(ValueError):
        _backend.get_core(core).run_sweeps(path, 1.0, 0.1, 0.5, 0.3, np.zeros((2, 8, 2)), 0,
                                           shift_width=0.1, segments=True)


def test_collective_moves_shorten_autocorrelation():
    # heavy particle, fine time step: the low path modes are slow under local moves
    cfg = SimulationConfig(m=100.0, omega=1.0, beta=10.0, n_slices=200, n_sweeps=6000,
                           burn_in_sweeps=2000, measure_stride=5, seed=3, n_chains=1)
    n_eff = []
    for collective in (False, True):
        res = run_chain(replace(cfg, collective_moves=collective))
        n_eff.append(np.var(res.potential, ddof=1) / blocking_error(res.potential)[1] ** 2)
    assert n_eff[1] > 4 * n_eff[0]


def test_sampler_fault_on_non_finite_weight():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", TrotterWarning)
        cfg = small_config(omega=1e200)
    assert math.isinf(cfg.pot_coef)
    with pytest.raises(SamplerFault):
        run_chain(cfg)


def test_tuning_rules():
    state = ChainState(Path(np.zeros((4, 1)), 0.1), chain_rng(0, 0), 1.0)
    state.window_accepted, state.window_proposed = 90, 100
    tune_proposal(state)
    assert state.proposal_width == pytest.approx(1.1)
    state.window_accepted, state.window_proposed = 10, 100
    tune_proposal(state)
    assert state.proposal_width == pytest.approx(1.0)
    assert state.window_proposed == 0
    state.accepted = state.proposed = 5
    finish_burn_in(state)
    assert state.proposed == 0 and state.burned_in
    with pytest.raises(RuntimeError):
        tune_proposal(state)


def test_burn_in_tunes_to_target_acceptance():
    cfg = SimulationConfig(m=1.0, omega=1.0, beta=10.0, n_slices=100, n_sweeps=1000,
                           burn_in_sweeps=2000, measure_stride=10, seed=3, n_chains=1)
    result = run_chain(cfg, 0)
    assert 0.4 <= result.acceptance <= 0.6
    assert result.proposal_width != cfg.proposal_width


def test_massless_two_slice_stationary_law():
    # with m = 0, omega = 0 and two slices the link Delta has density ~ (tau^2 + Delta^2)^-2
    tau = 0.5
    cfg = SimulationConfig(m=0.0, omega=0.0, beta=2 * tau, n_slices=2, n_sweeps=500000,
                           burn_in_sweeps=1000, measure_stride=50, seed=9, n_chains=2)
    s = run_chains(cfg, store_paths=True)
    delta = s.paths[:, 1, 0] - s.paths[:, 0, 0]

    def cdf(x):
        return 0.5 + (np.arctan(x / tau) + tau * x / (tau * tau + x * x)) / math.pi

    # 10^6 sweeps in total, tested at the 1% level
    assert stats.kstest(delta, cdf).pvalue > 0.01


@settings(max_examples=20, deadline=None)
@given(st.integers(min_value=0, max_value=2**32), st.integers(min_value=1, max_value=3))
def test_paths_stay_finite(seed, d):
    cfg = small_config(seed=seed, d=d, n_sweeps=40, burn_in_sweeps=20)
    s = run_chains(cfg, store_paths=True)
    assert np.all(np.isfinite(s.paths))
    assert np.all(np.isfinite(s.kinetic)) and np.all(s.potential >= 0)
