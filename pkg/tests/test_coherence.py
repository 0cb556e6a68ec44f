import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from atomlaser import analytic as an
from atomlaser.coherence import (
    CoherenceTrace,
    Method,
    central_frequency,
    classify_coherence,
    coherence_sector,
    coherence_time_quadrature,
    coherence_time_resolvent,
    compute_g1,
    default_time_grid,
    g1_trace,
    g2_zero,
    linewidth,
)
from atomlaser.errors import ConvergenceError, CoverageError, ParameterError, TruncationError
from atomlaser.fock import DensityMatrix, FockSpace, SuperOperator, annihilation
from atomlaser.liouvillian import FeedbackParams, LaserParams, build_collision, build_model


@pytest.fixture(scope="module")
def mu15():
    return build_model(LaserParams(mu=15))


def test_trace_starts_at_one_for_any_generator():
    for chi in (0.0, 7.0, 300.0):
        m = build_model(LaserParams(mu=12, chi=chi), FeedbackParams(M=0.4, F=0.1))
        tr = g1_trace(m.L, m.rho_ss, np.linspace(0, 1, 5))
        assert abs(tr.values[0] - 1) < 1e-12
        assert not tr.violations()


def test_standard_laser_decay(mu15):
    t = np.linspace(0, 6, 61)
    tr = g1_trace(mu15.L, mu15.rho_ss, t)
    assert np.allclose(np.abs(tr.values), np.exp(-t / 60), rtol=0.02)


@given(st.floats(0.01, 3.0))
@settings(max_examples=10)
def test_collisions_alone_match_closed_form(C):
    space = FockSpace(55)
    rho = build_model(LaserParams(mu=15)).rho_ss
    L = build_collision(LaserParams(mu=15, C=C), space)
    t = np.linspace(0, 2 * math.pi / C, 257)
    tr = g1_trace(L, rho, t)
    assert np.max(np.abs(tr.values - an.g1_collisions_only(15, C, t))) < 1e-6


def test_adaptive_propagation_agrees(mu15):
    m = build_model(LaserParams(mu=15, chi=20.0))
    t = np.linspace(0, 3, 31)
    a = g1_trace(m.L, m.rho_ss, t).values
    b = g1_trace(m.L, m.rho_ss, t, method="ode").values
    assert np.max(np.abs(a - b)) < 1e-7


def test_trace_rejects_non_trace_preserving_generator(mu15):
    bad = SuperOperator(mu15.space, mu15.L.matrix * 1.0)
    bad.matrix[0, 0] += 1.0
    with pytest.raises(ParameterError):
        g1_trace(bad, mu15.rho_ss, [0.0, 1.0])


def test_truncation_edge_is_detected():
    p = LaserParams(mu=15)
    m = build_model(p)
    coherent = DensityMatrix.coherent(m.space, math.sqrt(30))
    with pytest.raises(TruncationError):
        g1_trace(m.L, coherent, np.linspace(0, 1, 3))


def test_trace_validation():
    with pytest.raises(ParameterError):
        CoherenceTrace(np.array([0.1, 0.2]), np.ones(2))
    with pytest.raises(ParameterError):
        CoherenceTrace(np.array([0.0, 0.2]), np.ones(3))
    tr = CoherenceTrace(np.array([0.0, 1.0]), np.array([1.0, 1.1]))
    assert tr.violations()


def test_resolvent_standard_linewidth():
    res = linewidth(LaserParams(mu=60))
    assert math.isclose(res.tau_coh, 120, rel_tol=0.02)
    assert res.linewidth == 1 / res.tau_coh
    assert res.imag_residual < 1e-6


@pytest.mark.parametrize("chi,expected", [(5.0, 26 / 120), (100.0, 10.30)])
def test_resolvent_regime_examples(chi, expected):
    res = linewidth(LaserParams(mu=60, chi=chi))
    assert math.isclose(res.linewidth, expected, rel_tol=0.10)
    assert res.iterations >= 1


def test_full_space_solve_matches_sector():
    m = build_model(LaserParams(mu=20, chi=4.0))
    w = 0.3
    a = coherence_time_resolvent(m.L, m.rho_ss, w)
    b = coherence_time_resolvent(m.L, m.rho_ss, w, restrict_sector=False)
    assert abs(a - b) < 1e-9 * abs(a)


def test_sector_is_first_off_diagonal(mu15):
    s = coherence_sector(mu15.L, mu15.rho_ss)
    assert s.size == mu15.space.dim - 1


def test_initial_frequency_of_collisions():
    rho = build_model(LaserParams(mu=15)).rho_ss
    L = build_collision(LaserParams(mu=15, C=0.3), FockSpace(55))
    assert math.isclose(coherence_sector(L, rho).initial_frequency(), 2 * 15 * 0.3, rel_tol=1e-9)


def test_frequency_iteration_limit():
    m = build_model(LaserParams(mu=60, chi=5.0))
    with pytest.raises(ConvergenceError):
        central_frequency(m.L, m.rho_ss, max_iters=1)
    with pytest.raises(ParameterError):
        central_frequency(m.L, m.rho_ss, max_iters=0)
    omega, iters = central_frequency(m.L, m.rho_ss)
    assert iters > 1
    w0, zero = central_frequency(m.L, m.rho_ss, revival=True)
    assert zero == 0 and w0 != omega


def test_optimal_feedback_removes_rotation():
    p = LaserParams(mu=30, chi=40.0)
    m = build_model(p, FeedbackParams.optimal(p.C))
    omega, _ = central_frequency(m.L, m.rho_ss)
    assert abs(omega) < 1e-6


def test_optimal_feedback_gives_pure_exponential():
    p = LaserParams(mu=30, chi=40.0)
    f = FeedbackParams.optimal(p.C)
    m = build_model(p, f)
    tau = linewidth(p, f).tau_coh
    # |g1| = exp(-t/(2 tau)); two decay constants span t <= 4 tau
    t = np.linspace(0, 4 * tau, 200)
    logmag = np.log(np.abs(g1_trace(m.L, m.rho_ss, t).values))
    slope, icpt = np.polyfit(t, logmag, 1)
    resid = logmag - (slope * t + icpt)
    r2 = 1 - np.sum(resid ** 2) / np.sum((logmag - logmag.mean()) ** 2)
    assert r2 > 0.9999


@pytest.mark.parametrize("chi", [0.0, 5.0, 100.0])
def test_quadrature_matches_resolvent(chi):
    p = LaserParams(mu=60, chi=chi)
    q = linewidth(p, method=Method.QUADRATURE).tau_coh
    r = linewidth(p).tau_coh
    assert math.isclose(q, r, rel_tol=0.02)


def test_quadrature_of_exact_exponential():
    t = np.linspace(0, 60 * 40, 4001)
    tr = CoherenceTrace(t, np.exp(-t / 60))
    assert math.isclose(coherence_time_quadrature(tr), 30, rel_tol=1e-4)
    short = CoherenceTrace(t[:200], np.exp(-t[:200] / 60))
    with pytest.raises(CoverageError):
        coherence_time_quadrature(short)


@pytest.mark.slow
def test_revival_plateau_methods_agree():
    p = LaserParams(mu=15, C=100 * math.pi * 15)
    q = linewidth(p, method=Method.QUADRATURE)
    r = linewidth(p)
    assert r.revival and r.iterations == 0
    assert math.isclose(q.linewidth, 582.5, rel_tol=0.05)
    assert math.isclose(q.tau_coh, r.tau_coh, rel_tol=0.10)


def test_revival_regime_requires_integer_mu():
    p = LaserParams(mu=15.5, C=100 * math.pi * 15.5)
    with pytest.raises(ParameterError):
        linewidth(p)
    analytic_only = linewidth(p, method="analytic")
    assert analytic_only.revival


def test_revival_trace_coverage():
    p = LaserParams(mu=15, C=100 * math.pi * 15)
    t = np.linspace(0, 1 / 15, 50)
    tr = CoherenceTrace(t, np.exp(-t), params=p, revival=True)
    with pytest.raises(CoverageError):
        coherence_time_quadrature(tr)


def test_default_grid_shapes():
    grid, revival = default_time_grid(LaserParams(mu=60, chi=3.0))
    assert len(grid) == 2048 and not revival and grid[0] == 0
    assert len({float(f"{h:.9e}") for h in np.diff(grid)}) == 8
    p = LaserParams(mu=15, C=100 * math.pi * 15)
    grid, revival = default_time_grid(p)
    assert revival
    assert grid[-1] >= 14 / 15
    assert np.diff(grid)[0] <= math.pi / p.C / 64 * (1 + 1e-9)


def test_compute_g1_extends_until_decayed():
    m = build_model(LaserParams(mu=30, chi=2.0))
    tr = compute_g1(m)
    last = np.abs(tr.values[tr.times >= 0.95 * tr.times[-1]])
    assert last.max() < 1e-6


@given(st.integers(1, 40))
def test_g2_of_number_state(n):
    rho = DensityMatrix.number_state(FockSpace(45), n)
    assert math.isclose(g2_zero(rho), 1 - 1 / n, abs_tol=1e-12)


def test_g2_stationary_and_coherent(mu15):
    assert abs(g2_zero(mu15.rho_ss) - 1) < 1e-9
    assert abs(g2_zero(DensityMatrix.coherent(FockSpace(80), 3.0)) - 1) < 1e-9
    with pytest.raises(ParameterError):
        g2_zero(DensityMatrix.number_state(FockSpace(4), 0))


def test_classification_examples():
    mu = 60
    c = classify_coherence(1 / (2 * mu), LaserParams(mu=mu))
    assert c.degenerate and math.isclose(c.ratio, 1.39e-4, rel_tol=1e-2)
    p = LaserParams(mu=mu, chi=mu ** 2)
    assert not classify_coherence(an.linewidth_regimes(p).linewidth, p).degenerate
    p = LaserParams(mu=mu, chi=mu ** 1.5)
    assert classify_coherence(an.linewidth_feedback(p), p).degenerate
    with pytest.raises(ParameterError):
        classify_coherence(0.0, p)


def test_linewidth_nondecreasing_in_collisions():
    chis = [0.0, 0.3, 1.0, 3.0, 10.0, 30.0, 100.0]
    ells = [linewidth(LaserParams(mu=30, chi=c)).linewidth for c in chis]
    assert all(b >= a for a, b in zip(ells, ells[1:]))


def test_result_serializes():
    d = linewidth(LaserParams(mu=20, chi=1.0)).as_dict()
    assert d["method"] == "resolvent" and d["linewidth"] == 1 / d["tau_coh"]
