import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from atomlaser.errors import ConvergenceError, ParameterError
from atomlaser.fock import (
    DensityMatrix,
    FockSpace,
    SuperOperator,
    annihilation,
    anticommutator_super,
    coherent_amplitudes,
    collision_hamiltonian,
    creation,
    dissipator,
    gain_anticommutator,
    gain_integral_identity_check,
    inverse_gain_anticommutator,
    number,
    saturated_gain,
    spost,
    spre,
    unvec,
    vec,
)

dims = st.integers(min_value=2, max_value=9)
finite = st.floats(min_value=-3, max_value=3, allow_nan=False, allow_infinity=False)


def complex_matrix(d):
    return st.tuples(arrays(float, (d, d), elements=finite),
                     arrays(float, (d, d), elements=finite)).map(lambda ri: ri[0] + 1j * ri[1])


def random_state(dim, seed):
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    rho = x @ x.conj().T
    return rho / np.trace(rho)


def test_space_rejects_tiny_dimension():
    with pytest.raises(ParameterError):
        FockSpace(1)
    with pytest.raises(ParameterError):
        FockSpace(2.5)


def test_ladder_operators_match_number_basis():
    s = FockSpace(6)
    a = annihilation(s)
    assert np.allclose(a[2, 3], math.sqrt(3))
    assert np.allclose(creation(s) @ a, number(s))
    comm = a @ creation(s) - creation(s) @ a
    assert np.allclose(comm[:-1, :-1], np.eye(5))
    assert np.allclose(np.diag(collision_hamiltonian(s)), [n * (n - 1) for n in range(6)])


@given(dims.flatmap(lambda d: complex_matrix(d)))
def test_vec_roundtrip(m):
    assert np.array_equal(unvec(vec(m), m.shape[0]), m)


@given(dims.flatmap(lambda d: st.tuples(complex_matrix(d), complex_matrix(d))))
def test_pre_and_post_multiplication(pair):
    x, rho = pair
    d = x.shape[0]
    assert np.allclose(unvec(spre(x) @ vec(rho), d), x @ rho)
    assert np.allclose(unvec(spost(x) @ vec(rho), d), rho @ x)


@given(dims.flatmap(lambda d: complex_matrix(d)))
def test_dissipator_is_trace_annihilating_and_matches_definition(r):
    d = r.shape[0]
    D = dissipator(r)
    rho = random_state(d, 1)
    rdr = r.conj().T @ r
    expected = r @ rho @ r.conj().T - 0.5 * (rdr @ rho + rho @ rdr)
    assert np.allclose(D.apply(rho), expected, atol=1e-10)
    if np.linalg.norm(r) > 0:
        assert D.trace_residual() < 1e-12


def _gain_by_elements(rho):
    """(G rho)_nm = 2 sqrt(nm) rho_{n-1,m-1} / (n+m) - (1[n<top] + 1[m<top]) rho_nm / 2."""
    d = rho.shape[0]
    out = np.zeros_like(rho)
    for n in range(d):
        for m in range(d):
            if n and m:
                out[n, m] += 2 * math.sqrt(n * m) * rho[n - 1, m - 1] / (n + m)
            out[n, m] -= 0.5 * ((n < d - 1) + (m < d - 1)) * rho[n, m]
    return out


@given(st.integers(2, 12), st.integers(0, 2 ** 16))
def test_saturated_gain_elementwise(d, seed):
    rho = random_state(d, seed)
    got = saturated_gain(FockSpace(d)).apply(rho)
    assert np.allclose(got, _gain_by_elements(rho), atol=1e-13)


@given(st.integers(2, 30))
def test_saturated_gain_preserves_trace(d):
    assert saturated_gain(FockSpace(d)).trace_residual() < 1e-14


def test_saturated_gain_equals_literal_form_below_top_level():
    s = FockSpace(10)
    literal = (dissipator(creation(s)).matrix @ inverse_gain_anticommutator(s).matrix).toarray()
    ours = saturated_gain(s).dense()
    top = s.dim - 1
    rows, cols = np.divmod(np.arange(s.dim ** 2), s.dim)[::-1]
    far = (rows < top - 1) & (cols < top - 1)
    assert np.allclose(ours[np.ix_(far, far)], literal[np.ix_(far, far)])


def test_gain_anticommutator_inverse_and_truncated_form():
    s = FockSpace(7)
    prod = (gain_anticommutator(s).matrix @ inverse_gain_anticommutator(s).matrix).toarray()
    assert np.allclose(prod, np.eye(49))
    truncated = anticommutator_super(creation(s)).dense()
    exact = gain_anticommutator(s).dense()
    rows, cols = np.divmod(np.arange(49), 7)[::-1]
    inner = (rows < 6) & (cols < 6)
    assert np.allclose(truncated[np.ix_(inner, inner)], exact[np.ix_(inner, inner)])


@pytest.mark.parametrize("dim", [2, 10])
def test_gain_integral_identity(dim):
    assert gain_integral_identity_check(FockSpace(dim)) < 1e-10


def test_gain_integral_identity_flags_underresolved_quadrature():
    with pytest.raises(ConvergenceError):
        gain_integral_identity_check(FockSpace(10), quad_points=21)


def test_gain_integral_identity_refuses_large_dense_problem():
    with pytest.raises(ParameterError):
        gain_integral_identity_check(FockSpace(41))


@given(st.floats(0.1, 25), st.floats(0, 2 * math.pi))
def test_coherent_amplitudes_normalized_in_log_space(r, th):
    d = int(r * r + 12 * r + 30)
    amps = coherent_amplitudes(FockSpace(d), r * np.exp(1j * th))
    assert np.all(np.isfinite(amps))
    assert abs(np.sum(np.abs(amps) ** 2) - 1) < 1e-9


def test_coherent_amplitudes_survive_huge_amplitude():
    amps = coherent_amplitudes(FockSpace(1400), 30.0)
    assert np.all(np.isfinite(amps))
    assert abs(np.sum(np.abs(amps) ** 2) - 1) < 1e-9


def test_density_matrix_validation():
    s = FockSpace(4)
    DensityMatrix.number_state(s, 2).validate()
    DensityMatrix.coherent(s, 0.5).validate()
    with pytest.raises(ParameterError):
        DensityMatrix(s, np.diag([2.0, 0, 0, 0])).validate()
    with pytest.raises(ParameterError):
        DensityMatrix(s, np.diag([1.5, -0.5, 0, 0])).validate()
    bad = np.eye(4) / 4
    bad[0, 1] = 0.1
    with pytest.raises(ParameterError):
        DensityMatrix(s, bad).validate()
    with pytest.raises(ParameterError):
        DensityMatrix(s, np.eye(3) / 3)


def test_density_matrix_is_read_only():
    rho = DensityMatrix.number_state(FockSpace(3), 1)
    with pytest.raises(ValueError):
        rho.rho[0, 0] = 1.0


def test_superoperator_algebra_checks_spaces():
    a = SuperOperator.zero(FockSpace(3))
    b = dissipator(annihilation(FockSpace(4)))
    with pytest.raises(ParameterError):
        a + b
    c = dissipator(annihilation(FockSpace(3)))
    assert np.allclose((2 * c - c + (-c)).dense(), 0)
