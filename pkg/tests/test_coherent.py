import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cnumlab.coherent import (
    MONOMIALS,
    LeakageWarning,
    RadialGrid,
    SymbolTable,
    coherent_amplitudes,
    coherent_vector,
    grid_for_cutoff,
    lower_symbol,
    probe_residual,
    reconstruction_residual,
    upper_symbol,
    zero_mode_monomial_matrix,
    zero_mode_projector_sum,
)
from cnumlab.fock import build_basis

complexes = st.complex_numbers(max_magnitude=2.5, allow_nan=False, allow_infinity=False)


def test_grid_convention():
    g = RadialGrid(8.0)
    assert g.convention_error() < 1e-12
    # the unit disc has area 1 under d^2z = dx dy / pi
    unit = RadialGrid(1.0, 200, 8)
    assert unit.integrate(np.ones(unit.size)) == pytest.approx(1.0, abs=1e-12)


def test_grid_validate_rejects_small_radius():
    with pytest.raises(ValueError):
        RadialGrid(2.0).validate(1e-8)


def test_symbol_tables():
    z = 1.3 - 0.4j
    assert lower_symbol("adag_a", z) == pytest.approx(abs(z) ** 2)
    assert upper_symbol("adag_a", z) == pytest.approx(abs(z) ** 2 - 1)
    assert upper_symbol("adag_adag_a_a", z) == pytest.approx(abs(z) ** 4 - 4 * abs(z) ** 2 + 2)
    assert lower_symbol("aa", z) == pytest.approx(z**2)
    assert upper_symbol("adag", z) == pytest.approx(np.conj(z))
    table = SymbolTable.standard()
    assert set(table.lower) == set(MONOMIALS)


@settings(max_examples=40, deadline=None)
@given(complexes, st.sampled_from(sorted(MONOMIALS)))
def test_lower_symbol_is_coherent_expectation(z, name):
    n = 60
    c = coherent_amplitudes(z, n)
    F = zero_mode_monomial_matrix(name, n)
    assert np.vdot(c, F @ c) == pytest.approx(lower_symbol(name, z), abs=1e-9)


@settings(max_examples=40, deadline=None)
@given(complexes)
def test_coherent_state_normalized_and_eigenvector(z):
    c = coherent_amplitudes(z, 80)
    assert np.vdot(c, c).real == pytest.approx(1.0, abs=1e-12)
    a = np.diag(np.sqrt(np.arange(1, 81.0)), k=1)
    assert np.allclose((a @ c)[:-1], z * c[:-1], atol=1e-12)


def test_leakage_warning():
    basis = build_basis(1, 5)
    with pytest.warns(LeakageWarning):
        coherent_vector(basis, 3.0)


def test_resolution_of_identity():
    g = grid_for_cutoff(20)
    ident = zero_mode_projector_sum(20, g, lambda z: np.ones(z.shape))
    assert np.max(np.abs(ident - np.eye(21))) < 1e-10


@pytest.mark.parametrize("name", sorted(MONOMIALS))
def test_reconstruction_interior(name):
    assert reconstruction_residual(name, 20, grid_for_cutoff(20)) < 1e-8


@pytest.mark.parametrize("name", sorted(MONOMIALS))
def test_probe_residual_decreases(name):
    res = [probe_residual(name, n) for n in (10, 20, 40)]
    assert res[0] > res[1] > res[2]
