import math

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from cnumlab.coherent import coherent_amplitudes
from cnumlab.fock import ModeSet
from cnumlab.hamiltonian import (
    GasParams,
    build_H,
    build_H_mu_lambda_sparse,
    build_substituted,
    commutator_norm,
    delta_bound,
    delta_bound_ratio,
    delta_correction,
    gas_bases,
    interaction_terms,
    substitution_parts,
)


def contact(k_max=1, g=0.5, **kw):
    return GasParams.contact(ModeSet.chain(k_max, kw.pop("length", 3.0)), g, **kw)


def test_params_validation():
    ms = ModeSet.chain(1, 2.0)
    with pytest.raises(ValueError):
        GasParams(ms, {(1,): 1.0})  # nu(-1) missing
    with pytest.raises(ValueError):
        GasParams(ms, {(0,): 1j})
    with pytest.raises(ValueError):
        GasParams(ms, {(0,): 2.0}, phi=1.0)
    with pytest.raises(ValueError):
        GasParams(ms, {}, lam=0.1 + 0.2j)
    with pytest.raises(ValueError):
        GasParams(ms, {}, beta=0.0)
    p = GasParams(ms, {"1": 0.3, "-1": 0.3, "0": 1.0})
    assert p.phi == 1.0
    assert p.nu_of(1) == 0.3


def test_hermitian_and_number_conservation():
    params = contact(1, 0.7, mu=-0.3)
    basis, _ = gas_bases(params, 4, 3)
    H = build_H(params, basis)
    assert np.max(np.abs(H.toarray() - H.toarray().conj().T)) < 1e-12
    N = sp.diags(basis.total_occupation().astype(float))
    assert commutator_norm(H.tosparse(), N) < 1e-12
    Hl = build_H_mu_lambda_sparse(params.replace(lam=0.4), basis)
    assert commutator_norm(Hl, N) > 0.1


def test_interaction_terms_drop_outside_momenta():
    params = contact(1, 1.0)
    for coef, (c1, c2, a1, a2) in interaction_terms(params):
        labels = params.modes.labels
        assert labels[c1][0] + labels[c2][0] == labels[a1][0] + labels[a2][0]
        assert coef == pytest.approx(1.0 / (2 * params.volume))


def test_free_single_mode_spectrum():
    params = GasParams(ModeSet.chain(0, 1.0), {}, mu=-1.0)
    basis, _ = gas_bases(params, 10, 0)
    H = build_H_mu_lambda_sparse(params, basis).toarray()
    assert np.allclose(np.diag(H), np.arange(11))


def test_lower_symbol_is_product_state_expectation():
    params = contact(1, 0.8, mu=-0.4, lam=0.3, length=2.0)
    basis, bp = gas_bases(params, 40, 2)
    H = build_H_mu_lambda_sparse(params, basis).toarray()
    z = 0.7 - 0.5j
    Hp = build_substituted(params, bp, z, "lower").matrix.toarray()
    amps = coherent_amplitudes(z, 40)
    # embed |z> (x) |j'> into the full basis
    table = {tuple(s): i for i, s in enumerate(basis.states)}
    vecs = np.zeros((basis.dim, bp.dim), dtype=complex)
    for j, occ in enumerate(bp.states):
        for n0 in range(41):
            vecs[table[(n0,) + tuple(occ)], j] = amps[n0]
    proj = vecs.conj().T @ H @ vecs
    assert np.max(np.abs(proj - Hp)) < 1e-9


@settings(max_examples=20, deadline=None)
@given(
    st.integers(0, 1),
    st.floats(-1, 1),
    st.floats(-2, 1),
    st.floats(-1, 1),
    st.floats(1.0, 6.0),
    st.complex_numbers(max_magnitude=4, allow_nan=False, allow_infinity=False),
)
def test_delta_identity_and_bound(k_max, g, mu, lam, length, z):
    params = contact(k_max, g, mu=mu, lam=lam, length=length)
    _, bp = gas_bases(params, 2, 3)
    upper = build_substituted(params, bp, z, "upper").matrix.toarray()
    lower = build_substituted(params, bp, z, "lower").matrix.toarray()
    delta = delta_correction(params, bp, z).toarray()
    assert np.max(np.abs(upper - lower - delta)) < 1e-12 * (1 + np.max(np.abs(upper)))
    assert np.all(np.abs(np.diag(delta)) <= delta_bound(params, bp, z) + 1e-12)
    assert delta_bound_ratio(params, bp, z) <= 1.0 + 1e-12


def test_non_contact_delta_uses_nu_of_k():
    ms = ModeSet.chain(1, 2.5)
    params = GasParams(ms, {(0,): 0.9, (1,): 0.2, (-1,): 0.2, (2,): -0.1, (-2,): -0.1}, mu=-0.5)
    _, bp = gas_bases(params, 2, 3)
    z = 1.1 + 0.3j
    diff = (build_substituted(params, bp, z, "upper").matrix.toarray()
            - build_substituted(params, bp, z, "lower").matrix.toarray())
    assert np.max(np.abs(diff - delta_correction(params, bp, z).toarray())) < 1e-12


def test_substitution_parts_batch_matches_single():
    params = contact(1, 0.5, mu=-0.2, lam=0.1)
    _, bp = gas_bases(params, 2, 2)
    parts = substitution_parts(params, bp)
    zs = np.array([0.0, 1 + 1j, -2.0])
    batch = parts.batch(zs, "upper")
    for k, z in enumerate(zs):
        assert np.allclose(batch[k], parts.matrix(z, "upper"))
    # vacuum entry of H'(x): -mu x^2 + 2 sqrt(V) lambda x + nu(0) x^4 / (2V)
    x, V = 0.5, params.volume
    expected = -params.mu * x**2 + 2 * math.sqrt(V) * params.lam * x + 0.5 * x**4 / (2 * V)
    assert parts.matrix(x, "lower")[0, 0].real == pytest.approx(expected, abs=1e-14)
