import math

import numpy as np
import pytest

from cnumlab.coherent import RadialGrid
from cnumlab.ensemble import (
    AuditFailure,
    Truncation,
    audit_chain,
    audit_point,
    gibbs_state,
    p_max_search,
    partition_full,
    partition_substituted,
    pressure_gap_trend,
)
from cnumlab.fock import ModeSet
from cnumlab.hamiltonian import GasParams, build_H_mu_lambda_sparse, gas_bases


def single_mode(mu=-1.0, lam=0.0, beta=1.0, length=1.0):
    return GasParams(ModeSet.chain(0, length), {}, mu=mu, lam=lam, beta=beta)


def contact(k_max=1, g=0.5, length=3.0, **kw):
    return GasParams.contact(ModeSet.chain(k_max, length), g, **kw)


def test_single_mode_oracle():
    params = single_mode()
    basis, bp = gas_bases(params, 60, 0)
    rep = audit_chain(params, basis, bp, RadialGrid(8.0))
    assert rep.Xi == pytest.approx(1 / (1 - math.exp(-1)), rel=1e-10)
    assert rep.Xi_prime == pytest.approx(1.0, rel=1e-10)
    assert rep.Xi_dprime == pytest.approx(math.e, rel=1e-10)
    assert rep.Xi_max == pytest.approx(1.0, rel=1e-12)
    assert rep.passed


def test_single_mode_field_shifts_maximum():
    # H'(x) = x^2 + 2 sqrt(V) lambda x, maximised at x = -sqrt(V) lambda
    params = single_mode(lam=0.3, length=2.0)
    _, bp = gas_bases(params, 60, 0)
    res = p_max_search(params, bp, radius=8.0)
    assert res.z_max.real == pytest.approx(-math.sqrt(2.0) * 0.3, abs=1e-7)
    assert res.log_max == pytest.approx(2.0 * 0.09, abs=1e-10)


def test_expm_path_matches_eigh():
    params = contact(1, 0.4, mu=-0.3, lam=0.2, beta=0.7)
    basis, _ = gas_bases(params, 6, 2)
    H = build_H_mu_lambda_sparse(params, basis)
    a = gibbs_state(H, basis, params.beta)
    b = gibbs_state(H, basis, params.beta, dense_limit=0)
    assert b.method == "expm"
    assert a.log_xi == pytest.approx(b.log_xi, abs=1e-10)
    assert np.max(np.abs(a.rho - b.rho)) < 1e-10


def test_strict_audit_raises_on_undersized_cutoff():
    # Xi' = 1/0.3 exceeds the two-level Xi = 1 + e^{-0.3}
    params = single_mode(mu=-0.3)
    basis, bp = gas_bases(params, 1, 0)
    rep = audit_chain(params, basis, bp, RadialGrid(12.0, 400, 64, 4))
    assert not rep.passed
    assert [c.id for c in rep.audit if not c.passed] == ["clowerbound"]
    with pytest.raises(AuditFailure) as info:
        audit_chain(params, basis, bp, RadialGrid(12.0, 400, 64, 4), strict=True)
    assert "clowerbound" in str(info.value)


@pytest.mark.parametrize("params", [
    contact(1, 0.6, mu=-0.4, lam=0.3, beta=1.2, length=3.0),
    contact(0, 0.2, mu=0.2, lam=0.5, beta=2.0, length=4.0),
    contact(1, 0.0, mu=-1.0, lam=0.0, beta=0.5, length=2.0),
])
def test_audit_chain_passes(params):
    rep = audit_point(params, Truncation(n_max_other=2))
    assert rep.passed, rep.audit
    assert rep.min_margin >= -rep.tol_quad


def test_gauge_symmetry_in_lambda():
    t = Truncation(n_max_other=2)
    for params in (contact(1, 0.5, mu=-0.3, lam=0.4), single_mode(mu=-0.5, lam=0.7)):
        plus = audit_point(params, t)
        minus = audit_point(params.replace(lam=-params.lam), t)
        assert plus.log_xi == pytest.approx(minus.log_xi, abs=1e-10)
        assert plus.log_xi_prime == pytest.approx(minus.log_xi_prime, abs=1e-8)
        assert plus.log_xi_dprime == pytest.approx(minus.log_xi_dprime, abs=1e-8)
        assert plus.z_max.real == pytest.approx(-minus.z_max.real, abs=1e-6)


def test_pressure_convex_in_mu_and_lambda():
    base = contact(1, 0.5, mu=-0.5, lam=0.2, length=2.5)
    trunc = Truncation(n_max_other=2, n_max_zero=40)
    h = 0.1

    def p(**kw):
        params = base.replace(**kw)
        basis, _ = trunc.bases(params)
        return partition_full(params, basis).log_xi / (params.beta * params.volume)

    assert p(mu=-0.6) + p(mu=-0.4) - 2 * p(mu=-0.5) >= -1e-12
    assert p(lam=0.2 - h) + p(lam=0.2 + h) - 2 * p(lam=0.2) >= -1e-12


def test_substituted_pressures_convex_in_mu():
    base = single_mode(mu=-0.5, lam=0.2, length=2.0)
    _, bp = gas_bases(base, 1, 0)
    grid = RadialGrid(12.0, 400, 96, 4)
    for kind in ("lower", "upper"):
        vals = [partition_substituted(base.replace(mu=m), bp, grid, kind).log_xi
                for m in (-0.6, -0.5, -0.4)]
        assert vals[0] + vals[2] - 2 * vals[1] >= -1e-10


def test_free_gas_gap_trend():
    family = [contact(1, 0.0, mu=-0.5, lam=0.0, beta=1.0, length=L) for L in (2.0, 4.0, 8.0)]
    rows, shrinking = pressure_gap_trend(family, Truncation(n_max_other=3))
    assert shrinking
    for r in rows:
        assert r.gap_max >= -1e-10
        assert r.gap_symbols >= -1e-10


def test_small_lambda_continuity():
    t = Truncation(n_max_other=2)
    params = contact(1, 0.5, mu=-0.4, lam=0.0)
    a = audit_point(params, t)
    b = audit_point(params.replace(lam=1e-6), t)
    for name in ("log_xi", "log_xi_prime", "log_xi_dprime", "log_xi_max"):
        assert abs(getattr(a, name) - getattr(b, name)) < 1e-8
    assert a.passed and b.passed


def test_zero_mode_cutoff_converged():
    params = contact(1, 0.5, mu=-0.4, lam=0.3)
    t = Truncation(n_max_other=2)
    basis, _ = t.bases(params)
    n0 = basis.n_max[0]
    bigger, _ = gas_bases(params, n0 + 20, 2)
    xi_auto = partition_full(params, basis).log_xi
    xi_big = partition_full(params, bigger).log_xi
    assert abs(xi_auto - xi_big) < 1e-10
