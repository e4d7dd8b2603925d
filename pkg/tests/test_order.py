import math

import numpy as np
import pytest

from cnumlab.coherent import RadialGrid
from cnumlab.ensemble import Truncation, partition_full
from cnumlab.fock import ModeSet
from cnumlab.hamiltonian import GasParams, gas_bases
from cnumlab.order import (
    CauchySchwarzViolation,
    condensate_observables,
    husimi,
    observable_grid,
    order_parameter_point,
    pathological_density,
    pathological_weight,
    quasi_average_scan,
    tilt_identity_error,
    weight_full,
    weight_substituted,
)


def contact(k_max=1, g=0.5, length=3.0, **kw):
    return GasParams.contact(ModeSet.chain(k_max, length), g, **kw)


def test_husimi_of_thermal_state():
    # thermal single mode with mean n: Q(z) = exp(-|z|^2/(n+1)) / (n+1)
    q = math.exp(-0.7)
    n = np.arange(80)
    rho = np.diag((1 - q) * q**n)
    z = np.array([0.0, 1.0 + 0.5j, -2.0j])
    nbar = q / (1 - q)
    expected = np.exp(-np.abs(z) ** 2 / (nbar + 1)) / (nbar + 1)
    assert np.allclose(husimi(rho, z), expected, atol=1e-12)


def test_single_mode_observables():
    params = GasParams(ModeSet.chain(0, 1.0), {}, mu=-1.0)
    basis, bp = gas_bases(params, 60, 0)
    rec = condensate_observables(params, basis, RadialGrid(14.0, 200, 72, 2), bp)
    assert rec.n0 == pytest.approx(1 / (math.e - 1), rel=1e-10)
    assert rec.n0_from_weight == pytest.approx(rec.n0, rel=1e-8)
    assert abs(rec.a0) < 1e-12
    assert rec.weight_norm == pytest.approx(1.0, abs=1e-8)


def test_weight_moments_match_direct_trace():
    params = contact(1, 0.5, mu=-0.2, lam=0.3, beta=1.5, length=4.0)
    basis, bp = Truncation(n_max_other=2).bases(params)
    grid = observable_grid(params, basis, bp)
    rec = condensate_observables(params, basis, grid, bp)
    assert rec.weight_norm == pytest.approx(1.0, abs=1e-8)
    assert rec.n0_from_weight == pytest.approx(rec.n0, rel=1e-6)
    assert abs(rec.a0_from_weight - rec.a0) <= 1e-6 * abs(rec.a0)
    assert rec.order_param_sq <= rec.n0_density + 1e-10
    assert rec.z_max.real < 0


def test_weight_is_radial_at_zero_field():
    params = contact(1, 0.5, mu=-0.3, lam=0.0, length=3.0)
    basis, bp = Truncation(n_max_other=2).bases(params)
    grid = observable_grid(params, basis, bp)
    w = weight_full(params, basis, grid)
    assert w.angular_spread() < 1e-10
    assert w.total == pytest.approx(1.0, abs=1e-8)
    r, dens = w.radial_marginal()
    assert np.all(np.diff(r) > 0) and np.all(dens >= 0)
    ws = weight_substituted(params, bp, grid)
    assert ws.total == pytest.approx(1.0, abs=1e-12)


def test_tilt_identity():
    params = contact(1, 0.5, mu=-0.3, lam=0.4, length=3.0)
    basis, bp = Truncation(n_max_other=2).bases(params)
    grid = observable_grid(params, basis, bp)
    assert tilt_identity_error(params, bp, grid) < 1e-10


def test_cauchy_schwarz_violation_is_reported():
    params = contact(0, 0.5, mu=-0.3, lam=0.4, length=3.0)
    basis, bp = Truncation(n_max_other=2).bases(params)
    state = partition_full(params, basis)
    grid = observable_grid(params, basis, bp)
    with pytest.raises(CauchySchwarzViolation):
        condensate_observables(params, basis, grid, bp, cs_tol=-1.0, state=state)


def test_quasi_average_scan_shape_and_zero_field():
    family = [contact(0, 0.5, mu=-0.2, length=L) for L in (2.0, 4.0)]
    table = quasi_average_scan(family, [0.4, 0.1, 0.0], Truncation(n_max_other=2))
    assert table.order_param.shape == (2, 3)
    assert np.all(table.order_param[:, -1] < 1e-24)
    assert all(table.monotone_in_lambda)
    op, nd = order_parameter_point(family[0].replace(lam=0.4), Truncation(n_max_other=2))
    assert op == pytest.approx(table.order_param[0, 0])
    assert op <= nd
    with pytest.raises(ValueError):
        quasi_average_scan(family, [0.0, 0.1], Truncation())


@pytest.mark.parametrize("V", [10.0, 100.0, 1000.0])
def test_pathological_weight_moments(V):
    rep = pathological_weight(V, 1.0)
    assert rep.normalization_exact == pytest.approx(1.0, abs=1e-14)
    assert rep.normalization_numeric == pytest.approx(1.0, abs=1e-10)
    assert rep.second_moment <= 2.0 / V
    # int |zeta|^2 w_V d^2zeta with d^2zeta = 2 r dr, done by hand
    assert rep.second_moment == pytest.approx(1 / (2 * V) + 1 / (2 * V**2) - 1 / (2 * V**3), rel=1e-10)


def test_pathological_density_and_tilt():
    assert pathological_density(10.0, 0.05) == pytest.approx(100 - 10 + 0.1)
    assert pathological_density(10.0, 0.5) == pytest.approx(0.1)
    assert pathological_density(10.0, 1.5) == 0.0
    rep = pathological_weight(200.0, 1.0)
    assert abs(rep.tilted_mean + 1.0) < 0.05
    assert pathological_weight(200.0, 0.0).tilted_mean == pytest.approx(0.0, abs=1e-12)
