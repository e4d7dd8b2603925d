"""Weight densities on the z-plane and condensate observables.

W(z)  = Xi^-1 Tr' <z| exp(-beta H_{mu,lambda}) |z>   (Husimi function of mode 0)
W''(z) = Xi''^-1 Tr' exp(-beta H''_{mu,lambda}(z))

Observables are computed twice: directly from the Gibbs density matrix, and
as moments of W. The two routes share no code beyond the Hamiltonian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate
from scipy.special import logsumexp

from .coherent import DEFAULT_TOL_QUAD, RadialGrid, coherent_amplitudes
from .ensemble import (
    GibbsState,
    Truncation,
    auto_grid,
    p_max_search,
    partition_full,
    partition_substituted,
)
from .fock import FockBasis, annihilation_sparse
from .hamiltonian import GasParams


class NegativeWeightError(ValueError):
    pass


class CauchySchwarzViolation(ValueError):
    pass


@dataclass(frozen=True)
class WeightDensity:
    grid: RadialGrid = field(repr=False)
    values: np.ndarray = field(repr=False)
    kind: str
    params: GasParams

    @property
    def total(self) -> float:
        return float(np.real(self.grid.integrate(self.values)))

    def moment(self, fn) -> complex:
        """int fn(z) W(z) d^2z."""
        return complex(self.grid.integrate(fn(self.grid.z) * self.values))

    def angular_spread(self) -> float:
        """Largest deviation from the angular mean on any ring, relative to the peak."""
        v = self.values.reshape(-1, self.grid.n_angular)
        dev = np.abs(v - v.mean(axis=1, keepdims=True)).max()
        return float(dev / max(np.abs(self.values).max(), 1e-300))

    def radial_marginal(self) -> tuple[np.ndarray, np.ndarray]:
        """(|z|, angular mean of W) at the radial nodes."""
        return self.grid.radial_profile(self.values)


def _check_nonnegative(values: np.ndarray, what: str):
    worst = float(values.min()) if values.size else 0.0
    if worst < -1e-12:
        raise NegativeWeightError(f"{what} has a negative value {worst:.3e}")


def husimi(rho0: np.ndarray, z: np.ndarray, chunk: int = 4096) -> np.ndarray:
    """<z| rho0 |z> for the zero-mode density matrix rho0 at every z."""
    n0 = rho0.shape[0] - 1
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(z.size)
    for s in range(0, z.size, chunk):
        c = coherent_amplitudes(z[s:s + chunk], n0)
        # <z|n> = conj(c_n)
        out[s:s + chunk] = np.real(np.einsum("qn,nm,qm->q", c.conj(), rho0, c, optimize=True))
    return out


def weight_full(params: GasParams, basis: FockBasis, grid: RadialGrid,
                state: GibbsState | None = None) -> WeightDensity:
    """W on the grid from the partial trace of the Gibbs state."""
    if state is None:
        state = partition_full(params, basis)
    rho0 = state.zero_mode_density_matrix()
    values = husimi(rho0, grid.z)
    _check_nonnegative(values, "W")
    return WeightDensity(grid, values, "full", params)


def weight_substituted(params: GasParams, basis_prime: FockBasis, grid: RadialGrid,
                       log_traces: np.ndarray | None = None) -> WeightDensity:
    """W'' on the grid; reuses per-node log traces when given."""
    if log_traces is None:
        log_traces = partition_substituted(params, basis_prime, grid, "upper").log_traces
    log_xi = float(logsumexp(log_traces, b=grid.weights))
    values = np.exp(log_traces - log_xi)
    _check_nonnegative(values, "W''")
    return WeightDensity(grid, values, "substituted", params)


def tilted_weight(untilted: WeightDensity, lam: float) -> np.ndarray:
    """W''_{mu,0}(z) exp(-beta lambda sqrt(V) (z + z*)), renormalised on the grid."""
    p = untilted.params
    z = untilted.grid.z
    log_w = np.log(np.maximum(untilted.values, 1e-300)) - p.beta * lam * math.sqrt(p.volume) * 2 * z.real
    log_norm = float(logsumexp(log_w, b=untilted.grid.weights))
    return np.exp(log_w - log_norm)


def tilt_identity_error(params: GasParams, basis_prime: FockBasis, grid: RadialGrid) -> float:
    """max |W''_{mu,lambda} - tilt(W''_{mu,0})| relative to max W''_{mu,lambda}."""
    w_lam = weight_substituted(params, basis_prime, grid)
    w_0 = weight_substituted(params.replace(lam=0.0), basis_prime, grid)
    rhs = tilted_weight(w_0, params.lam)
    return float(np.max(np.abs(w_lam.values - rhs)) / np.max(w_lam.values))


@dataclass(frozen=True)
class CondensateRecord:
    volume: float
    n0: float
    a0: complex
    n0_from_weight: float
    a0_from_weight: complex
    weight_norm: float
    z_max: complex
    n0_density: float
    order_param_sq: float
    zmax_density: float
    methods: tuple[str, ...] = ("direct-trace", "weight-integral")

    def to_dict(self) -> dict:
        return {
            "V": self.volume,
            "n0": self.n0,
            "a0": [self.a0.real, self.a0.imag],
            "n0_weight": self.n0_from_weight,
            "a0_weight": [self.a0_from_weight.real, self.a0_from_weight.imag],
            "weight_norm": self.weight_norm,
            "z_max": [self.z_max.real, self.z_max.imag],
            "n0_density": self.n0_density,
            "order_param_sq": self.order_param_sq,
            "zmax_density": self.zmax_density,
        }


def condensate_observables(params: GasParams, basis: FockBasis, grid: RadialGrid | None = None,
                           basis_prime: FockBasis | None = None, cs_tol: float = 1e-10,
                           state: GibbsState | None = None) -> CondensateRecord:
    """<a0^+ a0> and <a0> by direct trace and as moments of W, plus |z_max|^2 / V."""
    from .fock import prime_basis

    if basis_prime is None:
        basis_prime = prime_basis(basis)
    if state is None:
        state = partition_full(params, basis)
    if grid is None:
        grid = observable_grid(params, basis, basis_prime)
    a0 = annihilation_sparse(basis, 0)
    n0 = float(state.expectation(a0.T @ a0).real)
    mean_a0 = state.expectation(a0)
    w = weight_full(params, basis, grid, state)
    n0_w = float(np.real(w.moment(lambda z: np.abs(z) ** 2 - 1)))
    a0_w = w.moment(lambda z: z)
    V = params.volume
    order_sq = abs(mean_a0) ** 2 / V
    n0_density = n0 / V
    if order_sq > n0_density + cs_tol:
        raise CauchySchwarzViolation(f"|<a0>|^2/V = {order_sq} exceeds <a0^+a0>/V = {n0_density}")
    pm = p_max_search(params, basis_prime, "lower", radius=grid.radius)
    return CondensateRecord(V, n0, mean_a0, n0_w, a0_w, w.total, pm.z_max,
                            n0_density, order_sq, abs(pm.z_max) ** 2 / V)


def observable_grid(params: GasParams, basis: FockBasis, basis_prime: FockBasis,
                    tol: float = DEFAULT_TOL_QUAD) -> RadialGrid:
    """Grid that also resolves the Husimi function of the truncated mode 0."""
    n0 = basis.n_max[0]
    g = auto_grid(params, basis_prime, min_angular=n0 + 8, tol=tol)
    radius = max(g.radius, math.sqrt(n0) + 7.0)
    if radius == g.radius:
        return g
    n_panels = max(1, int(math.ceil(radius**2 / 16.0)))
    per_panel = max(32, int(math.ceil(200 / n_panels))) if n_panels > 1 else 200
    return RadialGrid(radius, per_panel, g.n_angular, n_panels).validate(tol)


# --------------------------------------------------------------------------
# quasi-average scan


@dataclass(frozen=True)
class QuasiAverageTable:
    volumes: tuple[float, ...]
    lambdas: tuple[float, ...]
    order_param: np.ndarray  # V^-1 |<a0>|^2, rows = V, cols = lambda
    n0_density: np.ndarray   # V^-1 <a0^+ a0>
    monotone_in_lambda: tuple[bool, ...]  # per V row, as lambda decreases
    monotone_in_volume: tuple[bool, ...]  # per lambda column, as V grows

    def rows(self):
        for i, V in enumerate(self.volumes):
            for j, lam in enumerate(self.lambdas):
                yield V, lam, float(self.order_param[i, j]), float(self.n0_density[i, j])


def _monotone(seq, increasing: bool) -> bool:
    seq = list(seq)
    pairs = zip(seq, seq[1:])
    return all((b >= a) if increasing else (b <= a) for a, b in pairs)


def order_parameter_point(params: GasParams, truncation: Truncation) -> tuple[float, float]:
    """(V^-1 |<a0>|^2, V^-1 <a0^+ a0>) in the Gibbs state of H_{mu,lambda}."""
    basis, _ = truncation.bases(params)
    state = partition_full(params, basis)
    a0 = annihilation_sparse(basis, 0)
    mean_a0 = state.expectation(a0)
    n0 = float(state.expectation(a0.T @ a0).real)
    return abs(mean_a0) ** 2 / params.volume, n0 / params.volume


def quasi_average_scan(family, lambda_grid, truncations) -> QuasiAverageTable:
    """Order parameter and condensate density over (V, lambda).

    ``family`` is a sequence of GasParams with increasing volume; each is
    evaluated at every lambda in the strictly decreasing ``lambda_grid``.
    ``truncations`` is one Truncation or one per family member.
    """
    lambdas = tuple(float(x) for x in lambda_grid)
    if any(b >= a for a, b in zip(lambdas, lambdas[1:])):
        raise ValueError("lambda grid must be strictly decreasing")
    family = list(family)
    vols = [p.volume for p in family]
    if any(b <= a for a, b in zip(vols, vols[1:])):
        raise ValueError("volumes must increase along the family")
    if isinstance(truncations, Truncation):
        truncations = [truncations] * len(family)
    op = np.zeros((len(family), len(lambdas)))
    nd = np.zeros_like(op)
    for i, (base, trunc) in enumerate(zip(family, truncations)):
        for j, lam in enumerate(lambdas):
            op[i, j], nd[i, j] = order_parameter_point(base.replace(lam=lam), trunc)
    mono_lam = tuple(_monotone(op[i], increasing=False) for i in range(len(family)))
    mono_vol = tuple(_monotone(op[:, j], increasing=True) for j in range(len(lambdas)))
    return QuasiAverageTable(tuple(vols), lambdas, op, nd, mono_lam, mono_vol)


# --------------------------------------------------------------------------
# the pathological weight


@dataclass(frozen=True)
class PathologicalReport:
    volume: float
    beta_lambda: float
    normalization_exact: float
    normalization_numeric: float
    second_moment: float
    tilted_mean: float
    tilted_mean_imag: float

    def to_dict(self) -> dict:
        return {
            "V": self.volume,
            "beta_lambda": self.beta_lambda,
            "normalization_exact": self.normalization_exact,
            "normalization_numeric": self.normalization_numeric,
            "second_moment": self.second_moment,
            "tilted_mean": self.tilted_mean,
        }


def pathological_density(V: float, zeta) -> np.ndarray:
    """w_V(zeta): V^2 - V + 1/V on |zeta| <= 1/V, 1/V up to |zeta| = 1, 0 beyond."""
    r = np.abs(np.asarray(zeta))
    inner = V**2 - V + 1.0 / V
    return np.where(r <= 1.0 / V, inner, np.where(r <= 1.0, 1.0 / V, 0.0))


def _disc_exponential(radius: float, a: float) -> tuple[float, float]:
    """(log I0, I1/I0) with I0 = int_{|x+iy| <= radius} e^{-a x} d^2zeta and I1 the x-moment.

    The measure is dx dy / pi. Integrating out y leaves the chord 2 sqrt(R^2 - x^2)/pi;
    with x = -R + t the integrand is e^{aR} e^{-a t} sqrt(t (2R - t)), which QUADPACK's
    algebraic-weight rule handles exactly at both endpoints.
    """
    R = radius
    sign = 1.0 if a >= 0 else -1.0
    b = abs(a)
    # peak of e^{-a x} sits at x = -sign * R
    f0 = lambda t: np.exp(-b * t)
    f1 = lambda t: np.exp(-b * t) * t
    opts = dict(weight="alg", wvar=(0.5, 0.5), epsabs=0.0, epsrel=1e-13, limit=200)
    i0, _ = integrate.quad(f0, 0.0, 2 * R, **opts)
    i1, _ = integrate.quad(f1, 0.0, 2 * R, **opts)
    log_i0 = b * R + math.log(2.0 / math.pi * i0)
    mean_x = sign * (-R + i1 / i0)
    return log_i0, mean_x


def pathological_weight(V: float, beta_lambda: float) -> PathologicalReport:
    """Normalisation, lambda = 0 second moment, and tilted mean of w_V.

    The tilt is w_V(zeta) exp(-beta lambda V Re zeta) renormalised. All pieces
    are radial or disc integrals evaluated by one-dimensional quadrature.
    """
    if V < 2:
        raise ValueError("V must be at least 2")
    V = float(V)
    c_in = V**2 - V + 1.0 / V
    c_out = 1.0 / V
    r_in = 1.0 / V
    exact = c_in * r_in**2 + c_out * (1.0 - r_in**2)
    # radial integrals with d^2zeta = 2 r dr
    n_in, _ = integrate.quad(lambda r: 2 * r * c_in, 0.0, r_in, epsabs=0, epsrel=1e-13)
    n_out, _ = integrate.quad(lambda r: 2 * r * c_out, r_in, 1.0, epsabs=0, epsrel=1e-13)
    m_in, _ = integrate.quad(lambda r: 2 * r**3 * c_in, 0.0, r_in, epsabs=0, epsrel=1e-13)
    m_out, _ = integrate.quad(lambda r: 2 * r**3 * c_out, r_in, 1.0, epsabs=0, epsrel=1e-13)
    numeric = n_in + n_out
    second = (m_in + m_out) / numeric

    a = beta_lambda * V
    # w_V = (c_in - c_out) 1_{|zeta|<=1/V} + c_out 1_{|zeta|<=1}
    li_small, mx_small = _disc_exponential(r_in, a)
    li_big, mx_big = _disc_exponential(1.0, a)
    terms = np.array([math.log(c_in - c_out) + li_small, math.log(c_out) + li_big])
    log_z = logsumexp(terms)
    p = np.exp(terms - log_z)
    mean = float(p[0] * mx_small + p[1] * mx_big)
    return PathologicalReport(V, beta_lambda, exact, numeric, second, mean, 0.0)
