"""Grand-canonical partition functions and the audit of their ordering.

Four partition functions are compared at one (mu, lambda, beta):

* ``Xi``      trace of exp(-beta H_{mu,lambda}) on the truncated Fock space;
* ``Xi'``     integral over z of Tr' exp(-beta H'(z))  (lower symbols);
* ``Xi''``    integral over z of Tr' exp(-beta H''(z)) (upper symbols);
* ``Xi_max``  max over z of Tr' exp(-beta H'(z)).

All logarithms are kept explicitly; values are exponentiated only for
reporting.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.special import logsumexp

from .coherent import DEFAULT_TOL_QUAD, RadialGrid, zero_mode_blocks
from .fock import FockBasis, TruncationError
from .hamiltonian import (
    GasParams,
    SubstitutedParts,
    build_H_mu_lambda_sparse,
    gas_bases,
    substitution_parts,
)
from .optimize import golden_section_max

DENSE_EIGH_LIMIT = 2000
RHO_STEP = 1e-4


class EigensolverError(RuntimeError):
    pass


class AuditFailure(RuntimeError):
    """An inequality of the chain failed beyond its quadrature slack."""

    def __init__(self, report: "EnsembleReport"):
        failed = [c for c in report.audit if not c.passed]
        lines = [f"{c.id}: lhs={c.lhs!r} rhs={c.rhs!r} slack={c.slack!r}" for c in failed]
        super().__init__("inequality audit failed:\n" + "\n".join(lines)
                         + f"\nparams={report.params.to_dict()}")
        self.report = report


# --------------------------------------------------------------------------
# full trace


@dataclass(frozen=True)
class GibbsState:
    """exp(-beta H) / Xi on a truncated basis."""

    basis: FockBasis
    beta: float
    log_xi: float
    rho: np.ndarray = field(repr=False)
    energies: np.ndarray | None = field(default=None, repr=False)
    method: str = "eigh"

    def expectation(self, op) -> complex:
        """Tr(rho op) for a dense or sparse operator."""
        if sp.issparse(op):
            return complex((op.multiply(self.rho.T)).sum())
        return complex(np.einsum("ij,ji->", self.rho, op))

    def zero_mode_density_matrix(self) -> np.ndarray:
        """Partial trace over every mode except 0."""
        table = zero_mode_blocks(self.basis)
        n0, dp = table.shape
        out = np.zeros((n0, n0), dtype=self.rho.dtype)
        for j in range(dp):
            idx = table[:, j]
            keep = np.nonzero(idx >= 0)[0]
            sub = idx[keep]
            out[np.ix_(keep, keep)] += self.rho[np.ix_(sub, sub)]
        return out


def gibbs_state(H, basis: FockBasis, beta: float, dense_limit: int = DENSE_EIGH_LIMIT) -> GibbsState:
    """Full eigendecomposition below ``dense_limit``; scaled-and-squared expm above."""
    dim = basis.dim
    if dim < dense_limit:
        Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
        if np.iscomplexobj(Hd) and not np.any(Hd.imag):
            Hd = Hd.real
        try:
            energies, vecs = np.linalg.eigh(Hd)
        except np.linalg.LinAlgError as exc:
            raise EigensolverError(f"eigendecomposition failed (dim {dim}): {exc}") from exc
        shifted = -beta * (energies - energies[0])
        log_xi = -beta * energies[0] + math.log(np.sum(np.exp(shifted)))
        w = np.exp(-beta * energies - log_xi)
        rho = (vecs * w) @ vecs.conj().T
        return GibbsState(basis, beta, log_xi, rho, energies, "eigh")
    try:
        e0 = spla.eigsh(sp.csr_matrix(H), k=1, which="SA", return_eigenvectors=False)[0]
    except spla.ArpackNoConvergence as exc:
        raise EigensolverError(f"lowest-eigenvalue search did not converge: {exc}") from exc
    Hd = H.toarray() if sp.issparse(H) else np.asarray(H)
    G = la.expm(-beta * (Hd - e0 * np.eye(dim)))
    tr = float(np.trace(G).real)
    log_xi = -beta * e0 + math.log(tr)
    return GibbsState(basis, beta, log_xi, G / tr, None, "expm")


def partition_full(params: GasParams, basis: FockBasis) -> GibbsState:
    """Xi = Tr exp(-beta H_{mu,lambda}); ``log_xi`` on the returned state."""
    H = build_H_mu_lambda_sparse(params, basis)
    return gibbs_state(H, basis, params.beta)


# --------------------------------------------------------------------------
# substituted traces


def substituted_log_traces(parts: SubstitutedParts, z, beta: float, kind: str,
                           chunk: int = 2048) -> np.ndarray:
    """ln Tr' exp(-beta H_kind(z)) for every z, in input order."""
    z = np.asarray(z, dtype=complex).ravel()
    out = np.empty(z.size)
    for start in range(0, z.size, chunk):
        block = parts.batch(z[start:start + chunk], kind)
        ev = np.linalg.eigvalsh(block)
        out[start:start + chunk] = logsumexp(-beta * ev, axis=1)
    return out


@dataclass(frozen=True)
class SubstitutedPartition:
    kind: str
    log_xi: float
    log_traces: np.ndarray = field(repr=False)
    grid: RadialGrid = field(repr=False)

    @property
    def weights(self) -> np.ndarray:
        """Normalised density Tr' exp(-beta H(z)) / Xi at the grid nodes."""
        return np.exp(self.log_traces - self.log_xi)


class CutoffWarning(UserWarning):
    pass


def partition_substituted(params: GasParams, basis_prime: FockBasis, grid: RadialGrid,
                          kind: str, parts: SubstitutedParts | None = None) -> SubstitutedPartition:
    """Quadrature of Tr' exp(-beta H'(z)) (kind='lower') or H''(z) ('upper')."""
    if parts is None:
        parts = substitution_parts(params, basis_prime)
    logs = substituted_log_traces(parts, grid.z, params.beta, kind)
    peak = logs.max()
    outer = logs.reshape(-1, grid.n_angular)[-1].max()
    if outer > peak + math.log(1e-10):
        warnings.warn(f"integrand at the radial cutoff is {math.exp(outer - peak):.1e} of its peak; "
                      "enlarge the grid radius", CutoffWarning, stacklevel=2)
    log_xi = float(logsumexp(logs, b=grid.weights))
    return SubstitutedPartition(kind, log_xi, logs, grid)


# --------------------------------------------------------------------------
# grid and truncation choice


def _radial_log_profile(parts: SubstitutedParts, beta: float, kind: str, sign: float,
                        r: np.ndarray) -> np.ndarray:
    return substituted_log_traces(parts, sign * r, beta, kind)


def integrand_extent(params: GasParams, basis_prime: FockBasis, drop: float = 45.0,
                     step: float = 0.25, r_limit: float = 400.0,
                     parts: SubstitutedParts | None = None) -> tuple[float, float]:
    """(r_peak, r_hi) of the upper-symbol integrand along the real axis.

    r_hi is where ln Tr'' has fallen ``drop`` below its maximum beyond the peak.
    The negative axis dominates for lambda > 0 and the positive one for
    lambda < 0; both are scanned.
    """
    if parts is None:
        parts = substitution_parts(params, basis_prime)
    best_peak, best_hi = 0.0, 0.0
    for sign in (-1.0, 1.0):
        r_max = 8.0
        while True:
            r = np.arange(0.0, r_max + step / 2, step)
            prof = _radial_log_profile(parts, params.beta, "upper", sign, r)
            ipk = int(np.argmax(prof))
            below = np.nonzero((prof < prof[ipk] - drop) & (np.arange(r.size) > ipk))[0]
            if below.size:
                r_hi = r[below[0]]
                break
            if r_max >= r_limit:
                raise TruncationError(f"substituted integrand does not decay within |z| <= {r_limit}; "
                                      "the ensemble is probably unstable at these parameters")
            r_max *= 2
        best_peak = max(best_peak, r[ipk])
        best_hi = max(best_hi, r_hi)
    return best_peak, best_hi


def auto_grid(params: GasParams, basis_prime: FockBasis, min_angular: int = 64,
              extra_radius: float = 1.0, parts: SubstitutedParts | None = None,
              tol: float = DEFAULT_TOL_QUAD) -> RadialGrid:
    """Grid covering the substituted integrand, with enough angular nodes for the
    lambda tilt exp(-2 beta sqrt(V) lambda x)."""
    _, r_hi = integrand_extent(params, basis_prime, parts=parts)
    radius = max(r_hi + extra_radius, 6.0)
    tilt = 2 * params.beta * math.sqrt(params.volume) * abs(params.lam) * radius
    n_ang = max(min_angular, int(math.ceil(tilt + 8 * math.sqrt(tilt) + 24)))
    n_panels = max(1, int(math.ceil(radius**2 / 16.0)))
    per_panel = max(32, int(math.ceil(200 / n_panels)))
    if n_panels == 1:
        per_panel = 200
    return RadialGrid(radius, per_panel, n_ang, n_panels).validate(tol)


def auto_zero_cutoff(params: GasParams, basis_prime: FockBasis,
                     parts: SubstitutedParts | None = None) -> int:
    """Mode-0 occupation cutoff so that truncation of mode 0 is negligible."""
    _, r_hi = integrand_extent(params, basis_prime, parts=parts)
    return int(math.ceil(r_hi**2 + 6 * r_hi + 12))


@dataclass(frozen=True)
class Truncation:
    """Cutoffs: mode 0 (None = automatic from the substituted integrand) and the rest."""

    n_max_other: int = 3
    n_max_zero: int | None = None
    n_total_max: int | None = None
    dim_cap: int = 20000

    def bases(self, params: GasParams):
        n0 = self.n_max_zero
        if n0 is None:
            _, bp = gas_bases(params, 1, self.n_max_other, self.n_total_max, self.dim_cap)
            n0 = auto_zero_cutoff(params, bp)
        return gas_bases(params, n0, self.n_max_other, self.n_total_max, self.dim_cap)


# --------------------------------------------------------------------------
# maximal integrand


@dataclass(frozen=True)
class PMaxResult:
    z_max: complex
    log_max: float
    p_max: float
    degenerate: bool
    iterations: int
    last_improvement: float


def p_max_search(params: GasParams, basis_prime: FockBasis, kind: str = "lower",
                 radius: float | None = None, n_scan: int = 241,
                 parts: SubstitutedParts | None = None) -> PMaxResult:
    """Maximize ln Tr' exp(-beta H_kind(x)) over real x.

    A coarse scan over the bracket [-(sqrt(V)|lambda|/|mu| + R), R] (mirrored
    for lambda < 0; [0, R] at lambda = 0, where the integrand is radial) is
    refined by golden-section search around the best scan point.
    """
    if parts is None:
        parts = substitution_parts(params, basis_prime)
    beta = params.beta
    if radius is None:
        _, radius = integrand_extent(params, basis_prime, parts=parts)
    lam = params.lam
    reach = math.sqrt(params.volume) * abs(lam) / max(abs(params.mu), 1e-3) + radius
    if lam == 0:
        lo, hi = 0.0, radius
    elif lam > 0:
        lo, hi = -reach, radius
    else:
        lo, hi = -radius, reach

    def f(x: float) -> float:
        return float(substituted_log_traces(parts, np.array([x]), beta, kind)[0])

    xs = np.linspace(lo, hi, n_scan)
    vals = substituted_log_traces(parts, xs, beta, kind)
    i = int(np.argmax(vals))
    a = xs[max(i - 1, 0)]
    b = xs[min(i + 1, n_scan - 1)]
    res = golden_section_max(f, a, b)
    x_best, v_best = (res.x, res.value) if res.value >= vals[i] else (xs[i], float(vals[i]))
    if lam == 0:
        x_best = abs(x_best)
    # other local maxima of the scan within 1e-8 of the best
    interior = (vals[1:-1] >= vals[:-2]) & (vals[1:-1] >= vals[2:])
    peaks = [j + 1 for j in np.nonzero(interior)[0]]
    if vals[0] > vals[1]:
        peaks.append(0)
    if vals[-1] > vals[-2]:
        peaks.append(n_scan - 1)
    degenerate = any(abs(j - i) > 1 and v_best - vals[j] < 1e-8 for j in peaks)
    p_max = v_best / (beta * params.volume)
    return PMaxResult(complex(x_best), v_best, p_max, degenerate, res.iterations, res.last_improvement)


# --------------------------------------------------------------------------
# the audit


@dataclass(frozen=True)
class AuditCheck:
    id: str
    lhs: float
    rhs: float
    slack: float
    passed: bool


def _compare(check_id: str, log_lhs: float, log_rhs: float, tol: float) -> AuditCheck:
    """lhs <= rhs + tol (1 + |lhs| + |rhs|), evaluated after a common rescale."""
    scale = max(log_lhs, log_rhs, 0.0)
    lhs_s = math.exp(log_lhs - scale)
    rhs_s = math.exp(log_rhs - scale)
    slack_s = tol * (math.exp(-scale) + lhs_s + rhs_s)
    passed = lhs_s <= rhs_s + slack_s

    def unscale(v):
        return v * math.exp(scale) if scale < 700 else math.inf

    return AuditCheck(check_id, unscale(lhs_s), unscale(rhs_s), unscale(slack_s), bool(passed))


@dataclass(frozen=True)
class EnsembleReport:
    params: GasParams
    log_xi: float
    log_xi_prime: float
    log_xi_dprime: float
    log_xi_max: float
    z_max: complex
    z_max_upper: complex
    log_max_upper: float
    rho_dprime: float
    audit: tuple[AuditCheck, ...]
    tol_quad: float
    n_max_zero: int
    dim: int
    dim_prime: int
    grid_radius: float
    grid_nodes: int
    degenerate_max: bool = False

    def _p(self, log_value):
        return log_value / (self.params.beta * self.params.volume)

    @property
    def Xi(self):
        return math.exp(self.log_xi)

    @property
    def Xi_prime(self):
        return math.exp(self.log_xi_prime)

    @property
    def Xi_dprime(self):
        return math.exp(self.log_xi_dprime)

    @property
    def Xi_max(self):
        return math.exp(self.log_xi_max)

    @property
    def p(self):
        return self._p(self.log_xi)

    @property
    def p_prime(self):
        return self._p(self.log_xi_prime)

    @property
    def p_dprime(self):
        return self._p(self.log_xi_dprime)

    @property
    def p_max(self):
        return self._p(self.log_xi_max)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.audit)

    @property
    def max_slack(self) -> float:
        return max(c.slack for c in self.audit)

    @property
    def min_margin(self) -> float:
        """Smallest (rhs - lhs) / (1 + |lhs| + |rhs|) over the checks; a pass needs >= -tol_quad."""
        return min((c.rhs - c.lhs) * self.tol_quad / c.slack for c in self.audit)

    def to_dict(self) -> dict:
        return {
            "params": self.params.to_dict(),
            "Xi": self.Xi, "Xi_prime": self.Xi_prime, "Xi_dprime": self.Xi_dprime,
            "Xi_max": self.Xi_max,
            "log_Xi": self.log_xi, "log_Xi_prime": self.log_xi_prime,
            "log_Xi_dprime": self.log_xi_dprime, "log_Xi_max": self.log_xi_max,
            "p": self.p, "p_prime": self.p_prime, "p_dprime": self.p_dprime, "p_max": self.p_max,
            "z_max": [self.z_max.real, self.z_max.imag],
            "z_max_upper": [self.z_max_upper.real, self.z_max_upper.imag],
            "rho_dprime": self.rho_dprime,
            "degenerate_max": self.degenerate_max,
            "tol_quad": self.tol_quad,
            "truncation": {"n_max_zero": self.n_max_zero, "dim": self.dim, "dim_prime": self.dim_prime},
            "grid": {"radius": self.grid_radius, "nodes": self.grid_nodes},
            "audit": [asdict(c) for c in self.audit],
            "verdict": "pass" if self.passed else "fail",
        }


def density_dprime(params: GasParams, basis_prime: FockBasis, grid: RadialGrid,
                   step: float = RHO_STEP) -> float:
    """rho'' = (beta V)^-1 d ln Xi'' / d mu by a centred difference."""
    up = partition_substituted(params.replace(mu=params.mu + step), basis_prime, grid, "upper")
    dn = partition_substituted(params.replace(mu=params.mu - step), basis_prime, grid, "upper")
    return (up.log_xi - dn.log_xi) / (2 * step) / (params.beta * params.volume)


def audit_chain(params: GasParams, basis: FockBasis, basis_prime: FockBasis,
                grid: RadialGrid | None = None, tol_quad: float = DEFAULT_TOL_QUAD,
                strict: bool = False) -> EnsembleReport:
    """Compute Xi, Xi', Xi'', Xi_max and audit the five inequalities.

    (i) Xi' <= Xi, (ii) Xi <= Xi'', (iii) Xi'' <= Xi'(mu + 2 phi/V) e^{beta(|mu| + phi/V)},
    (iv) Xi >= max_z Tr' e^{-beta H'(z)}, (v) Xi'' <= 2 (V rho'' + 1) max_z Tr' e^{-beta H''(z)}.
    With ``strict`` an AuditFailure is raised if any check fails.
    """
    parts = substitution_parts(params, basis_prime)
    if grid is None:
        grid = auto_grid(params, basis_prime, parts=parts, tol=tol_quad)
    else:
        grid.validate(tol_quad)
    beta, V = params.beta, params.volume

    full = partition_full(params, basis)
    lower = partition_substituted(params, basis_prime, grid, "lower", parts)
    upper = partition_substituted(params, basis_prime, grid, "upper", parts)

    shifted = params.replace(mu=params.mu + 2 * params.phi / V)
    shifted_parts = substitution_parts(shifted, basis_prime)
    shifted_grid = auto_grid(shifted, basis_prime, parts=shifted_parts, tol=tol_quad)
    if shifted_grid.radius < grid.radius:
        shifted_grid = grid
    lower_shifted = partition_substituted(shifted, basis_prime, shifted_grid, "lower", shifted_parts)

    pmax_lower = p_max_search(params, basis_prime, "lower", radius=grid.radius, parts=parts)
    pmax_upper = p_max_search(params, basis_prime, "upper", radius=grid.radius, parts=parts)
    rho = density_dprime(params, basis_prime, grid)

    checks = (
        _compare("clowerbound", lower.log_xi, full.log_xi, tol_quad),
        _compare("upper", full.log_xi, upper.log_xi, tol_quad),
        _compare("correx1", upper.log_xi,
                 lower_shifted.log_xi + beta * (abs(params.mu) + params.phi / V), tol_quad),
        _compare("junk", pmax_lower.log_max, full.log_xi, tol_quad),
        _compare("morejunk", upper.log_xi,
                 math.log(2 * max(V * rho + 1, 1e-300)) + pmax_upper.log_max, tol_quad),
    )
    report = EnsembleReport(
        params=params,
        log_xi=full.log_xi,
        log_xi_prime=lower.log_xi,
        log_xi_dprime=upper.log_xi,
        log_xi_max=pmax_lower.log_max,
        z_max=pmax_lower.z_max,
        z_max_upper=pmax_upper.z_max,
        log_max_upper=pmax_upper.log_max,
        rho_dprime=rho,
        audit=checks,
        tol_quad=tol_quad,
        n_max_zero=basis.n_max[0],
        dim=basis.dim,
        dim_prime=basis_prime.dim,
        grid_radius=grid.radius,
        grid_nodes=grid.size,
        degenerate_max=pmax_lower.degenerate,
    )
    if strict and not report.passed:
        raise AuditFailure(report)
    return report


def audit_point(params: GasParams, truncation: Truncation, tol_quad: float = DEFAULT_TOL_QUAD,
                strict: bool = False) -> EnsembleReport:
    """audit_chain with automatic mode-0 cutoff and grid."""
    basis, basis_prime = truncation.bases(params)
    return audit_chain(params, basis, basis_prime, None, tol_quad, strict)


# --------------------------------------------------------------------------
# finite-size trend of the pressure gaps


@dataclass(frozen=True)
class GapRow:
    volume: float
    p: float
    p_prime: float
    p_dprime: float
    p_max: float

    @property
    def gap_max(self) -> float:
        return self.p - self.p_max

    @property
    def gap_symbols(self) -> float:
        return self.p_dprime - self.p_prime


def pressure_gap_trend(family, truncation: Truncation, tol_quad: float = DEFAULT_TOL_QUAD):
    """Rows (V, p - p_max, p'' - p') for a family of parameter points, sorted by V.

    Returns (rows, shrinking) where ``shrinking`` says whether both gaps
    decrease monotonically along the family. Nothing is claimed about the limit.
    """
    rows = []
    for params in family:
        rep = audit_point(params, truncation, tol_quad)
        rows.append(GapRow(params.volume, rep.p, rep.p_prime, rep.p_dprime, rep.p_max))
    rows.sort(key=lambda r: r.volume)
    g1 = [r.gap_max for r in rows]
    g2 = [r.gap_symbols for r in rows]
    shrinking = all(b <= a for a, b in zip(g1, g1[1:])) and all(b <= a for a, b in zip(g2, g2[1:]))
    return rows, shrinking
