"""Coherent states of the zero mode, their symbols, and z-plane quadrature.

The measure on the z-plane is d^2z = dx dy / pi, so that the coherent
projectors resolve the identity with unit weight and the disc |z| <= r has
area r**2.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import stats

from .fock import FockBasis, prime_basis

DEFAULT_TOL_QUAD = 1e-8


class LeakageWarning(UserWarning):
    """Coherent state has noticeable weight above the occupation cutoff."""


def coherent_amplitudes(z, n_max: int) -> np.ndarray:
    """<n|z> for n = 0..n_max; shape (..., n_max + 1) for array-valued z.

    Built by the upward recursion c_n = c_{n-1} z / sqrt(n) carried out on
    log-magnitudes, with the single factor exp(-|z|^2/2) folded in, so that
    large |z| neither overflows nor underflows.
    """
    z = np.asarray(z, dtype=complex)
    n = np.arange(n_max + 1)
    r = np.abs(z)[..., None]
    steps = np.concatenate([[0.0], -0.5 * np.log(n[1:])])
    with np.errstate(divide="ignore", invalid="ignore"):
        log_r = np.log(r)
        log_mag = -0.5 * r**2 + n * log_r + np.cumsum(steps)
    log_mag = np.where(n == 0, -0.5 * r**2, log_mag)
    mag = np.exp(log_mag)
    phase = np.exp(1j * n * np.angle(z)[..., None])
    return mag * phase


def leakage_bound(z: complex, n_max: int) -> float:
    """Weight of |z> above the cutoff: sum_{n>n_max} e^{-|z|^2} |z|^{2n} / n!."""
    return float(stats.poisson.sf(n_max, abs(z) ** 2))


def coherent_vector(basis: FockBasis, z: complex, tol: float = DEFAULT_TOL_QUAD) -> np.ndarray:
    """|z> = exp(-|z|^2/2 + z a_0^+)|0> on ``basis``, other modes empty."""
    if not basis.zero_mode:
        raise ValueError("basis has no zero mode")
    n0 = basis.n_max[0]
    leak = leakage_bound(z, n0)
    if leak > tol:
        warnings.warn(f"|z|={abs(z):.3g} leaks {leak:.2e} beyond n_max={n0}", LeakageWarning,
                      stacklevel=2)
    amps = coherent_amplitudes(z, n0)
    vec = np.zeros(basis.dim, dtype=complex)
    occ = np.zeros(basis.n_modes, dtype=int)
    for n in range(n0 + 1):
        occ[0] = n
        i = basis.index_of(occ)
        if i is not None:
            vec[i] = amps[n]
    return vec


# Zero-mode monomials as (power of a0^+, power of a0), normal ordered.
MONOMIALS = {
    "1": (0, 0),
    "a": (0, 1),
    "adag": (1, 0),
    "aa": (0, 2),
    "adag_adag": (2, 0),
    "adag_a": (1, 1),
    "adag_adag_a_a": (2, 2),
}


def _as_powers(monomial) -> tuple[int, int]:
    if isinstance(monomial, str):
        try:
            return MONOMIALS[monomial]
        except KeyError:
            raise ValueError(f"unknown zero-mode monomial {monomial!r}") from None
    powers = tuple(int(p) for p in monomial)
    if powers not in MONOMIALS.values():
        raise ValueError(f"unknown zero-mode monomial {monomial!r}")
    return powers


def _lower(r: int, s: int, z):
    return np.conj(z) ** r * z**s


def _upper(r: int, s: int, z):
    z = np.asarray(z, dtype=complex)
    if (r, s) == (1, 1):
        return np.abs(z) ** 2 - 1
    if (r, s) == (2, 2):
        a2 = np.abs(z) ** 2
        return a2**2 - 4 * a2 + 2
    return _lower(r, s, z)


def lower_symbol(monomial, z):
    """<z| m |z> for a zero-mode monomial m."""
    r, s = _as_powers(monomial)
    return _lower(r, s, z)


def upper_symbol(monomial, z):
    """u(z) with m = int d^2z u(z) |z><z|."""
    r, s = _as_powers(monomial)
    return _upper(r, s, z)


@dataclass(frozen=True)
class SymbolTable:
    lower: dict[str, Callable]
    upper: dict[str, Callable]

    @classmethod
    def standard(cls) -> "SymbolTable":
        lower = {name: (lambda z, p=p: _lower(*p, z)) for name, p in MONOMIALS.items()}
        upper = {name: (lambda z, p=p: _upper(*p, z)) for name, p in MONOMIALS.items()}
        return cls(lower, upper)


@dataclass(frozen=True)
class RadialGrid:
    """Gauss-Legendre in s = |z|^2 on [0, R^2] times uniform angles.

    ``weights`` already include the 1/pi of d^2z, so sum(w * f(z)) is the
    integral of f with respect to d^2z.
    """

    radius: float
    n_radial: int = 200
    n_angular: int = 64
    n_panels: int = 1
    z: np.ndarray = field(default=None, repr=False, compare=False)
    weights: np.ndarray = field(default=None, repr=False, compare=False)
    convention: str = "d2z = dx dy / pi"

    def __post_init__(self):
        if self.radius <= 0 or self.n_radial < 1 or self.n_angular < 1 or self.n_panels < 1:
            raise ValueError("grid needs positive radius and node counts")
        x, w = np.polynomial.legendre.leggauss(self.n_radial)
        edges = np.linspace(0.0, self.radius**2, self.n_panels + 1)
        s_nodes, s_weights = [], []
        for lo, hi in zip(edges[:-1], edges[1:]):
            s_nodes.append(0.5 * (hi - lo) * x + 0.5 * (hi + lo))
            s_weights.append(0.5 * (hi - lo) * w)
        s = np.concatenate(s_nodes)
        ws = np.concatenate(s_weights)
        theta = 2 * np.pi * np.arange(self.n_angular) / self.n_angular
        # d^2z = (1/pi) r dr dtheta = ds dtheta / (2 pi)
        zz = np.sqrt(s)[:, None] * np.exp(1j * theta)[None, :]
        ww = np.repeat(ws[:, None] / self.n_angular, self.n_angular, axis=1)
        object.__setattr__(self, "z", zz.ravel())
        object.__setattr__(self, "weights", ww.ravel())
        object.__setattr__(self, "s_nodes", s)
        object.__setattr__(self, "s_weights", ws)

    @property
    def size(self) -> int:
        return self.z.size

    def integrate(self, values) -> complex:
        """Fixed-order weighted sum over the nodes."""
        return np.tensordot(self.weights, np.asarray(values), axes=(0, 0))

    def convention_error(self) -> float:
        """|int e^{-|z|^2} d^2z - 1|."""
        return abs(float(np.sum(self.weights * np.exp(-np.abs(self.z) ** 2))) - 1.0)

    def validate(self, tol: float = DEFAULT_TOL_QUAD) -> "RadialGrid":
        err = self.convention_error()
        if err > tol:
            raise ValueError(f"grid fails the Gaussian normalisation check: error {err:.2e} > {tol:.1e}")
        return self

    def radial_profile(self, values) -> tuple[np.ndarray, np.ndarray]:
        """Angular average at each radial node: (|z|, mean value)."""
        v = np.asarray(values).reshape(-1, self.n_angular)
        return np.sqrt(self.s_nodes), v.mean(axis=1)


def grid_for_cutoff(n_max: int, n_radial: int = 200, n_angular: int | None = None,
                    margin: float = 6.0) -> RadialGrid:
    """Grid wide enough for coherent states resolving occupations up to n_max."""
    radius = math.sqrt(n_max) + margin
    if n_angular is None:
        n_angular = max(64, n_max + 8)
    return RadialGrid(radius, n_radial, n_angular)


def zero_mode_projector_sum(n_max: int, grid: RadialGrid, weights_fn) -> np.ndarray:
    """sum_nodes w(z) f(z) |z><z| on the zero-mode space truncated at n_max."""
    amps = coherent_amplitudes(grid.z, n_max)
    coef = grid.weights * weights_fn(grid.z)
    return np.einsum("q,qn,qm->nm", coef, amps, amps.conj(), optimize=True)


def zero_mode_monomial_matrix(monomial, n_max: int) -> np.ndarray:
    """Truncated matrix of a normal-ordered zero-mode monomial."""
    r, s = _as_powers(monomial)
    a = np.diag(np.sqrt(np.arange(1, n_max + 1, dtype=float)), k=1)
    ad = a.T
    return np.linalg.matrix_power(ad, r) @ np.linalg.matrix_power(a, s)


def reconstruct_from_upper(monomial, basis: FockBasis | int, grid: RadialGrid) -> np.ndarray:
    """Quadrature of u(z)|z><z| on the zero-mode factor of ``basis``.

    Accepts a FockBasis (its mode-0 cutoff is used) or a cutoff directly.
    """
    n_max = basis.n_max[0] if isinstance(basis, FockBasis) else int(basis)
    r, s = _as_powers(monomial)
    return zero_mode_projector_sum(n_max, grid, lambda z: _upper(r, s, z))


def reconstruction_residual(monomial, n_max: int, grid: RadialGrid, interior: int = 4) -> float:
    """max |reconstructed - exact| over occupations n, m <= n_max - interior."""
    rec = reconstruct_from_upper(monomial, n_max, grid)
    exact = zero_mode_monomial_matrix(monomial, n_max)
    k = n_max - interior + 1
    return float(np.max(np.abs(rec[:k, :k] - exact[:k, :k])))


def probe_points(max_radius: float = 3.0, n_rings: int = 4, n_angles: int = 8) -> np.ndarray:
    """Fixed probe values z0 on rings of radius 0..max_radius."""
    radii = np.linspace(0.0, max_radius, n_rings)
    theta = 2 * np.pi * (np.arange(n_angles) + 0.5) / n_angles
    return (radii[:, None] * np.exp(1j * theta)[None, :]).ravel()


def probe_residual(monomial, n_max: int, grid: RadialGrid | None = None,
                   probes: np.ndarray | None = None) -> float:
    """max over probes z0 of |<z0| F_rec |z0> - lower symbol of F at z0|.

    F_rec is the upper-symbol reconstruction at cutoff n_max. Unlike the
    entrywise residual, this compares against the untruncated operator, so it
    measures how the truncation error shrinks as n_max grows.
    """
    if grid is None:
        grid = grid_for_cutoff(n_max)
    if probes is None:
        probes = probe_points()
    rec = reconstruct_from_upper(monomial, n_max, grid)
    amps = coherent_amplitudes(probes, n_max)
    vals = np.einsum("qn,nm,qm->q", amps.conj(), rec, amps)
    return float(np.max(np.abs(vals - lower_symbol(monomial, probes))))


def zero_mode_blocks(basis: FockBasis) -> np.ndarray:
    """Index table T[n0, j'] of full-basis states (n0, state j' of H'), -1 if absent."""
    cache = basis.__dict__.get("_block_cache")
    if cache is not None:
        return cache
    primed = prime_basis(basis)
    table = np.full((basis.n_max[0] + 1, primed.dim), -1, dtype=np.int64)
    for i, occ in enumerate(basis.states):
        j = primed.index_of(occ[1:])
        table[occ[0], j] = i
    table.setflags(write=False)
    object.__setattr__(basis, "_block_cache", table)
    return table


def partial_inner(basis: FockBasis, z: complex, vector: np.ndarray) -> tuple[np.ndarray, float]:
    """<z|Phi> as a vector on the space without mode 0, and its squared norm c(z)."""
    table = zero_mode_blocks(basis)
    amps = coherent_amplitudes(z, basis.n_max[0])
    padded = np.append(np.asarray(vector, dtype=complex), 0.0)
    blocks = padded[table]  # (n0, dim')
    psi = amps.conj() @ blocks
    return psi, float(np.vdot(psi, psi).real)


def partial_inner_weights(basis: FockBasis, grid: RadialGrid, vector: np.ndarray) -> np.ndarray:
    """c(z) at every grid node."""
    table = zero_mode_blocks(basis)
    amps = coherent_amplitudes(grid.z, basis.n_max[0])
    padded = np.append(np.asarray(vector, dtype=complex), 0.0)
    psi = amps.conj() @ padded[table]
    return np.sum(np.abs(psi) ** 2, axis=1)


def number_lower_symbol(basis_prime: FockBasis, z: complex) -> np.ndarray:
    """Diagonal of N'(z) = |z|^2 + sum_{k != 0} a_k^+ a_k on the primed basis."""
    return abs(z) ** 2 + basis_prime.total_occupation().astype(float)


__all__ = [
    "DEFAULT_TOL_QUAD", "LeakageWarning", "MONOMIALS", "RadialGrid", "SymbolTable",
    "coherent_amplitudes", "coherent_vector", "grid_for_cutoff", "leakage_bound",
    "lower_symbol", "number_lower_symbol", "partial_inner", "partial_inner_weights", "probe_points", "probe_residual",
    "reconstruct_from_upper", "reconstruction_residual", "upper_symbol",
    "zero_mode_blocks", "zero_mode_monomial_matrix",
]
