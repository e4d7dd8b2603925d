"""Exact diagonalization of small Heisenberg ferromagnets.

H = H0 - B M with H0 = -sum_{bonds} J_xy S_x . S_y over unordered bonds and
M = sum_x S^(3)_x. Energies are in units of kT; ``beta`` only rescales H.
Since [H0, M] = 0, H0 is diagonalized inside each fixed-M sector once and
every field value B is then a relabelling of the same spectrum.
"""

from __future__ import annotations

import csv
import io
import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property
from typing import Mapping, Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import logsumexp

from .fock import MatrixOperator
from .griffiths import MeasureEntry, MeasureSequence

SPIN_DIM_CAP = 16384


class LatticeTooLargeError(ValueError):
    pass


@dataclass(frozen=True)
class SpinBasis:
    """Product basis of site states |m_1 ... m_N>, site value m = s - k for k = 0..2s."""

    n_sites: int
    s: float

    @property
    def local_dim(self) -> int:
        return int(round(2 * self.s)) + 1

    @property
    def dim(self) -> int:
        return self.local_dim ** self.n_sites

    @cached_property
    def m_values(self) -> np.ndarray:
        """Eigenvalue of M on each basis state."""
        local = self.s - np.arange(self.local_dim)
        total = np.zeros(1)
        for _ in range(self.n_sites):
            total = (total[:, None] + local[None, :]).ravel()
        return total


@dataclass(frozen=True)
class SpinLattice:
    d: int = 1
    L: int = 2
    s: float = 0.5
    J: float = 1.0
    B: float = 0.0
    beta: float = 1.0
    couplings: Mapping | None = None
    dim_cap: int = SPIN_DIM_CAP

    def __post_init__(self):
        if self.d < 1 or self.L < 1:
            raise ValueError("d and L must be positive")
        two_s = 2 * self.s
        if two_s < 1 or abs(two_s - round(two_s)) > 1e-12:
            raise ValueError(f"spin must be a positive half-integer, got {self.s}")
        if self.J < 0:
            raise ValueError("J must be non-negative")
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        if self.couplings is not None:
            clean = {}
            for (x, y), v in dict(self.couplings).items():
                if x == y:
                    raise ValueError("self-couplings are not allowed")
                if v < 0:
                    raise ValueError(f"J_{x}{y} = {v} is negative")
                key = (min(x, y), max(x, y))
                if key in clean and clean[key] != v:
                    raise ValueError(f"J_{x}{y} != J_{y}{x}")
                if not (0 <= x < self.n_sites and 0 <= y < self.n_sites):
                    raise ValueError(f"coupling ({x}, {y}) refers to a site outside the lattice")
                clean[key] = float(v)
            object.__setattr__(self, "couplings", clean)
        if self.basis.dim > self.dim_cap:
            raise LatticeTooLargeError(
                f"Hilbert space dimension {self.basis.dim} exceeds the cap {self.dim_cap}")

    @property
    def n_sites(self) -> int:
        return self.L ** self.d

    @property
    def basis(self) -> SpinBasis:
        return SpinBasis(self.n_sites, self.s)

    def bonds(self) -> list[tuple[int, int, float]]:
        """Unordered bonds (x, y, J_xy) with x < y, each listed once."""
        if self.couplings is not None:
            return [(x, y, v) for (x, y), v in sorted(self.couplings.items()) if v != 0]
        out = set()
        for coords in itertools.product(range(self.L), repeat=self.d):
            x = self._site(coords)
            for axis in range(self.d):
                nb = list(coords)
                nb[axis] = (nb[axis] + 1) % self.L
                y = self._site(nb)
                if y != x:
                    out.add((min(x, y), max(x, y)))
        return [(x, y, self.J) for x, y in sorted(out)]

    def _site(self, coords) -> int:
        idx = 0
        for c in coords:
            idx = idx * self.L + c
        return idx

    def replace(self, **changes) -> "SpinLattice":
        fields_ = dict(d=self.d, L=self.L, s=self.s, J=self.J, B=self.B, beta=self.beta,
                       couplings=self.couplings, dim_cap=self.dim_cap)
        fields_.update(changes)
        return SpinLattice(**fields_)


# --------------------------------------------------------------------------
# operators


def local_spin_matrices(s: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(S1, S2, S3) for one spin of magnitude s in the basis m = s, s-1, ..., -s."""
    m = s - np.arange(int(round(2 * s)) + 1)
    # <m+1|S+|m> = sqrt(s(s+1) - m(m+1))
    up = np.sqrt(s * (s + 1) - m[1:] * (m[1:] + 1))
    s_plus = np.diag(up, k=1)
    s1 = 0.5 * (s_plus + s_plus.T)
    s2 = -0.5j * (s_plus - s_plus.T)
    s3 = np.diag(m)
    return s1, s2, s3


def site_operator(basis: SpinBasis, local: np.ndarray, site: int) -> sp.csr_matrix:
    d = basis.local_dim
    left = sp.identity(d ** site, format="csr")
    right = sp.identity(d ** (basis.n_sites - site - 1), format="csr")
    return sp.kron(sp.kron(left, sp.csr_matrix(local)), right, format="csr")


def _h0_sparse(lattice: SpinLattice) -> sp.csr_matrix:
    basis = lattice.basis
    s1, s2, s3 = local_spin_matrices(lattice.s)
    splus = (s1 + 1j * s2).real
    sminus = splus.T
    H = sp.csr_matrix((basis.dim, basis.dim))
    for x, y, j in lattice.bonds():
        # S_x . S_y = S3 S3 + (S+ S- + S- S+) / 2
        zz = site_operator(basis, s3, x) @ site_operator(basis, s3, y)
        pm = site_operator(basis, splus, x) @ site_operator(basis, sminus, y)
        H = H - j * (zz + 0.5 * (pm + pm.T))
    return H.tocsr()


def build_spin_hamiltonian(lattice: SpinLattice, check: bool = True) -> MatrixOperator:
    """H = H0 - B M as a hermitian operator on the product basis."""
    basis = lattice.basis
    H0 = _h0_sparse(lattice)
    if check:
        comm = commutator_h0_m(lattice, H0)
        if comm > 1e-12:
            raise RuntimeError(f"[H0, M] has max entry {comm:.3e}")
    H = H0 - lattice.B * sp.diags(basis.m_values, format="csr")
    return MatrixOperator(basis, H.tocsr(), hermitian=True)


def commutator_h0_m(lattice: SpinLattice, H0=None) -> float:
    if H0 is None:
        H0 = _h0_sparse(lattice)
    M = sp.diags(lattice.basis.m_values, format="csr")
    c = H0 @ M - M @ H0
    return float(abs(c).max()) if c.nnz else 0.0


def spin_algebra_error(lattice: SpinLattice) -> float:
    """max over sites of the largest entry of [S1, S2] - i S3."""
    basis = lattice.basis
    s1, s2, s3 = local_spin_matrices(lattice.s)
    worst = 0.0
    for x in range(basis.n_sites):
        a = site_operator(basis, s1, x)
        b = site_operator(basis, s2, x)
        c = site_operator(basis, s3, x)
        d = a @ b - b @ a - 1j * c
        worst = max(worst, float(abs(d).max()) if d.nnz else 0.0)
    return worst


# --------------------------------------------------------------------------
# spectrum and thermodynamics


@dataclass(frozen=True)
class SectorSpectrum:
    """Eigenvalues of H0 grouped by the eigenvalue of M."""

    m_values: np.ndarray
    energies: tuple[np.ndarray, ...]

    def all_energies(self, B: float = 0.0) -> np.ndarray:
        return np.sort(np.concatenate([e - B * m for m, e in zip(self.m_values, self.energies)]))


def sector_spectrum(lattice: SpinLattice, workers: int = 1) -> SectorSpectrum:
    H0 = _h0_sparse(lattice)
    mv = lattice.basis.m_values
    keys = np.round(2 * mv).astype(int)
    levels = np.unique(keys)

    def solve(k):
        idx = np.flatnonzero(keys == k)
        block = H0[idx][:, idx].toarray()
        return np.linalg.eigvalsh(block)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            energies = tuple(pool.map(solve, levels))
    else:
        energies = tuple(solve(k) for k in levels)
    return SectorSpectrum(levels / 2.0, energies)


@dataclass(frozen=True)
class MagnetReport:
    lattice: SpinLattice
    B: np.ndarray
    m: np.ndarray
    g: np.ndarray
    m2: np.ndarray
    m_values: np.ndarray
    masses: np.ndarray = field(repr=False)   # shape (len(B), len(m_values))

    def distribution(self, i: int) -> MeasureEntry:
        return MeasureEntry(self.lattice.n_sites, self.m_values, self.masses[i])

    def to_rows(self) -> list[dict]:
        return [{"B": float(b), "m": float(m), "g": float(g), "m2": float(q)}
                for b, m, g, q in zip(self.B, self.m, self.g, self.m2)]


def _sector_log_weights(spectrum: SectorSpectrum, B: float, beta: float) -> np.ndarray:
    return np.array([logsumexp(-beta * (e - B * m)) for m, e in zip(spectrum.m_values, spectrum.energies)])


def thermodynamics(lattice: SpinLattice, B_grid: Sequence[float] | None = None,
                   spectrum: SectorSpectrum | None = None, workers: int = 1) -> MagnetReport:
    """m = <M>/N, g = -(beta N)^-1 ln Tr e^{-beta H}, m2 = <(M/N)^2> for each B."""
    if spectrum is None:
        spectrum = sector_spectrum(lattice, workers)
    B = np.atleast_1d(np.asarray([lattice.B] if B_grid is None else B_grid, dtype=float))
    N = lattice.n_sites
    beta = lattice.beta
    mv = spectrum.m_values
    ms, gs, m2s, masses = [], [], [], []
    for b in B:
        logw = _sector_log_weights(spectrum, b, beta)
        logZ = logsumexp(logw)
        p = np.exp(logw - logZ)
        masses.append(p)
        ms.append(float(p @ mv) / N)
        m2s.append(float(p @ mv ** 2) / N ** 2)
        gs.append(-logZ / (beta * N))
    return MagnetReport(lattice, B, np.array(ms), np.array(gs), np.array(m2s), mv, np.array(masses))


def magnetization_distribution(lattice: SpinLattice, B: float | None = None,
                               spectrum: SectorSpectrum | None = None) -> MeasureEntry:
    """Gibbs masses over the eigenvalues of M, as an entry with n = number of sites."""
    b = lattice.B if B is None else B
    rep = thermodynamics(lattice, [b], spectrum)
    return rep.distribution(0)


def chain_measure_sequence(sizes: Sequence[int], s: float = 0.5, J: float = 1.0,
                           B: float = 0.0, beta: float = 1.0, d: int = 1) -> MeasureSequence:
    """Magnetization laws of lattices with side lengths ``sizes``."""
    entries = [magnetization_distribution(SpinLattice(d=d, L=L, s=s, J=J, B=B, beta=beta))
               for L in sizes]
    return MeasureSequence(tuple(entries))


def free_energy_derivative_error(lattice: SpinLattice, B_grid: Sequence[float],
                                 step: float = 1e-4, spectrum: SectorSpectrum | None = None) -> float:
    """max |m(B) + dg/dB| using a centered difference of step ``step``."""
    if spectrum is None:
        spectrum = sector_spectrum(lattice)
    B = np.asarray(B_grid, dtype=float)
    rep = thermodynamics(lattice, B, spectrum)
    gp = thermodynamics(lattice, B + step, spectrum).g
    gm = thermodynamics(lattice, B - step, spectrum).g
    return float(np.max(np.abs(rep.m + (gp - gm) / (2 * step))))


def magnet_csv(report: MagnetReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["B", "m", "g", "m2"])
    for r in report.to_rows():
        w.writerow([repr(r["B"]), repr(r["m"]), repr(r["g"]), repr(r["m2"])])
    return buf.getvalue()


def sector_counts(n_sites: int, s: float) -> dict[float, int]:
    """Multiplicity of each M eigenvalue, by convolving single-site counts."""
    k = int(round(2 * s)) + 1
    counts = np.ones(1, dtype=np.int64)
    for _ in range(n_sites):
        counts = np.convolve(counts, np.ones(k, dtype=np.int64))
    top = n_sites * s
    return {top - i: int(c) for i, c in enumerate(counts)}


def total_spin_multiplicities(n_sites: int, s: float) -> dict[float, int]:
    """Number of total-spin-S multiplets, from the M multiplicities."""
    counts = sector_counts(n_sites, s)
    out = {}
    for M in sorted(counts):
        if M < 0:
            continue
        mult = counts[M] - counts.get(M + 1, 0)
        if mult:
            out[M] = mult
    return out


__all__ = [
    "SPIN_DIM_CAP", "LatticeTooLargeError", "SpinBasis", "SpinLattice", "local_spin_matrices",
    "site_operator", "build_spin_hamiltonian", "commutator_h0_m", "spin_algebra_error",
    "SectorSpectrum", "sector_spectrum", "MagnetReport", "thermodynamics",
    "magnetization_distribution", "chain_measure_sequence", "free_energy_derivative_error",
    "magnet_csv", "sector_counts", "total_spin_multiplicities",
]
