"""Gas Hamiltonians on the truncated Fock space and their c-number substitutes.

Units: hbar = 2m = 1, so the kinetic energy of mode k is k**2.

Interaction terms nu(p) a^+_{k+p} a^+_{q-p} a_k a_q whose output momenta fall
outside the mode set are dropped; the truncated set is the model.
"""

from __future__ import annotations

import math
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
import scipy.sparse as sp

from .coherent import _lower, _upper
from .fock import (
    FockBasis,
    MatrixOperator,
    ModeSet,
    annihilation_sparse,
    build_basis,
    prime_basis,
)


def _label(p) -> tuple[int, ...]:
    if isinstance(p, (int, np.integer)):
        return (int(p),)
    return tuple(int(c) for c in p)


@dataclass(frozen=True)
class GasParams:
    """Physical parameters of one grand-canonical point.

    ``nu`` maps momentum-transfer labels (integer vectors, or plain ints in 1-D)
    to real Fourier coefficients; transfers absent from the map have nu = 0.
    ``phi`` is the declared bound |nu| <= phi (defaults to max |nu|).
    """

    modes: ModeSet
    nu: Mapping = field(default_factory=dict)
    mu: float = 0.0
    lam: float = 0.0
    beta: float = 1.0
    phi: float | None = None

    def __post_init__(self):
        nu = {}
        for p, v in dict(self.nu).items():
            if isinstance(p, str):
                p = tuple(int(c) for c in p.split(","))
            v = complex(v)
            if v.imag != 0:
                raise ValueError(f"nu{_label(p)} must be real")
            if v.real != 0:
                nu[_label(p)] = float(v.real)
        for p, v in nu.items():
            mp = tuple(-c for c in p)
            if nu.get(mp, 0.0) != v:
                raise ValueError(f"nu is not symmetric: nu{p} = {v} but nu{mp} = {nu.get(mp, 0.0)}")
        object.__setattr__(self, "nu", nu)
        bound = max((abs(v) for v in nu.values()), default=0.0)
        if self.phi is None:
            object.__setattr__(self, "phi", bound)
        elif bound > self.phi:
            raise ValueError(f"declared bound phi={self.phi} is below max|nu|={bound}")
        lam = complex(self.lam)
        if lam.imag != 0:
            raise ValueError("lambda must be real (a phase of lambda is removed by rotating a_0)")
        object.__setattr__(self, "lam", float(lam.real))
        if not self.beta > 0:
            raise ValueError("beta must be positive")
        for name in ("mu", "beta"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def contact(cls, modes: ModeSet, g: float, **kw) -> "GasParams":
        """nu(p) = g for every transfer between modes of ``modes``."""
        labels = modes.labels
        transfers = {tuple(a - b for a, b in zip(x, y)) for x in labels for y in labels}
        return cls(modes, {p: g for p in transfers}, **kw)

    @property
    def volume(self) -> float:
        return self.modes.volume

    def nu_of(self, p) -> float:
        return self.nu.get(_label(p), 0.0)

    def replace(self, **changes) -> "GasParams":
        fields = dict(modes=self.modes, nu=self.nu, mu=self.mu, lam=self.lam,
                      beta=self.beta, phi=self.phi)
        fields.update(changes)
        return GasParams(**fields)

    def to_dict(self) -> dict:
        return {
            "modes": [list(lab) for lab in self.modes.labels],
            "length": self.modes.length,
            "volume": self.volume,
            "nu": {",".join(map(str, p)): v for p, v in sorted(self.nu.items())},
            "phi": self.phi,
            "mu": self.mu,
            "lambda": self.lam,
            "beta": self.beta,
        }


def interaction_terms(params: GasParams) -> list[tuple[float, tuple[int, int, int, int]]]:
    """(coefficient, (c1, c2, a1, a2)) for nu(p)/(2V) a^+_{c1} a^+_{c2} a_{a1} a_{a2}."""
    modes = params.modes
    labels = modes.labels
    scale = 1.0 / (2.0 * params.volume)
    terms = []
    for p, v in sorted(params.nu.items()):
        for ik, k in enumerate(labels):
            kp = modes.index(tuple(a + b for a, b in zip(k, p)))
            if kp is None:
                continue
            for iq, q in enumerate(labels):
                qp = modes.index(tuple(a - b for a, b in zip(q, p)))
                if qp is None:
                    continue
                terms.append((v * scale, (kp, qp, ik, iq)))
    return terms


def _check_basis(params: GasParams, basis: FockBasis, zero_mode: bool):
    expected = params.modes.n_modes - (0 if zero_mode else 1)
    if basis.n_modes != expected:
        raise ValueError(f"basis has {basis.n_modes} modes, expected {expected}")
    if basis.zero_mode != zero_mode:
        raise ValueError("basis must %s the zero mode" % ("include" if zero_mode else "exclude"))


def _product(basis: FockBasis, creators, annihilators) -> sp.csr_matrix:
    out = sp.identity(basis.dim, format="csr")
    for m in creators:
        out = out @ annihilation_sparse(basis, m).T
    for m in annihilators:
        out = out @ annihilation_sparse(basis, m)
    return out


def build_H_sparse(params: GasParams, basis: FockBasis) -> sp.csr_matrix:
    _check_basis(params, basis, zero_mode=True)
    kin = params.modes.kinetic
    diag = basis.states.astype(float) @ kin
    H = sp.diags(diag, format="csr")
    for coef, (c1, c2, a1, a2) in interaction_terms(params):
        H = H + coef * _product(basis, (c1, c2), (a1, a2))
    return H.tocsr()


def build_H(params: GasParams, basis: FockBasis) -> MatrixOperator:
    """Kinetic energy plus the two-body interaction, no chemical potential."""
    return MatrixOperator(basis, build_H_sparse(params, basis), hermitian=True)


def build_H_mu_lambda_sparse(params: GasParams, basis: FockBasis) -> sp.csr_matrix:
    H = build_H_sparse(params, basis)
    N = sp.diags(basis.total_occupation().astype(float), format="csr")
    H = H - params.mu * N
    if params.lam != 0.0:
        a0 = annihilation_sparse(basis, 0)
        H = H + math.sqrt(params.volume) * params.lam * (a0 + a0.T)
    return H.tocsr()


def build_H_mu_lambda(params: GasParams, basis: FockBasis) -> MatrixOperator:
    """H - mu N + sqrt(V) lambda (a_0 + a_0^+) for real lambda."""
    return MatrixOperator(basis, build_H_mu_lambda_sparse(params, basis), hermitian=True)


@dataclass(frozen=True)
class SubstitutedParts:
    """H_{mu,lambda} split as sum over zero-mode monomials (r, s) of
    (a_0^+)^r a_0^s (x) O_{rs}, with O_{rs} acting on the space without mode 0."""

    params: GasParams
    basis_prime: FockBasis
    parts: dict

    def matrix(self, z: complex, kind: str = "lower") -> np.ndarray:
        symbol = _symbol_fn(kind)
        out = np.zeros((self.basis_prime.dim,) * 2, dtype=complex)
        for (r, s), op in self.parts.items():
            out += symbol(r, s, z) * op
        return out

    def batch(self, z: np.ndarray, kind: str = "lower") -> np.ndarray:
        """Stack of H(z) for an array of z; shape (len(z), dim', dim')."""
        symbol = _symbol_fn(kind)
        z = np.asarray(z, dtype=complex).ravel()
        d = self.basis_prime.dim
        out = np.zeros((z.size, d, d), dtype=complex)
        for (r, s), op in self.parts.items():
            coef = np.broadcast_to(symbol(r, s, z), z.shape)
            out += coef[:, None, None] * op[None, :, :]
        return out


def _symbol_fn(kind: str):
    if kind == "lower":
        return _lower
    if kind == "upper":
        return _upper
    raise ValueError(f"kind must be 'lower' or 'upper', got {kind!r}")


def substitution_parts(params: GasParams, basis_prime: FockBasis) -> SubstitutedParts:
    _check_basis(params, basis_prime, zero_mode=False)
    d = basis_prime.dim
    parts: dict = defaultdict(lambda: np.zeros((d, d)))
    occ = basis_prime.states.astype(float)
    kin = params.modes.kinetic[1:]
    parts[(0, 0)] = parts[(0, 0)] + np.diag(occ @ kin - params.mu * occ.sum(axis=1))
    parts[(1, 1)] = parts[(1, 1)] - params.mu * np.eye(d)
    if params.lam != 0.0:
        shift = math.sqrt(params.volume) * params.lam
        parts[(0, 1)] = parts[(0, 1)] + shift * np.eye(d)
        parts[(1, 0)] = parts[(1, 0)] + shift * np.eye(d)
    for coef, (c1, c2, a1, a2) in interaction_terms(params):
        r = (c1 == 0) + (c2 == 0)
        s = (a1 == 0) + (a2 == 0)
        creators = [m - 1 for m in (c1, c2) if m != 0]
        annihilators = [m - 1 for m in (a1, a2) if m != 0]
        op = _product(basis_prime, creators, annihilators).toarray() if d else np.zeros((d, d))
        parts[(r, s)] = parts[(r, s)] + coef * op
    for key in parts:
        if key not in {(0, 0), (0, 1), (1, 0), (0, 2), (2, 0), (1, 1), (2, 2)}:
            raise ValueError(f"unexpected zero-mode monomial {key}")
    frozen = {}
    for key, op in parts.items():
        op = np.array(op)
        op.setflags(write=False)
        frozen[key] = op
    return SubstitutedParts(params, basis_prime, frozen)


@dataclass(frozen=True)
class SubstitutedHamiltonian:
    z: complex
    kind: str
    matrix: MatrixOperator


def build_substituted(params: GasParams, basis_prime: FockBasis, z: complex,
                      kind: str = "lower") -> SubstitutedHamiltonian:
    """H'(z) (kind='lower') or H''(z) (kind='upper') on the space without mode 0."""
    parts = substitution_parts(params, basis_prime)
    m = parts.matrix(z, kind)
    return SubstitutedHamiltonian(complex(z), kind, MatrixOperator(basis_prime, m, hermitian=True))


def delta_correction(params: GasParams, basis_prime: FockBasis, z: complex) -> MatrixOperator:
    """delta_mu(z) = H''(z) - H'(z), written out in closed form."""
    _check_basis(params, basis_prime, zero_mode=False)
    V = params.volume
    nu0 = params.nu_of((0,) * params.modes.dim)
    diag = np.full(basis_prime.dim, params.mu + (-4 * abs(z) ** 2 + 2) * nu0 / (2 * V))
    for j, lab in enumerate(params.modes.labels[1:]):
        minus = tuple(-c for c in lab)
        weight = 2 * nu0 + params.nu_of(lab) + params.nu_of(minus)
        diag = diag - basis_prime.states[:, j] * weight / (2 * V)
    return MatrixOperator(basis_prime, np.diag(diag).astype(complex), hermitian=True)


def delta_bound(params: GasParams, basis_prime: FockBasis, z: complex) -> np.ndarray:
    """Diagonal of 2 phi (N'(z) + 1/2) / V + |mu|."""
    n_prime = abs(z) ** 2 + basis_prime.total_occupation()
    return 2 * params.phi * (n_prime + 0.5) / params.volume + abs(params.mu)


def delta_bound_ratio(params: GasParams, basis_prime: FockBasis, z: complex) -> float:
    """Spectral norm of B^{-1/2} delta B^{-1/2} with B the diagonal bound operator.

    A value <= 1 means -B <= delta_mu(z) <= B as operators.
    """
    delta = delta_correction(params, basis_prime, z).toarray()
    bound = delta_bound(params, basis_prime, z)
    pos = bound > 0
    if np.any(delta[~pos]) or np.any(delta[:, ~pos]):
        return math.inf
    scale = 1.0 / np.sqrt(bound[pos])
    block = delta[np.ix_(pos, pos)]
    if block.size == 0:
        return 0.0
    return float(np.linalg.norm(scale[:, None] * block * scale[None, :], 2))


def commutator_norm(A, B) -> float:
    """max-entry norm of [A, B] for sparse or dense inputs."""
    c = A @ B - B @ A
    if sp.issparse(c):
        return float(abs(c).max()) if c.nnz else 0.0
    return float(np.max(np.abs(c))) if c.size else 0.0


def gas_bases(params: GasParams, n_max_zero: int, n_max_other: int,
              n_total_max: int | None = None, dim_cap: int | None = None):
    """Full basis (mode 0 cut at n_max_zero, others at n_max_other) and its primed basis."""
    caps = [n_max_zero] + [n_max_other] * (params.modes.n_modes - 1)
    kw = {} if dim_cap is None else {"dim_cap": dim_cap}
    basis = build_basis(params.modes, caps, n_total_max, **kw)
    return basis, prime_basis(basis)
