"""Truncated multi-mode bosonic Fock spaces and ladder operators.

Occupation vectors are enumerated lexicographically with mode 0 as the most
significant digit, so that without a total-number cap the basis is the
tensor product (mode 0) x (all other modes) in row-major order.

The truncation is a downward-closed set of occupation vectors. Creation
operators map states that would leave the set to zero, which makes every
normal-ordered product of truncated ladder matrices the exact compression
of the untruncated operator.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.sparse as sp

DEFAULT_DIM_CAP = 20000
DENSE_THRESHOLD = 512


class TruncationError(ValueError):
    """Raised when a requested truncation is larger than the dimension cap."""


@dataclass(frozen=True)
class ModeSet:
    """Momentum modes k = 2*pi*n/L of a periodic box of side L (V = L**d).

    ``labels`` are integer vectors n; label 0 must come first.
    """

    labels: tuple[tuple[int, ...], ...]
    length: float = 1.0

    def __post_init__(self):
        labels = tuple(tuple(int(c) for c in lab) for lab in self.labels)
        object.__setattr__(self, "labels", labels)
        if not labels:
            raise ValueError("mode set must contain at least the zero mode")
        d = len(labels[0])
        if any(len(lab) != d for lab in labels):
            raise ValueError("mode labels must share one dimension")
        if len(set(labels)) != len(labels):
            raise ValueError("mode labels must be unique")
        if any(labels[0]):
            raise ValueError("the zero mode must be at index 0")
        if self.length <= 0:
            raise ValueError("box length must be positive")

    @classmethod
    def chain(cls, n_modes: int, length: float) -> "ModeSet":
        """1-D modes n in {0, 1, -1, ..., n_modes, -n_modes}."""
        labels = [(0,)]
        for n in range(1, n_modes + 1):
            labels += [(n,), (-n,)]
        return cls(tuple(labels), length)

    @property
    def dim(self) -> int:
        return len(self.labels[0])

    @property
    def volume(self) -> float:
        return float(self.length) ** self.dim

    @property
    def n_modes(self) -> int:
        return len(self.labels)

    @property
    def kinetic(self) -> np.ndarray:
        """k**2 per mode (hbar = 2m = 1); exactly 0 for mode 0."""
        scale = (2.0 * math.pi / self.length) ** 2
        return np.array([scale * sum(c * c for c in lab) for lab in self.labels])

    def index(self, label) -> int | None:
        """Position of ``label`` or None if the momentum left the set."""
        try:
            return self.labels.index(tuple(label))
        except ValueError:
            return None


@dataclass(frozen=True)
class FockBasis:
    """Enumerated occupation vectors obeying per-mode and total cutoffs."""

    n_max: tuple[int, ...]
    n_total_max: int | None = None
    modes: ModeSet | None = None
    states: np.ndarray = field(default=None, repr=False, compare=False)
    zero_mode: bool = True

    @property
    def dim(self) -> int:
        return self.states.shape[0]

    @property
    def n_modes(self) -> int:
        return len(self.n_max)

    def index_of(self, occupation: Sequence[int]) -> int | None:
        return self._lookup.get(tuple(int(n) for n in occupation))

    @property
    def _lookup(self) -> dict:
        table = self.__dict__.get("_lookup_cache")
        if table is None:
            table = {tuple(int(n) for n in s): i for i, s in enumerate(self.states)}
            object.__setattr__(self, "_lookup_cache", table)
        return table

    @property
    def is_product(self) -> bool:
        """True when the basis is the full box of per-mode cutoffs."""
        return self.dim == math.prod(n + 1 for n in self.n_max)

    def total_occupation(self) -> np.ndarray:
        return self.states.sum(axis=1)


def prime_basis(basis: FockBasis) -> FockBasis:
    """Basis of the Fock space without mode 0, same cutoffs on the other modes.

    With a single mode this is the one-dimensional space of the vacuum.
    """
    if not basis.zero_mode:
        raise ValueError("basis already excludes the zero mode")
    cache = basis.__dict__.get("_prime_cache")
    if cache is not None:
        return cache
    caps = basis.n_max[1:]
    states = [occ for occ in itertools.product(*(range(c + 1) for c in caps))
              if basis.n_total_max is None or sum(occ) <= basis.n_total_max]
    arr = np.array(states, dtype=np.int64).reshape(len(states), len(caps))
    arr.setflags(write=False)
    out = FockBasis(caps, basis.n_total_max, basis.modes, arr, zero_mode=False)
    object.__setattr__(basis, "_prime_cache", out)
    return out


def build_basis(
    mode_set: ModeSet | int,
    n_max_per_mode: int | Sequence[int],
    n_total_max: int | None = None,
    dim_cap: int = DEFAULT_DIM_CAP,
) -> FockBasis:
    """Enumerate occupation vectors in lexicographic order.

    ``mode_set`` may be a ModeSet or just a mode count. ``n_max_per_mode`` is
    either one cutoff for every mode or a sequence with one cutoff per mode.
    """
    n_modes = mode_set if isinstance(mode_set, int) else mode_set.n_modes
    if n_modes < 1:
        raise ValueError("need at least one mode")
    if isinstance(n_max_per_mode, (int, np.integer)):
        caps = (int(n_max_per_mode),) * n_modes
    else:
        caps = tuple(int(c) for c in n_max_per_mode)
        if len(caps) != n_modes:
            raise ValueError(f"got {len(caps)} cutoffs for {n_modes} modes")
    if min(caps) < 1:
        raise ValueError("occupation cutoffs must be >= 1")
    if n_total_max is not None and n_total_max < 0:
        raise ValueError("total-number cutoff must be non-negative")

    box = math.prod(c + 1 for c in caps)
    if n_total_max is None and box > dim_cap:
        raise TruncationError(f"truncation too large: dimension {box} > cap {dim_cap}")

    states = []
    for occ in itertools.product(*(range(c + 1) for c in caps)):
        if n_total_max is not None and sum(occ) > n_total_max:
            continue
        states.append(occ)
        if len(states) > dim_cap:
            raise TruncationError(f"truncation too large: dimension exceeds cap {dim_cap}")
    arr = np.array(states, dtype=np.int64).reshape(len(states), n_modes)
    arr.setflags(write=False)
    modes = None if isinstance(mode_set, int) else mode_set
    return FockBasis(caps, n_total_max, modes, arr)


@dataclass(frozen=True)
class MatrixOperator:
    """Matrix on a FockBasis. Dense below DENSE_THRESHOLD, CSR above."""

    basis: FockBasis
    matrix: object
    hermitian: bool = False

    def __post_init__(self):
        m = self.matrix
        n = self.basis.dim
        if m.shape != (n, n):
            raise ValueError(f"matrix shape {m.shape} does not match basis dimension {n}")
        if n < DENSE_THRESHOLD and sp.issparse(m):
            m = m.toarray()
        elif n >= DENSE_THRESHOLD and not sp.issparse(m):
            m = sp.csr_matrix(m)
        object.__setattr__(self, "matrix", m)
        if self.hermitian:
            dev = antihermitian_part(m)
            if dev >= 1e-12:
                raise ValueError(f"matrix flagged hermitian but max|A - A^H| = {dev:.3e}")

    @property
    def shape(self):
        return self.matrix.shape

    def toarray(self) -> np.ndarray:
        m = self.matrix
        return m.toarray() if sp.issparse(m) else np.asarray(m)

    def tosparse(self) -> sp.csr_matrix:
        return sp.csr_matrix(self.matrix)

    def dagger(self) -> "MatrixOperator":
        return MatrixOperator(self.basis, self.matrix.conj().T, self.hermitian)


def antihermitian_part(m) -> float:
    """max |A - A^H| entry."""
    d = m - m.conj().T
    if sp.issparse(d):
        return float(abs(d).max()) if d.nnz else 0.0
    return float(np.max(np.abs(d))) if d.size else 0.0


def _annihilation_csr(basis: FockBasis, mode: int) -> sp.csr_matrix:
    if not 0 <= mode < basis.n_modes:
        raise IndexError(f"mode index {mode} out of range for {basis.n_modes} modes")
    rows, cols, vals = [], [], []
    lookup = basis._lookup
    for j, occ in enumerate(basis.states):
        n = int(occ[mode])
        if n == 0:
            continue
        target = list(int(x) for x in occ)
        target[mode] -= 1
        i = lookup[tuple(target)]
        rows.append(i)
        cols.append(j)
        vals.append(math.sqrt(n))
    return sp.csr_matrix((vals, (rows, cols)), shape=(basis.dim, basis.dim), dtype=float)


def annihilation_sparse(basis: FockBasis, mode: int) -> sp.csr_matrix:
    """Cached CSR matrix of a_mode; builders work on these directly."""
    cache = basis.__dict__.get("_ladder_cache")
    if cache is None:
        cache = {}
        object.__setattr__(basis, "_ladder_cache", cache)
    if mode not in cache:
        cache[mode] = _annihilation_csr(basis, mode)
    return cache[mode]


def annihilation(basis: FockBasis, mode: int) -> MatrixOperator:
    """a_k with a_k |..., n_k, ...> = sqrt(n_k) |..., n_k - 1, ...>."""
    return MatrixOperator(basis, annihilation_sparse(basis, mode).copy())


def creation(basis: FockBasis, mode: int) -> MatrixOperator:
    return annihilation(basis, mode).dagger()


def number_operator(basis: FockBasis) -> MatrixOperator:
    """N = sum_k a_k^+ a_k, diagonal in the occupation basis."""
    diag = basis.total_occupation().astype(float)
    return MatrixOperator(basis, sp.diags(diag, format="csr"), hermitian=True)


def mode_number(basis: FockBasis, mode: int) -> np.ndarray:
    """Diagonal of a_k^+ a_k."""
    return basis.states[:, mode].astype(float)
