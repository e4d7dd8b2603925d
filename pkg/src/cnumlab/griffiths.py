"""Scaled cumulant generating functions and concentration of measure sequences.

For probability measures mu_n on the real line,

    f_n(y) = n^-1 ln int e^{x y} d mu_n(x),

the one-sided derivatives a_-, a_+ of the limit f at 0 bracket the support of
the rescaled measures: mass outside [(a_- - eps) n, (a_+ + eps) n] decays
exponentially in n. Everything here works in log space.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp
from scipy.stats import binom

DEFAULT_H = tuple(0.4 / 2**k for k in range(8))


class OverflowGuardError(FloatingPointError):
    pass


@dataclass(frozen=True)
class MeasureEntry:
    n: int
    points: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        m = np.asarray(self.masses, dtype=float)
        if pts.shape != m.shape or pts.ndim != 1:
            raise ValueError("points and masses must be 1-D arrays of equal length")
        if np.any(m < 0):
            raise ValueError("masses must be non-negative")
        if abs(m.sum() - 1.0) > 1e-12:
            raise ValueError(f"measure for n={self.n} has total mass {m.sum()!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "masses", m)

    def log_mgf(self, y) -> np.ndarray:
        """ln int e^{x y} d mu(x) for each y."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        keep = self.masses > 0
        logm = np.log(self.masses[keep])
        with np.errstate(over="ignore", invalid="ignore"):
            expo = np.outer(y, self.points[keep]) + logm[None, :]
            out = logsumexp(expo, axis=1)
        if not np.all(np.isfinite(out)):
            raise OverflowGuardError(f"non-finite log-MGF for n={self.n}")
        return out


@dataclass(frozen=True)
class MeasureSequence:
    entries: tuple[MeasureEntry, ...]

    def __post_init__(self):
        ns = [e.n for e in self.entries]
        if any(b <= a for a, b in zip(ns, ns[1:])):
            raise ValueError("n must be strictly increasing along the sequence")

    @property
    def ns(self) -> np.ndarray:
        return np.array([e.n for e in self.entries])

    @classmethod
    def from_json(cls, doc) -> "MeasureSequence":
        if isinstance(doc, (str, bytes)):
            doc = json.loads(doc)
        return cls(tuple(MeasureEntry(int(d["n"]), d["points"], d["masses"]) for d in doc))

    def to_json(self) -> list:
        return [{"n": e.n, "points": e.points.tolist(), "masses": e.masses.tolist()}
                for e in self.entries]


# --------------------------------------------------------------------------
# reference sequences


def coin_sequence(ns: Iterable[int], bias: float = 0.0) -> MeasureSequence:
    """Sum of n independent +-1 variables with P(+1) = e^bias / (2 cosh bias)."""
    p = math.exp(bias) / (2 * math.cosh(bias))
    entries = []
    for n in ns:
        k = np.arange(n + 1)
        entries.append(MeasureEntry(n, 2.0 * k - n, binom.pmf(k, n, p)))
    return MeasureSequence(tuple(entries))


def two_point_sequence(ns: Iterable[int]) -> MeasureSequence:
    """Half a unit mass at +n and half at -n."""
    return MeasureSequence(tuple(MeasureEntry(n, [-float(n), float(n)], [0.5, 0.5]) for n in ns))


def point_mass_sequence(ns: Iterable[int], m0: float) -> MeasureSequence:
    return MeasureSequence(tuple(MeasureEntry(n, [m0 * n], [1.0]) for n in ns))


# --------------------------------------------------------------------------
# rate function


@dataclass(frozen=True)
class RateFunctionEstimate:
    y_grid: np.ndarray
    ns: np.ndarray
    f_n: np.ndarray              # shape (len(ns), len(y_grid))
    f: np.ndarray                # extrapolated in 1/n
    convex: tuple[bool, ...]     # per n
    sequence: MeasureSequence = field(repr=False)
    fit_count: int = 3

    def f_at(self, y) -> np.ndarray:
        """Extrapolated f at arbitrary y, using the same 1/n fit."""
        y = np.atleast_1d(np.asarray(y, dtype=float))
        curves = np.array([e.log_mgf(y) / e.n for e in self.sequence.entries])
        return _extrapolate(self.ns, curves, self.fit_count)


def _extrapolate(ns: np.ndarray, curves: np.ndarray, fit_count: int) -> np.ndarray:
    """Least-squares fit f_n = f + b / n over the largest ``fit_count`` n; returns f."""
    k = min(fit_count, len(ns))
    if k == 1:
        return curves[-1].copy()
    inv = 1.0 / ns[-k:].astype(float)
    A = np.column_stack([np.ones(k), inv])
    coef, *_ = np.linalg.lstsq(A, curves[-k:], rcond=None)
    return coef[0]


def rate_function(seq: MeasureSequence, y_grid: Sequence[float], fit_count: int = 3,
                  convex_tol: float = 1e-10) -> RateFunctionEstimate:
    """f_n(y) for every entry, their 1/n extrapolation, and convexity flags."""
    y = np.asarray(y_grid, dtype=float)
    if not np.allclose(np.sort(y), np.sort(-y)):
        raise ValueError("y grid must be symmetric about 0")
    curves = np.array([e.log_mgf(y) / e.n for e in seq.entries])
    ns = seq.ns
    f = _extrapolate(ns, curves, fit_count)
    order = np.argsort(y)
    convex = []
    for c in curves:
        cy = c[order]
        ys = y[order]
        # second divided differences on a possibly non-uniform grid
        d1 = np.diff(cy) / np.diff(ys)
        d2 = np.diff(d1)
        convex.append(bool(np.all(d2 >= -convex_tol)))
    return RateFunctionEstimate(y, ns, curves, f, tuple(convex), seq, fit_count)


# --------------------------------------------------------------------------
# one-sided derivatives


@dataclass(frozen=True)
class DerivativeEstimate:
    a_minus: float
    a_plus: float
    err_minus: float
    err_plus: float
    extrapolation_err_minus: float
    extrapolation_err_plus: float
    h: tuple[float, ...]
    quotients_minus: tuple[float, ...]
    quotients_plus: tuple[float, ...]
    monotone: bool


def _richardson_zero(h: np.ndarray, q: np.ndarray) -> tuple[float, float]:
    """Extrapolate q(h) to h = 0 with a Neville tableau.

    Every tableau entry gets an error estimate from its two parents; the entry
    with the smallest estimate wins. For finite-n data the quotients at the
    smallest h carry finite-size corrections, and those entries lose out.
    """
    h = h.astype(float)
    q = q.astype(float)
    best, best_err = q[0], math.inf
    prev_row = [q[0]]
    for i in range(1, len(q)):
        row = [q[i]]
        for j in range(1, i + 1):
            hi, hj = h[i - j], h[i]
            row.append((hi * row[j - 1] - hj * prev_row[j - 1]) / (hi - hj))
            err = max(abs(row[j] - row[j - 1]), abs(row[j] - prev_row[j - 1]))
            if err <= best_err:
                best, best_err = row[j], err
        prev_row = row
    return float(best), float(best_err)


def one_sided_derivatives(estimate: RateFunctionEstimate,
                          h_sequence: Sequence[float] = DEFAULT_H,
                          tol: float = 1e-8) -> DerivativeEstimate:
    """a_+ = lim (f(h) - f(0))/h and a_- = lim (f(0) - f(-h))/h as h -> 0+.

    Difference quotients are formed on the extrapolated f, checked for the
    monotonicity convexity implies (right quotients fall, left quotients rise
    as h shrinks), and extrapolated to h = 0. ``err_*`` is the spread of the
    last two raw quotients; ``extrapolation_err_*`` is the tableau's own estimate.

    Convexity forces a_- <= a_+, so a crossing pair (possible when f bends on
    a scale below the smallest h) is replaced by its midpoint.
    """
    h = np.asarray(h_sequence, dtype=float)
    if np.any(h <= 0) or np.any(np.diff(h) >= 0):
        raise ValueError("h_sequence must be positive and decreasing")
    f0 = estimate.f_at([0.0])[0]
    fp = estimate.f_at(h)
    fm = estimate.f_at(-h)
    qp = (fp - f0) / h
    qm = (f0 - fm) / h
    mono = bool(np.all(np.diff(qp) <= tol) and np.all(np.diff(qm) >= -tol))
    if len(h) >= 2:
        a_p, xp = _richardson_zero(h, qp)
        a_m, xm = _richardson_zero(h, qm)
        ep = abs(qp[-1] - qp[-2])
        em = abs(qm[-1] - qm[-2])
        if a_m > a_p:
            a_m = a_p = 0.5 * (a_m + a_p)
    else:
        a_p, a_m = qp[-1], qm[-1]
        ep = em = xp = xm = math.inf
    return DerivativeEstimate(float(a_m), float(a_p), float(em), float(ep), float(xm), float(xp),
                              tuple(float(v) for v in h), tuple(float(v) for v in qm),
                              tuple(float(v) for v in qp), mono)


# --------------------------------------------------------------------------
# concentration


@dataclass(frozen=True)
class ConcentrationReport:
    ns: np.ndarray
    tails: np.ndarray
    slope: float
    c_fit: float
    epsilon: float

    @property
    def decaying(self) -> bool:
        return self.slope < 0 or self.c_fit == 0.0


def concentration_check(seq: MeasureSequence, a_minus: float, a_plus: float,
                        epsilon: float) -> ConcentrationReport:
    """Mass of mu_n outside [(a_- - eps) n, (a_+ + eps) n] and the fitted decay rate.

    ln(tail) is fitted linearly in n over the entries with non-zero tail;
    c_fit = exp(slope). A tail that vanishes identically is reported as c_fit = 0.
    """
    ns = seq.ns.astype(float)
    tails = []
    for e in seq.entries:
        lo = (a_minus - epsilon) * e.n
        hi = (a_plus + epsilon) * e.n
        outside = (e.points < lo) | (e.points > hi)
        tails.append(float(np.sum(e.masses[outside])))
    tails = np.array(tails)
    pos = tails > 0
    if pos.sum() == 0:
        return ConcentrationReport(ns, tails, -math.inf, 0.0, epsilon)
    if pos.sum() == 1:
        return ConcentrationReport(ns, tails, math.nan, math.nan, epsilon)
    slope, _ = np.polyfit(ns[pos], np.log(tails[pos]), 1)
    return ConcentrationReport(ns, tails, float(slope), math.exp(slope), epsilon)


# --------------------------------------------------------------------------
# tables


def _csv(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def rate_function_csv(estimate: RateFunctionEstimate) -> str:
    """Columns: y, f_<n> for each n, f_extrapolated."""
    header = ["y"] + [f"f_{n}" for n in estimate.ns] + ["f_extrapolated"]
    rows = []
    for j, y in enumerate(estimate.y_grid):
        rows.append([repr(float(y))] + [repr(float(c[j])) for c in estimate.f_n]
                    + [repr(float(estimate.f[j]))])
    return _csv(header, rows)


def tail_table_csv(report: ConcentrationReport) -> str:
    """Columns: n, tail, epsilon."""
    rows = [[int(n), repr(float(t)), repr(report.epsilon)] for n, t in zip(report.ns, report.tails)]
    return _csv(["n", "tail", "epsilon"], rows)
