"""Golden-section maximization on an interval."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

INV_PHI = (math.sqrt(5) - 1) / 2
INV_PHI2 = (3 - math.sqrt(5)) / 2


@dataclass(frozen=True)
class SearchResult:
    x: float
    value: float
    iterations: int
    last_improvement: float


def golden_section_max(f: Callable[[float], float], a: float, b: float,
                       xtol: float = 1e-10, ftol: float = 1e-10,
                       max_iter: int = 500) -> SearchResult:
    """Maximize a unimodal f on [a, b].

    Stops when the bracket is narrower than xtol * (1 + |x|), or when the best
    value has improved by less than ftol over the last 8 shrink steps.
    """
    a, b = min(a, b), max(a, b)
    h = b - a
    c = a + INV_PHI2 * h
    d = a + INV_PHI * h
    fc, fd = f(c), f(d)
    best = max(fc, fd)
    history = [best]
    it = 0
    while it < max_iter:
        it += 1
        if fc >= fd:
            b, d, fd = d, c, fc
            h = INV_PHI * h
            c = a + INV_PHI2 * h
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            h = INV_PHI * h
            d = a + INV_PHI * h
            fd = f(d)
        best = max(best, fc, fd)
        history.append(best)
        x_mid = 0.5 * (a + b)
        if h < xtol * (1 + abs(x_mid)):
            break
        if len(history) > 8 and history[-1] - history[-9] < ftol and h < 1e-6 * (1 + abs(x_mid)):
            break
    x = c if fc >= fd else d
    fx = max(fc, fd)
    improvement = history[-1] - history[-2] if len(history) > 1 else 0.0
    return SearchResult(x, fx, it, improvement)
