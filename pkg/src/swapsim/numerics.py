"""Adaptive quadrature and bracketed root scanning shared by the game solvers.

Integrands are smooth log-normal mixtures, so the workhorse is a fixed-order
Gauss-Legendre rule applied per panel, with adaptive bisection only at the
outermost level.  Integrands must accept numpy arrays (evaluated on the node
vector of each panel).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .pricemodel import GbmParams, PriceState, transition_quantile

__all__ = [
    "QuadratureSpec",
    "Bracket",
    "QuadratureDepthError",
    "integrate",
    "fixed_gauss",
    "truncate_upper",
    "find_roots",
]

# Nodes/weights on [-1, 1]; order 32 keeps the inner (non-adaptive) level cheap.
_GL_ORDER = 32
_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(_GL_ORDER)


class QuadratureDepthError(RuntimeError):
    """Raised when adaptive refinement exhausts max_depth before converging."""


@dataclass(frozen=True)
class QuadratureSpec:
    abs_tol: float = 1e-9
    rel_tol: float = 1e-7
    max_depth: int = 24
    tail_quantile: float = 1e-9

    def __post_init__(self) -> None:
        if self.abs_tol <= 0 or self.rel_tol <= 0:
            raise ValueError("tolerances must be > 0")
        if not 0.0 < self.tail_quantile < 1.0:
            raise ValueError("tail_quantile must be in (0, 1)")
        if self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")


@dataclass(frozen=True)
class Bracket:
    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not self.lo < self.hi:
            raise ValueError(f"bracket requires lo < hi, got [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi - self.lo


def fixed_gauss(f: Callable[[np.ndarray], np.ndarray], lo: float, hi: float) -> float:
    """Single-panel Gauss-Legendre estimate; no adaptivity, no error control."""
    half = 0.5 * (hi - lo)
    mid = 0.5 * (hi + lo)
    vals = np.asarray(f(mid + half * _GL_NODES), dtype=float)
    return float(half * np.dot(_GL_WEIGHTS, vals))


def integrate(f: Callable[[np.ndarray], np.ndarray], bracket: Bracket, spec: QuadratureSpec = QuadratureSpec()) -> float:
    """Adaptive panel-bisection quadrature over the bracket.

    A panel is accepted when its whole-panel estimate agrees with the sum of
    its two halves within the (locally scaled) tolerance; otherwise both
    halves are refined.  Deterministic for a given integrand and spec.
    """
    total_scale = max(abs(fixed_gauss(f, bracket.lo, bracket.hi)), 1.0e-300)

    def recurse(lo: float, hi: float, whole: float, depth: int) -> float:
        mid = 0.5 * (lo + hi)
        left = fixed_gauss(f, lo, mid)
        right = fixed_gauss(f, mid, hi)
        err = abs(whole - (left + right))
        tol = max(spec.abs_tol, spec.rel_tol * total_scale) * (hi - lo) / bracket.width
        if err <= tol:
            return left + right
        if depth >= spec.max_depth:
            raise QuadratureDepthError(
                f"quadrature failed to converge on [{lo}, {hi}] at depth {depth} (err={err:.3e})"
            )
        return recurse(lo, mid, left, depth + 1) + recurse(mid, hi, right, depth + 1)

    return recurse(bracket.lo, bracket.hi, fixed_gauss(f, bracket.lo, bracket.hi), 0)


def truncate_upper(
    state: PriceState, params: GbmParams, lam: float, spec: QuadratureSpec = QuadratureSpec()
) -> float:
    """Finite stand-in for an infinite upper integration limit.

    Returns the (1 - tail_quantile) quantile of the transition law; mass
    beyond it is at most tail_quantile.
    """
    return transition_quantile(1.0 - spec.tail_quantile, state, params, lam)


def find_roots(
    g: Callable[[float], float],
    scan: Bracket,
    grid_points: int = 256,
    tol: float = 1e-10,
) -> list[float]:
    """Scan a uniform grid for sign changes and bisect each to tolerance.

    Grid points that are exact roots are returned directly.  Returns an
    ascending list; empty when no sign change is found.
    """
    if grid_points < 2:
        raise ValueError("grid_points must be >= 2")
    xs = np.linspace(scan.lo, scan.hi, grid_points)
    vals = [g(float(x)) for x in xs]
    roots: list[float] = []
    for i in range(grid_points - 1):
        a, b = float(xs[i]), float(xs[i + 1])
        fa, fb = vals[i], vals[i + 1]
        if fa == 0.0:
            roots.append(a)
            continue
        if i == grid_points - 2 and fb == 0.0:
            roots.append(b)
            continue
        if fa * fb < 0.0:
            roots.append(_bisect(g, a, b, fa, fb, tol))
    return roots


def _bisect(g, a: float, b: float, fa: float, fb: float, tol: float) -> float:
    while True:
        m = 0.5 * (a + b)
        fm = g(m)
        if abs(fm) <= tol or (b - a) <= tol:
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
