import math

import numpy as np
import pytest

from swapsim.numerics import (
    Bracket,
    QuadratureDepthError,
    QuadratureSpec,
    fixed_gauss,
    find_roots,
    integrate,
    truncate_upper,
)
from swapsim.pricemodel import GbmParams, PriceState, transition_cdf


def test_fixed_gauss_exact_on_polynomials():
    # 32-point Gauss-Legendre is exact up to degree 63.
    got = fixed_gauss(lambda x: 3 * x**2 + x, 0.0, 2.0)
    assert got == pytest.approx(8.0 + 2.0, abs=1e-12)


def test_integrate_known_values():
    spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-12)
    assert integrate(np.sin, Bracket(0.0, math.pi), spec) == pytest.approx(2.0, abs=1e-10)
    assert integrate(np.exp, Bracket(0.0, 1.0), spec) == pytest.approx(math.e - 1.0, abs=1e-10)


def test_integrate_handles_sharp_peak():
    spec = QuadratureSpec(abs_tol=1e-12, rel_tol=1e-10)
    got = integrate(lambda x: np.exp(-((x - 0.7) ** 2) * 1e4), Bracket(0.0, 1.0), spec)
    assert got == pytest.approx(math.sqrt(math.pi) / 100.0, rel=1e-8)


def test_integrate_depth_exhaustion_raises():
    spec = QuadratureSpec(abs_tol=1e-300, rel_tol=1e-16, max_depth=3)
    with pytest.raises(QuadratureDepthError):
        integrate(lambda x: np.abs(x - 1.0 / 3.0) ** -0.4, Bracket(1e-9, 1.0), spec)


def test_bracket_validation():
    with pytest.raises(ValueError):
        Bracket(2.0, 1.0)
    with pytest.raises(ValueError):
        Bracket(1.0, 1.0)


def test_truncate_upper_bounds_tail_mass():
    gbm = GbmParams(mu=0.002, sigma=0.1)
    state = PriceState(2.0)
    spec = QuadratureSpec(tail_quantile=1e-9)
    hi = truncate_upper(state, gbm, 24.0, spec)
    assert 1.0 - transition_cdf(hi, state, gbm, 24.0) <= 1e-9 + 1e-12


def test_find_roots_simple_and_double():
    roots = find_roots(lambda x: (x - 1.0) * (x - 2.5), Bracket(0.0, 4.0))
    assert len(roots) == 2
    assert roots[0] == pytest.approx(1.0, abs=1e-8)
    assert roots[1] == pytest.approx(2.5, abs=1e-8)
    assert find_roots(lambda x: x * x + 1.0, Bracket(-3.0, 3.0)) == []


def test_find_roots_returns_sorted():
    roots = find_roots(math.sin, Bracket(0.5, 10.0))
    assert roots == sorted(roots)
    assert len(roots) == 3  # pi, 2*pi, 3*pi
    for r, expect in zip(roots, (math.pi, 2 * math.pi, 3 * math.pi)):
        assert r == pytest.approx(expect, abs=1e-8)
