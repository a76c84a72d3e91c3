from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from auditgames.geometry import Halfspace, _cube_cdf, product_region_mass, uniform_halfspace_fraction
from auditgames.typespace import Box, ScipyMarginal, UniformMarginal


def test_triangle_areas():
    assert uniform_halfspace_fraction((1, 1), 1.0, (0, 0), (1, 1)) == 0.5
    assert uniform_halfspace_fraction((1, 1), 1.5, (0, 0), (1, 1)) == 0.125
    assert uniform_halfspace_fraction((1, 1), -10, (0, 0), (1, 1)) == 1.0
    assert uniform_halfspace_fraction((1, 1), 10, (0, 0), (1, 1)) == 0.0


def test_cube_cdf_is_exact():
    # P(U1 + U2 + U3 <= 1) = 1/6
    assert _cube_cdf([Fraction(1)] * 3, Fraction(1)) == Fraction(1, 6)


def test_negative_weights_reflect():
    # P(x - z >= 0) on the unit square is 1/2
    assert uniform_halfspace_fraction((1, -1), 0.0, (0, 0), (1, 1)) == 0.5


@settings(max_examples=30, deadline=None)
@given(w=st.lists(st.floats(-3, 3).filter(lambda v: abs(v) > 1e-3), min_size=1, max_size=4),
       t=st.floats(-3, 3))
def test_exact_volume_matches_sampling(w, t):
    rng = np.random.default_rng(0)
    pts = rng.random((200_000, len(w)))
    emp = float(np.mean(pts @ np.asarray(w) >= t))
    exact = uniform_halfspace_fraction(w, t, [0] * len(w), [1] * len(w))
    assert abs(exact - emp) <= 5 * np.sqrt(max(exact * (1 - exact), 1e-6) / 200_000) + 1e-9


def test_quadrature_path_agrees_with_exact():
    margs = (UniformMarginal(0, 1), UniformMarginal(0, 1))
    h = Halfspace((1, 1), 1.2)
    exact, _ = product_region_mass(margs, Box((0, 0), (1, 1)), [h])
    # two halfspaces force the quadrature branch; the second is vacuous
    quad, err = product_region_mass(margs, Box((0, 0), (1, 1)), [h, Halfspace((1, 0), -5)])
    assert quad == pytest.approx(exact, abs=1e-9)
    assert err < 1e-8


def test_truncnorm_symmetry():
    m = ScipyMarginal("truncnorm", (("mu", 0.5), ("sigma", 0.2)), 0.0, 1.0)
    mass, err = product_region_mass((m, m), Box((0, 0), (1, 1)), [Halfspace((1, 1), 1.0)])
    assert mass == pytest.approx(0.5, abs=1e-9)
    assert err < 1e-8


def test_strict_halfspace_on_lattice():
    from auditgames.typespace import LatticeMarginal

    margs = (LatticeMarginal((0.0, 1.0), (0.5, 0.5)),) * 2
    box = Box((0, 0), (1, 1))
    assert product_region_mass(margs, box, [Halfspace((1, 1), 1.0)])[0] == 0.75
    assert product_region_mass(margs, box, [Halfspace((1, 1), 1.0, strict=True)])[0] == 0.25
