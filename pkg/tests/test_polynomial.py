from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracmanifold.errors import ValidationError
from fracmanifold.polynomial import Monomial, PolynomialMap, lipschitz_on_ball


def saddle_nonlinearity() -> PolynomialMap:
    # (x1^2, x1^2 + x2^2)
    return PolynomialMap(2, 2, {(0, (2, 0)): 1.0, (1, (2, 0)): 1.0, (1, (0, 2)): 1.0})


def sampled_quotient(fmap: PolynomialMap, r: float, n: int, rng: np.random.Generator) -> float:
    x = rng.uniform(-r, r, (n, fmap.dim_in))
    y = rng.uniform(-r, r, (n, fmap.dim_in))
    num = np.max(np.abs(fmap(x) - fmap(y)), axis=1)
    den = np.max(np.abs(x - y), axis=1)
    return float(np.max(num / den))


# {{{ construction


def test_merge_and_drop_zeros():
    p = PolynomialMap.from_monomials(
        2, [Monomial(0, 2.0, (1, 1)), Monomial(0, -2.0, (1, 1)), Monomial(0, 1.0, (2, 0))], 1
    )
    assert p.terms == {(0, (2, 0)): 1.0}
    assert p.degree == 2 and p.min_degree == 2


def test_from_monomials_roundtrip():
    p = saddle_nonlinearity()
    q = PolynomialMap.from_monomials(2, p.monomials)
    assert p == q
    assert Monomial(0, 1.0, (2, 0)).degree == 2


def test_zero_map():
    z = PolynomialMap.zero(3)
    assert z.is_zero and z.min_degree is None
    assert np.all(z(np.ones((4, 3))) == 0)


@pytest.mark.parametrize(
    "args",
    [
        (0, 1, {}),
        (2, 2, {(2, (1, 0)): 1.0}),
        (2, 2, {(0, (1,)): 1.0}),
        (2, 2, {(0, (-1, 2)): 1.0}),
    ],
)
def test_invalid(args):
    with pytest.raises(ValidationError):
        PolynomialMap(*args)


def test_wrong_point_dimension():
    with pytest.raises(ValidationError):
        saddle_nonlinearity()(np.ones(3))


# }}}


# {{{ evaluation and algebra


def test_evaluation():
    p = saddle_nonlinearity()
    x = np.array([[0.5, -2.0], [1.0, 1.0]])
    assert np.allclose(p(x), [[0.25, 4.25], [1.0, 2.0]])
    assert not np.iscomplexobj(p(x))


def test_complex_coefficients():
    p = PolynomialMap(1, 1, {(0, (3,)): 1.0j})
    assert p(np.array([2.0]))[0] == 8.0j
    assert not p.is_real


def test_linear():
    M = np.array([[1.0, 2.0], [0.0, -3.0]])
    x = np.array([0.3, -0.7])
    assert np.allclose(PolynomialMap.linear(M)(x), M @ x)


def test_add_dimension_mismatch():
    with pytest.raises(ValidationError):
        saddle_nonlinearity() + PolynomialMap.zero(3)


def test_compose_and_left_multiply_exact(rng):
    p = PolynomialMap(
        3, 3,
        {(0, (2, 0, 0)): 1.5, (1, (1, 1, 0)): -2.0, (2, (0, 1, 2)): 0.5, (2, (1, 0, 0)): 1.0},
    )
    M = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    L = rng.standard_normal((3, 3))
    q = p.compose_linear(M).left_multiply(L)
    y = rng.standard_normal((20, 3)) + 1j * rng.standard_normal((20, 3))
    direct = p(y @ M.T) @ L.T
    assert np.allclose(q(y), direct, rtol=1e-12, atol=1e-12 * np.max(np.abs(direct)))


def test_compose_shape_errors():
    with pytest.raises(ValidationError):
        saddle_nonlinearity().compose_linear(np.eye(3))
    with pytest.raises(ValidationError):
        saddle_nonlinearity().left_multiply(np.eye(3))


def test_to_json():
    doc = PolynomialMap(1, 1, {(0, (2,)): 1.0 + 2.0j, (0, (3,)): -1.0}).to_json()
    assert doc == [
        {"out": 0, "coeff": [1.0, 2.0], "powers": [2]},
        {"out": 0, "coeff": -1.0, "powers": [3]},
    ]


# }}}


# {{{ Lipschitz bounds


def test_lipschitz_single_square():
    p = PolynomialMap(2, 2, {(0, (2, 0)): 1.0})
    assert lipschitz_on_ball(p, 0.1) == pytest.approx(0.2)


def test_lipschitz_zero():
    assert lipschitz_on_ball(PolynomialMap.zero(2), 0.1) == 0.0


def test_lipschitz_saddle_dominates_samples(rng):
    p = saddle_nonlinearity()
    bound = lipschitz_on_ball(p, 0.1)
    assert bound == pytest.approx(0.4)
    assert sampled_quotient(p, 0.1, 10_000, rng) <= bound


def test_lipschitz_invalid_radius():
    with pytest.raises(ValidationError):
        lipschitz_on_ball(saddle_nonlinearity(), 0.0)


@settings(max_examples=30, deadline=None)
@given(
    coeffs=st.lists(st.floats(-3, 3), min_size=4, max_size=4),
    r=st.floats(1e-3, 2.0),
    seed=st.integers(0, 2**32 - 1),
)
def test_lipschitz_bound_property(coeffs, r, seed):
    terms = {
        (0, (2, 0)): coeffs[0],
        (0, (1, 2)): coeffs[1],
        (1, (1, 1)): coeffs[2],
        (1, (0, 4)): coeffs[3],
    }
    p = PolynomialMap(2, 2, terms)
    q = sampled_quotient(p, r, 500, np.random.default_rng(seed))
    assert q <= lipschitz_on_ball(p, r) * (1 + 1e-12) + 1e-300


# }}}
