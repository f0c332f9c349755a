from __future__ import annotations

import cmath
import math

import numpy as np
import pytest

from fracmanifold.errors import IllConditioned, NotHyperbolic, ShapeError, ValidationError
from fracmanifold.fde_solver import solve_caputo
from fracmanifold.polynomial import PolynomialMap, lipschitz_on_ball
from fracmanifold.spectral import (
    DeclaredBlock,
    FractionalSystem,
    check_hyperbolicity,
    critical_distance,
    jordanize,
    pullback_manifold,
    transform_system,
)


def random_system(rng: np.random.Generator, alpha: float = 0.8) -> FractionalSystem:
    """Diagonalizable 3x3 system with eigenvalues {1.5, -1, -2} and quadratic f."""
    while True:
        S = rng.standard_normal((3, 3))
        if np.linalg.cond(S) < 20:
            break
    A = S @ np.diag([1.5, -1.0, -2.0]) @ np.linalg.inv(S)
    f = PolynomialMap(
        3, 3,
        {
            (0, (2, 0, 0)): rng.uniform(-1, 1),
            (1, (1, 1, 0)): rng.uniform(-1, 1),
            (2, (0, 1, 1)): rng.uniform(-1, 1),
            (2, (0, 0, 2)): rng.uniform(-1, 1),
        },
    )
    return FractionalSystem(alpha, A, f)


# {{{ systems


def test_system_validation():
    f = PolynomialMap.zero(2)
    with pytest.raises(ValidationError):
        FractionalSystem(1.0, np.eye(2), f)
    with pytest.raises(ShapeError):
        FractionalSystem(0.5, np.ones((2, 3)), f)
    with pytest.raises(ShapeError):
        FractionalSystem(0.5, np.eye(3), f)
    with pytest.raises(ValidationError):
        FractionalSystem(0.5, np.eye(2), PolynomialMap.linear(np.eye(2)))
    with pytest.raises(ValidationError):
        FractionalSystem(0.5, np.eye(2), f, (DeclaredBlock(1.0, (3,)),))
    with pytest.raises(ValidationError):
        DeclaredBlock(1.0, ())


def test_rhs():
    f = PolynomialMap(2, 2, {(0, (2, 0)): 1.0})
    sys = FractionalSystem(0.5, np.array([[-2.0, 0.0], [0.0, 2.0]]), f)
    assert sys.is_real
    assert np.allclose(sys.rhs(np.array([1.0, 1.0])), [-1.0, 2.0])


# }}}


# {{{ hyperbolicity


def test_saddle_classification():
    rep = check_hyperbolicity(np.diag([-2.0, 2.0]), 0.5)
    assert rep.k == 1
    assert list(rep.unstable) == [False, True]
    assert rep.margin == pytest.approx(math.pi / 4)


def test_zero_matrix_not_hyperbolic():
    with pytest.raises(NotHyperbolic):
        check_hyperbolicity(np.zeros((2, 2)), 0.5)


def test_boundary_eigenvalue_not_hyperbolic():
    alpha = 0.6
    lam = cmath.exp(0.5j * alpha * math.pi)
    with pytest.raises(NotHyperbolic) as exc:
        check_hyperbolicity(np.diag([lam, -1.0]), alpha)
    assert exc.value.eigenvalue == pytest.approx(lam)


def test_tolerance_controls_boundary():
    alpha = 0.6
    lam = cmath.exp(1j * (0.5 * alpha * math.pi + 1e-3))
    assert check_hyperbolicity(np.diag([lam]), alpha).k == 0
    with pytest.raises(NotHyperbolic):
        check_hyperbolicity(np.diag([lam]), alpha, tol_hyp=1e-2)
    assert critical_distance(lam, alpha) == pytest.approx(1e-3)


def test_complex_pair_sectors():
    # arg = 0.3 pi is unstable for alpha = 0.8 (sector 0.4 pi) and stable for alpha = 0.5
    lam = cmath.exp(0.3j * math.pi)
    A = np.diag([lam, lam.conjugate()])
    assert check_hyperbolicity(A, 0.8).k == 2
    assert check_hyperbolicity(A, 0.5).k == 0


# }}}


# {{{ Jordan coordinates


def test_diagonalizable_identity_rescaling():
    split = jordanize(np.diag([-1.0, 3.0, -2.0]), 0.5, 0.3)
    assert np.allclose(split.P, np.eye(3))
    assert all(b.delta == 0 for b in split.blocks)
    assert split.eigenvalues[0] == 3.0
    assert split.d_u == 1 and split.d_s == 2


def test_saddle_permutation():
    split = jordanize(np.diag([-2.0, 2.0]), 0.5)
    assert split.k == 1
    assert np.allclose(split.TP, [[0, 1], [1, 0]])
    assert np.allclose(split.TP_inv @ np.diag([-2.0, 2.0]) @ split.TP, np.diag([2.0, -2.0]))


def test_declared_jordan_block():
    lam = -1.5
    A = np.array([[lam, 1.0], [0.0, lam]])
    split = jordanize(A, 0.7, 0.1, jordan_blocks=[DeclaredBlock(lam, (2,))])
    assert np.allclose(split.T, np.eye(2))
    assert np.allclose(split.P, np.diag([1.0, 0.1]))
    assert np.allclose(split.block_matrix, [[lam, 0.1], [0.0, lam]])
    assert split.blocks[0].delta == 0.1


def test_defective_without_declaration():
    with pytest.raises(IllConditioned):
        jordanize(np.array([[-1.0, 1.0], [0.0, -1.0]]), 0.5)


def test_declared_eigenvalue_mismatch():
    with pytest.raises(IllConditioned):
        jordanize(
            np.array([[-1.0, 1.0], [0.0, -1.0]]), 0.5,
            jordan_blocks=[DeclaredBlock(-3.0, (2,))],
        )


def test_invalid_delta():
    with pytest.raises(ValidationError):
        jordanize(np.eye(2), 0.5, 0.0)


@pytest.mark.parametrize("seed", range(5))
def test_reconstruction_and_ordering(seed):
    rng = np.random.default_rng(seed)
    alpha = 0.7
    # one Jordan block of size 3 and a complex pair, hidden by a similarity
    lam = 2.0 * cmath.exp(0.2j * math.pi)
    J = np.zeros((5, 5), dtype=complex)
    J[:3, :3] = -1.0 * np.eye(3) + np.diag([1.0, 1.0], 1)
    J[3, 3], J[4, 4] = lam, lam.conjugate()
    S = rng.standard_normal((5, 5))
    A = S @ J @ np.linalg.inv(S)
    split = jordanize(
        A, alpha, 0.25,
        jordan_blocks=[
            DeclaredBlock(-1.0, (3,)), DeclaredBlock(lam, (1,)), DeclaredBlock(lam.conjugate(), (1,))
        ],
    )
    TP = split.TP
    err = np.linalg.norm(np.linalg.solve(TP, A @ TP) - split.block_matrix, 2)
    assert err <= 1e-8 * np.linalg.norm(A, 2)

    args = np.abs(np.angle(split.eigenvalues))
    assert np.all(args[: split.d_u] < 0.5 * alpha * math.pi)
    assert np.all(args[split.d_u:] > 0.5 * alpha * math.pi)
    assert split.d_u == 2


# }}}


# {{{ transformed system


def test_zero_nonlinearity_gives_zero_h():
    sys = FractionalSystem(0.5, np.diag([-1.0, 2.0]), PolynomialMap.zero(2))
    tsys = transform_system(sys, jordanize(sys.A, sys.alpha))
    assert tsys.h.is_zero


def test_saddle_h_is_permuted_f():
    f = PolynomialMap(2, 2, {(0, (2, 0)): 1.0, (1, (2, 0)): 1.0, (1, (0, 2)): 1.0})
    sys = FractionalSystem(0.5, np.diag([-2.0, 2.0]), f)
    tsys = transform_system(sys, jordanize(sys.A, sys.alpha))
    # y = (x2, x1): h(y) = (y1^2 + y2^2, y2^2)
    expected = PolynomialMap(2, 2, {(0, (2, 0)): 1.0, (0, (0, 2)): 1.0, (1, (0, 2)): 1.0})
    assert tsys.h == expected
    assert np.allclose(tsys.base.A, np.diag([2.0, -2.0]))


def test_splitting_dimension_mismatch():
    sys = FractionalSystem(0.5, np.diag([-1.0, 2.0]), PolynomialMap.zero(2))
    with pytest.raises(ShapeError):
        transform_system(sys, jordanize(np.diag([-1.0, 2.0, -3.0]), 0.5))


def test_conjugation_exactness(rng):
    sys = random_system(rng)
    lam = -0.5
    A = np.zeros((3, 3))
    A[:2, :2] = [[lam, 1.0], [0.0, lam]]
    A[2, 2] = 1.0
    S = rng.standard_normal((3, 3))
    sys = FractionalSystem(0.8, S @ A @ np.linalg.inv(S), sys.f, (DeclaredBlock(lam, (2,)), DeclaredBlock(1.0, (1,))))
    split = jordanize(sys.A, sys.alpha, 0.2, jordan_blocks=sys.jordan_blocks)
    tsys = transform_system(sys, split)

    TP = split.TP
    y = rng.standard_normal((50, 3)) + 1j * rng.standard_normal((50, 3))
    direct = y @ split.nilpotent.T + np.linalg.solve(TP, sys.f(y @ TP.T).T).T
    assert np.allclose(tsys.h(y), direct, rtol=1e-12, atol=1e-12 * np.max(np.abs(direct)))

    # Lipschitz split into nilpotent and nonlinear parts
    radii = [10.0**-k for k in range(1, 7)]
    lf = [lipschitz_on_ball(tsys.f_conjugated, r) for r in radii]
    for r, l in zip(radii, lf):
        assert lipschitz_on_ball(tsys.h, r) <= 0.2 + l + 1e-15
    assert all(b < a for a, b in zip(lf, lf[1:]))
    assert lf[-1] < 1e-4


def test_with_delta_rebuilds_h():
    lam = -0.5
    A = np.array([[lam, 1.0], [0.0, lam]])
    sys = FractionalSystem(0.6, A, PolynomialMap(2, 2, {(0, (0, 2)): 1.0}), (DeclaredBlock(lam, (2,)),))
    tsys = transform_system(sys, jordanize(A, 0.6, 1.0, jordan_blocks=sys.jordan_blocks))
    small = tsys.with_delta(0.01)
    assert small.splitting.delta == 0.01
    assert lipschitz_on_ball(small.h, 1e-6) < lipschitz_on_ball(tsys.h, 1e-6)
    assert small.as_system().jordan_blocks is not None


def test_flow_conjugacy(rng):
    sys = random_system(rng)
    split = jordanize(sys.A, sys.alpha)
    tsys = transform_system(sys, split)
    x0 = 0.05 * rng.standard_normal(3)

    T, N = 2.0, 1024
    x = solve_caputo(sys, x0, T, N).states
    y = solve_caputo(tsys.as_system(), tsys.from_original(x0), T, N).states
    back = tsys.to_original(y)
    assert np.max(np.abs(back - x)) <= 1e-4 * np.max(np.abs(x))


# }}}


# {{{ pullback


def test_pullback_identity_and_origin():
    split = jordanize(np.diag([2.0, -1.0]), 0.5)
    pts = np.array([[0.0, 0.0], [0.1, -0.2]])
    assert np.allclose(pullback_manifold(pts, split), pts)

    split = jordanize(np.array([[1.0, 2.0], [0.0, -1.0]]), 0.5)
    assert np.all(pullback_manifold(np.zeros((1, 2)), split) == 0)


# }}}
