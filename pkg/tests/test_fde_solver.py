from __future__ import annotations

import math

import numpy as np
import pytest

from fracmanifold.errors import StepOverflow, ValidationError
from fracmanifold.fde_solver import (
    Trajectory,
    Verdict,
    decay_time,
    solve_caputo,
    verify_manifold_point,
    voc_residual,
)
from fracmanifold.mittag_leffler import mittag_leffler
from fracmanifold.polynomial import PolynomialMap
from fracmanifold.spectral import FractionalSystem


def linear(A, alpha=0.8) -> FractionalSystem:
    A = np.asarray(A, dtype=float)
    return FractionalSystem(alpha, A, PolynomialMap.zero(A.shape[0]))


def exact_linear(sys: FractionalSystem, x0: np.ndarray, t: np.ndarray) -> np.ndarray:
    """``E_alpha(t^alpha A) x0`` for diagonalizable ``A``."""
    lams, V = np.linalg.eig(sys.A)
    c = np.linalg.solve(V, x0)
    E = mittag_leffler(np.multiply.outer(t**sys.alpha, lams), sys.alpha)
    return (E * c) @ V.T


# {{{ integrator


def test_linear_scalar_against_mittag_leffler():
    sys = linear([[-1.0]])
    traj = solve_caputo(sys, np.array([1.0]), 5.0, 2048)
    exact = mittag_leffler(-traj.times**0.8, 0.8).real
    assert np.max(np.abs(traj.states[:, 0] - exact)) <= 1e-4 * np.max(np.abs(exact))


def test_linear_matrix_against_matrix_function():
    sys = linear([[-1.0, 0.5], [0.0, -2.0]])
    x0 = np.array([0.3, -0.2])
    traj = solve_caputo(sys, x0, 3.0, 1024)
    ref = exact_linear(sys, x0, traj.times[::64]).real
    assert np.allclose(traj.states[::64], ref, rtol=0, atol=1e-4 * np.max(np.abs(x0)))


def test_origin_is_equilibrium(saddle):
    traj = solve_caputo(saddle, np.zeros(2), 5.0, 256)
    assert np.all(traj.states == 0)


def test_unstable_escape(saddle):
    with pytest.raises(StepOverflow) as exc:
        solve_caputo(saddle, np.array([0.01, 0.01]), 20.0, 1000, guard=1.0)
    assert exc.value.time is not None and 0 < exc.value.time < 20.0


def test_convergence_order():
    sys = linear([[-1.0]], alpha=0.6)
    T = 2.0
    ref = mittag_leffler(-(T**0.6), 0.6).real
    errs = [abs(solve_caputo(sys, np.array([1.0]), T, n).states[-1, 0] - ref) for n in (128, 256, 512)]
    # the predictor-corrector converges with order 1 + alpha here
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:])]
    assert min(orders) >= 1.5


def test_linearity():
    sys = linear([[-1.0, 1.0], [0.0, 0.5]])
    a = np.array([0.2, -0.1])
    b = np.array([-0.05, 0.3])
    xa = solve_caputo(sys, a, 2.0, 200).states
    xb = solve_caputo(sys, b, 2.0, 200).states
    xab = solve_caputo(sys, 2 * a + 3 * b, 2.0, 200).states
    assert np.allclose(xab, 2 * xa + 3 * xb, rtol=1e-12, atol=1e-14)


def test_complex_initial_value():
    sys = linear([[-1.0]])
    traj = solve_caputo(sys, np.array([1.0j]), 1.0, 64)
    assert np.iscomplexobj(traj.states)
    assert np.allclose(traj.states.real, 0)


@pytest.mark.parametrize("kwargs", [{"N": 1}, {"T": 0.0}, {"x0": np.zeros(3)}])
def test_invalid_arguments(saddle, kwargs):
    args = {"x0": np.zeros(2), "T": 1.0, "N": 10, **kwargs}
    with pytest.raises(ValidationError):
        solve_caputo(saddle, args["x0"], args["T"], args["N"])


def test_trajectory_validation(saddle):
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.1, 0.2]), np.zeros((2, 2)), saddle)
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0, 0.0]), np.zeros((2, 2)), saddle)
    with pytest.raises(ValidationError):
        Trajectory(np.array([0.0, 1.0]), np.zeros((3, 2)), saddle)


def test_resample(saddle):
    traj = solve_caputo(saddle, np.array([0.01, 0.0]), 1.0, 100)
    r = traj.resample(np.linspace(0, 1, 11))
    assert np.allclose(r.states, traj.states[::10])
    with pytest.raises(ValidationError):
        traj.resample(np.array([0.0, 2.0]))


# }}}


# {{{ residual


def test_residual_of_exact_linear_trajectory():
    sys = linear([[-1.0, 0.5], [0.0, 1.5]], alpha=0.7)
    x0 = np.array([0.2, 0.1])
    t = np.linspace(0, 1.0, 65)
    traj = Trajectory(t, exact_linear(sys, x0, t), sys)
    assert voc_residual(traj) <= 1e-8


def test_residual_of_solver_output(saddle):
    x0 = np.array([0.05, 0.0])
    res = [voc_residual(solve_caputo(saddle, x0, 1.0, n)) for n in (256, 1024)]
    assert res[1] <= 1e-3 * np.max(np.abs(x0))
    assert res[1] < res[0]


def test_residual_window(saddle):
    traj = solve_caputo(saddle, np.array([0.05, 0.0]), 2.0, 256)
    assert voc_residual(traj, t_max=0.0) == 0.0
    assert voc_residual(traj, t_max=1.0) <= voc_residual(traj)


def test_residual_detects_wrong_trajectory(saddle):
    t = np.linspace(0, 1, 33)
    states = np.column_stack([0.05 * np.exp(-t), np.zeros_like(t)])
    assert voc_residual(Trajectory(t, states, saddle)) > 1e-3


# }}}


# {{{ verification


def test_decay_time():
    assert decay_time(0.8, np.array([-2.0, 2.0])) == pytest.approx(3.612, rel=1e-3)
    assert decay_time(0.5, np.array([-2.0, 2.0])) == pytest.approx(31.58, rel=1e-3)
    t = decay_time(0.8, np.array([-2.0, -1.0]), level=0.1)
    assert abs(mittag_leffler(-(t**0.8), 0.8).real) == pytest.approx(0.1, rel=1e-6)
    assert decay_time(0.8, np.array([2.0])) == 0.0
    with pytest.raises(ValidationError):
        decay_time(0.8, np.array([-1.0]), level=1.5)


def test_verify_manifold_point(saddle, saddle_prepared, saddle_graph):
    cfg, _ = saddle_prepared
    T = decay_time(saddle.alpha, np.array([-2.0, 2.0]))
    k = int(np.argmax(saddle_graph.x_s[:, 0].real))
    x = (cfg.system.to_original(saddle_graph.points[k])).real
    v = verify_manifold_point(saddle, x, T, N=1024)
    assert v.verdict == Verdict.DECAYS
    assert v.ratio <= 0.1

    # the stable subspace is not invariant: the same point without the
    # manifold correction leaves the ball
    assert abs(x[1]) > 0
    off = verify_manifold_point(saddle, np.array([x[0], 0.0]), T, N=1024)
    assert off.verdict == Verdict.ESCAPES


def test_verify_unstable_direction(saddle):
    T = decay_time(saddle.alpha, np.array([-2.0, 2.0]))
    v = verify_manifold_point(saddle, np.array([0.0, 0.01]), T, N=512)
    assert v.verdict == Verdict.ESCAPES
    assert v.ratio == math.inf and v.escape_time < T


def test_verify_origin_and_inconclusive(saddle):
    assert verify_manifold_point(saddle, np.zeros(2), 1.0).verdict == Verdict.DECAYS
    v = verify_manifold_point(saddle, np.array([0.01, -2.5e-5]), 0.1, N=64)
    assert v.verdict == Verdict.INCONCLUSIVE
    with pytest.raises(ValidationError):
        verify_manifold_point(saddle, np.array([0.01, 0.0]), 1.0, shrink=1.0)


# }}}
