from __future__ import annotations

import cmath
import math

import mpmath as mp
import numpy as np
import pytest

from fracmanifold.errors import ValidationError
from fracmanifold.mittag_leffler import SERIES_MAX_X, mittag_leffler
from fracmanifold.quadrature import (
    GridSpec,
    abs_kernel_profile,
    convolution_row,
    convolution_weights,
    exponential_tail_row,
    exponential_tail_weights,
    is_uniform,
    kernel_primitives,
    make_grid,
)


def graded(alpha: float, t_end: float, n: int) -> np.ndarray:
    return t_end * (np.arange(n + 1) / n) ** (1 / alpha)


# {{{ grids


def test_grid_shape():
    spec = GridSpec(0.6, 64, 1.0, 50.0)
    t = make_grid(spec)
    assert t[0] == 0 and t[-1] == 50.0
    assert np.all(np.diff(t) > 0)
    assert np.allclose(t[: 65], graded(0.6, 1.0, 64))
    # relative step bounded after the graded part
    assert np.all(np.diff(t)[65:] <= spec.stretch / spec.n * t[65:-1] * (1 + 1e-12))


def test_grid_without_stretch():
    t = make_grid(GridSpec(0.5, 10, 2.0, 2.0))
    assert t.size == 11 and t[-1] == 2.0


def test_grid_validation():
    with pytest.raises(ValidationError):
        GridSpec(0.5, 1, 1.0, 2.0)
    with pytest.raises(ValidationError):
        GridSpec(0.5, 10, 3.0, 2.0)


def test_is_uniform():
    assert is_uniform(np.linspace(0, 1, 11))
    assert not is_uniform(graded(0.5, 1.0, 10))


# }}}


# {{{ convolution weights


@pytest.mark.parametrize("lam", [-1.0, 2.0, cmath.exp(2.0j)])
@pytest.mark.parametrize("uniform", [True, False])
def test_weights_exact_for_linear_data(lam, uniform):
    alpha = 0.6
    t = np.linspace(0, 3, 41) if uniform else graded(alpha, 3.0, 40)
    W = convolution_weights(alpha, lam, t)
    F, Psi = kernel_primitives(alpha, lam, t)
    # int_0^t K(t - s) ds = F(t) and int_0^t K(t - s) s ds = Psi(t)
    assert np.allclose(W @ np.ones_like(t), F, rtol=1e-12, atol=1e-14)
    assert np.allclose(W @ t, Psi, rtol=1e-11, atol=1e-14)
    assert np.all(np.triu(W, 1) == 0)


def test_weights_against_adaptive_quadrature():
    alpha, lam, t_end = 0.6, -1.0, 2.0

    with mp.workdps(20):
        def kernel(s):
            return s ** (alpha - 1) * complex(mittag_leffler(lam * float(s) ** alpha, alpha, alpha)).real

        ref = float(mp.quad(lambda s: kernel(s) / (1 + (t_end - s) ** 2), [0, 0.5, t_end]))

    errors = []
    for n in (32, 64, 128):
        t = graded(alpha, t_end, n)
        w = convolution_row(alpha, lam, t)
        errors.append(abs((w @ (1 / (1 + t**2))).real - ref))
    assert errors[-1] < 1e-4 * abs(ref)
    # second order in the step
    assert errors[0] / errors[1] > 3 and errors[1] / errors[2] > 3


def test_row_matches_matrix():
    alpha, lam = 0.7, 1.5 + 0.5j
    t = make_grid(GridSpec(alpha, 40, 1.0, 6.0))
    W = convolution_weights(alpha, lam, t)
    for m in (5, 20, t.size):
        assert np.allclose(convolution_row(alpha, lam, t[:m]), W[m - 1, :m], rtol=1e-13, atol=0)


def test_remainder_removes_exponential():
    alpha, lam = 0.5, 2.0
    kappa = lam ** (1 / alpha)
    t = graded(alpha, 3.0, 30)
    full = convolution_weights(alpha, lam, t) @ np.ones_like(t)
    rem = convolution_weights(alpha, lam, t, remainder=True) @ np.ones_like(t)
    assert np.allclose(full - rem, np.expm1(kappa * t) / (alpha * lam), rtol=1e-10)
    # the remainder stays small while the full integral grows like exp(kappa t)
    assert np.max(np.abs(rem)) < 2.0


def test_remainder_primitives_continuous():
    alpha, lam = 0.6, 1.0 + 0.3j
    kappa = lam ** (1 / alpha)
    s0 = SERIES_MAX_X / abs(kappa)
    s = np.array([s0 * (1 - 1e-9), s0 * (1 + 1e-9)])
    F, Psi = kernel_primitives(alpha, lam, s, remainder=True)
    assert abs(F[0] - F[1]) < 1e-6 * max(1.0, abs(F[0]))
    assert abs(Psi[0] - Psi[1]) < 1e-6 * max(1.0, abs(Psi[0]))


def test_invalid_grid():
    with pytest.raises(ValidationError):
        convolution_weights(0.5, -1.0, np.array([0.1, 0.2, 0.3]))
    with pytest.raises(ValidationError):
        convolution_row(0.5, -1.0, np.array([0.0, 0.2, 0.2]))


# }}}


# {{{ exponential tail


@pytest.mark.parametrize("kappa", [4.0, 1.0 + 2.0j])
def test_tail_weights_linear_data(kappa):
    t = make_grid(GridSpec(0.5, 30, 1.0, 8.0))
    U = exponential_tail_weights(kappa, t)
    T = t[-1]
    assert np.allclose(U @ np.ones_like(t), 1 / kappa, rtol=1e-12)
    # g(s) = s up to T and constant afterwards
    exact = t / kappa + (1 - np.exp(-kappa * (T - t))) / kappa**2
    assert np.allclose(U @ t, exact, rtol=1e-11)
    assert np.all(np.tril(U, -1) == 0)


def test_tail_row_matches_matrix():
    t = make_grid(GridSpec(0.7, 30, 1.0, 5.0))
    for kappa in (3.0, 0.5 - 0.4j):
        U = exponential_tail_weights(kappa, t)
        assert np.allclose(exponential_tail_row(kappa, t), U[0], rtol=1e-13, atol=1e-16)


def test_tail_requires_decay():
    t = np.linspace(0, 1, 5)
    with pytest.raises(ValidationError):
        exponential_tail_weights(-1.0, t)
    with pytest.raises(ValidationError):
        exponential_tail_row(1.0j, t)


# }}}


def test_abs_kernel_profile_total_mass():
    # for real negative lambda the kernel is positive and integrates to -1/lambda
    for alpha, lam in [(0.5, -2.0), (0.8, -1.0)]:
        s, cum, tail = abs_kernel_profile(alpha, lam)
        assert np.all(np.diff(cum) >= 0)
        assert cum[-1] <= 1 / abs(lam) * (1 + 1e-3)
        assert cum[-1] + tail >= 1 / abs(lam) * (1 - 1e-3)
    assert math.isfinite(abs_kernel_profile(0.5, 2.0, remainder=True)[1][-1])
