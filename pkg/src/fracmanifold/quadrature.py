r"""Product-integration weights for Mittag-Leffler convolutions.

All rules integrate a piecewise-linear interpolant of the data exactly
against the kernel

.. math::

    K_\lambda(s) = s^{\alpha-1} E_{\alpha,\alpha}(\lambda s^\alpha),

using the closed-form primitives

.. math::

    F(s) = \int_0^s K_\lambda = s^\alpha E_{\alpha,\alpha+1}(\lambda s^\alpha),
    \qquad
    \Psi(s) = \int_0^s F = s^{\alpha+1} E_{\alpha,\alpha+2}(\lambda s^\alpha).

For an unstable eigenvalue the kernel grows like :math:`e^{\kappa s}` with
:math:`\kappa = \lambda^{1/\alpha}`. The operator then uses the split

.. math::

    K_\lambda(s) = \tfrac{1}{\alpha}\lambda^{1/\alpha-1} e^{\kappa s} + R_2(s),
    \qquad
    E_\alpha(\lambda t^\alpha) = \tfrac{1}{\alpha} e^{\kappa t} + R_1(t),

where :math:`R_1, R_2` stay bounded, and integrates the exponential parts
analytically (see :func:`exponential_tail_weights`).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import rgamma

from fracmanifold.errors import ValidationError
from fracmanifold.mittag_leffler import SERIES_MAX_X, mittag_leffler, ml_algebraic_part

logger = logging.getLogger(__name__)


# {{{ grids


@dataclass(frozen=True)
class GridSpec:
    """Parameters of a graded-then-stretched time grid.

    The first ``n`` intervals cover ``[0, t_graded]`` with nodes
    ``t_graded * (j / n)**(1 / alpha)``. After that the step grows by at most
    ``growth`` per node up to a relative step of ``stretch / n``, until
    ``t_horizon`` is reached.
    """

    alpha: float
    n: int
    t_graded: float
    t_horizon: float
    stretch: float = 12.0
    growth: float = 1.2

    def __post_init__(self) -> None:
        if self.n < 2:
            raise ValidationError(f"'n' must be at least 2: got {self.n}")
        if not 0 < self.t_graded <= self.t_horizon:
            raise ValidationError(
                f"need 0 < t_graded <= t_horizon: got {self.t_graded}, {self.t_horizon}"
            )


def make_grid(spec: GridSpec) -> np.ndarray:
    j = np.arange(spec.n + 1) / spec.n
    t = list(spec.t_graded * j ** (1.0 / spec.alpha))

    ratio = spec.stretch / spec.n
    step = t[-1] - t[-2]
    while t[-1] < spec.t_horizon:
        step = min(step * spec.growth, ratio * t[-1])
        t.append(t[-1] + step)

    if len(t) > spec.n + 1:
        # end exactly at the horizon, merging a short last interval
        t[-1] = spec.t_horizon
        if len(t) > spec.n + 2 and t[-1] - t[-2] < 0.5 * step:
            del t[-2]

    return np.array(t)


def is_uniform(t: np.ndarray, rtol: float = 1.0e-12) -> bool:
    h = np.diff(t)
    return bool(h.size > 0 and np.all(np.abs(h - h[0]) <= rtol * h[0]))


# }}}


# {{{ primitives


def _expm1_minus_x(x: np.ndarray) -> np.ndarray:
    """``exp(x) - 1 - x`` without cancellation for small ``|x|``."""
    x = np.asarray(x, dtype=np.complex128)
    out = np.empty_like(x)
    small = np.abs(x) < 0.5
    xs = x[small]
    term = xs * xs / 2
    acc = term.copy()
    for k in range(3, 30):
        term = term * xs / k
        acc += term
    out[small] = acc
    out[~small] = np.expm1(x[~small]) - x[~small]
    return out


def kernel_primitives(
    alpha: float, lam: complex, s: np.ndarray, *, remainder: bool = False
) -> tuple[np.ndarray, np.ndarray]:
    r"""Evaluate the primitives :math:`F(s), \Psi(s)` of the kernel.

    With ``remainder=True`` the primitives of :math:`R_2` are returned
    instead, i.e. with the exponential part of the kernel removed. They stay
    bounded by a linear function of ``s`` for unstable ``lambda``.
    """
    s = np.asarray(s, dtype=np.float64)
    lam = complex(lam)
    sa = s**alpha
    z = lam * sa

    if not remainder:
        F = sa * mittag_leffler(z, alpha, alpha + 1.0)
        Psi = s * sa * mittag_leffler(z, alpha, alpha + 2.0)
        return F, Psi

    kappa = lam ** (1.0 / alpha)
    c = 1.0 / (alpha * lam)
    F = np.empty(s.shape, dtype=np.complex128)
    Psi = np.empty(s.shape, dtype=np.complex128)

    # near the origin: subtract the exponential part directly
    near = abs(kappa) * s <= SERIES_MAX_X
    sn, zn = s[near], z[near]
    ks = kappa * sn
    F[near] = sa[near] * mittag_leffler(zn, alpha, alpha + 1.0) - c * np.expm1(ks)
    Psi[near] = sn * sa[near] * mittag_leffler(zn, alpha, alpha + 2.0) - c / kappa * _expm1_minus_x(ks)

    # far: algebraic parts plus the constants of integration
    far = ~near
    sf, zf = s[far], z[far]
    F[far] = sa[far] * ml_algebraic_part(zf, alpha, alpha + 1.0) + c
    Psi[far] = sf * sa[far] * ml_algebraic_part(zf, alpha, alpha + 2.0) + c / kappa + c * sf

    return F, Psi


def remainder_r1(alpha: float, lam: complex, t: np.ndarray) -> np.ndarray:
    r""":math:`R_1(t) = E_\alpha(\lambda t^\alpha) - e^{\kappa t}/\alpha`."""
    t = np.asarray(t, dtype=np.float64)
    return ml_algebraic_part(complex(lam) * t**alpha, alpha, 1.0)


def remainder_r2(alpha: float, lam: complex, s: np.ndarray) -> np.ndarray:
    r""":math:`R_2(s) = K_\lambda(s) - \lambda^{1/\alpha-1} e^{\kappa s}/\alpha` for ``s > 0``."""
    s = np.asarray(s, dtype=np.float64)
    return s ** (alpha - 1.0) * ml_algebraic_part(complex(lam) * s**alpha, alpha, alpha)


# }}}


# {{{ weight matrices


def _pair_weights(
    t: np.ndarray, F: np.ndarray, Psi: np.ndarray, n_idx: np.ndarray, j_idx: np.ndarray
) -> np.ndarray:
    """Assemble weights from primitive values at ``t[n] - t[j]`` for ``n >= j``.

    ``F``/``Psi`` are given on the pairs ``(n_idx, j_idx)``. Returns the
    ``(M+1, M+1)`` lower-triangular weight matrix.
    """
    m = t.size
    Fm = np.zeros((m, m), dtype=np.complex128)
    Pm = np.zeros((m, m), dtype=np.complex128)
    Fm[n_idx, j_idx] = F
    Pm[n_idx, j_idx] = Psi

    dt = np.diff(t)
    # b = t_n - t_j, a = t_n - t_{j+1}; interval j contributes for j < n
    Fb, Fa = Fm[:, :-1], Fm[:, 1:]
    D = (Pm[:, :-1] - Pm[:, 1:]) / dt
    left = Fb - D
    right = D - Fa

    mask = np.tril(np.ones((m, m - 1), dtype=bool), -1)
    left = np.where(mask, left, 0.0)
    right = np.where(mask, right, 0.0)

    W = np.zeros((m, m), dtype=np.complex128)
    W[:, :-1] += left
    W[:, 1:] += right
    return W


def convolution_weights(
    alpha: float, lam: complex, t: np.ndarray, *, remainder: bool = False
) -> np.ndarray:
    r"""Weights ``W`` with ``(W @ g)[n]`` equal to :math:`\int_0^{t_n} K(t_n - \tau) g(\tau) d\tau`.

    ``g`` is the piecewise-linear interpolant of its node values. With
    ``remainder=True`` the kernel is :math:`R_2` instead of :math:`K_\lambda`.
    Uniform grids need only ``M`` primitive evaluations (Toeplitz structure);
    general grids need one per node pair.
    """
    t = np.asarray(t, dtype=np.float64)
    if t.ndim != 1 or t.size < 2 or t[0] != 0 or np.any(np.diff(t) <= 0):
        raise ValidationError("grid must be strictly increasing and start at 0")

    m = t.size
    if is_uniform(t):
        h = t[1]
        F1, Psi1 = kernel_primitives(alpha, lam, h * np.arange(m), remainder=remainder)
        k = np.subtract.outer(np.arange(m), np.arange(m))
        valid = k >= 0
        n_idx, j_idx = np.nonzero(valid)
        kk = k[valid]
        return _pair_weights(t, F1[kk], Psi1[kk], n_idx, j_idx)

    n_idx, j_idx = np.tril_indices(m)
    s = t[n_idx] - t[j_idx]
    F, Psi = kernel_primitives(alpha, lam, s, remainder=remainder)
    return _pair_weights(t, F, Psi, n_idx, j_idx)


def convolution_row(alpha: float, lam: complex, tau: np.ndarray) -> np.ndarray:
    r"""Weights ``w`` with ``w @ g`` equal to :math:`\int_0^t K(t - \tau) g(\tau) d\tau`.

    The nodes ``tau`` must start at 0 and end at ``t``. This is the last row
    of :func:`convolution_weights` at the cost of ``M`` primitive evaluations.
    """
    tau = np.asarray(tau, dtype=np.float64)
    if tau.ndim != 1 or tau.size < 2 or tau[0] != 0 or np.any(np.diff(tau) <= 0):
        raise ValidationError("grid must be strictly increasing and start at 0")

    s = np.maximum(tau[-1] - tau, 0.0)
    F, Psi = kernel_primitives(alpha, lam, s)
    D = (Psi[:-1] - Psi[1:]) / np.diff(tau)

    w = np.zeros(tau.size, dtype=np.complex128)
    w[:-1] += F[:-1] - D
    w[1:] += D - F[1:]
    return w


def exponential_tail_row(kappa: complex, t: np.ndarray) -> np.ndarray:
    r"""First row of :func:`exponential_tail_weights`: :math:`\int_0^\infty e^{-\kappa\tau} g(\tau) d\tau`."""
    kappa = complex(kappa)
    if kappa.real <= 0:
        raise ValidationError(f"'kappa' must have positive real part: got {kappa}")

    t = np.asarray(t, dtype=np.float64)
    dt = np.diff(t)
    phi1, phi2 = _exp_linear_moments(kappa * dt)
    with np.errstate(under="ignore"):
        decay = np.exp(-kappa * t)

    u = np.zeros(t.size, dtype=np.complex128)
    u[:-1] += decay[:-1] * dt * (phi1 - phi2)
    u[1:] += decay[:-1] * dt * phi2
    u[-1] += decay[-1] / kappa
    return u


def _exp_linear_moments(z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    r"""``phi1 = (1 - e^{-z})/z`` and ``phi2 = (1 - e^{-z}(1 + z))/z^2``."""
    z = np.asarray(z, dtype=np.complex128)
    phi1 = np.empty_like(z)
    phi2 = np.empty_like(z)
    small = np.abs(z) < 1.0e-2
    zs = z[small]
    phi1[small] = 1 - zs / 2 + zs**2 / 6 - zs**3 / 24 + zs**4 / 120
    phi2[small] = 0.5 - zs / 3 + zs**2 / 8 - zs**3 / 30 + zs**4 / 144
    zl = z[~small]
    phi1[~small] = -np.expm1(-zl) / zl
    phi2[~small] = (phi1[~small] - np.exp(-zl)) / zl
    return phi1, phi2


def exponential_tail_weights(kappa: complex, t: np.ndarray) -> np.ndarray:
    r"""Weights ``U`` with ``(U @ g)[n]`` equal to :math:`\int_{t_n}^\infty e^{\kappa(t_n-\tau)} g(\tau)\,d\tau`.

    ``g`` is piecewise linear on the grid and constant beyond its last node.
    Requires ``Re kappa > 0``.
    """
    kappa = complex(kappa)
    if kappa.real <= 0:
        raise ValidationError(f"'kappa' must have positive real part: got {kappa}")

    t = np.asarray(t, dtype=np.float64)
    m = t.size
    dt = np.diff(t)
    phi1, phi2 = _exp_linear_moments(kappa * dt)
    w_right = dt * phi2
    w_left = dt * phi1 - w_right

    # decay factor exp(-kappa (t_j - t_n)) for j >= n
    S = np.subtract.outer(t, t)  # S[n, j] = t_n - t_j
    upper = S <= 0
    with np.errstate(under="ignore"):
        decay = np.where(upper, np.exp(kappa * np.where(upper, S, 0.0)), 0.0)

    U = np.zeros((m, m), dtype=np.complex128)
    U[:, :-1] += decay[:, :-1] * w_left
    U[:, 1:] += decay[:, :-1] * w_right
    U[:, -1] += decay[:, -1] / kappa
    return U


# }}}


def abs_kernel_profile(
    alpha: float, lam: complex, *, remainder: bool = False, n: int = 4000
) -> tuple[np.ndarray, np.ndarray, float]:
    r"""Cumulative integral :math:`\int_0^s |k(\sigma)| d\sigma` on a log grid.

    ``k`` is :math:`K_\lambda`, or :math:`R_2` with ``remainder=True``. Both
    behave like :math:`s^{\alpha-1}/\Gamma(\alpha)` near zero and decay like
    :math:`s^{-1-\alpha}/(|\lambda|^2|\Gamma(-\alpha)|)` at infinity. Returns
    the grid, the cumulative integral and a bound for the integral beyond the
    last node.
    """
    lam = complex(lam)
    scale = abs(lam) ** (-1.0 / alpha)
    s_end = scale * 1.0e6
    # uniform in u = log(s), where |k(s)| s is smooth
    u = np.linspace(math.log(scale * 1.0e-8), math.log(s_end), n)
    s = np.exp(u)
    if remainder:
        k = np.abs(remainder_r2(alpha, lam, s))
    else:
        k = np.abs(s ** (alpha - 1.0) * mittag_leffler(lam * s**alpha, alpha, alpha))

    head = s[0] ** alpha * float(rgamma(alpha + 1.0))
    cumulative = head + cumulative_trapezoid(k * s, u, initial=0.0)

    tail = abs(float(rgamma(-alpha))) / abs(lam) ** 2 * s_end ** (-alpha) / alpha
    return s, cumulative, 2.0 * tail
