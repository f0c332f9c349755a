r"""Direct integration of Caputo systems and variation-of-constants residuals.

:func:`solve_caputo` is the fractional Adams-Bashforth-Moulton
predictor-corrector of Diethelm, Ford and Freed applied to the Volterra form

.. math::

    x(t) = x_0 + \frac{1}{\Gamma(\alpha)} \int_0^t (t-s)^{\alpha-1} (A x(s) + f(x(s)))\,ds

on a uniform grid. :func:`voc_residual` measures how well a trajectory
satisfies

.. math::

    x(t) = E_\alpha(t^\alpha A) x_0
        + \int_0^t (t-s)^{\alpha-1} E_{\alpha,\alpha}((t-s)^\alpha A) f(x(s))\,ds,

computed in Jordan coordinates with the product-integration rules of
:mod:`fracmanifold.quadrature`.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import gamma

from fracmanifold.errors import StepOverflow, ValidationError
from fracmanifold.mittag_leffler import mittag_leffler
from fracmanifold.quadrature import convolution_weights, is_uniform, kernel_primitives
from fracmanifold.spectral import FractionalSystem, jordanize, transform_system

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Trajectory:
    """States of ``system`` at increasing times, starting from ``t = 0``."""

    times: np.ndarray
    states: np.ndarray
    system: FractionalSystem

    def __post_init__(self) -> None:
        times = np.asarray(self.times, dtype=np.float64)
        states = np.asarray(self.states)
        if times.ndim != 1 or times.size < 1 or times[0] != 0:
            raise ValidationError("trajectory times must be a 1D array starting at 0")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        if states.shape != (times.size, self.system.d):
            raise ValidationError(
                f"states have shape {states.shape}, expected {(times.size, self.system.d)}"
            )
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)

    @property
    def alpha(self) -> float:
        return self.system.alpha

    @property
    def x0(self) -> np.ndarray:
        return self.states[0]

    def resample(self, times: np.ndarray) -> Trajectory:
        """Piecewise-linear resampling onto ``times`` (within the original range)."""
        times = np.asarray(times, dtype=np.float64)
        if times[-1] > self.times[-1] * (1 + 1.0e-12):
            raise ValidationError("cannot resample beyond the last time")
        cols = []
        for i in range(self.system.d):
            col = np.interp(times, self.times, self.states[:, i].real)
            if np.iscomplexobj(self.states):
                col = col + 1j * np.interp(times, self.times, self.states[:, i].imag)
            cols.append(col)
        return Trajectory(times, np.column_stack(cols), self.system)


# {{{ predictor-corrector


def solve_caputo(
    sys: FractionalSystem,
    x0: np.ndarray,
    T: float,
    N: int,
    *,
    guard: float | None = None,
) -> Trajectory:
    """Integrate ``D^alpha x = A x + f(x)``, ``x(0) = x0`` on ``N`` uniform steps.

    Uses one predictor and one corrector evaluation per step and the full
    history (``O(N^2)`` work).

    :raises StepOverflow: once the state norm exceeds ``guard``
        (default ``1e6 * max(1, |x0|)``).
    """
    if N < 2:
        raise ValidationError(f"'N' must be at least 2: got {N}")
    if not T > 0:
        raise ValidationError(f"'T' must be positive: got {T}")

    x0 = np.asarray(x0)
    if x0.shape != (sys.d,):
        raise ValidationError(f"'x0' must have {sys.d} components: got shape {x0.shape}")
    dtype = np.float64 if sys.is_real and not np.iscomplexobj(x0) else np.complex128
    x0 = x0.astype(dtype)

    norm0 = float(np.max(np.abs(x0)))
    limit = 1.0e6 * max(1.0, norm0) if guard is None else guard

    alpha = sys.alpha
    h = T / N
    k = np.arange(N + 1, dtype=np.float64)
    # predictor weights b_k = (k+1)^a - k^a, corrector weights for j >= 1
    b = (k + 1) ** alpha - k**alpha
    a = (k + 2) ** (alpha + 1) + k ** (alpha + 1) - 2 * (k + 1) ** (alpha + 1)
    cp = h**alpha / gamma(alpha + 1)
    cc = h**alpha / gamma(alpha + 2)

    x = np.zeros((N + 1, sys.d), dtype=dtype)
    F = np.zeros((N + 1, sys.d), dtype=dtype)
    x[0] = x0
    F[0] = sys.rhs(x0)

    for n in range(N):
        # history sums over j = 0..n
        pred = x0 + cp * (b[n::-1] @ F[: n + 1])
        a0 = n ** (alpha + 1) - (n - alpha) * (n + 1) ** alpha
        hist = a0 * F[0]
        if n >= 1:
            hist = hist + a[n - 1 :: -1] @ F[1 : n + 1]
        xn = x0 + cc * (sys.rhs(pred) + hist)

        if not np.all(np.isfinite(xn)) or np.max(np.abs(xn)) > limit:
            raise StepOverflow(
                f"state norm exceeded {limit:.3g} at t = {(n + 1) * h:.6g}",
                step=n + 1,
                time=(n + 1) * h,
            )
        x[n + 1] = xn
        F[n + 1] = sys.rhs(xn)

    return Trajectory(h * k, x, sys)


# }}}


# {{{ residual


def _uniform_convolution(alpha: float, lam: complex, h: float, g: np.ndarray) -> np.ndarray:
    """Product-integration convolution on a uniform grid (Toeplitz weights)."""
    m = g.size
    F, Psi = kernel_primitives(alpha, lam, h * np.arange(m + 1))
    D = (Psi[1:] - Psi[:-1]) / h  # interval k = 1..m
    L = F[1:] - D  # weight on the left node, distance k
    R = D - F[:-1]  # weight on the right node, distance k - 1

    c = np.zeros(m, dtype=np.complex128)
    c[0] = R[0]
    c[1:] = L[: m - 1] + R[1:m]
    out = np.convolve(c, g)[:m]
    # the left-most interval has no node to its left
    out -= R[np.arange(m)] * g[0]
    out[0] = 0.0
    return out


def voc_residual(traj: Trajectory, *, t_max: float | None = None) -> float:
    """Largest deviation from the variation-of-constants formula over the nodes.

    The trajectory is mapped to Jordan coordinates of its system, where every
    coordinate has a scalar kernel, and the residual is mapped back.
    ``t_max`` restricts the check to an initial window.
    """
    sys = traj.system
    times, states = traj.times, traj.states
    if t_max is not None:
        keep = times <= t_max
        times, states = times[keep], states[keep]
    if times.size < 2:
        return 0.0

    split = jordanize(sys.A, sys.alpha, 1.0, jordan_blocks=sys.jordan_blocks)
    tsys = transform_system(sys, split)
    y = states.astype(np.complex128) @ split.TP_inv.T
    g = tsys.h(y)

    alpha = sys.alpha
    uniform = is_uniform(times)
    r = np.empty_like(y)
    for i, lam in enumerate(split.eigenvalues):
        E = mittag_leffler(lam * times**alpha, alpha, 1.0)
        if uniform:
            conv = _uniform_convolution(alpha, complex(lam), times[1], g[:, i])
        else:
            conv = convolution_weights(alpha, complex(lam), times) @ g[:, i]
        r[:, i] = y[:, i] - E * y[0, i] - conv

    return float(np.max(np.abs(r @ split.TP.T)))


# }}}


# {{{ verification


def decay_time(alpha: float, eigenvalues: np.ndarray, level: float = 0.05) -> float:
    """Smallest time after which every stable mode has ``|E_alpha(lambda t^alpha)| < level``.

    Found by a log-spaced scan (the modulus is eventually monotone), then
    refined by bisection. Returns 0 if there are no stable eigenvalues.
    """
    if not 0 < level < 1:
        raise ValidationError(f"'level' must be in (0, 1): got {level}")

    lams = np.asarray(eigenvalues, dtype=np.complex128)
    stable = lams[np.abs(np.angle(lams)) > 0.5 * alpha * np.pi]
    if stable.size == 0:
        return 0.0

    def worst(t: np.ndarray) -> np.ndarray:
        z = np.multiply.outer(t**alpha, stable)
        return np.max(np.abs(mittag_leffler(z, alpha, 1.0)), axis=-1)

    t = np.geomspace(1.0e-6, 1.0e12, 2000)
    above = np.nonzero(worst(t) >= level)[0]
    if above.size == 0:
        return float(t[0])
    if above[-1] == t.size - 1:
        raise ValidationError(f"stable modes do not decay below {level} before t = 1e12")

    lo, hi = t[above[-1]], t[above[-1] + 1]
    for _ in range(60):
        mid = math.sqrt(lo * hi)
        if worst(np.array([mid]))[0] >= level:
            lo = mid
        else:
            hi = mid
    return float(hi)


class Verdict(str, enum.Enum):
    DECAYS = "decays"
    ESCAPES = "escapes"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class Verification:
    verdict: Verdict
    #: ``|phi(T)| / |x|`` (``inf`` after an escape)
    ratio: float
    max_norm: float
    escape_time: float | None = None


def verify_manifold_point(
    sys: FractionalSystem,
    x: np.ndarray,
    T: float,
    shrink: float = 0.1,
    *,
    N: int = 2048,
    ball: float | None = None,
) -> Verification:
    """Classify a point by integrating the system up to ``T``.

    ``decays`` if ``|phi(T)| <= shrink |x|`` and the trajectory stays in the
    ball of radius ``ball`` (default ``10 |x|``); ``escapes`` if it leaves the
    ball; ``inconclusive`` otherwise. Norms are max norms.
    """
    if not 0 < shrink < 1:
        raise ValidationError(f"'shrink' must be in (0, 1): got {shrink}")

    x = np.asarray(x)
    norm = float(np.max(np.abs(x))) if x.size else 0.0
    if norm == 0:
        return Verification(Verdict.DECAYS, 0.0, 0.0)

    radius = 10.0 * norm if ball is None else ball
    try:
        traj = solve_caputo(sys, x, T, N, guard=radius)
    except StepOverflow as exc:
        return Verification(Verdict.ESCAPES, math.inf, radius, exc.time)

    norms = np.max(np.abs(traj.states), axis=1)
    ratio = float(norms[-1] / norm)
    verdict = Verdict.DECAYS if ratio <= shrink else Verdict.INCONCLUSIVE
    return Verification(verdict, ratio, float(norms.max()))


# }}}
