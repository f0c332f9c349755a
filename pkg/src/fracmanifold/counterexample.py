r"""Failure of a stable manifold construction based on a false matrix identity.

The system is

.. math::

    D^\alpha x = \begin{pmatrix} -2 & 0 \\ 0 & 2 \end{pmatrix} x
        + \begin{pmatrix} x_1^2 \\ x_1^2 + x_2^2 \end{pmatrix}.

The construction replaces the bounded-solution condition along the unstable
direction by the operator

.. math::

    \pi_u(T_\sigma\varphi)(t) = \int_0^t K_2(t-\tau) g(\tau)\,d\tau
        - E_\alpha(2t^\alpha) \int_0^\infty \alpha B(-\tau) g(\tau)\,d\tau,
    \qquad g = \varphi_1^2 + \varphi_2^2,

with :math:`\alpha B(-\tau) = e^{-2^{1/\alpha}\tau}`. Since the convolution
grows like :math:`2^{1/\alpha-1} E_\alpha(2t^\alpha) \int_0^\infty e^{-2^{1/\alpha}\tau} g`,
the right-hand side diverges for every bounded non-zero ``phi`` when
:math:`\alpha < 1`. The root cause is a wrong leading term for
:math:`E_{\alpha,\alpha}(t^\alpha J)` on a Jordan block, which
:func:`ml_identity_gap` quantifies.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

from fracmanifold.errors import DomainError, ValidationError
from fracmanifold.fde_solver import Trajectory, solve_caputo
from fracmanifold.mittag_leffler import MLParams, mittag_leffler, ml_matrix
from fracmanifold.polynomial import PolynomialMap
from fracmanifold.quadrature import convolution_row, exponential_tail_row
from fracmanifold.spectral import FractionalSystem

logger = logging.getLogger(__name__)

#: eigenvalue of the unstable direction
UNSTABLE_EIGENVALUE = 2.0
#: leading terms are compared only once ``lambda**(1/alpha) * t`` exceeds this
GAP_MIN_EXPONENT = 10.0
#: graded nodes used for the quadratures of the projection
PROJECTION_NODES = 2000


def build_example_system(alpha: float) -> FractionalSystem:
    """The two-dimensional saddle with quadratic nonlinearity."""
    f = PolynomialMap(
        2, 2, {(0, (2, 0)): 1.0, (1, (2, 0)): 1.0, (1, (0, 2)): 1.0}
    )
    return FractionalSystem(alpha, np.diag([-2.0, 2.0]), f)


def b_minus(alpha: float, tau: np.ndarray | float, lam: float = UNSTABLE_EIGENVALUE) -> np.ndarray:
    r""":math:`B(-\tau) = e^{-\lambda^{1/\alpha}\tau} / \alpha` for a scalar unstable eigenvalue."""
    return np.exp(-(lam ** (1.0 / alpha)) * np.asarray(tau, dtype=np.float64)) / alpha


# {{{ candidate trajectories

Candidate = Callable[[np.ndarray], np.ndarray]


def analytic_candidate(alpha: float, sigma1: float) -> Candidate:
    """``phi(t) = (sigma1 E_alpha(-2 t^alpha), 0)``, the linearized stable solution."""

    def phi(t: np.ndarray) -> np.ndarray:
        t = np.asarray(t, dtype=np.float64)
        x1 = sigma1 * mittag_leffler(-2.0 * t**alpha, alpha, 1.0).real
        return np.column_stack([x1, np.zeros_like(x1)])

    return phi


def solver_candidate(alpha: float, sigma1: float, T: float = 40.0, N: int = 4000) -> Candidate:
    """Solution of the system restricted to ``x2 = 0``, integrated numerically.

    Only the first equation is integrated; the second coordinate is held at
    zero as the construction prescribes for its fixed point.
    """
    f = PolynomialMap(1, 1, {(0, (2,)): 1.0})
    sub = FractionalSystem(alpha, np.array([[-2.0]]), f)
    traj = solve_caputo(sub, np.array([sigma1]), T, N)
    return trajectory_candidate(traj)


def trajectory_candidate(traj: Trajectory) -> Candidate:
    """Piecewise-linear candidate from a trajectory, frozen after its last time.

    One-dimensional trajectories are padded with a zero second coordinate.
    """
    states = np.asarray(traj.states)
    if states.shape[1] == 1:
        states = np.column_stack([states[:, 0], np.zeros(states.shape[0])])
    elif states.shape[1] != 2:
        raise ValidationError(f"expected a 1D or 2D trajectory: got dimension {states.shape[1]}")
    times = traj.times

    def phi(t: np.ndarray) -> np.ndarray:
        t = np.minimum(np.asarray(t, dtype=np.float64), times[-1])
        cols = [np.interp(t, times, states[:, i].real) for i in range(2)]
        return np.column_stack(cols)

    return phi


# }}}


# {{{ divergence


@dataclass(frozen=True)
class ProjectionParts:
    """Pieces of the unstable projection at time ``t``."""

    t: float
    alpha: float
    #: convolution with the unstable kernel
    convolution: float
    #: :math:`E_\alpha(2 t^\alpha)`
    ml_factor: float
    #: :math:`\int_0^\infty e^{-2^{1/\alpha}\tau} g(\tau) d\tau`
    tail_integral: float

    @property
    def value(self) -> float:
        return self.convolution - self.ml_factor * self.tail_integral

    @property
    def bracket_ratio(self) -> float:
        """Convolution divided by :math:`E_\\alpha(2 t^\\alpha)`."""
        return self.convolution / self.ml_factor

    @property
    def bracket_limit(self) -> float:
        """Limit of :attr:`bracket_ratio` for bounded ``g``."""
        return UNSTABLE_EIGENVALUE ** (1.0 / self.alpha - 1.0) * self.tail_integral


def _graded(t_end: float, alpha: float, n: int) -> np.ndarray:
    return t_end * (np.arange(n + 1) / n) ** (1.0 / alpha)


def _squared_norm(phi: Candidate | Trajectory, tau: np.ndarray) -> np.ndarray:
    if isinstance(phi, Trajectory):
        phi = trajectory_candidate(phi)
    x = np.asarray(phi(tau))
    return np.sum(np.abs(x) ** 2, axis=1)


def unstable_projection_parts(
    phi: Candidate | Trajectory, alpha: float, t: float, *, n: int = PROJECTION_NODES
) -> ProjectionParts:
    """Evaluate the pieces of the unstable projection with product integration."""
    if not 0 < alpha <= 1:
        raise ValidationError(f"'alpha' must be in (0, 1]: got {alpha}")
    if not t > 0:
        raise ValidationError(f"'t' must be positive: got {t}")

    lam = UNSTABLE_EIGENVALUE
    kappa = lam ** (1.0 / alpha)

    tau = _graded(t, alpha, n)
    conv = convolution_row(alpha, lam, tau) @ _squared_norm(phi, tau)

    # the exponential weight is below 1e-17 beyond 40 / kappa
    tail = _graded(max(t, 40.0 / kappa), alpha, n)
    tail_integral = exponential_tail_row(kappa, tail) @ _squared_norm(phi, tail)

    ml = mittag_leffler(lam * t**alpha, alpha, 1.0)
    return ProjectionParts(
        t=float(t),
        alpha=float(alpha),
        convolution=float(conv.real),
        ml_factor=float(ml.real),
        tail_integral=float(tail_integral.real),
    )


def deshpande_unstable_projection(
    phi: Candidate | Trajectory, alpha: float, t: float, *, n: int = PROJECTION_NODES
) -> float:
    """Unstable component of the construction's operator applied to ``phi`` at ``t``."""
    return unstable_projection_parts(phi, alpha, t, n=n).value


# }}}


# {{{ identity gap


@dataclass(frozen=True)
class DeshpandeGap:
    """Leading parts of both sides of the claimed identity on a 2x2 Jordan block.

    ``lhs`` is the exponential-leading part of :math:`E_{\\alpha,\\alpha}(t^\\alpha J)`
    and ``rhs`` that of :math:`t^{1-\\alpha} B(t)`. Any remainder matrix common
    to both sides cancels in the comparison.
    """

    t: float
    alpha: float
    lam: float
    lhs: np.ndarray
    rhs: np.ndarray
    entrywise_gap: np.ndarray

    @property
    def factor(self) -> float:
        """Ratio of the diagonal entries, :math:`\\lambda^{(1-\\alpha)/\\alpha}/\\alpha`."""
        return self.lam ** ((1.0 - self.alpha) / self.alpha) / self.alpha


def ml_identity_gap(alpha: float, lam: float, t: float) -> DeshpandeGap:
    """Compare the two leading parts entrywise.

    Entries are scaled by :math:`e^{-\\lambda^{1/\\alpha} t}` before they are
    stored, so the matrices stay finite for large ``t``.

    :raises DomainError: if ``lambda**(1/alpha) * t`` is below
        :data:`GAP_MIN_EXPONENT`, where the leading parts do not dominate.
    """
    if not 0 < alpha <= 1:
        raise ValidationError(f"'alpha' must be in (0, 1]: got {alpha}")
    if not lam > 0:
        raise ValidationError(f"'lam' must be positive: got {lam}")

    kt = lam ** (1.0 / alpha) * t
    if kt < GAP_MIN_EXPONENT:
        raise DomainError(
            f"'t' = {t} is too small: lambda^(1/alpha) t = {kt:.3g} < {GAP_MIN_EXPONENT}"
        )

    a = alpha
    p = t ** (1.0 - a)
    diag = lam ** ((1.0 - a) / a) * p / a
    lhs = np.array(
        [
            [diag, lam ** ((1.0 - 2.0 * a) / a) * p * (1.0 - a + kt) / a**2],
            [0.0, diag],
        ]
    )
    rhs = p * np.array(
        [
            [1.0 / a, lam ** ((1.0 - a) / a) * t / a**2],
            [0.0, 1.0],
        ]
    )

    gap = np.zeros((2, 2))
    nz = rhs != 0
    gap[nz] = np.abs(lhs[nz] - rhs[nz]) / np.abs(rhs[nz])
    return DeshpandeGap(float(t), float(alpha), float(lam), lhs, rhs, gap)


def direct_ratio(alpha: float, lam: float, t: float) -> np.ndarray:
    """Entrywise ratio of :math:`E_{\\alpha,\\alpha}(t^\\alpha J)` to the leading part of :math:`t^{1-\\alpha}B(t)`.

    The numerator comes from :func:`~fracmanifold.mittag_leffler.ml_matrix`.
    Entries where the leading part vanishes are ``nan``.
    """
    gap = ml_identity_gap(alpha, lam, t)
    J = np.array([[lam, 1.0], [0.0, lam]])
    exact = ml_matrix(MLParams(alpha, alpha), t, J).real
    scale = math.exp(-(lam ** (1.0 / alpha)) * t)

    out = np.full((2, 2), np.nan)
    nz = gap.rhs != 0
    out[nz] = exact[nz] * scale / gap.rhs[nz]
    return out


# }}}


# {{{ report

DIVERGENCE_TIMES = (5.0, 10.0, 15.0)
GAP_TIMES = (10.0, 20.0, 40.0)
DIVERGENCE_BOUND = 1.0e3
BRACKET_RTOL = 0.05
GAP_RTOL = 0.01


def counterexample_report(
    alpha: float,
    *,
    sigma1: float = 0.1,
    times: Sequence[float] = DIVERGENCE_TIMES,
    gap_times: Sequence[float] = GAP_TIMES,
    lam: float = UNSTABLE_EIGENVALUE,
) -> dict[str, Any]:
    """Tables and verdict for both refutation arguments.

    The divergence check passes if, for both candidate trajectories, the
    projection grows strictly in magnitude over ``times``, ends above
    :data:`DIVERGENCE_BOUND` and the bracket ratio at the last time is
    within :data:`BRACKET_RTOL` of its limit. The identity check passes if
    the diagonal gap at every time in ``gap_times`` that is above the
    threshold matches the predicted factor and the direct evaluation within
    :data:`GAP_RTOL`.
    """
    candidates = {
        "analytic": analytic_candidate(alpha, sigma1),
        "solver": solver_candidate(alpha, sigma1, T=max(times) + 1.0),
    }

    divergence = []
    divergence_ok = True
    for name, phi in candidates.items():
        parts = [unstable_projection_parts(phi, alpha, t) for t in times]
        values = np.array([abs(p.value) for p in parts])
        last = parts[-1]
        bracket_err = abs(last.bracket_ratio / last.bracket_limit - 1.0)
        ok = bool(
            np.all(np.diff(values) > 0)
            and values[-1] > DIVERGENCE_BOUND
            and bracket_err <= BRACKET_RTOL
        )
        divergence_ok &= ok
        for p in parts:
            divergence.append({
                "candidate": name,
                "t": p.t,
                "value": p.value,
                "bracket_ratio": p.bracket_ratio,
                "bracket_limit": p.bracket_limit,
            })
        logger.info("candidate %s: bracket error %.3g, ok %s", name, bracket_err, ok)

    gaps = []
    gap_ok = True
    for t in gap_times:
        try:
            g = ml_identity_gap(alpha, lam, t)
        except DomainError:
            continue
        ratio = direct_ratio(alpha, lam, t)
        predicted = abs(g.factor - 1.0)
        ok = bool(
            abs(g.entrywise_gap[1, 1] - predicted) <= GAP_RTOL * max(predicted, 1.0)
            and abs(ratio[1, 1] / g.factor - 1.0) <= GAP_RTOL
        )
        gap_ok &= ok
        gaps.append({
            "t": float(t),
            "gap": g.entrywise_gap.tolist(),
            "factor": g.factor,
            "direct_ratio_22": float(ratio[1, 1]),
        })

    refuted = alpha < 1 and abs(lam ** ((1.0 - alpha) / alpha) / alpha - 1.0) > GAP_RTOL
    return {
        "alpha": float(alpha),
        "lambda": float(lam),
        "sigma1": float(sigma1),
        "divergence": divergence,
        "gap": gaps,
        "verdict": {
            "divergence": divergence_ok,
            "identity_gap": gap_ok and bool(gaps),
            "refuted": bool(divergence_ok and gap_ok and gaps and refuted),
        },
    }


# }}}
