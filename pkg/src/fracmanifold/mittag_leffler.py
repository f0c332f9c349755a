r"""Two-parameter Mittag-Leffler function :math:`E_{\alpha,\beta}`.

The evaluator combines three representations, chosen by the size of
:math:`X = |z|^{1/\alpha}`:

* ``X <= 4``: the power series, summed in double precision;
* ``4 < X < 60``: the Hankel-contour integral

  .. math::

      E_{\alpha,\beta}(z) = \frac{1}{2\alpha\pi i} \int_{\gamma(\epsilon,\mu)}
        \frac{\exp(\zeta^{1/\alpha}) \zeta^{(1-\beta)/\alpha}}{\zeta - z}\, d\zeta
        + [z \text{ right of } \gamma]\, \frac{1}{\alpha} z^{(1-\beta)/\alpha}
          \exp(z^{1/\alpha}),

  discretized with composite Gauss-Legendre rules;
* ``X >= 60``: the large-argument expansion, truncated at its smallest term.

Besides the full value, the evaluator returns the *algebraic part*
:math:`E_{\alpha,\beta}(z) - \frac{1}{\alpha} z^{(1-\beta)/\alpha}\exp(z^{1/\alpha})`
without cancellation. The kernels of the unstable directions in
:mod:`fracmanifold.lp_operator` are built from it.

:func:`ml_series` is an independent, arbitrary-precision implementation of the
power series and serves as an oracle.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Literal

import mpmath
import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import gammaln, rgamma

from fracmanifold.errors import (
    DomainError,
    MLOverflow,
    NonConvergence,
    ShapeError,
    ValidationError,
)

EPS = float(np.finfo(np.float64).eps)

#: largest ``|z|**(1/alpha)`` summed with the double-precision series
SERIES_MAX_X = 4.0
#: smallest ``|z|**(1/alpha)`` handled by the truncated asymptotic expansion
ASYMPTOTIC_MIN_X = 60.0
#: relative accuracy assigned to the contour quadrature (calibrated against
#: 60-digit series sums, see ``tests/test_mittag_leffler.py``)
CONTOUR_REL_ERROR = 5.0e-14

_ARC_NODES, _ARC_WEIGHTS = np.polynomial.legendre.leggauss(64)
_PANEL_NODES, _PANEL_WEIGHTS = np.polynomial.legendre.leggauss(16)
#: relative rounding of the exponential term per unit of ``|z|^(1/alpha)``,
#: calibrated against arbitrary-precision sums (observed up to 2.5)
EXP_ROUNDING = 4.0

_PANEL_WIDTH = 2.0
_RAY_DECAY = 40.0
_CHUNK = 2048


class MLMethod(str, enum.Enum):
    SERIES = "series"
    ASYMPTOTIC_SECTOR = "asymptotic_sector"
    ASYMPTOTIC_EXTERIOR = "asymptotic_exterior"
    DERIVATIVE_LIMIT = "derivative_limit"
    INTEGRAL = "integral"


_METHODS = (
    MLMethod.SERIES,
    MLMethod.INTEGRAL,
    MLMethod.ASYMPTOTIC_SECTOR,
    MLMethod.ASYMPTOTIC_EXTERIOR,
)


@dataclass(frozen=True)
class MLParams:
    """Order, second parameter and sector angle of :math:`E_{\\alpha,\\beta}`.

    ``alpha = 1`` is accepted as the classical limit (the exponential function
    for ``beta = 1``). ``mu`` defaults to the midpoint ``3 alpha pi / 4`` of the
    admissible interval ``(alpha pi / 2, alpha pi)``.
    """

    alpha: float
    beta: float = 1.0
    mu: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha <= 1.0:
            raise ValidationError(f"'alpha' must be in (0, 1]: got {self.alpha}")
        if isinstance(self.beta, complex) or not math.isfinite(self.beta):
            raise ValidationError(f"'beta' must be a finite real: got {self.beta}")

        if self.mu is None:
            object.__setattr__(self, "mu", 0.75 * self.alpha * math.pi)

        assert self.mu is not None
        lo, hi = 0.5 * self.alpha * math.pi, min(self.alpha * math.pi, math.pi)
        if not lo < self.mu < hi:
            raise ValidationError(
                f"'mu' must be in ({lo:.6g}, {hi:.6g}) for alpha={self.alpha}: "
                f"got {self.mu}"
            )


@dataclass(frozen=True)
class MLValue:
    """A Mittag-Leffler evaluation with the method used and its error estimate."""

    value: complex
    method: MLMethod
    abs_error_estimate: float

    def __post_init__(self) -> None:
        if not (np.isfinite(self.value.real) and np.isfinite(self.value.imag)):
            raise MLOverflow(f"non-finite Mittag-Leffler value: {self.value}")
        if not (math.isfinite(self.abs_error_estimate) and self.abs_error_estimate >= 0):
            raise ValidationError(
                f"invalid error estimate: {self.abs_error_estimate}"
            )


# {{{ building blocks


def exponential_part(alpha: float, beta: float, z: np.ndarray) -> np.ndarray:
    r"""Evaluate :math:`\frac{1}{\alpha} z^{(1-\beta)/\alpha}\exp(z^{1/\alpha})`.

    Uses the principal branch. The product is formed in logarithmic form so
    that large exponents do not overflow before the final multiplication.
    """
    z = np.asarray(z, dtype=np.complex128)
    out = np.zeros_like(z)
    nonzero = z != 0
    zn = z[nonzero]
    logz = np.log(zn)
    with np.errstate(over="ignore"):
        out[nonzero] = np.exp(
            -math.log(alpha) + (1.0 - beta) / alpha * logz + np.exp(logz / alpha)
        )

    if not np.all(nonzero):
        c = (1.0 - beta) / alpha
        if c == 0:
            out[~nonzero] = 1.0 / alpha
        elif c < 0:
            out[~nonzero] = np.inf

    return out


def _series(alpha: float, beta: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    total = np.zeros_like(z)
    magnitude = np.zeros(z.shape)
    zk = np.ones_like(z)
    last = np.zeros(z.shape)

    x_max = float(np.max(np.abs(z))) ** (1.0 / alpha) if z.size else 0.0
    k_min = int((x_max + 2.0 - beta) / alpha) + 2
    for k in range(10_000):
        term = zk * rgamma(alpha * k + beta)
        total += term
        last = np.abs(term)
        magnitude += last
        if k > k_min and np.all(last <= 0.25 * EPS * magnitude):
            break
        zk = zk * z
    else:
        raise NonConvergence("double-precision series did not converge")

    return total, 4.0 * EPS * magnitude + last


def _choose_mu(alpha: float, z: np.ndarray) -> np.ndarray:
    # keep |arg z| away from the rays arg(zeta) = +-mu, preferring steep rays
    # (large mu) because the integrand then decays faster along them
    candidates = np.array([0.95, 0.8, 0.65]) * min(alpha * np.pi, np.pi)
    dist = np.abs(np.abs(np.angle(z))[..., None] - candidates)
    ok = dist >= 0.12 * alpha * np.pi
    return candidates[np.argmax(ok, axis=-1)]


def _contour_chunk(
    alpha: float, beta: float, z: np.ndarray, mu: float
) -> tuple[np.ndarray, np.ndarray]:
    theta = mu / alpha
    decay = -math.cos(theta)
    x = np.abs(z) ** (1.0 / alpha)
    u_eps = np.minimum(1.0, 0.5 * x)[:, None]
    eps = u_eps**alpha
    zz = z[:, None]

    # circular arc |zeta| = eps, |arg zeta| <= mu
    phi = mu * _ARC_NODES
    p = (1.0 - beta) / alpha + 1.0
    arc = (
        np.exp(u_eps * np.exp(1j * phi / alpha))
        * eps**p
        * np.exp(1j * p * phi)
        / (eps * np.exp(1j * phi) - zz)
    ) @ (mu * _ARC_WEIGHTS)
    arc /= 2.0 * alpha * np.pi

    # rays arg zeta = +-mu, parametrized by u = |zeta|**(1/alpha)
    length = _RAY_DECAY / decay
    npanels = max(int(math.ceil(length / _PANEL_WIDTH)), 1)
    edges = np.linspace(0.0, length, npanels + 1)
    half = 0.5 * (edges[1:] - edges[:-1])
    mid = 0.5 * (edges[1:] + edges[:-1])
    v = (half[:, None] * _PANEL_NODES + mid[:, None]).ravel()
    w = (half[:, None] * _PANEL_WEIGHTS).ravel()

    u = u_eps + v
    rot = np.exp(1j * theta)
    ray_mu = np.exp(1j * mu)
    phase = np.exp(1j * theta * (1.0 - beta)) * ray_mu
    ua = u**alpha
    upper = np.exp(u * rot) * phase / (ua * ray_mu - zz)
    lower = np.exp(u * rot.conjugate()) * phase.conjugate() / (ua * ray_mu.conjugate() - zz)
    rays = (u ** (alpha - beta) * (upper - lower)) @ w / (2j * np.pi)

    integral = arc + rays
    enclosed = (np.abs(np.angle(z)) < mu) & (np.abs(z) > eps[:, 0])
    return integral, enclosed


def _contour(alpha: float, beta: float, z: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    integral = np.empty_like(z)
    enclosed = np.empty(z.shape, dtype=bool)
    mus = _choose_mu(alpha, z)
    for mu in np.unique(mus):
        (idx,) = np.nonzero(mus == mu)
        for start in range(0, idx.size, _CHUNK):
            sel = idx[start : start + _CHUNK]
            integral[sel], enclosed[sel] = _contour_chunk(alpha, beta, z[sel], float(mu))

    return integral, enclosed


def _asymptotic_terms(
    alpha: float, beta: float, z: np.ndarray, p: int | None
) -> tuple[np.ndarray, np.ndarray]:
    r"""Sum :math:`-\sum_k z^{-k}/\Gamma(\beta - \alpha k)`.

    With ``p=None`` the sum is truncated adaptively at the smallest term.
    Returns the sum and the magnitude of the first omitted term.
    """
    total = np.zeros_like(z)
    active = np.ones(z.shape, dtype=bool)
    omitted = np.zeros(z.shape)
    previous = np.full(z.shape, np.inf)
    inv = 1.0 / z
    zk = np.ones_like(z)

    kmax = p if p is not None else 1_000_000
    logz = np.log(np.abs(z))
    for k in range(1, kmax + 2):
        zk = zk * inv
        term = -zk * rgamma(beta - alpha * k)
        mag = np.abs(term)

        if p is not None:
            if k <= p:
                total += term
            else:
                # 1/Gamma can vanish at isolated orders; look one further
                bound = np.abs(zk) * np.maximum(
                    np.abs(rgamma(beta - alpha * k)),
                    np.abs(rgamma(beta - alpha * (k + 1))) / np.abs(z),
                )
                omitted = np.maximum(mag, bound)
            continue

        # |1/Gamma(beta - alpha k)| <= Gamma(1 - beta + alpha k) / pi; the
        # actual terms oscillate, so truncation follows this envelope
        arg = alpha * k + 1.0 - beta
        if arg > 0:
            env = np.exp(gammaln(arg) - k * logz) / np.pi
            env = np.maximum(env, mag)
        else:
            env = mag

        growing = env > previous
        tiny = env <= 0.25 * EPS * np.abs(total)
        stop = active & (growing | tiny)
        omitted[stop] = np.minimum(env[stop], previous[stop])
        active &= ~stop
        if not np.any(active):
            break
        total[active] += term[active]
        previous = env
    else:
        if p is None:
            raise NonConvergence("asymptotic expansion did not reach its smallest term")

    return total, omitted


def _asymptotic(
    alpha: float, beta: float, z: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    algebraic, omitted = _asymptotic_terms(alpha, beta, z, None)

    # the exponential is present up to the Stokes line |arg z| = alpha pi
    angle = np.abs(np.angle(z))
    stokes = min(alpha * np.pi, np.pi)
    weight = np.where(angle < stokes, 1.0, np.where(angle == stokes, 0.5, 0.0))
    expo = exponential_part(alpha, beta, z)

    err = 2.0 * omitted + 4.0 * EPS * np.abs(algebraic)
    near = np.abs(angle - stokes) < 0.1 * stokes
    err = np.where(near, err + np.abs(expo), err)
    # rounding of exp(z^(1/alpha)) grows with the exponent
    rounding = EXP_ROUNDING * EPS * (1.0 + np.abs(z) ** (1.0 / alpha)) * np.abs(expo)
    err = err + np.where(weight > 0, rounding, 0.0)

    return algebraic, weight, err


# }}}


# {{{ vectorized evaluation


def _evaluate(
    alpha: float,
    beta: float,
    z: np.ndarray,
    part: Literal["full", "algebraic"] = "full",
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    z = np.asarray(z, dtype=np.complex128)
    if alpha == 1.0 and beta == 1.0:
        value = np.exp(z)
        expo = value if part == "full" else np.zeros_like(z)
        return expo, np.zeros(z.shape, dtype=np.int8), EPS * np.abs(value)

    shape = z.shape
    z = z.ravel()

    value = np.empty_like(z)
    err = np.empty(z.shape)
    method = np.empty(z.shape, dtype=np.int8)

    x = np.abs(z) ** (1.0 / alpha)
    is_series = x <= SERIES_MAX_X
    is_asym = x >= ASYMPTOTIC_MIN_X
    is_contour = ~(is_series | is_asym)

    with np.errstate(over="ignore", invalid="ignore"):
        if np.any(is_series):
            zs = z[is_series]
            e, de = _series(alpha, beta, zs)
            if part == "algebraic":
                e = e - exponential_part(alpha, beta, zs)
            value[is_series], err[is_series] = e, de
            method[is_series] = 0

        if np.any(is_contour):
            zc = z[is_contour]
            integral, enclosed = _contour(alpha, beta, zc)
            expo = exponential_part(alpha, beta, zc)
            if part == "full":
                v = np.where(enclosed, integral + expo, integral)
            else:
                v = np.where(enclosed, integral, integral - expo)
            value[is_contour] = v
            err[is_contour] = CONTOUR_REL_ERROR * np.abs(integral) + EPS * x[
                is_contour
            ] * np.abs(np.where(enclosed, expo, 0.0))
            method[is_contour] = 1

        if np.any(is_asym):
            za = z[is_asym]
            algebraic, weight, de = _asymptotic(alpha, beta, za)
            if part == "full":
                expo = exponential_part(alpha, beta, za)
                v = algebraic + np.where(weight > 0, weight * expo, 0.0)
            else:
                v = algebraic
                if np.any(weight < 1):
                    expo = exponential_part(alpha, beta, za)
                    v = v - np.where(weight < 1, (1 - weight) * expo, 0.0)
            value[is_asym] = v
            err[is_asym] = de
            method[is_asym] = np.where(weight > 0, 2, 3)

    return value.reshape(shape), method.reshape(shape), err.reshape(shape)


def mittag_leffler(z: np.ndarray | complex, alpha: float, beta: float = 1.0) -> np.ndarray:
    """Vectorized :math:`E_{\\alpha,\\beta}(z)` for ``0 < alpha <= 1``.

    Values too large for double precision come back as ``inf``; use
    :func:`ml_eval` for a checked scalar evaluation.
    """
    value, _, _ = _evaluate(alpha, beta, np.asarray(z), "full")
    return value


def ml_algebraic_part(
    z: np.ndarray | complex, alpha: float, beta: float = 1.0
) -> np.ndarray:
    """Vectorized :math:`E_{\\alpha,\\beta}(z)` minus its exponential part.

    The exponential part is :func:`exponential_part`. The difference is bounded
    for large ``|z|`` in every direction, and it is computed without
    subtracting two large numbers.
    """
    value, _, _ = _evaluate(alpha, beta, np.asarray(z), "algebraic")
    return value


# }}}


# {{{ scalar operations


def ml_eval(params: MLParams, z: complex) -> MLValue:
    """Evaluate :math:`E_{\\alpha,\\beta}(z)`, picking the most accurate method."""
    value, method, err = _evaluate(params.alpha, params.beta, np.array([z]), "full")
    return MLValue(complex(value[0]), _METHODS[int(method[0])], float(err[0]))


def ml_series(
    params: MLParams,
    z: complex,
    tol: float = 1.0e-16,
    *,
    max_terms: int = 500,
) -> MLValue:
    """Sum the power series in arbitrary precision.

    The working precision is raised to absorb the cancellation between the
    largest term and the result. Terms are added until the geometric tail
    bound of the remaining terms is below ``tol * |sum|``.

    :raises NonConvergence: if ``max_terms`` terms do not certify the tail.
    """
    if tol <= 0:
        raise ValidationError(f"'tol' must be positive: got {tol}")

    z = complex(z)
    alpha, beta = params.alpha, params.beta
    if z == 0:
        return MLValue(complex(float(rgamma(beta))), MLMethod.SERIES, 0.0)

    # the tail bound below needs alpha (n + 1) + beta > |z|^(1/alpha) + 1
    needed = (abs(z) ** (1.0 / alpha) + 1.0 - beta) / alpha + 3
    if needed > max_terms:
        raise NonConvergence(
            f"series for E_{{{alpha},{beta}}}({z}) needs about {needed:.0f} terms "
            f"(max_terms = {max_terms})"
        )

    # magnitude of the largest term, to size the working precision
    k = np.arange(max_terms)
    with np.errstate(divide="ignore"):
        logterm = k * math.log(abs(z)) - gammaln(alpha * k + beta)
    logterm = logterm[np.isfinite(logterm)]
    digits = max(0.0, float(np.max(logterm)) / math.log(10.0)) if logterm.size else 0.0
    dps = int(25 + digits + math.log10(1.0 + abs(z)) - math.log10(tol) / 2)

    with mpmath.workdps(dps):
        a = mpmath.mpf(alpha)
        b = mpmath.mpf(beta)
        zm = mpmath.mpc(z.real, z.imag)
        total = mpmath.mpc(0)
        zk = mpmath.mpc(1)
        tail = None
        log_abs_z = math.log(abs(z))
        log_tol = math.log(tol)
        for n in range(max_terms):
            term = zk * mpmath.rgamma(a * n + b)
            total += term
            zk *= zm

            # ratio of consecutive term bounds decreases once past the peak;
            # the bound only needs double precision, done in logarithms
            arg = alpha * (n + 1) + beta
            if n > 2 and arg > 1 and abs(z) ** (1.0 / alpha) < arg - 1:
                log_next = (n + 1) * log_abs_z - gammaln(arg)
                ratio = math.exp(log_abs_z + gammaln(arg) - gammaln(arg + alpha))
                if ratio < 1 and total != 0:
                    log_bound = log_next - math.log1p(-ratio)
                    if log_bound <= log_tol + float(mpmath.log(abs(total))):
                        tail = math.exp(log_bound)
                        break
        else:
            raise NonConvergence(
                f"series for E_{{{alpha},{beta}}}({z}) not certified "
                f"within {max_terms} terms"
            )

        value = complex(total)

    return MLValue(value, MLMethod.SERIES, tail + EPS * abs(value))


def ml_asymptotic(
    params: MLParams,
    z: complex,
    p: int = 5,
    *,
    threshold: float = 1.0,
    constant: float | None = None,
) -> MLValue:
    """Large-argument expansion with ``p`` algebraic terms.

    Inside the sector ``|arg z| <= mu`` the exponential term is included.
    The error estimate is ``constant * |z|**(-1 - p)``. The default constant is
    twice the largest of the next two coefficients ``1/Gamma(beta - alpha k)``.
    Outside the sector the size of the dropped exponential is added.

    :raises DomainError: if ``|z| < threshold``.
    """
    if p < 1:
        raise ValidationError(f"'p' must be >= 1: got {p}")

    z = complex(z)
    if abs(z) < threshold:
        raise DomainError(f"|z| = {abs(z):.6g} is below the asymptotic threshold {threshold}")

    alpha, beta = params.alpha, params.beta
    assert params.mu is not None

    zarr = np.array([z])
    algebraic, _ = _asymptotic_terms(alpha, beta, zarr, p)
    if constant is None:
        constant = 2.0 * max(
            abs(float(rgamma(beta - alpha * (p + 1)))),
            abs(float(rgamma(beta - alpha * (p + 2)))),
        )

    err = constant * abs(z) ** (-1.0 - p)
    expo = complex(exponential_part(alpha, beta, zarr)[0])
    if abs(np.angle(z)) <= params.mu:
        value = complex(algebraic[0]) + expo
        method = MLMethod.ASYMPTOTIC_SECTOR
        err += EXP_ROUNDING * EPS * (1.0 + abs(z) ** (1.0 / alpha)) * abs(expo)
    else:
        value = complex(algebraic[0])
        method = MLMethod.ASYMPTOTIC_EXTERIOR
        if abs(np.angle(z)) < alpha * np.pi:
            # dropped, but exponentially small between mu and the Stokes line
            err += abs(expo)

    return MLValue(value, method, err)


def _deriv_series(alpha: float, beta: float, z: complex, k: int) -> tuple[complex, float]:
    total = 0.0j
    magnitude = 0.0
    zn = 1.0 + 0.0j
    x = abs(z) ** (1.0 / alpha)
    n_min = int((x + 2.0 - beta) / alpha) + k + 2
    for n in range(k, 10_000):
        coeff = math.exp(gammaln(n + 1) - gammaln(n - k + 1)) * float(rgamma(alpha * n + beta))
        term = coeff * zn
        total += term
        magnitude += abs(term)
        if n > n_min and abs(term) <= 0.25 * EPS * magnitude:
            break
        zn *= z
    else:
        raise NonConvergence("differentiated series did not converge")

    return total, 8.0 * EPS * magnitude


def ml_deriv(params: MLParams, z: complex, k: int) -> MLValue:
    r"""``k``-th derivative of :math:`E_{\alpha,\beta}` with respect to ``z``.

    Small arguments use the term-wise differentiated series. Elsewhere the
    recurrence

    .. math::

        z E^{(k)}_{\alpha,\beta}
            = \tfrac{1}{\alpha}\big(E^{(k-1)}_{\alpha,\beta-1}
              - (\beta - 1) E^{(k-1)}_{\alpha,\beta}\big)
              - (k - 1) E^{(k-1)}_{\alpha,\beta}

    is applied to values from :func:`ml_eval`, which use the large-argument
    expansion once ``|z|`` is large.
    """
    if k < 0:
        raise ValidationError(f"'k' must be non-negative: got {k}")
    if k == 0:
        return ml_eval(params, z)

    alpha, beta = params.alpha, params.beta
    z = complex(z)
    if z == 0:
        value = math.factorial(k) * float(rgamma(alpha * k + beta))
        return MLValue(complex(value), MLMethod.DERIVATIVE_LIMIT, EPS * abs(value))

    if abs(z) ** (1.0 / alpha) <= SERIES_MAX_X:
        value, err = _deriv_series(alpha, beta, z, k)
        return MLValue(value, MLMethod.SERIES, err)

    # table[j] holds the current derivative of E_{alpha, beta - j}
    zarr = np.array([z])
    table = []
    errs = []
    method = MLMethod.INTEGRAL
    for j in range(k + 1):
        v, m, e = _evaluate(alpha, beta - j, zarr)
        table.append(complex(v[0]))
        errs.append(float(e[0]))
        if j == 0:
            method = _METHODS[int(m[0])]

    for order in range(1, k + 1):
        new_table = []
        new_errs = []
        for j in range(k + 1 - order):
            b = beta - j
            num = (table[j + 1] - (b - 1) * table[j]) / alpha - (order - 1) * table[j]
            new_table.append(num / z)
            new_errs.append(
                ((errs[j + 1] + abs(b - 1) * errs[j]) / alpha + (order - 1) * errs[j])
                / abs(z)
            )
        table, errs = new_table, new_errs

    return MLValue(table[0], method, errs[0])


def _split_blocks(m: np.ndarray) -> list[tuple[int, int]]:
    d = m.shape[0]
    blocks = []
    start = 0
    for i in range(d - 1):
        if m[i, i + 1] == 0:
            blocks.append((start, i + 1))
            start = i + 1
    blocks.append((start, d))

    for lo, hi in blocks:
        block = m[lo:hi, lo:hi]
        size = hi - lo
        lam = block[0, 0]
        c = block[0, 1] if size > 1 else 0.0
        expected = lam * np.eye(size) + c * np.eye(size, k=1)
        if not np.array_equal(block, expected):
            raise ShapeError(f"block [{lo}:{hi}] is not of the form lambda*I + c*N")

    mask = np.zeros_like(m, dtype=bool)
    for lo, hi in blocks:
        mask[lo:hi, lo:hi] = True
    if np.any(m[~mask] != 0):
        raise ShapeError("matrix is not block diagonal")

    return blocks


def ml_matrix(params: MLParams, t: float, m: np.ndarray) -> np.ndarray:
    r"""Matrix function :math:`E_{\alpha,\beta}(t^\alpha M)` for block matrices.

    ``M`` must be block diagonal with blocks ``lambda I + c N`` (``N`` the
    nilpotent shift). On such a block the result is upper triangular Toeplitz
    with ``j``-th superdiagonal :math:`(c t^\alpha)^j E^{(j)}_{\alpha,\beta}(\lambda t^\alpha) / j!`.

    :raises ShapeError: if ``M`` is not square or not of block form.
    """
    m = np.asarray(m, dtype=np.complex128)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ShapeError(f"expected a square matrix: got shape {m.shape}")
    if t < 0:
        raise ValidationError(f"'t' must be non-negative: got {t}")

    d = m.shape[0]
    out = np.zeros((d, d), dtype=np.complex128)
    ta = t**params.alpha
    for lo, hi in _split_blocks(m):
        size = hi - lo
        lam = m[lo, lo]
        c = m[lo, lo + 1] if size > 1 else 0.0
        for j in range(size):
            if j > 0 and (c == 0 or ta == 0):
                break
            dj = ml_deriv(params, lam * ta, j).value
            coeff = (c * ta) ** j / math.factorial(j) * dj
            idx = np.arange(lo, hi - j)
            out[idx, idx + j] = coeff

    return out


def ml_sup_stable(
    params: MLParams,
    lam: complex,
    *,
    n: int = 100_000,
) -> float:
    r"""Supremum over ``t >= 0`` of :math:`|E_\alpha(\lambda t^\alpha)|`.

    The supremum is located by a log-spaced scan of ``s = t^alpha`` followed by
    a bounded local refinement around the best node. The scan ends where the
    large-argument bound :math:`2/(|z|\,|\Gamma(1-\alpha)|)` drops below one,
    which certifies that the far tail cannot exceed the value at ``t = 0``.

    :raises DomainError: if ``lambda`` is not in the stable sector.
    """
    if params.beta != 1.0:
        raise ValidationError("ml_sup_stable requires beta = 1")

    alpha = params.alpha
    lam = complex(lam)
    if lam == 0 or abs(np.angle(lam)) <= 0.5 * alpha * np.pi:
        raise DomainError(f"eigenvalue {lam} is not in the stable sector")

    # tail certificate: |E| <= 2 / (|z| |Gamma(1 - alpha)|) for large |z|
    g = abs(float(rgamma(1.0 - alpha))) if alpha < 1 else 0.0
    z_tail = max(1.0e4, 4.0 * g + 1.0)
    s_max = z_tail / abs(lam)

    s = np.concatenate([[0.0], np.logspace(-8, math.log10(s_max), n - 1)])
    values = np.abs(mittag_leffler(lam * s, alpha, 1.0))
    i = int(np.argmax(values))
    best = float(values[i])

    if 0 < i < s.size - 1:
        res = minimize_scalar(
            lambda x: -abs(complex(mittag_leffler(lam * x, alpha, 1.0))),
            bounds=(float(s[i - 1]), float(s[i + 1])),
            method="bounded",
            options={"xatol": 1.0e-12 * max(float(s[i]), 1.0e-300)},
        )
        best = max(best, float(-res.fun))

    return max(1.0, best)


# }}}
