r"""Lyapunov-Perron operator for the stable manifold of a fractional system.

In Jordan coordinates :math:`D^\alpha y = J y + h(y)` with
:math:`J = \operatorname{diag}(\lambda_i)`, a bounded solution starting at
:math:`(w, x^s)` is a fixed point of

.. math::

    (T_{x^s}\xi)_i(t) = E_\alpha(\lambda_i t^\alpha) x^s_i
        + \int_0^t K_{\lambda_i}(t-\tau) h_i(\xi(\tau))\,d\tau

for stable coordinates and of

.. math::

    (T_{x^s}\xi)_i(t) = \int_0^t K_{\lambda_i}(t-\tau) h_i(\xi(\tau))\,d\tau
        - \lambda_i^{1/\alpha-1} E_\alpha(\lambda_i t^\alpha)
          \int_0^\infty e^{-\lambda_i^{1/\alpha}\tau} h_i(\xi(\tau))\,d\tau

for unstable ones. The graph of the stable manifold is :math:`w(x^s) = \xi^*_u(0)`.

The unstable rows are assembled from bounded pieces only (see
:mod:`fracmanifold.quadrature`), so the discrete operator is a fixed matrix
per eigenvalue, ``xi_new = b * x^s + W @ h(xi)``.
"""

from __future__ import annotations

import logging
import math
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from fracmanifold.errors import (
    NoConvergence,
    NoValidRadius,
    Unbounded,
    ValidationError,
)
from fracmanifold.mittag_leffler import MLParams, mittag_leffler, ml_sup_stable
from fracmanifold.quadrature import (
    GridSpec,
    abs_kernel_profile,
    convolution_weights,
    exponential_tail_weights,
    make_grid,
    remainder_r1,
)
from fracmanifold.spectral import TransformedSystem

logger = logging.getLogger(__name__)

#: default number of graded intervals
DEFAULT_N = 256
#: graded part covers ``GRADED_SCALE`` time units of the fastest eigenvalue
GRADED_SCALE = 12.0
#: stable solutions must decay below this before the horizon
HORIZON_TOL = 1.0e-6
HORIZON_CAP = 1.0e8
#: fixed-point tolerance relative to ``r_star``
ITER_TOL_REL = 1.0e-9
#: contraction factor guaranteed by the radius choice
CONTRACTION = 2.0 / 3.0
#: growth factor ending the forward residual window along unstable directions
RESIDUAL_GROWTH = 4.0


# {{{ data types


@dataclass(frozen=True)
class TrajectoryGrid:
    """A bounded function of time sampled on a grid.

    Values between nodes are linear; beyond the last node they follow the
    algebraic decay ``(t / t_N)**(-alpha)`` of stable linear solutions.
    """

    times: np.ndarray
    values: np.ndarray
    alpha: float
    iterations: int = 0
    increment: float = 0.0

    def __post_init__(self) -> None:
        if self.times[0] != 0:
            raise ValidationError("trajectory grid must start at t = 0")
        if self.values.shape[0] != self.times.size:
            raise ValidationError(
                f"{self.values.shape[0]} values for {self.times.size} nodes"
            )

    @property
    def sup_norm(self) -> float:
        return float(np.max(np.abs(self.values))) if self.values.size else 0.0

    def at(self, t: np.ndarray) -> np.ndarray:
        """Evaluate at arbitrary times (shape ``(n,)`` to ``(n, d)``)."""
        t = np.atleast_1d(np.asarray(t, dtype=np.float64))
        out = np.empty((t.size, self.values.shape[1]), dtype=self.values.dtype)
        for i in range(self.values.shape[1]):
            out[:, i] = np.interp(t, self.times, self.values[:, i].real)
            if np.iscomplexobj(self.values):
                out[:, i] += 1j * np.interp(t, self.times, self.values[:, i].imag)

        beyond = t > self.times[-1]
        if np.any(beyond):
            decay = (t[beyond] / self.times[-1]) ** (-self.alpha)
            out[beyond] = decay[:, None] * self.values[-1]
        return out


@dataclass(frozen=True)
class OperatorConfig:
    """Radii and discretization of the Lyapunov-Perron iteration."""

    C_est: float
    delta: float
    r_star: float
    r: float
    ml_sup: float
    grid: GridSpec
    T_tail: float
    iter_tol: float
    system: TransformedSystem | None = field(default=None, compare=False, repr=False)

    def __post_init__(self) -> None:
        if not self.C_est > 0:
            raise ValidationError(f"'C_est' must be positive: got {self.C_est}")
        if not math.isclose(self.delta * self.C_est, 1.0 / 3.0, rel_tol=1.0e-12):
            raise ValidationError("'delta' must equal 1 / (3 C_est)")
        if not math.isclose(self.r, self.r_star / (3.0 * self.ml_sup), rel_tol=1.0e-12):
            raise ValidationError("'r' must equal r_star / (3 ml_sup)")
        if self.iter_tol <= 0:
            raise ValidationError(f"'iter_tol' must be positive: got {self.iter_tol}")

    @property
    def T_horizon(self) -> float:
        return self.grid.t_horizon

    @property
    def N(self) -> int:
        return self.grid.n

    @property
    def times(self) -> np.ndarray:
        return _grid_times(self.grid)


@dataclass(frozen=True)
class ManifoldGraph:
    """Samples ``(x^s, w(x^s))`` of the stable manifold in Jordan coordinates."""

    x_s: np.ndarray
    w: np.ndarray
    iterations: np.ndarray
    residuals: np.ndarray
    r: float
    r_star: float
    lipschitz_bound: float
    iter_tol: float

    @property
    def points(self) -> np.ndarray:
        """Full points ``(w, x^s)`` (unstable coordinates first)."""
        return np.hstack([self.w, self.x_s])

    def lipschitz_violations(self) -> int:
        """Number of sample pairs breaking the graph Lipschitz bound."""
        if len(self.x_s) < 2:
            return 0
        dx = np.max(np.abs(self.x_s[:, None, :] - self.x_s[None, :, :]), axis=-1)
        dw = (
            np.max(np.abs(self.w[:, None, :] - self.w[None, :, :]), axis=-1)
            if self.w.shape[1]
            else np.zeros_like(dx)
        )
        return int(np.sum(dw > self.lipschitz_bound * dx + 2 * self.iter_tol))


# }}}


# {{{ discretization


_CACHE: dict[tuple, tuple[np.ndarray, np.ndarray]] = {}
_CACHE_LOCK = threading.Lock()


def _grid_times(spec: GridSpec) -> np.ndarray:
    key = ("grid", spec)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key][0]
    t = make_grid(spec)
    t.setflags(write=False)
    with _CACHE_LOCK:
        _CACHE.setdefault(key, (t, t))
        return _CACHE[key][0]


def _row_operator(alpha: float, lam: complex, spec: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Return ``(b, W)`` such that the row for eigenvalue ``lam`` is ``b x + W g``."""
    key = ("row", alpha, complex(lam), spec)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key]

    t = _grid_times(spec)
    lam = complex(lam)
    if abs(np.angle(lam)) > 0.5 * alpha * np.pi:
        b = mittag_leffler(lam * t**alpha, alpha, 1.0)
        W = convolution_weights(alpha, lam, t)
    else:
        kappa = lam ** (1.0 / alpha)
        c = lam ** (1.0 / alpha - 1.0)
        U = exponential_tail_weights(kappa, t)
        R2 = convolution_weights(alpha, lam, t, remainder=True)
        R1 = remainder_r1(alpha, lam, t)
        W = -(c / alpha) * U + R2 - c * np.outer(R1, U[0])
        b = np.zeros(t.size, dtype=np.complex128)

    b.setflags(write=False)
    W.setflags(write=False)
    logger.debug("built operator row: alpha %g lambda %s on %d nodes", alpha, lam, t.size)
    with _CACHE_LOCK:
        _CACHE.setdefault(key, (b, W))
        return _CACHE[key]


def clear_cache() -> None:
    with _CACHE_LOCK:
        _CACHE.clear()


def default_grid(
    alpha: float, eigenvalues: np.ndarray, n: int = DEFAULT_N, *, t_horizon: float | None = None
) -> GridSpec:
    """Grid resolving the fastest eigenvalue and the slowest stable decay.

    The graded part spans ``GRADED_SCALE / max |lambda|**(1/alpha)``. The
    horizon is the first time where every stable ``|E_alpha(lambda t^alpha)|``
    has dropped below ``HORIZON_TOL`` (capped at ``HORIZON_CAP``).
    """
    lams = np.asarray(eigenvalues, dtype=np.complex128)
    kappa = np.abs(lams) ** (1.0 / alpha)
    t_graded = GRADED_SCALE / float(np.max(kappa))

    if t_horizon is None:
        t_horizon = 4.0 * t_graded
        for lam in lams[np.abs(np.angle(lams)) > 0.5 * alpha * np.pi]:
            t = t_graded
            while t < HORIZON_CAP:
                ts = t * np.geomspace(1.0, 4.0, 64)
                vals = np.abs(mittag_leffler(lam * ts**alpha, alpha))
                # monotone envelope: check the whole remaining window
                if np.all(vals < HORIZON_TOL):
                    break
                t *= 4.0
            t_horizon = max(t_horizon, min(t, HORIZON_CAP))

    return GridSpec(alpha, n, t_graded, max(t_horizon, t_graded))


def _tail_time(alpha: float, eigenvalues: np.ndarray) -> float:
    lams = np.asarray(eigenvalues, dtype=np.complex128)
    unstable = lams[np.abs(np.angle(lams)) < 0.5 * alpha * np.pi]
    if unstable.size == 0:
        return 0.0
    re = float(np.min((unstable ** (1.0 / alpha)).real))
    return math.log(1.0e12) / re


def apply_lp(
    xi: TrajectoryGrid,
    x_s: np.ndarray,
    tsys: TransformedSystem,
    cfg: OperatorConfig,
    *,
    guard: float | None = None,
) -> TrajectoryGrid:
    """Evaluate the discretized operator ``T_{x^s} xi`` at all grid nodes.

    :raises Unbounded: if a value exceeds ``guard`` (default ``1e6 r_star``).
    """
    t = cfg.times
    if xi.times.shape != t.shape or not np.array_equal(xi.times, t):
        raise ValidationError("trajectory grid does not match the operator grid")

    x_s = np.atleast_1d(np.asarray(x_s, dtype=np.complex128))
    if x_s.shape != (tsys.d_s,):
        raise ValidationError(f"'x_s' must have {tsys.d_s} components: got {x_s.shape}")

    g = tsys.h(xi.values.astype(np.complex128))
    out = np.empty((t.size, tsys.d), dtype=np.complex128)
    for i, lam in enumerate(tsys.eigenvalues):
        b, W = _row_operator(tsys.alpha, lam, cfg.grid)
        out[:, i] = W @ g[:, i]
        if i >= tsys.d_u:
            out[:, i] += b * x_s[i - tsys.d_u]

    limit = 1.0e6 * cfg.r_star if guard is None else guard
    if not np.all(np.isfinite(out)) or np.max(np.abs(out)) > limit:
        raise Unbounded(
            f"operator image has norm {np.max(np.abs(out)):.3g} > guard {limit:.3g}"
        )

    return TrajectoryGrid(t, out, tsys.alpha)


# }}}


# {{{ contraction constant


def _stable_constant(alpha: float, lam: complex) -> float:
    _, cumulative, tail = abs_kernel_profile(alpha, lam)
    return float(cumulative[-1] + tail)


def _unstable_constant(alpha: float, lam: complex) -> float:
    kappa = lam ** (1.0 / alpha)
    c = abs(lam ** (1.0 / alpha - 1.0))
    s, cumulative, tail = abs_kernel_profile(alpha, lam, remainder=True)
    r1 = np.abs(remainder_r1(alpha, lam, s))
    profile = cumulative + c * r1 / kappa.real
    # |R_1| decays algebraically, so the sup is attained on the scanned range
    return float(c / (alpha * kappa.real) + np.max(profile) + tail)


def estimate_contraction_constant(
    alpha: float,
    lambdas: np.ndarray,
    split: object | None = None,
    *,
    grid: GridSpec | None = None,
) -> float:
    r"""Upper bound for the Lipschitz amplification of the operator per unit :math:`\ell_h`.

    Stable rows contribute :math:`\int_0^\infty |K_\lambda|`. Unstable rows
    contribute the bound of their three bounded pieces,

    .. math::

        \frac{|\lambda^{1/\alpha-1}|}{\alpha\,\mathrm{Re}\,\kappa}
        + \sup_t \Big(\int_0^t |R_2| + \frac{|\lambda^{1/\alpha-1}|\,|R_1(t)|}{\mathrm{Re}\,\kappa}\Big).

    With ``grid`` the maximal absolute row sum of the discrete operator is
    included as well, so the estimate also bounds the discretization.
    """
    del split
    lams = np.unique(np.asarray(lambdas, dtype=np.complex128))
    C = 0.0
    for lam in lams:
        lam = complex(lam)
        if abs(np.angle(lam)) > 0.5 * alpha * np.pi:
            C = max(C, _stable_constant(alpha, lam))
        else:
            C = max(C, _unstable_constant(alpha, lam))

        if grid is not None:
            _, W = _row_operator(alpha, lam, grid)
            C = max(C, float(np.max(np.sum(np.abs(W), axis=1))))

    return C


# }}}


# {{{ radii


def stable_ml_sup(alpha: float, eigenvalues: np.ndarray) -> float:
    params = MLParams(alpha, 1.0)
    lams = np.unique(np.asarray(eigenvalues, dtype=np.complex128))
    stable = [complex(lam) for lam in lams if abs(np.angle(lam)) > 0.5 * alpha * np.pi]
    return max([1.0] + [ml_sup_stable(params, lam) for lam in stable])


def choose_radii(
    tsys: TransformedSystem,
    C_est: float,
    *,
    grid: GridSpec | None = None,
    r_min: float = 1.0e-8,
    r_max: float = 1.0,
    iter_tol_rel: float = ITER_TOL_REL,
) -> OperatorConfig:
    """Pick ``delta``, ``r_star`` and ``r`` for a contraction with factor 2/3.

    ``delta = 1 / (3 C_est)`` is applied to the Jordan rescaling and ``h`` is
    rebuilt (available as ``cfg.system``). ``r_star`` is the largest radius in
    ``[r_min, r_max]`` with ``C_est * lip(h, r_star) <= 2/3`` (bisection), and
    ``r = r_star / (3 ml_sup)``.

    :raises NoValidRadius: if even ``r_min`` violates the condition.
    """
    if not C_est > 0:
        raise ValidationError(f"'C_est' must be positive: got {C_est}")

    delta = 1.0 / (3.0 * C_est)
    system = tsys.with_delta(delta)
    h = system.h

    def ok(r: float) -> bool:
        return h.is_zero or C_est * h.lipschitz_on_ball(r) <= CONTRACTION

    if not ok(r_min):
        raise NoValidRadius(
            f"C_est * lip(h, {r_min:g}) = {C_est * h.lipschitz_on_ball(r_min):.3g} > 2/3"
        )

    if ok(r_max):
        r_star = r_max
    else:
        lo, hi = r_min, r_max
        for _ in range(200):
            mid = math.sqrt(lo * hi) if hi / lo > 4 else 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
            if hi - lo <= 1.0e-14 * hi:
                break
        r_star = lo

    ml_sup = stable_ml_sup(system.alpha, system.eigenvalues)
    if grid is None:
        grid = default_grid(system.alpha, system.eigenvalues)

    return OperatorConfig(
        C_est=C_est,
        delta=delta,
        r_star=r_star,
        r=r_star / (3.0 * ml_sup),
        ml_sup=ml_sup,
        grid=grid,
        T_tail=_tail_time(system.alpha, system.eigenvalues),
        iter_tol=iter_tol_rel * r_star,
        system=system,
    )


def measure_contraction(
    tsys: TransformedSystem,
    cfg: OperatorConfig,
    *,
    n_pairs: int = 100,
    seed: int = 0,
) -> float:
    """Largest observed ``|T xi - T xi'| / |xi - xi'|`` over random pairs in ``B(0, r_star)``.

    Half of the pairs are smooth (random combinations of decaying profiles),
    half are independent node values. ``x^s`` is drawn from ``B(0, r)``.
    """
    rng = np.random.default_rng(seed)
    t = cfg.times
    d = tsys.d
    real = tsys.original.is_real and np.all(np.isreal(tsys.splitting.TP))

    def sample(shape: tuple[int, ...], radius: float) -> np.ndarray:
        v = rng.uniform(-1.0, 1.0, shape)
        if not real:
            v = v + 1j * rng.uniform(-1.0, 1.0, shape)
            v = v / np.sqrt(2.0)
        return radius * v

    def random_path(smooth: bool) -> np.ndarray:
        if not smooth:
            return sample((t.size, d), cfg.r_star)
        scales = np.geomspace(t[1], t[-1], 6)
        shapes = np.exp(-t[:, None] / scales[None, :])
        coeff = sample((scales.size, d), 1.0)
        path = shapes @ coeff
        return cfg.r_star * path / max(np.max(np.abs(path)), 1.0e-300)

    worst = 0.0
    for k in range(n_pairs):
        smooth = k % 2 == 0
        xi = TrajectoryGrid(t, random_path(smooth), tsys.alpha)
        xj = TrajectoryGrid(t, random_path(smooth), tsys.alpha)
        x_s = sample((tsys.d_s,), cfg.r)

        diff = np.max(np.abs(xi.values - xj.values))
        if diff == 0:
            continue
        Ti = apply_lp(xi, x_s, tsys, cfg).values
        Tj = apply_lp(xj, x_s, tsys, cfg).values
        worst = max(worst, float(np.max(np.abs(Ti - Tj)) / diff))

    return worst


# }}}


# {{{ fixed point


def fixed_point(
    x_s: np.ndarray,
    tsys: TransformedSystem,
    cfg: OperatorConfig,
    *,
    max_iter: int = 1000,
    sample: int | None = None,
) -> TrajectoryGrid:
    """Iterate ``xi <- T_{x^s} xi`` from ``xi = 0`` until the update is below ``iter_tol``.

    :raises NoConvergence: if the update ratio stays above 0.95 for five
        consecutive iterations, or ``max_iter`` is exceeded.
    """
    x_s = np.atleast_1d(np.asarray(x_s, dtype=np.complex128))
    if x_s.shape != (tsys.d_s,):
        raise ValidationError(f"'x_s' must have {tsys.d_s} components: got {x_s.shape}")
    if np.max(np.abs(x_s), initial=0.0) > cfg.r * (1 + 1.0e-12):
        raise ValidationError(
            f"|x_s| = {np.max(np.abs(x_s)):.6g} exceeds the radius r = {cfg.r:.6g}"
        )

    t = cfg.times
    xi = TrajectoryGrid(t, np.zeros((t.size, tsys.d), dtype=np.complex128), tsys.alpha)
    previous = math.inf
    slow = 0
    for it in range(1, max_iter + 1):
        new = apply_lp(xi, x_s, tsys, cfg)
        increment = float(np.max(np.abs(new.values - xi.values)))
        xi = new

        if increment <= cfg.iter_tol:
            return replace(xi, iterations=it, increment=increment)

        ratio = increment / previous if previous > 0 else 0.0
        slow = slow + 1 if ratio > 0.95 else 0
        if slow >= 5:
            raise NoConvergence(
                f"update ratio {ratio:.3g} stayed above 0.95 (sample {sample})",
                sample=sample,
            )
        previous = increment

    raise NoConvergence(
        f"no convergence in {max_iter} iterations (sample {sample})", sample=sample
    )


def _forward_weights(alpha: float, lam: complex, spec: GridSpec, m: int) -> np.ndarray:
    """Forward convolution weights on the first ``m`` nodes of the operator grid."""
    key = ("forward", alpha, complex(lam), spec, m)
    with _CACHE_LOCK:
        if key in _CACHE:
            return _CACHE[key][1]
    W = convolution_weights(alpha, lam, _grid_times(spec)[:m])
    W.setflags(write=False)
    with _CACHE_LOCK:
        _CACHE.setdefault(key, (W, W))
        return _CACHE[key][1]


def residual_window(tsys: TransformedSystem, max_growth: float = RESIDUAL_GROWTH) -> float:
    """End of the window where forward residuals are meaningful.

    Along an unstable direction the forward formula multiplies any error in
    ``xi(0)`` by ``|E_alpha(lambda t^alpha)| ~ exp(Re kappa t)``. The window
    ends where this factor reaches ``max_growth``.
    """
    unstable = tsys.eigenvalues[: tsys.d_u]
    if unstable.size == 0:
        return math.inf
    re = float(np.max((unstable ** (1.0 / tsys.alpha)).real))
    return math.log(max_growth) / re


def fixed_point_residual(
    xi: TrajectoryGrid,
    tsys: TransformedSystem,
    cfg: OperatorConfig,
    *,
    times: np.ndarray | None = None,
    max_growth: float = RESIDUAL_GROWTH,
) -> float:
    r"""Variation-of-constants residual of ``xi`` in Jordan coordinates.

    Checks

    .. math::

        \xi(t) = E_\alpha(J t^\alpha)\xi(0)
            + \int_0^t K_J(t-\tau) h(\xi(\tau))\,d\tau

    in the max norm on the nodes inside :func:`residual_window`. By default
    the nodes are those of ``xi``; with ``times`` the piecewise-linear
    interpolant of ``xi`` is checked on that grid instead, which measures the
    discretization error of ``xi`` rather than the iteration error.
    """
    t_end = residual_window(tsys, max_growth)
    own = times is None
    t = xi.times if own else np.asarray(times, dtype=np.float64)
    m = int(np.searchsorted(t, t_end, side="right"))
    m = max(2, min(m, t.size))
    t = t[:m]

    y = xi.values[:m] if own else xi.at(t)
    g = tsys.h(y.astype(np.complex128))
    r = np.empty(y.shape, dtype=np.complex128)
    for i, lam in enumerate(tsys.eigenvalues):
        lam = complex(lam)
        if own:
            W = _forward_weights(tsys.alpha, lam, cfg.grid, m)
        else:
            W = convolution_weights(tsys.alpha, lam, t)
        E = mittag_leffler(lam * t**tsys.alpha, tsys.alpha, 1.0)
        r[:, i] = y[:, i] - E * y[0, i] - W @ g[:, i]

    return float(np.max(np.abs(r)))


def _default_samples(d_s: int, r: float, n: int, seed: int) -> np.ndarray:
    if d_s == 1:
        m = n if n % 2 == 1 else n + 1
        return np.linspace(-r, r, m)[:, None]
    rng = np.random.default_rng(seed)
    pts = rng.uniform(-r, r, (max(n - 1, 0), d_s))
    return np.vstack([np.zeros((1, d_s)), pts])


def _thread_count() -> int:
    value = os.environ.get("FRACMANIFOLD_THREADS", "1")
    try:
        return max(1, int(value))
    except ValueError:
        raise ValidationError(f"FRACMANIFOLD_THREADS must be an integer: got {value!r}")


def manifold_graph(
    tsys: TransformedSystem,
    cfg: OperatorConfig,
    samples: np.ndarray | int = 21,
    *,
    seed: int = 0,
    residuals: bool = True,
) -> ManifoldGraph:
    """Sample ``w(x^s) = xi*_u(0)`` on a set of stable coordinates.

    ``samples`` is an array of shape ``(n, d_s)`` in ``B(0, r)``, or a count.
    For a count the samples are an odd uniform grid when ``d_s = 1`` and
    seeded uniform points otherwise; the origin is always included. Samples
    run on up to ``FRACMANIFOLD_THREADS`` threads; the result does not depend
    on the thread count.
    """
    if isinstance(samples, (int, np.integer)):
        pts = _default_samples(tsys.d_s, cfg.r, int(samples), seed)
    else:
        pts = np.asarray(samples).reshape(-1, tsys.d_s)
        if not np.any(np.all(pts == 0, axis=1)):
            pts = np.vstack([np.zeros((1, tsys.d_s)), pts])

    # warm the operator cache before threads start
    for lam in np.unique(tsys.eigenvalues):
        _row_operator(tsys.alpha, complex(lam), cfg.grid)

    def run(k: int) -> tuple[np.ndarray, int, float]:
        xi = fixed_point(pts[k], tsys, cfg, sample=k)
        res = fixed_point_residual(xi, tsys, cfg) if residuals else math.nan
        return xi.values[0, : tsys.d_u], xi.iterations, res

    threads = min(_thread_count(), len(pts))
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(run, range(len(pts))))
    else:
        results = [run(k) for k in range(len(pts))]

    w = np.array([r[0] for r in results], dtype=np.complex128).reshape(len(pts), tsys.d_u)
    return ManifoldGraph(
        x_s=pts.astype(np.complex128),
        w=w,
        iterations=np.array([r[1] for r in results]),
        residuals=np.array([r[2] for r in results]),
        r=cfg.r,
        r_star=cfg.r_star,
        lipschitz_bound=3.0 * cfg.ml_sup,
        iter_tol=cfg.iter_tol,
    )


# }}}


def prepare(
    tsys: TransformedSystem,
    *,
    n: int = DEFAULT_N,
    t_horizon: float | None = None,
    measure: bool = True,
    n_pairs: int = 100,
    seed: int = 0,
    retries: int = 3,
) -> tuple[OperatorConfig, float]:
    """Estimate ``C``, choose the radii and validate the contraction.

    If the measured contraction exceeds ``2/3 + 0.05``, ``C_est`` is doubled
    and the radii recomputed, at most ``retries`` times. Returns the
    configuration and the last measured ratio (``nan`` without measurement).
    """
    grid = default_grid(tsys.alpha, tsys.eigenvalues, n, t_horizon=t_horizon)
    C = estimate_contraction_constant(tsys.alpha, tsys.eigenvalues, grid=grid)

    for attempt in range(retries + 1):
        cfg = choose_radii(tsys, C, grid=grid)
        if not measure:
            return cfg, math.nan

        assert cfg.system is not None
        ratio = measure_contraction(cfg.system, cfg, n_pairs=n_pairs, seed=seed)
        logger.info(
            "C_est %.4g r* %.4g r %.4g measured contraction %.4g", C, cfg.r_star, cfg.r, ratio
        )
        if ratio <= CONTRACTION + 0.05 or attempt == retries:
            return cfg, ratio
        C *= 2.0

    raise AssertionError("unreachable")
