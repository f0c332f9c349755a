"""Linear part of a fractional system: hyperbolicity, Jordan coordinates, conjugation.

An eigenvalue :math:`\\lambda` of the order-:math:`\\alpha` system
:math:`D^\\alpha x = A x + f(x)` is *unstable* if
:math:`|\\arg\\lambda| < \\alpha\\pi/2` and *stable* if
:math:`|\\arg\\lambda| > \\alpha\\pi/2`. :func:`jordanize` computes a matrix
:math:`TP` bringing :math:`A` to the block form :math:`\\lambda_i I + \\delta_i N`,
unstable blocks first, and :func:`transform_system` moves the small nilpotent
part into the nonlinearity,

.. math::

    h(x) = \\operatorname{diag}(\\delta_i N) x + (TP)^{-1} f(TP x).
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg as sla

from fracmanifold.errors import IllConditioned, NotHyperbolic, ShapeError, ValidationError
from fracmanifold.polynomial import PolynomialMap

logger = logging.getLogger(__name__)

#: default distance of ``|arg lambda|`` from the critical angle ``alpha pi / 2``
TOL_HYP = 1.0e-6
#: relative reconstruction tolerance for accepted coordinate changes
CLUSTER_TOL = 1.0e-8
#: largest accepted condition number of an eigenvector matrix
MAX_EIGVEC_COND = 1.0e6


# {{{ systems


@dataclass(frozen=True)
class DeclaredBlock:
    """User-declared Jordan structure for one eigenvalue."""

    eigenvalue: complex
    sizes: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.sizes or any(s < 1 for s in self.sizes):
            raise ValidationError(f"invalid Jordan block sizes {self.sizes}")


@dataclass(frozen=True)
class FractionalSystem:
    """The Caputo system :math:`D^\\alpha x = A x + f(x)` with polynomial ``f``.

    ``f`` may only contain monomials of total degree at least two, so that
    ``f(0) = 0`` and its Lipschitz constant vanishes at the origin.
    """

    alpha: float
    A: np.ndarray
    f: PolynomialMap
    jordan_blocks: tuple[DeclaredBlock, ...] | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValidationError(f"'alpha' must be in (0, 1): got {self.alpha}")

        A = np.array(self.A, dtype=np.complex128)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ShapeError(f"'A' must be square: got shape {A.shape}")
        if not np.all(np.isfinite(A)):
            raise ValidationError("'A' has non-finite entries")
        A.setflags(write=False)
        object.__setattr__(self, "A", A)

        d = A.shape[0]
        if (self.f.dim_in, self.f.dim_out) != (d, d):
            raise ShapeError(
                f"'f' maps {self.f.dim_in} -> {self.f.dim_out} but A has dimension {d}"
            )
        if self.f.min_degree is not None and self.f.min_degree < 2:
            raise ValidationError(
                "'f' must only contain monomials of total degree >= 2 "
                f"(found degree {self.f.min_degree})"
            )

        if self.jordan_blocks is not None:
            total = sum(sum(b.sizes) for b in self.jordan_blocks)
            if total != d:
                raise ValidationError(
                    f"'jordan_blocks' cover {total} dimensions but A has dimension {d}"
                )

    @property
    def d(self) -> int:
        return self.A.shape[0]

    @property
    def is_real(self) -> bool:
        return bool(np.all(self.A.imag == 0)) and self.f.is_real

    def rhs(self, x: np.ndarray) -> np.ndarray:
        """Right-hand side ``A x + f(x)`` at points of shape ``(..., d)``."""
        x = np.asarray(x)
        A = self.A.real if self.is_real and not np.iscomplexobj(x) else self.A
        return x @ A.T + self.f(x)


# }}}


# {{{ hyperbolicity


@dataclass(frozen=True)
class EigenReport:
    """Eigenvalues of ``A`` with their sector classification."""

    alpha: float
    eigenvalues: np.ndarray
    unstable: np.ndarray
    margin: float

    @property
    def k(self) -> int:
        return int(np.sum(self.unstable))


def critical_distance(lam: complex, alpha: float) -> float:
    """Distance of ``|arg lambda|`` from the critical angle ``alpha pi / 2``."""
    if lam == 0:
        return 0.0
    return abs(abs(np.angle(lam)) - 0.5 * alpha * np.pi)


def check_hyperbolicity(A: np.ndarray, alpha: float, tol_hyp: float = TOL_HYP) -> EigenReport:
    """Compute and classify the eigenvalues of ``A``.

    :raises NotHyperbolic: if an eigenvalue is zero or within ``tol_hyp`` of the
        critical angle.
    """
    A = np.asarray(A, dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"'A' must be square: got shape {A.shape}")

    lams = np.linalg.eigvals(A)
    scale = max(float(np.linalg.norm(A, 2)), 1.0)
    margin = math.inf
    for lam in lams:
        if abs(lam) <= 1.0e-14 * scale:
            raise NotHyperbolic(f"zero eigenvalue {lam} has no argument", complex(lam))
        dist = critical_distance(lam, alpha)
        if dist <= tol_hyp:
            raise NotHyperbolic(
                f"eigenvalue {lam} lies within {tol_hyp} of the critical angle "
                f"alpha*pi/2 = {0.5 * alpha * np.pi:.6g}",
                complex(lam),
            )
        margin = min(margin, dist)

    unstable = np.abs(np.angle(lams)) < 0.5 * alpha * np.pi
    return EigenReport(alpha, lams, unstable, margin)


# }}}


# {{{ Jordan coordinates


@dataclass(frozen=True)
class JordanBlock:
    lam: complex
    size: int
    #: coefficient of the nilpotent shift after rescaling (0 or delta)
    delta: float
    unstable: bool


@dataclass(frozen=True)
class HyperbolicSplitting:
    """Coordinates ``x = T P y`` in which ``A`` is block diagonal.

    Blocks are ordered with unstable ones first; ``d_u`` leading coordinates
    of ``y`` are unstable.
    """

    alpha: float
    blocks: tuple[JordanBlock, ...]
    T: np.ndarray
    P: np.ndarray
    delta: float
    reconstruction_error: float = field(default=0.0)

    @property
    def k(self) -> int:
        return sum(b.unstable for b in self.blocks)

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def d_u(self) -> int:
        return sum(b.size for b in self.blocks if b.unstable)

    @property
    def d_s(self) -> int:
        return self.d - self.d_u

    @property
    def eigenvalues(self) -> np.ndarray:
        """Eigenvalue of every coordinate (repeated over block sizes)."""
        return np.array([b.lam for b in self.blocks for _ in range(b.size)])

    @property
    def TP(self) -> np.ndarray:
        return self.T @ self.P

    @property
    def TP_inv(self) -> np.ndarray:
        return np.linalg.inv(self.TP)

    @property
    def nilpotent(self) -> np.ndarray:
        """The matrix ``diag(delta_i N)`` of the rescaled shifts."""
        out = np.zeros((self.d, self.d), dtype=np.complex128)
        lo = 0
        for b in self.blocks:
            for i in range(b.size - 1):
                out[lo + i, lo + i + 1] = b.delta
            lo += b.size
        return out

    @property
    def block_matrix(self) -> np.ndarray:
        """``diag(lambda_i I + delta_i N)``."""
        return np.diag(self.eigenvalues) + self.nilpotent

    def with_delta(self, delta: float) -> HyperbolicSplitting:
        """The same splitting with a different rescaling ``delta``."""
        if delta <= 0:
            raise ValidationError(f"'delta' must be positive: got {delta}")
        blocks = tuple(
            JordanBlock(b.lam, b.size, delta if b.size > 1 else 0.0, b.unstable)
            for b in self.blocks
        )
        return HyperbolicSplitting(
            self.alpha, blocks, self.T, _rescaling(blocks, delta), delta,
            self.reconstruction_error,
        )


def _rescaling(blocks: Sequence[JordanBlock], delta: float) -> np.ndarray:
    diag = []
    for b in blocks:
        diag.extend(delta**i for i in range(b.size))
    return np.diag(np.array(diag, dtype=np.complex128))


def _normalize_phase(v: np.ndarray) -> np.ndarray:
    # deterministic eigenvector: unit norm, largest entry real and positive
    v = v / np.linalg.norm(v)
    i = int(np.argmax(np.abs(v) + 1.0e-12 * np.arange(v.size)[::-1]))
    return v * (abs(v[i]) / v[i])


def _sort_key(lam: complex, alpha: float) -> tuple[int, float, float, float]:
    unstable = abs(np.angle(lam)) < 0.5 * alpha * np.pi
    return (0 if unstable else 1, round(abs(np.angle(lam)), 12), -lam.real, lam.imag)


def _chains(A: np.ndarray, lam: complex, sizes: Sequence[int]) -> list[np.ndarray]:
    """Jordan chains of ``A`` for eigenvalue ``lam`` with the declared block sizes."""
    d = A.shape[0]
    N = A - lam * np.eye(d)
    chains: list[np.ndarray] = []
    chosen = np.zeros((d, 0), dtype=np.complex128)

    def kernel(power: int) -> np.ndarray:
        dim = sum(min(s, power) for s in sizes)
        if dim == 0:
            return np.zeros((d, 0), dtype=np.complex128)
        _, _, vh = np.linalg.svd(np.linalg.matrix_power(N, power))
        return vh[-dim:].conj().T

    for size in sorted(sizes, reverse=True):
        top = kernel(size)
        lower = np.hstack([kernel(size - 1), chosen])
        if lower.shape[1]:
            q, _ = np.linalg.qr(lower)
            rest = top - q @ (q.conj().T @ top)
        else:
            rest = top
        _, _, vh = np.linalg.svd(rest)
        v = _normalize_phase(top @ vh[0].conj())

        chain = [v]
        for _ in range(size - 1):
            chain.append(N @ chain[-1])
        block = np.column_stack(chain[::-1])
        chains.append(block)
        chosen = np.hstack([chosen, block])

    return chains


def jordanize(
    A: np.ndarray,
    alpha: float,
    delta: float = 1.0,
    *,
    jordan_blocks: Sequence[DeclaredBlock] | None = None,
    tol_hyp: float = TOL_HYP,
    cluster_tol: float = CLUSTER_TOL,
) -> HyperbolicSplitting:
    """Compute the ordered, ``delta``-rescaled Jordan coordinates of ``A``.

    Without ``jordan_blocks`` the matrix must be diagonalizable with a
    well-conditioned eigenvector matrix. With ``jordan_blocks`` the declared
    structure is used to build Jordan chains. Either way the result is accepted
    only if it reproduces ``A`` to ``cluster_tol`` relative accuracy.

    :raises NotHyperbolic: see :func:`check_hyperbolicity`.
    :raises IllConditioned: if the coordinates do not reproduce ``A``.
    """
    if delta <= 0:
        raise ValidationError(f"'delta' must be positive: got {delta}")

    A = np.asarray(A, dtype=np.complex128)
    report = check_hyperbolicity(A, alpha, tol_hyp)
    d = A.shape[0]

    pieces: list[tuple[complex, np.ndarray]] = []
    if jordan_blocks is None:
        lams, V = np.linalg.eig(A)
        cond = np.linalg.cond(V)
        # defective matrices give cond ~ 1/sqrt(eps) and tiny reconstruction
        # errors, so the condition number itself is the test
        if not np.isfinite(cond) or cond > MAX_EIGVEC_COND:
            raise IllConditioned(
                f"eigenvector matrix has condition number {cond:.3g}; the matrix "
                "is not safely diagonalizable (declare 'jordan_blocks' instead)"
            )
        for lam, v in zip(lams, V.T):
            pieces.append((complex(lam), _normalize_phase(v)[:, None]))
    else:
        remaining = list(report.eigenvalues)
        for decl in jordan_blocks:
            m = sum(decl.sizes)
            # average the numerically split cluster around the declared value
            order = np.argsort([abs(x - decl.eigenvalue) for x in remaining])
            cluster = [remaining[i] for i in order[:m]]
            lam = complex(np.mean(cluster))
            spread = max(abs(x - lam) for x in cluster)
            if abs(lam - decl.eigenvalue) > max(1.0e-6, 10 * spread) * max(1.0, abs(lam)):
                raise IllConditioned(
                    f"declared eigenvalue {decl.eigenvalue} does not match the "
                    f"computed cluster around {lam}"
                )
            remaining = [remaining[i] for i in order[m:]]
            lam = complex(decl.eigenvalue)
            for chain in _chains(A, lam, decl.sizes):
                pieces.append((lam, chain))

    pieces.sort(key=lambda p: _sort_key(p[0], alpha))

    blocks = tuple(
        JordanBlock(
            lam,
            chain.shape[1],
            delta if chain.shape[1] > 1 else 0.0,
            bool(abs(np.angle(lam)) < 0.5 * alpha * np.pi),
        )
        for lam, chain in pieces
    )
    T = np.hstack([chain for _, chain in pieces])
    P = _rescaling(blocks, delta)

    split = HyperbolicSplitting(alpha, blocks, T, P, delta)
    TP = split.TP
    try:
        err = np.linalg.norm(sla.solve(TP, A @ TP) - split.block_matrix, 2)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise IllConditioned(f"singular coordinate change: {exc}") from exc

    scale = max(float(np.linalg.norm(A, 2)), 1.0)
    if not err <= cluster_tol * scale:
        raise IllConditioned(
            f"Jordan coordinates reproduce A only to {err:.3g} "
            f"(tolerance {cluster_tol * scale:.3g})"
        )

    logger.debug("jordanize: blocks %s, reconstruction error %.3g", blocks, err)
    return HyperbolicSplitting(alpha, blocks, T, P, delta, float(err))


# }}}


# {{{ transformed system


@dataclass(frozen=True)
class TransformedSystem:
    """The system in Jordan coordinates, :math:`D^\\alpha y = J y + h(y)`.

    ``J = diag(lambda_i)`` is diagonal. ``h`` collects the nilpotent part and
    the conjugated nonlinearity.
    """

    original: FractionalSystem
    splitting: HyperbolicSplitting
    h: PolynomialMap
    f_conjugated: PolynomialMap

    @property
    def alpha(self) -> float:
        return self.original.alpha

    @property
    def d(self) -> int:
        return self.original.d

    @property
    def eigenvalues(self) -> np.ndarray:
        return self.splitting.eigenvalues

    @property
    def d_u(self) -> int:
        return self.splitting.d_u

    @property
    def d_s(self) -> int:
        return self.splitting.d_s

    @property
    def base(self) -> FractionalSystem:
        """The diagonal linear part ``D^alpha y = J y``."""
        return FractionalSystem(
            self.alpha, np.diag(self.eigenvalues), PolynomialMap.zero(self.d)
        )

    def as_system(self) -> FractionalSystem:
        """The transformed system with the nilpotent part kept in the matrix."""
        blocks: dict[complex, list[int]] = {}
        for b in self.splitting.blocks:
            blocks.setdefault(b.lam, []).append(b.size)
        declared = None
        if any(b.size > 1 for b in self.splitting.blocks):
            declared = tuple(DeclaredBlock(lam, tuple(sizes)) for lam, sizes in blocks.items())
        return FractionalSystem(
            self.alpha, self.splitting.block_matrix, self.f_conjugated, declared
        )

    def with_delta(self, delta: float) -> TransformedSystem:
        """Rebuild ``h`` for a different Jordan rescaling ``delta``."""
        return transform_system(self.original, self.splitting.with_delta(delta))

    def to_original(self, y: np.ndarray) -> np.ndarray:
        """Map points ``y`` (shape ``(..., d)``) to original coordinates ``T P y``."""
        return np.asarray(y) @ self.splitting.TP.T

    def from_original(self, x: np.ndarray) -> np.ndarray:
        return np.asarray(x) @ self.splitting.TP_inv.T


def transform_system(sys: FractionalSystem, split: HyperbolicSplitting) -> TransformedSystem:
    """Conjugate ``sys`` into the coordinates of ``split``.

    The polynomial :math:`(TP)^{-1} f(TP\\,\\cdot)` is expanded exactly into
    monomials.
    """
    if split.d != sys.d:
        raise ShapeError(f"splitting has dimension {split.d}, system has {sys.d}")

    TP = split.TP
    f_conj = sys.f.compose_linear(TP).left_multiply(np.linalg.inv(TP))
    # drop roundoff-level coefficients of the expansion
    scale = max((abs(c) for c in f_conj.terms.values()), default=0.0)
    f_conj = PolynomialMap(
        sys.d, sys.d,
        {k: c for k, c in f_conj.terms.items() if abs(c) > 1.0e-15 * scale},
    )

    h = PolynomialMap.linear(split.nilpotent) + f_conj
    return TransformedSystem(sys, split, h, f_conj)


def pullback_manifold(points: np.ndarray, split: HyperbolicSplitting) -> np.ndarray:
    """Map manifold points ``(w, x^s)`` from Jordan coordinates through ``T P``."""
    return np.asarray(points) @ split.TP.T


# }}}
