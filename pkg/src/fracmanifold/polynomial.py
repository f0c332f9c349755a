"""Sparse multivariate polynomial maps with exact linear conjugation."""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field
from itertools import product
from typing import Any, Iterable, Mapping

import numpy as np

from fracmanifold.errors import ValidationError

Powers = tuple[int, ...]


@dataclass(frozen=True)
class Monomial:
    """The term ``coeff * prod(x[j] ** powers[j])`` in output coordinate ``out``."""

    out: int
    coeff: complex
    powers: Powers

    @property
    def degree(self) -> int:
        return sum(self.powers)


@dataclass(frozen=True)
class PolynomialMap:
    """A polynomial map :math:`\\mathbb{C}^n \\to \\mathbb{C}^m` stored term by term.

    Terms with equal ``(out, powers)`` are merged and exact zeros dropped, so
    two maps with the same coefficients compare equal.
    """

    dim_in: int
    dim_out: int
    terms: Mapping[tuple[int, Powers], complex] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.dim_in < 1 or self.dim_out < 1:
            raise ValidationError(
                f"dimensions must be positive: got {self.dim_in} -> {self.dim_out}"
            )

        merged: dict[tuple[int, Powers], complex] = defaultdict(complex)
        for (out, powers), c in self.terms.items():
            powers = tuple(int(e) for e in powers)
            if not 0 <= out < self.dim_out:
                raise ValidationError(f"output index {out} out of range [0, {self.dim_out})")
            if len(powers) != self.dim_in:
                raise ValidationError(
                    f"exponent vector {powers} does not have length {self.dim_in}"
                )
            if any(e < 0 for e in powers):
                raise ValidationError(f"negative exponent in {powers}")
            merged[out, powers] += complex(c)

        clean = {key: c for key, c in sorted(merged.items()) if c != 0}
        object.__setattr__(self, "terms", clean)

        # dense representation used by __call__
        keys = list(clean)
        exps = np.array([p for _, p in keys], dtype=np.int64).reshape(-1, self.dim_in)
        coeffs = np.zeros((len(keys), self.dim_out), dtype=np.complex128)
        for i, (out, _) in enumerate(keys):
            coeffs[i, out] = clean[keys[i]]
        object.__setattr__(self, "_exps", exps)
        object.__setattr__(self, "_coeffs", coeffs)

    # {{{ constructors

    @classmethod
    def zero(cls, dim_in: int, dim_out: int | None = None) -> PolynomialMap:
        return cls(dim_in, dim_in if dim_out is None else dim_out, {})

    @classmethod
    def from_monomials(
        cls, dim_in: int, monomials: Iterable[Monomial], dim_out: int | None = None
    ) -> PolynomialMap:
        terms: dict[tuple[int, Powers], complex] = defaultdict(complex)
        for m in monomials:
            terms[m.out, tuple(m.powers)] += m.coeff
        return cls(dim_in, dim_in if dim_out is None else dim_out, dict(terms))

    @classmethod
    def linear(cls, matrix: np.ndarray) -> PolynomialMap:
        """The linear map ``x -> matrix @ x`` as a polynomial."""
        matrix = np.asarray(matrix)
        m, n = matrix.shape
        terms = {}
        for i in range(m):
            for j in range(n):
                if matrix[i, j] != 0:
                    terms[i, tuple(int(k == j) for k in range(n))] = complex(matrix[i, j])
        return cls(n, m, terms)

    # }}}

    @property
    def monomials(self) -> list[Monomial]:
        return [Monomial(out, c, p) for (out, p), c in self.terms.items()]

    @property
    def is_zero(self) -> bool:
        return not self.terms

    @property
    def degree(self) -> int:
        return max((sum(p) for _, p in self.terms), default=0)

    @property
    def min_degree(self) -> int | None:
        return min((sum(p) for _, p in self.terms), default=None)

    @property
    def is_real(self) -> bool:
        return all(c.imag == 0 for c in self.terms.values())

    def __call__(self, x: np.ndarray) -> np.ndarray:
        """Evaluate at points ``x`` of shape ``(..., dim_in)``."""
        x = np.asarray(x)
        if x.shape[-1] != self.dim_in:
            raise ValidationError(
                f"expected points of dimension {self.dim_in}: got shape {x.shape}"
            )

        exps = self._exps  # type: ignore[attr-defined]
        coeffs = self._coeffs  # type: ignore[attr-defined]
        dtype = np.result_type(x.dtype, np.complex128 if not self.is_real else np.float64)
        if exps.shape[0] == 0:
            return np.zeros((*x.shape[:-1], self.dim_out), dtype=dtype)

        mono = np.ones((*x.shape[:-1], exps.shape[0]), dtype=dtype)
        for j in range(self.dim_in):
            ej = exps[:, j]
            if np.any(ej):
                mono = mono * x[..., j, None] ** ej

        out = mono @ (coeffs.real if self.is_real else coeffs)
        return out.astype(dtype, copy=False)

    def __add__(self, other: PolynomialMap) -> PolynomialMap:
        if (self.dim_in, self.dim_out) != (other.dim_in, other.dim_out):
            raise ValidationError("cannot add polynomial maps of different dimensions")
        terms: dict[tuple[int, Powers], complex] = defaultdict(complex, self.terms)
        for key, c in other.terms.items():
            terms[key] += c
        return PolynomialMap(self.dim_in, self.dim_out, dict(terms))

    def left_multiply(self, matrix: np.ndarray) -> PolynomialMap:
        """The map ``x -> matrix @ self(x)``."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape[1] != self.dim_out:
            raise ValidationError(
                f"matrix of shape {matrix.shape} cannot multiply {self.dim_out} outputs"
            )

        terms: dict[tuple[int, Powers], complex] = defaultdict(complex)
        for (out, powers), c in self.terms.items():
            for i in range(matrix.shape[0]):
                if matrix[i, out] != 0:
                    terms[i, powers] += matrix[i, out] * c
        return PolynomialMap(self.dim_in, matrix.shape[0], dict(terms))

    def compose_linear(self, matrix: np.ndarray) -> PolynomialMap:
        """The map ``y -> self(matrix @ y)``, expanded into monomials of ``y``."""
        matrix = np.asarray(matrix, dtype=np.complex128)
        if matrix.shape[0] != self.dim_in:
            raise ValidationError(
                f"matrix of shape {matrix.shape} cannot feed {self.dim_in} inputs"
            )
        n = matrix.shape[1]

        # rows of the matrix as linear polynomials in y
        rows = [
            {tuple(int(k == j) for k in range(n)): complex(matrix[i, j]) for j in range(n) if matrix[i, j] != 0}
            for i in range(matrix.shape[0])
        ]

        power_cache: dict[tuple[int, int], dict[Powers, complex]] = {}

        def row_power(i: int, e: int) -> dict[Powers, complex]:
            if (i, e) not in power_cache:
                if e == 0:
                    power_cache[i, e] = {(0,) * n: 1.0 + 0.0j}
                else:
                    power_cache[i, e] = _poly_mul(row_power(i, e - 1), rows[i])
            return power_cache[i, e]

        terms: dict[tuple[int, Powers], complex] = defaultdict(complex)
        for (out, powers), c in self.terms.items():
            poly: dict[Powers, complex] = {(0,) * n: c}
            for i, e in enumerate(powers):
                if e:
                    poly = _poly_mul(poly, row_power(i, e))
            for p, v in poly.items():
                terms[out, p] += v

        return PolynomialMap(n, self.dim_out, dict(terms))

    def lipschitz_on_ball(self, r: float) -> float:
        """Upper bound for the max-norm Lipschitz constant on ``B(0, r)``.

        For each output the bound is the sum of ``|coeff| * degree * r**(degree - 1)``
        over its monomials (a mean-value bound on the sum of partial derivatives).
        The largest output bound is returned.
        """
        if r <= 0:
            raise ValidationError(f"'r' must be positive: got {r}")

        per_out = np.zeros(self.dim_out)
        for (out, powers), c in self.terms.items():
            deg = sum(powers)
            if deg > 0:
                per_out[out] += abs(c) * deg * r ** (deg - 1)
        return float(per_out.max())

    def to_json(self) -> list[dict[str, Any]]:
        out = []
        for (i, powers), c in self.terms.items():
            coeff: Any = c.real if c.imag == 0 else [c.real, c.imag]
            out.append({"out": i, "coeff": coeff, "powers": list(powers)})
        return out


def _poly_mul(a: Mapping[Powers, complex], b: Mapping[Powers, complex]) -> dict[Powers, complex]:
    out: dict[Powers, complex] = defaultdict(complex)
    for (pa, ca), (pb, cb) in product(a.items(), b.items()):
        out[tuple(x + y for x, y in zip(pa, pb))] += ca * cb
    return dict(out)


def lipschitz_on_ball(fmap: PolynomialMap, r: float) -> float:
    """Functional form of :meth:`PolynomialMap.lipschitz_on_ball`."""
    return fmap.lipschitz_on_ball(r)

