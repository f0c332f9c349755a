"""Relative gap between the two sides of the Jordan-block identity, as alpha varies."""

from __future__ import annotations

import numpy as np

from fracmanifold.counterexample import direct_ratio, ml_identity_gap


def main(lam: float = 2.0, t: float = 40.0) -> None:
    print(f"{'alpha':>6} {'gap (2,2)':>10} {'predicted':>10} {'direct':>10}")
    for alpha in (0.5, 0.6, 0.7, 0.8, 0.9, 0.95, 0.99):
        g = ml_identity_gap(alpha, lam, t)
        direct = direct_ratio(alpha, lam, t)[1, 1] if lam ** (1 / alpha) * t <= 650 else np.nan
        print(f"{alpha:6.2f} {g.entrywise_gap[1, 1]:10.4f} {g.factor - 1:10.4f} {direct - 1:10.4f}")


if __name__ == "__main__":
    main()
