"""Growth of the unstable projection for a bounded candidate trajectory.

Prints the projection and the bracket ratio against its limit at a few
times, for the closed-form candidate and for a solver trajectory.
"""

from __future__ import annotations

from fracmanifold.counterexample import (
    analytic_candidate,
    solver_candidate,
    unstable_projection_parts,
)

ALPHA = 0.5
SIGMA = 0.1


def main() -> None:
    candidates = {
        "analytic": analytic_candidate(ALPHA, SIGMA),
        "solver": solver_candidate(ALPHA, SIGMA, T=16.0),
    }
    print(f"{'candidate':>9} {'t':>5} {'projection':>12} {'bracket/limit':>14}")
    for name, phi in candidates.items():
        for t in (2.5, 5.0, 10.0, 15.0):
            p = unstable_projection_parts(phi, ALPHA, t)
            print(f"{name:>9} {t:5.1f} {p.value:12.4e} {p.bracket_ratio / p.bracket_limit:14.6f}")


if __name__ == "__main__":
    main()
