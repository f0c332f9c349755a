"""Stable manifold of the quadratic saddle and a forward check of every sample.

Usage::

    python3 demos/saddle_manifold.py [alpha]
"""

from __future__ import annotations

import logging
import sys

import numpy as np

from fracmanifold.counterexample import build_example_system
from fracmanifold.fde_solver import decay_time, verify_manifold_point
from fracmanifold.lp_operator import manifold_graph, prepare
from fracmanifold.spectral import jordanize, pullback_manifold, transform_system

logger = logging.getLogger("saddle_manifold")


def main(alpha: float = 0.8) -> None:
    system = build_example_system(alpha)
    tsys = transform_system(system, jordanize(system.A, alpha, 1.0))

    cfg, ratio = prepare(tsys)
    logger.info("r = %.4g, measured contraction %.3f", cfg.r, ratio)

    graph = manifold_graph(cfg.system, cfg, 11)
    points = pullback_manifold(graph.points, cfg.system.splitting).real
    T = decay_time(alpha, np.linalg.eigvals(system.A))

    print(f"{'x_s':>10} {'w(x_s)':>12} {'|phi(T)|/|x|':>13}  verdict")
    for xs, w, x in zip(graph.x_s[:, 0].real, graph.w[:, 0].real, points):
        v = verify_manifold_point(system, x, T)
        print(f"{xs:10.5f} {w:12.4e} {v.ratio:13.4f}  {v.verdict.value}")


if __name__ == "__main__":
    logging.basicConfig(level=logging.INFO)
    main(*(float(a) for a in sys.argv[1:2]))
