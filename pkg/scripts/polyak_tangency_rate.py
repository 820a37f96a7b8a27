#!/usr/bin/env python3
"""Worst-case geometry for level-set subgradient projections.

Minimizing ||x|| over the halfspace {x_1 >= 1} puts the solution (1, 0) at a
tangency: the unit ball (the optimal sublevel set) touches the constraint
boundary without crossing it.  The projection pattern then shrinks the
tangential error only through its cubic term, t <- t - t^3/2, so the distance
to the solution decays like c/sqrt(n) instead of geometrically.  The table
shows err * sqrt(n) settling at a constant (~1.22 from this start).
"""

import numpy as np

from affiter import catalog, polyak_subgradient, window


def main():
    prob = catalog("polyak_norm_over_halfspace")
    preset = polyak_subgradient(
        f=prob.ingredients["f"], s=prob.ingredients["s"], theta=prob.theta,
        region_projector=prob.ingredients["projector"], x0=np.array([3.0, 2.0]),
        xi=1.0, lam=1.0, weights=window(2), max_iters=20_000, stop_residual=0.0,
        reference=prob.reference,
    )
    _, trace = preset.solve()
    print(f"{'n':>8} {'err':>12} {'err*sqrt(n)':>14}")
    for n in (10, 100, 500, 2000, 10_000, 20_000):
        err = np.linalg.norm(trace.points[n] - prob.reference)
        print(f"{n:>8} {err:>12.4e} {err * np.sqrt(n):>14.4f}")


if __name__ == "__main__":
    main()
