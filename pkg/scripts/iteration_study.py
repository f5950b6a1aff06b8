"""Contraction norms and iteration convergence on the unit square.

Writes contraction_norms.csv (per-sample spectral norm of the iteration
matrix) and iteration_errors.csv (energy error per step against the dense
reduced solve, for a band-filling probe coefficient).
"""

import argparse
import os

import numpy as np

from richop import coeff, fem, mesh, reduced_basis, richardson


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--samples", type=int, default=20)
    ap.add_argument("--steps", type=int, default=30)
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    square = mesh.unit_square()
    grid = mesh.triangulate(square, 1.0 / 16.0)
    space = fem.build_space(grid, 1)
    config = fem.normalize_source(space, fem.ProblemConfig(1.0, 0.5))
    family = coeff.analytic_family(1.0, 0.5, square, n_modes=4, decay=0.7)
    snaps = reduced_basis.generate_snapshots(family, 60, args.seed, space, config)
    basis, _ = reduced_basis.weak_greedy(snaps, 10)

    with open(os.path.join(args.out, "contraction_norms.csv"), "w") as fh:
        fh.write("index,contraction_norm,bound\n")
        for j, a in enumerate(coeff.sample_family(family, args.samples, args.seed + 1)):
            system = richardson.assemble_reduced(basis, space, config, a)
            norm = richardson.contraction_norm(system)
            fh.write(f"{j},{norm:.17g},{config.beta / config.alpha:.17g}\n")

    probe = coeff.affine_combination(
        [coeff.constant(1.0), coeff.trig_mode(1, 0)], [1.0, 0.98 * config.beta]
    )
    system = richardson.assemble_reduced(basis, space, config, probe)
    c_star = richardson.direct_solve(system)
    state = richardson.iterate(system, args.steps)
    with open(os.path.join(args.out, "iteration_errors.csv"), "w") as fh:
        fh.write("k,ell2_norm,energy_error_vs_direct\n")
        for k, c in enumerate(state.trajectory):
            err = richardson.reduced_energy_error(basis, system, c, c_star)
            fh.write(f"{k},{np.linalg.norm(c):.17g},{err:.17g}\n")
    print(f"wrote results under {args.out}")


if __name__ == "__main__":
    main()
