"""Sweep the approximator accuracy and record depth/size growth.

Writes depth_scaling.csv with one row per target accuracy, plus the affine
fit of depth against |log eps|^2 + |log eps|.
"""

import argparse
import os

import numpy as np

from richop import coeff, fem, mesh, reduced_basis, relu_net


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="results", help="output directory")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument(
        "--eps", type=float, nargs="+", default=[1e-1, 1e-2, 1e-3, 1e-4, 1e-5]
    )
    args = ap.parse_args()
    os.makedirs(args.out, exist_ok=True)

    square = mesh.unit_square()
    grid = mesh.triangulate(square, 1.0 / 16.0)
    space = fem.build_space(grid, 1)
    config = fem.normalize_source(space, fem.ProblemConfig(1.0, 0.5))
    family = coeff.analytic_family(1.0, 0.5, square, n_modes=4, decay=0.7)
    snapshots = reduced_basis.generate_snapshots(family, 40, args.seed, space, config)
    basis, _ = reduced_basis.weak_greedy(snapshots, 10)
    from richop.encoder import build_nodal_encoder

    enc = build_nodal_encoder(fem.build_space(mesh.triangulate(square, 0.35), 1))

    rows = []
    for eps in args.eps:
        bundle = relu_net.build_approximator(basis, space, config, enc, eps)
        rows.append((eps, bundle.report.depth, bundle.report.size, bundle.k_steps))
        print(
            f"eps={eps:8.1e}  depth={bundle.report.depth:5d}  "
            f"size={bundle.report.size:9d}  K={bundle.k_steps}"
        )

    path = os.path.join(args.out, "depth_scaling.csv")
    with open(path, "w") as fh:
        fh.write("epsilon,depth,size,k_steps\n")
        for eps, depth, size, k in rows:
            fh.write(f"{eps:.17g},{depth},{size},{k}\n")

    logs = np.log(1.0 / np.asarray([r[0] for r in rows]))
    u = logs**2 + logs
    depths = np.asarray([r[1] for r in rows], dtype=float)
    a = np.column_stack([u, np.ones(len(u))])
    coefs, *_ = np.linalg.lstsq(a, depths, rcond=None)
    pred = a @ coefs
    r2 = 1 - np.sum((depths - pred) ** 2) / np.sum((depths - depths.mean()) ** 2)
    print(f"depth ~ {coefs[0]:.3f} * (log^2 + log) + {coefs[1]:.1f}, R^2 = {r2:.4f}")
    print(f"wrote {path}")


if __name__ == "__main__":
    main()
