"""Snapshot generation and weak greedy reduced-basis construction.

The basis anchors at the solution for the scaled nominal coefficient and
grows by greedily selecting training snapshots with maximal energy-norm
distance to the current span. Orthonormalization is modified Gram-Schmidt
in the nominal inner product with one reorthogonalization pass.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from .coeff import DataFamily, sample_family
from .fem import (
    FemSpace,
    ProblemConfig,
    assemble_stiffness,
    dual_norm,
    energy_norm,
    galerkin_solve,
)

__all__ = [
    "SnapshotSet",
    "ReducedBasis",
    "GreedyTrace",
    "IllConditionedBasisError",
    "generate_snapshots",
    "weak_greedy",
    "analyze",
    "synthesize",
    "projection_error_curve",
]


class IllConditionedBasisError(RuntimeError):
    """Raw snapshot Gram matrix is numerically rank deficient."""


@dataclass
class SnapshotSet:
    """Training coefficients with their discrete solutions (columns)."""

    coefficients: list
    solutions: np.ndarray  # (n_free, count)
    space: FemSpace
    config: ProblemConfig

    @property
    def count(self) -> int:
        return self.solutions.shape[1]


@dataclass
class GreedyTrace:
    """Per-step record: basis size, worst residual, picked snapshot, timing."""

    sizes: list = field(default_factory=list)
    residuals: list = field(default_factory=list)
    selected: list = field(default_factory=list)
    seconds: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.sizes, self.residuals, self.selected, self.seconds))


@dataclass
class ReducedBasis:
    """Anchored snapshot basis with its orthonormal companion frame.

    ``raw`` stacks the anchor and the selected snapshots as columns;
    ``ortho`` spans the same space and is orthonormal in the nominal inner
    product, with the first column parallel to the anchor. Prefixes of both
    frames are hierarchical by construction.
    """

    space: FemSpace
    config: ProblemConfig
    raw: np.ndarray
    ortho: np.ndarray
    selection_indices: list
    nominal_stiffness: sp.csr_matrix
    gram_chol: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.raw.shape[1]

    def frame(self, name: str) -> np.ndarray:
        if name == "raw":
            return self.raw
        if name == "ortho":
            return self.ortho
        raise ValueError("frame must be 'raw' or 'ortho'")

    def prefix(self, n_plus_1: int) -> "ReducedBasis":
        """Basis spanned by the anchor and the first n selected snapshots."""
        if not (1 <= n_plus_1 <= self.size):
            raise ValueError("prefix size out of range")
        return ReducedBasis(
            self.space,
            self.config,
            self.raw[:, :n_plus_1],
            self.ortho[:, :n_plus_1],
            self.selection_indices[: n_plus_1 - 1],
            self.nominal_stiffness,
            None,
        )


def generate_snapshots(
    family: DataFamily,
    count: int,
    seed: int,
    space: FemSpace,
    config: ProblemConfig,
) -> SnapshotSet:
    """Sample the family and solve each member; verifies the energy bound."""
    coefficients = sample_family(family, count, seed)
    k0 = assemble_stiffness(space, config.a0)
    bound = dual_norm(space, config, k0=k0) / (config.alpha - config.beta)
    cols = []
    for a in coefficients:
        u = galerkin_solve(space, config, a)
        if energy_norm(space, config, u, k0=k0) > bound + 1e-8:
            raise RuntimeError("snapshot violates the a priori energy bound")
        cols.append(u)
    return SnapshotSet(coefficients, np.column_stack(cols), space, config)


def weak_greedy(
    snapshots: SnapshotSet,
    n_max: int,
    gamma: float = 1.0,
    residual_floor: float = 1e-13,
):
    """Greedy basis selection in the energy norm.

    Starts from the anchor solution for the scaled nominal coefficient. At
    each step any snapshot whose orthogonal residual is at least gamma times
    the maximum may be picked; the smallest qualifying index is used, so
    gamma = 1 is the strong greedy choice. Stops at n_max selected snapshots
    or when the worst residual falls below the floor.
    """
    if snapshots.count == 0:
        raise ValueError("empty snapshot set")
    if not (0.0 < gamma <= 1.0):
        raise ValueError("gamma must lie in (0, 1]")
    space, config = snapshots.space, snapshots.config
    k0 = assemble_stiffness(space, config.a0)
    anchor = galerkin_solve(space, config, config.scaled_nominal())
    anchor_norm = energy_norm(space, config, anchor, k0=k0)
    if anchor_norm == 0.0:
        raise RuntimeError("anchor solution vanished; zero source?")

    sols = snapshots.solutions
    ks = k0 @ sols

    raw_cols = [anchor]
    ortho_cols = [anchor / anchor_norm]
    selected: list = []
    trace = GreedyTrace()

    def residual_norms():
        # explicit residual vectors; the difference-of-squares shortcut
        # cannot measure residuals below sqrt(eps) * |s|
        q = np.column_stack(ortho_cols)
        resid = sols - q @ (q.T @ ks)
        vals = np.einsum("ij,ij->j", resid, k0 @ resid)
        return np.sqrt(np.maximum(vals, 0.0))

    while len(selected) < n_max:
        t0 = time.perf_counter()
        res = residual_norms()
        rmax = float(res.max())
        if rmax < residual_floor:
            trace.sizes.append(len(selected))
            trace.residuals.append(rmax)
            trace.selected.append(-1)
            trace.seconds.append(time.perf_counter() - t0)
            break
        pick = int(np.flatnonzero(res >= gamma * rmax)[0])
        v = sols[:, pick].copy()
        # MGS against current orthonormal columns, one reorthogonalization pass
        for _ in range(2):
            for q in ortho_cols:
                v -= (q @ (k0 @ v)) * q
        nrm = energy_norm(space, config, v, k0=k0)
        if nrm < residual_floor:
            trace.sizes.append(len(selected))
            trace.residuals.append(rmax)
            trace.selected.append(pick)
            trace.seconds.append(time.perf_counter() - t0)
            break
        q_new = v / nrm
        raw_cols.append(sols[:, pick])
        ortho_cols.append(q_new)
        selected.append(pick)
        trace.sizes.append(len(selected) - 1)
        trace.residuals.append(rmax)
        trace.selected.append(pick)
        trace.seconds.append(time.perf_counter() - t0)

    raw = np.column_stack(raw_cols)
    ortho = np.column_stack(ortho_cols)
    gram = raw.T @ (k0 @ raw)
    try:
        chol = la.cholesky(gram, lower=True)
    except la.LinAlgError:
        chol = None
    basis = ReducedBasis(space, config, raw, ortho, selected, k0, chol)
    return basis, trace


def analyze(basis: ReducedBasis, v: np.ndarray, frame: str = "raw", best: bool = False) -> np.ndarray:
    """Coefficients of the projection of v onto the basis span.

    With best=False the vector must already lie in the span (projection
    residual at most 1e-8); best=True returns the best-approximation
    coefficients for arbitrary vectors.
    """
    p = basis.frame(frame)
    k0 = basis.nominal_stiffness
    rhs = p.T @ (k0 @ v)
    if frame == "ortho":
        coeffs = rhs
    else:
        gram = p.T @ (k0 @ p)
        cond = np.linalg.cond(gram)
        if not np.isfinite(cond) or cond > 1e12:
            raise IllConditionedBasisError(
                f"snapshot Gram condition estimate {cond:.3e} exceeds 1e12"
            )
        chol = la.cholesky(gram, lower=True)
        coeffs = la.cho_solve((chol, True), rhs)
        # one step of iterative refinement with the full-space residual
        resid = p.T @ (k0 @ (v - p @ coeffs))
        coeffs = coeffs + la.cho_solve((chol, True), resid)
    if not best:
        resid = v - p @ coeffs
        rnorm = float(np.sqrt(max(resid @ (k0 @ resid), 0.0)))
        if rnorm > 1e-8:
            raise ValueError(
                f"vector is not in the basis span (residual {rnorm:.3e})"
            )
    return coeffs


def synthesize(basis: ReducedBasis, coeffs: np.ndarray, frame: str = "raw") -> np.ndarray:
    """Linear combination of basis columns; left inverse of analyze on the span."""
    p = basis.frame(frame)
    coeffs = np.asarray(coeffs, dtype=float)
    if len(coeffs) != p.shape[1]:
        raise ValueError("coefficient length does not match basis size")
    return p @ coeffs


def projection_error_curve(basis: ReducedBasis, test_solutions: np.ndarray):
    """Worst best-approximation error per hierarchical prefix.

    Returns (N, error) pairs for N = 0 .. basis size - 1, where the prefix of
    size N spans the anchor plus the first N selected snapshots.
    """
    k0 = basis.nominal_stiffness
    q = basis.ortho
    ks = k0 @ test_solutions
    coef = q.T @ ks  # (size, n_test)
    curve = []
    resid = test_solutions.copy()
    for n in range(q.shape[1]):
        resid = resid - np.outer(q[:, n], coef[n])
        vals = np.einsum("ij,ij->j", resid, k0 @ resid)
        worst = float(np.sqrt(np.maximum(vals, 0.0)).max())
        curve.append((n, worst))
    return curve
