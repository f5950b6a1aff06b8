"""Galerkin systems for the variable-coefficient diffusion form.

Assembles stiffness matrices int a grad(u).grad(v) and load vectors on P1/P2
Lagrange spaces with homogeneous Dirichlet conditions eliminated, solves the
resulting SPD systems, and provides the energy norm induced by the nominal
coefficient together with the discrete dual norm of the source.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as la
import scipy.sparse as sp

from . import coeff as coeff_mod
from .coeff import CoefficientField, constant
from .mesh import Mesh

__all__ = [
    "FemSpace",
    "ProblemConfig",
    "SolverError",
    "MembershipError",
    "build_space",
    "quadrature_points",
    "assemble_stiffness",
    "assemble_stiffness_samples",
    "assemble_load",
    "solve_spd",
    "galerkin_solve",
    "energy_norm",
    "dual_norm",
    "normalize_source",
    "vector_to_csv",
    "vector_from_csv",
]


class SolverError(RuntimeError):
    """Linear solver failed to reach the requested residual."""


class MembershipError(ValueError):
    """Coefficient left the admissible cone."""


# symmetric triangle rules, barycentric points with weights summing to one
_TRI_RULES = {
    1: (np.array([[1 / 3, 1 / 3, 1 / 3]]), np.array([1.0])),
    2: (
        np.array([[2 / 3, 1 / 6, 1 / 6], [1 / 6, 2 / 3, 1 / 6], [1 / 6, 1 / 6, 2 / 3]]),
        np.array([1 / 3, 1 / 3, 1 / 3]),
    ),
    4: (
        np.array(
            [
                [0.816847572980459, 0.091576213509771, 0.091576213509771],
                [0.091576213509771, 0.816847572980459, 0.091576213509771],
                [0.091576213509771, 0.091576213509771, 0.816847572980459],
                [0.108103018168070, 0.445948490915965, 0.445948490915965],
                [0.445948490915965, 0.108103018168070, 0.445948490915965],
                [0.445948490915965, 0.445948490915965, 0.108103018168070],
            ]
        ),
        np.array(
            [
                0.109951743655322,
                0.109951743655322,
                0.109951743655322,
                0.223381589678011,
                0.223381589678011,
                0.223381589678011,
            ]
        ),
    ),
    5: (
        np.array(
            [
                [1 / 3, 1 / 3, 1 / 3],
                [0.797426985353087, 0.101286507323456, 0.101286507323456],
                [0.101286507323456, 0.797426985353087, 0.101286507323456],
                [0.101286507323456, 0.101286507323456, 0.797426985353087],
                [0.059715871789770, 0.470142064105115, 0.470142064105115],
                [0.470142064105115, 0.059715871789770, 0.470142064105115],
                [0.470142064105115, 0.470142064105115, 0.059715871789770],
            ]
        ),
        np.array(
            [
                0.225,
                0.125939180544827,
                0.125939180544827,
                0.125939180544827,
                0.132394152788506,
                0.132394152788506,
                0.132394152788506,
            ]
        ),
    ),
}

_P2_EDGES = ((0, 1), (1, 2), (2, 0))


@dataclass(frozen=True)
class FemSpace:
    """Lagrange space of degree 1 or 2 with Dirichlet dofs eliminated."""

    mesh: Mesh
    degree: int
    dof_coords: np.ndarray
    cell_dofs: np.ndarray
    free_dofs: np.ndarray
    constrained_dofs: np.ndarray

    @property
    def n_dofs(self) -> int:
        return len(self.dof_coords)

    @property
    def n_free(self) -> int:
        return len(self.free_dofs)


def build_space(mesh: Mesh, degree: int = 1) -> FemSpace:
    if degree == 1:
        cell_dofs = mesh.triangles.copy()
        dof_coords = mesh.nodes.copy()
        constrained = mesh.boundary_nodes.copy()
    elif degree == 2:
        edge_ids: dict = {}
        edge_nodes = []
        for tri in mesh.triangles:
            for a, b in _P2_EDGES:
                key = (min(tri[a], tri[b]), max(tri[a], tri[b]))
                if key not in edge_ids:
                    edge_ids[key] = mesh.n_nodes + len(edge_ids)
                    edge_nodes.append(0.5 * (mesh.nodes[key[0]] + mesh.nodes[key[1]]))
        cell_dofs = np.array(
            [
                list(tri)
                + [
                    edge_ids[(min(tri[a], tri[b]), max(tri[a], tri[b]))]
                    for a, b in _P2_EDGES
                ]
                for tri in mesh.triangles
            ],
            dtype=np.int64,
        )
        dof_coords = np.vstack([mesh.nodes, np.asarray(edge_nodes)])
        boundary_keys = {tuple(e) for e in mesh.boundary_edges}
        constrained = list(mesh.boundary_nodes)
        constrained += [edge_ids[k] for k in edge_ids if k in boundary_keys]
        constrained = np.array(sorted(constrained), dtype=np.int64)
    else:
        raise ValueError("degree must be 1 or 2")
    free = np.setdiff1d(np.arange(len(dof_coords)), constrained)
    return FemSpace(mesh, degree, dof_coords, cell_dofs, free, constrained)


def _reference_tables(degree: int, order: int):
    """Shape values (nq, nloc) and reference gradients (nq, nloc, 2)."""
    bary, w = _TRI_RULES[order]
    l0, l1, l2 = bary[:, 0], bary[:, 1], bary[:, 2]
    gl = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])  # grad of l0, l1, l2
    if degree == 1:
        vals = np.stack([l0, l1, l2], axis=1)
        grads = np.broadcast_to(gl, (len(w), 3, 2)).copy()
    else:
        lam = [l0, l1, l2]
        vals = np.stack(
            [l * (2 * l - 1) for l in lam]
            + [4 * lam[a] * lam[b] for a, b in _P2_EDGES],
            axis=1,
        )
        grads = np.empty((len(w), 6, 2))
        for i in range(3):
            grads[:, i, :] = (4 * lam[i] - 1)[:, None] * gl[i]
        for e, (a, b) in enumerate(_P2_EDGES):
            grads[:, 3 + e, :] = 4 * (
                lam[a][:, None] * gl[b] + lam[b][:, None] * gl[a]
            )
    return bary, w, vals, grads


def _geometry(space: FemSpace):
    p = space.mesh.nodes[space.mesh.triangles]
    jac = np.stack([p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]], axis=2)  # (t, 2, 2)
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_t = (
        np.stack(
            [
                np.stack([jac[:, 1, 1], -jac[:, 1, 0]], axis=1),
                np.stack([-jac[:, 0, 1], jac[:, 0, 0]], axis=1),
            ],
            axis=1,
        )
        / det[:, None, None]
    )
    return p, jac, det, inv_t


def quadrature_points(space: FemSpace, order: int = 4) -> np.ndarray:
    """Physical quadrature points, shaped (n_triangles * nq, 2), element-major."""
    bary, _, _, _ = _reference_tables(space.degree, order)
    p = space.mesh.nodes[space.mesh.triangles]
    pts = np.einsum("qk,tkd->tqd", bary, p)
    return pts.reshape(-1, 2)


def _sample_coefficient(space: FemSpace, a, order: int) -> np.ndarray:
    nq = len(_TRI_RULES[order][1])
    if isinstance(a, CoefficientField):
        vals = a(quadrature_points(space, order))
    else:
        vals = np.asarray(a, dtype=float).ravel()
    vals = vals.reshape(space.mesh.n_triangles, nq)
    if not np.all(np.isfinite(vals)):
        raise MembershipError("coefficient evaluated to non-finite values")
    return vals


def assemble_stiffness_samples(
    space: FemSpace, samples: np.ndarray, order: int = 4
) -> sp.csr_matrix:
    """Stiffness matrix from coefficient samples at the quadrature points."""
    _, w, _, grads_ref = _reference_tables(space.degree, order)
    _, _, det, inv_t = _geometry(space)
    samples = samples.reshape(space.mesh.n_triangles, len(w))
    grads = np.einsum("tde,qie->tqid", inv_t, grads_ref)
    local = np.einsum("q,tq,tqid,tqjd->tij", w, samples, grads, grads)
    local *= (0.5 * np.abs(det))[:, None, None]
    nloc = grads_ref.shape[1]
    rows = np.repeat(space.cell_dofs, nloc, axis=1).ravel()
    cols = np.tile(space.cell_dofs, (1, nloc)).ravel()
    full = sp.coo_matrix(
        (local.ravel(), (rows, cols)), shape=(space.n_dofs, space.n_dofs)
    ).tocsr()
    return full[space.free_dofs][:, space.free_dofs].tocsr()


def assemble_stiffness(space: FemSpace, a, order: int = 4) -> sp.csr_matrix:
    """Stiffness matrix of the form int a grad(phi_j).grad(phi_i), free dofs only."""
    return assemble_stiffness_samples(space, _sample_coefficient(space, a, order), order)


def assemble_load(space: FemSpace, f, order: int = 4) -> np.ndarray:
    """Load vector with entries int f phi_i over the free dofs."""
    _, w, vals, _ = _reference_tables(space.degree, order)
    _, _, det, _ = _geometry(space)
    samples = _sample_coefficient(space, f, order)
    local = np.einsum("q,tq,qi->ti", w, samples, vals) * (0.5 * np.abs(det))[:, None]
    full = np.zeros(space.n_dofs)
    np.add.at(full, space.cell_dofs.ravel(), local.ravel())
    return full[space.free_dofs]


def solve_spd(matrix, rhs: np.ndarray, tol: float = 1e-12) -> np.ndarray:
    """Solve an SPD system: dense Cholesky up to dimension 2000, else PCG."""
    rhs = np.asarray(rhs, dtype=float)
    n = rhs.shape[0]
    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return np.zeros(n)
    if n <= 2000:
        dense = matrix.toarray() if sp.issparse(matrix) else np.asarray(matrix)
        try:
            c, low = la.cho_factor(dense)
        except la.LinAlgError as exc:
            raise SolverError("Cholesky factorization failed; matrix not SPD") from exc
        x = la.cho_solve((c, low), rhs)
    else:
        x = _pcg(matrix, rhs, tol)
    res = np.linalg.norm(matrix @ x - rhs) / bnorm
    if res > max(tol, 1e-10):
        raise SolverError(f"relative residual {res:.3e} above tolerance {tol:.3e}")
    return x


def _pcg(matrix, b: np.ndarray, tol: float) -> np.ndarray:
    diag = matrix.diagonal()
    if np.any(diag <= 0):
        raise SolverError("non-positive diagonal; matrix not SPD")
    x = np.zeros_like(b)
    r = b.copy()
    z = r / diag
    p = z.copy()
    rz = r @ z
    bnorm = np.linalg.norm(b)
    for _ in range(20 * len(b)):
        ap = matrix @ p
        alpha = rz / (p @ ap)
        x += alpha * p
        r -= alpha * ap
        if np.linalg.norm(r) <= tol * bnorm:
            return x
        z = r / diag
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    raise SolverError("PCG did not converge within the iteration cap")


@dataclass(frozen=True)
class ProblemConfig:
    """Problem data: coercivity band (alpha, beta), nominal coefficient, source."""

    alpha: float
    beta: float
    a0: CoefficientField = field(default_factory=lambda: constant(1.0))
    f: CoefficientField = field(default_factory=lambda: constant(1.0))

    def __post_init__(self):
        if not (0.0 < self.beta < self.alpha):
            raise ValueError("require 0 < beta < alpha")

    def scaled_nominal(self) -> CoefficientField:
        """The coefficient alpha * a0 whose solution anchors the reduced basis."""
        return coeff_mod.affine_combination([self.a0], [self.alpha])


def galerkin_solve(
    space: FemSpace,
    config: ProblemConfig,
    a: CoefficientField,
    order: int = 4,
    tol: float = 1e-12,
    check: bool = True,
) -> np.ndarray:
    """Discrete solution of b(a; u, v) = (f, v) on the space, free dofs only."""
    samples = _sample_coefficient(space, a, order)
    if check:
        lo, hi = samples.min(), samples.max()
        if lo < config.alpha - config.beta - 1e-12 or hi > config.alpha + config.beta + 1e-12:
            raise MembershipError(
                f"coefficient range [{lo:.6g}, {hi:.6g}] outside "
                f"[{config.alpha - config.beta:.6g}, {config.alpha + config.beta:.6g}]"
            )
    k = assemble_stiffness_samples(space, samples, order)
    rhs = assemble_load(space, config.f, order)
    return solve_spd(k, rhs, tol)


def energy_norm(
    space: FemSpace,
    config: ProblemConfig,
    v: np.ndarray,
    k0: sp.csr_matrix | None = None,
) -> float:
    """Norm induced by the nominal bilinear form, sqrt(v' K(a0) v)."""
    if k0 is None:
        k0 = assemble_stiffness(space, config.a0)
    val = float(v @ (k0 @ v))
    return float(np.sqrt(max(val, 0.0)))


def dual_norm(
    space: FemSpace,
    config: ProblemConfig,
    f: CoefficientField | None = None,
    k0: sp.csr_matrix | None = None,
    order: int = 4,
) -> float:
    """Discrete dual norm of the source: energy norm of its Riesz representer."""
    if k0 is None:
        k0 = assemble_stiffness(space, config.a0, order)
    load = assemble_load(space, f if f is not None else config.f, order)
    rep = solve_spd(k0, load)
    return float(np.sqrt(max(float(load @ rep), 0.0)))


def normalize_source(space: FemSpace, config: ProblemConfig, order: int = 4) -> ProblemConfig:
    """Rescale the source so its discrete dual norm equals alpha.

    This makes the anchor solution S(alpha a0) have unit energy norm, so the
    reduced systems below carry their coefficient bounds exactly.
    """
    nrm = dual_norm(space, config, order=order)
    if nrm == 0.0:
        raise ValueError("cannot normalize a zero source")
    scaled = coeff_mod.affine_combination([config.f], [config.alpha / nrm])
    return ProblemConfig(config.alpha, config.beta, config.a0, scaled)


def vector_to_csv(v: np.ndarray) -> str:
    return "\n".join(f"{x:.17g}" for x in np.asarray(v, dtype=float)) + "\n"


def vector_from_csv(text: str) -> np.ndarray:
    return np.array([float(ln) for ln in text.split() if ln.strip()], dtype=float)
