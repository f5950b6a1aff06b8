"""Full neural operator: encoder, unrolled approximator, exact synthesis.

The decoder is exact linear synthesis in the FEM space, so the decoder term
of the error decomposition is identically zero. The decomposition measures
the reduced-basis truncation, the encoder perturbation propagated through
the reduced Galerkin map, and the approximator network error, each
independently, and checks the triangle inequality against the total.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from .coeff import CoefficientField, DataFamily
from .encoder import (
    Encoder,
    build_gll_encoder,
    build_nodal_encoder,
    encoder_to_json,
    reconstruction_envelope,
)
from .fem import (
    FemSpace,
    ProblemConfig,
    build_space,
    energy_norm,
    galerkin_solve,
)
from .mesh import quad_split, read_mesh, write_mesh
from .reduced_basis import (
    GreedyTrace,
    ReducedBasis,
    generate_snapshots,
    synthesize,
    weak_greedy,
)
from .relu_net import (
    ApproximatorBundle,
    NeuralNet,
    build_approximator,
    net_from_json,
    net_to_json,
    realize,
    sparse_concat,
)
from .richardson import assemble_reduced, direct_solve

__all__ = [
    "NeuralOperator",
    "ErrorReport",
    "OperatorBuildError",
    "build_operator",
    "evaluate",
    "error_decomposition",
    "nonsmooth_operator",
    "save_bundle",
    "load_bundle",
]


class OperatorBuildError(RuntimeError):
    """Encoded reconstructions left the admissible cone (envelope >= alpha)."""


@dataclass
class NeuralOperator:
    """Composed operator a -> synthesize(realize(net, encode(a)))."""

    encoder: Encoder
    approximator: ApproximatorBundle
    basis: ReducedBasis
    space: FemSpace
    config: ProblemConfig
    frame: str
    certificates: dict
    greedy_trace: GreedyTrace | None = None

    def encode(self, a: CoefficientField) -> np.ndarray:
        return self.encoder.encode(a)


@dataclass
class ErrorReport:
    """Per-coefficient energy errors and the three decomposition terms."""

    totals: list = field(default_factory=list)
    reduced_truncation: list = field(default_factory=list)
    encoder_perturbation: list = field(default_factory=list)
    network: list = field(default_factory=list)

    def rows(self):
        return list(
            zip(
                self.totals,
                self.reduced_truncation,
                self.encoder_perturbation,
                self.network,
            )
        )


def build_operator(
    family: DataFamily,
    config: ProblemConfig,
    space: FemSpace,
    training_count: int,
    n_basis: int,
    encoder: Encoder,
    epsilon: float,
    seed: int,
    gamma: float = 1.0,
    beta_mode: str = "paper",
) -> NeuralOperator:
    """Snapshots, weak greedy, network assembly, certificate recording.

    Aborts when the measured envelope of the encoded training reconstructions
    reaches alpha, since the reduced iteration then has no contraction
    guarantee.
    """
    if n_basis > training_count:
        raise ValueError("basis size cannot exceed the training count")
    snapshots = generate_snapshots(family, training_count, seed, space, config)
    basis, trace = weak_greedy(snapshots, n_basis, gamma)
    beta_tilde = 0.0
    for a in snapshots.coefficients:
        env = reconstruction_envelope(encoder, encoder.encode(a), config.alpha)
        beta_tilde = max(beta_tilde, env)
    if beta_tilde >= config.alpha:
        raise OperatorBuildError(
            f"encoded reconstructions have envelope beta_tilde={beta_tilde:.6g} "
            f">= alpha={config.alpha:.6g}; refine the encoder"
        )
    if beta_mode == "paper":
        if beta_tilde > config.beta + 1e-9:
            raise OperatorBuildError(
                f"measured envelope {beta_tilde:.6g} exceeds beta={config.beta:.6g}; "
                "use beta_mode='measured'"
            )
        beta_eff = config.beta
    elif beta_mode == "measured":
        beta_eff = max(beta_tilde, 1e-6 * config.alpha)
    else:
        raise ValueError("beta_mode must be 'paper' or 'measured'")
    approximator = build_approximator(
        basis, space, config, encoder, epsilon, beta_eff=beta_eff
    )
    certificates = {
        "epsilon": epsilon,
        "beta_tilde": beta_tilde,
        "beta_eff": beta_eff,
        "alpha": config.alpha,
        "beta": config.beta,
        "n_basis": basis.size - 1,
        "m_channels": encoder.m,
        **approximator.report.certificates,
    }
    return NeuralOperator(
        encoder, approximator, basis, space, config, "ortho", certificates, trace
    )


def evaluate(op: NeuralOperator, a: CoefficientField) -> np.ndarray:
    """Apply the operator: encode, realize the approximator, synthesize."""
    y = op.encoder.encode(a)
    c = realize(op.approximator.net, y)
    return synthesize(op.basis, c, frame=op.frame)


def error_decomposition(op: NeuralOperator, test_coefficients) -> ErrorReport:
    """Measure the truncation, encoder, and network error terms independently.

    Terms: (I) fine solution vs dense reduced solve, (II) reduced solves of
    the coefficient and of its reconstruction, (III) reduced solve of the
    reconstruction vs the synthesized network output.
    """
    space, config, basis = op.space, op.config, op.basis
    k0 = basis.nominal_stiffness
    report = ErrorReport()
    for a in test_coefficients:
        u_fine = galerkin_solve(space, config, a)
        sys_a = assemble_reduced(basis, space, config, a, frame=op.frame)
        u_reduced = synthesize(basis, direct_solve(sys_a), frame=op.frame)
        recon = op.encoder.reconstruct(op.encoder.encode(a))
        sys_r = assemble_reduced(basis, space, config, recon, frame=op.frame)
        u_recon = synthesize(basis, direct_solve(sys_r), frame=op.frame)
        u_net = evaluate(op, a)
        report.totals.append(energy_norm(space, config, u_fine - u_net, k0=k0))
        report.reduced_truncation.append(
            energy_norm(space, config, u_fine - u_reduced, k0=k0)
        )
        report.encoder_perturbation.append(
            energy_norm(space, config, u_reduced - u_recon, k0=k0)
        )
        report.network.append(energy_norm(space, config, u_recon - u_net, k0=k0))
    return report


def _abs_shift_net(m: int, a_min: float) -> NeuralNet:
    """Exact channelwise map y -> a_min + |y| as a two-layer ReLU net."""
    import scipy.sparse as sp

    eye = sp.eye(m, format="csr")
    up = sp.vstack([eye, -eye]).tocsr()
    down = sp.hstack([eye, eye]).tocsr()
    return NeuralNet([(up, np.zeros(2 * m)), (down, a_min * np.ones(m))])


def nonsmooth_operator(op: NeuralOperator, a_min: float) -> NeuralOperator:
    """Prepend the exact a_min + |.| subnet to handle sign-changing inputs.

    The base operator must have been built for the shifted coefficient
    family; outputs are exactly invariant under a -> -a.
    """
    if a_min <= 0:
        raise ValueError("a_min must be positive")
    shift_net = _abs_shift_net(op.encoder.m, a_min)
    app = op.approximator
    net = sparse_concat(app.net, shift_net)
    encoder_input = sparse_concat(app.encoder_input, shift_net)
    new_bundle = ApproximatorBundle(
        net,
        app.report,
        encoder_input,
        app.step,
        app.k_steps,
        app.shift,
        app.eps_iterator,
        app.eps_step,
        app.contraction,
    )
    certificates = dict(op.certificates)
    certificates["nonsmooth_a_min"] = a_min
    return NeuralOperator(
        op.encoder,
        new_bundle,
        op.basis,
        op.space,
        op.config,
        op.frame,
        certificates,
        op.greedy_trace,
    )


def save_bundle(op: NeuralOperator, directory: str) -> None:
    """Operator bundle: mesh, basis matrix CSV, encoder JSON, net JSON, certificates."""
    os.makedirs(directory, exist_ok=True)
    write_mesh(op.space.mesh, os.path.join(directory, "mesh.txt"))
    enc_mesh = (
        op.encoder._payload.mesh
        if op.encoder.kind == "nodal"
        else op.encoder._payload.split.mesh
    )
    write_mesh(enc_mesh, os.path.join(directory, "encoder_mesh.txt"))
    p = op.basis.frame(op.frame)
    with open(os.path.join(directory, "basis.csv"), "w") as fh:
        for row in p:
            fh.write(",".join(f"{x:.17g}" for x in row) + "\n")
    with open(os.path.join(directory, "encoder.json"), "w") as fh:
        fh.write(encoder_to_json(op.encoder))
    with open(os.path.join(directory, "net.json"), "w") as fh:
        fh.write(net_to_json(op.approximator.net, op.approximator.report))
    meta = dict(op.certificates)
    meta["fem_degree"] = op.space.degree
    meta["frame"] = op.frame
    with open(os.path.join(directory, "certificates.json"), "w") as fh:
        fh.write(json.dumps(meta, indent=1))


@dataclass
class LoadedOperator:
    """Evaluable operator reconstructed from a bundle directory."""

    encoder: Encoder
    net: NeuralNet
    synthesis: np.ndarray
    certificates: dict

    def evaluate(self, a: CoefficientField) -> np.ndarray:
        return self.synthesis @ realize(self.net, self.encoder.encode(a))


def load_bundle(directory: str) -> LoadedOperator:
    with open(os.path.join(directory, "certificates.json")) as fh:
        meta = json.load(fh)
    enc_mesh = read_mesh(os.path.join(directory, "encoder_mesh.txt"))
    with open(os.path.join(directory, "encoder.json")) as fh:
        enc_doc = json.load(fh)
    if enc_doc["kind"] == "nodal":
        enc = build_nodal_encoder(build_space(enc_mesh, enc_doc["degree"]))
    else:
        enc = build_gll_encoder(quad_split(enc_mesh), enc_doc["p"])
    stored = np.asarray(enc_doc["query_points"], dtype=float)
    if enc.m != len(stored) or not np.allclose(enc.query_points, stored, atol=1e-12):
        raise ValueError("rebuilt encoder does not match the stored query points")
    with open(os.path.join(directory, "net.json")) as fh:
        net, _ = net_from_json(fh.read())
    synthesis = np.loadtxt(os.path.join(directory, "basis.csv"), delimiter=",")
    if synthesis.ndim == 1:
        synthesis = synthesis[:, None]
    return LoadedOperator(enc, net, synthesis, meta)
