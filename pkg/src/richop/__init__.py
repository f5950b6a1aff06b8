"""Reduced-basis Richardson iteration unrolled into certified ReLU operators."""

from . import (
    coeff,
    encoder,
    fem,
    mesh,
    pipeline,
    reduced_basis,
    relu_net,
    richardson,
)

__all__ = [
    "mesh",
    "fem",
    "coeff",
    "encoder",
    "reduced_basis",
    "richardson",
    "relu_net",
    "pipeline",
]
