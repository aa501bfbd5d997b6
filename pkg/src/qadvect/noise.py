"""Gaussian perturbations of the initial field and of the step matrix."""
from __future__ import annotations

import numpy as np

from .grid import ScalarField
from .operator import SparseOperator


def perturb_state(field: ScalarField, sigma_fraction: float, rng: np.random.Generator) -> ScalarField:
    """Add i.i.d. noise with standard deviation ``sigma_fraction * mean(field)``.

    Applied to the raw field; normalization happens when the field is
    encoded as a statevector.
    """
    if sigma_fraction < 0:
        raise ValueError("sigma_fraction must be non-negative")
    if sigma_fraction == 0:
        return field
    sigma = sigma_fraction * float(np.mean(field.values))
    return ScalarField(field.grid, field.values + rng.normal(0.0, abs(sigma), field.values.size))


def perturb_matrix(A: SparseOperator, sigma_fraction: float, rng: np.random.Generator) -> SparseOperator:
    """Scale every stored entry by ``1 + N(0, sigma_fraction)``; pattern unchanged."""
    if sigma_fraction < 0:
        raise ValueError("sigma_fraction must be non-negative")
    if sigma_fraction == 0:
        return A
    factors = 1.0 + rng.normal(0.0, sigma_fraction, A.data.size)
    return A.with_values(A.data * factors)
