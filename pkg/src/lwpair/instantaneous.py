"""Equal-times approximation: the level-0 vector field.

Setting every delay time equal to the present instant couples the two
accelerations linearly; solving the two blocks with the closed-form
composite inverse gives an explicit, autonomous first-order system.
"""

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfigurationError
from .kernels import (
    BRANCH_ADVANCED,
    BRANCH_RETARDED,
    FieldEvalInput,
    alpha_mix,
    force_kernel,
    mass_matrix_inverse,
    planar_force_kernel,
)
from .params import StateVector

COMPOSITE_CONDITION_LIMIT = 1e12


@dataclass(frozen=True)
class AccelPair:
    a1: np.ndarray
    a2: np.ndarray


def _as_flat(x):
    if isinstance(x, StateVector):
        return x.to_array()
    return np.asarray(x, dtype=float)


def _split(y):
    d = y.shape[0] // 4
    return y[0:d], y[d : 2 * d], y[2 * d : 3 * d], y[3 * d :]


def instantaneous_kernels(y, params):
    """Alpha-mixed kernels of both particles with all delays collapsed to
    the present time.  Returns (k1, k2) where k1 acts on particle 1."""
    r1, v1, r2, v2 = _split(y)
    kern = force_kernel if r1.shape[0] == 3 else planar_force_kernel
    k1 = alpha_mix(
        kern(FieldEvalInput(r1, v1, r2, v2, BRANCH_RETARDED), params.sign),
        kern(FieldEvalInput(r1, v1, r2, v2, BRANCH_ADVANCED), params.sign),
        params.alpha,
    )
    k2 = alpha_mix(
        kern(FieldEvalInput(r2, v2, r1, v1, BRANCH_RETARDED), params.sign),
        kern(FieldEvalInput(r2, v2, r1, v1, BRANCH_ADVANCED), params.sign),
        params.alpha,
    )
    return k1, k2


def accel_linear_solve(f1, f2, m12, m21, m11inv, m22inv, eta):
    """Solve the coupled two-block acceleration system.

    eta M11 a1 + m12 a2 = f1
        m21 a1 + M22 a2 = f2

    using the composite-inverse form rather than a dense 6x6 solve; the
    coupling structure stays explicit and the generic solve remains
    available as a test oracle.
    """
    f1 = np.asarray(f1, dtype=float)
    f2 = np.asarray(f2, dtype=float)
    eye = np.eye(f1.shape[0])
    c12 = m11inv @ m12
    c21 = m22inv @ m21
    comp1 = eye - (1.0 / eta) * c12 @ c21
    comp2 = eye - (1.0 / eta) * c21 @ c12
    for comp in (comp1, comp2):
        if np.linalg.cond(comp) > COMPOSITE_CONDITION_LIMIT:
            raise DegenerateConfigurationError(
                "composite acceleration matrix is ill-conditioned"
            )
    a1 = np.linalg.solve(comp1, m11inv @ f1 - c12 @ (m22inv @ f2)) / eta
    a2 = np.linalg.solve(comp2, m22inv @ f2 - (1.0 / eta) * c21 @ (m11inv @ f1))
    return AccelPair(a1, a2)


def h0_accels(x, params):
    """Both accelerations of the equal-times system."""
    y = _as_flat(x)
    k1, k2 = instantaneous_kernels(y, params)
    _, v1, _, v2 = _split(y)
    return accel_linear_solve(
        k1.f,
        k2.f,
        k1.m_coupling,
        k2.m_coupling,
        mass_matrix_inverse(v1),
        mass_matrix_inverse(v2),
        params.eta,
    )


def h0_field(x, params):
    """Time derivative (v1, a1, v2, a2) of the equal-times system."""
    y = _as_flat(x)
    acc = h0_accels(y, params)
    _, v1, _, v2 = _split(y)
    return np.concatenate([v1, acc.a1, v2, acc.a2])
