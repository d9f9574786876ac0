"""Dimensionless parameterization, SI conversion, and initial conditions.

Scaled units: lengths in L = |q1 q2| / (4 pi eps0 m2 c^2), times in
T = L / c, velocities as fractions of c, masses in units of m2.  In these
units c = 1, particle 1 has mass eta = m1/m2, particle 2 has mass 1, and
the dynamics depends only on (eta, sign, alpha).
"""

from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError, SuperluminalError

SPEED_OF_LIGHT = 299792458.0  # m/s
VACUUM_PERMITTIVITY = 8.8541878128e-12  # F/m


@dataclass(frozen=True)
class SystemParams:
    """The three dimensionless parameters of the pair system.

    eta    mass ratio m1/m2, > 0
    sign   sign of the charge product q1*q2, -1 (attractive) or +1
    alpha  retarded/advanced mixing weight in [-1/2, 1/2]; +1/2 is purely
           retarded, 0 the symmetric (half/half) combination
    """

    eta: float
    sign: int
    alpha: float

    def __post_init__(self):
        if not np.isfinite(self.eta) or self.eta <= 0:
            raise ValidationError(f"eta must be a positive real, got {self.eta}")
        if self.sign not in (-1, 1):
            raise ValidationError(f"sign must be -1 or +1, got {self.sign}")
        if not np.isfinite(self.alpha) or abs(self.alpha) > 0.5:
            raise ValidationError(
                f"alpha must lie in [-1/2, 1/2], got {self.alpha}"
            )


def make_params(eta, sign, alpha):
    """Validate and build a :class:`SystemParams`."""
    return SystemParams(float(eta), int(sign), float(alpha))


def _as_vec(x, name, dim=None):
    v = np.asarray(x, dtype=float)
    if v.ndim != 1 or v.shape[0] not in (2, 3):
        raise ValidationError(f"{name} must be a 2- or 3-vector, got shape {v.shape}")
    if dim is not None and v.shape[0] != dim:
        raise ValidationError(f"{name} must have dimension {dim}, got {v.shape[0]}")
    if not np.all(np.isfinite(v)):
        raise ValidationError(f"{name} has non-finite components: {v}")
    v = v.copy()
    v.flags.writeable = False
    return v


@dataclass(frozen=True)
class StateVector:
    """Positions and velocities of both particles in scaled units."""

    r1: np.ndarray
    v1: np.ndarray
    r2: np.ndarray
    v2: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "r1", _as_vec(self.r1, "r1"))
        dim = self.r1.shape[0]
        object.__setattr__(self, "v1", _as_vec(self.v1, "v1", dim))
        object.__setattr__(self, "r2", _as_vec(self.r2, "r2", dim))
        object.__setattr__(self, "v2", _as_vec(self.v2, "v2", dim))
        for name, v in (("v1", self.v1), ("v2", self.v2)):
            speed = float(np.linalg.norm(v))
            if speed >= 1.0:
                raise SuperluminalError(f"|{name}| = {speed} >= 1")
        if np.array_equal(self.r1, self.r2):
            raise ValidationError("r1 and r2 coincide")

    @property
    def dim(self):
        return self.r1.shape[0]

    @property
    def separation(self):
        return float(np.linalg.norm(self.r1 - self.r2))

    def to_array(self):
        return np.concatenate([self.r1, self.v1, self.r2, self.v2])

    @classmethod
    def from_array(cls, y):
        y = np.asarray(y, dtype=float)
        if y.ndim != 1 or y.shape[0] not in (8, 12):
            raise ValidationError(
                f"state array must have length 8 (planar) or 12, got {y.shape}"
            )
        d = y.shape[0] // 4
        return cls(y[0:d], y[d : 2 * d], y[2 * d : 3 * d], y[3 * d :])

    def is_planar(self):
        """True for 2-d states and for 3-d states lying in the z = 0 plane."""
        if self.dim == 2:
            return True
        return (
            self.r1[2] == 0.0
            and self.v1[2] == 0.0
            and self.r2[2] == 0.0
            and self.v2[2] == 0.0
        )


@dataclass(frozen=True)
class ExtendedState:
    """State plus accelerations, as delivered by flow evaluation."""

    r1: np.ndarray
    v1: np.ndarray
    a1: np.ndarray
    r2: np.ndarray
    v2: np.ndarray
    a2: np.ndarray

    def to_array(self):
        return np.concatenate([self.r1, self.v1, self.a1, self.r2, self.v2, self.a2])


def length_scale(q1, q2, m2):
    """L = |q1 q2| / (4 pi eps0 m2 c^2) in metres."""
    if q1 == 0.0 or q2 == 0.0:
        raise ValidationError("charges must be nonzero")
    if m2 <= 0.0:
        raise ValidationError("m2 must be positive")
    return abs(q1) * abs(q2) / (
        4.0 * np.pi * VACUUM_PERMITTIVITY * m2 * SPEED_OF_LIGHT**2
    )


def time_scale(q1, q2, m2):
    """T = L/c in seconds."""
    return length_scale(q1, q2, m2) / SPEED_OF_LIGHT


def physical_to_dimensionless(q1, q2, m1, m2, si_state):
    """Convert an SI-unit state to scaled units.

    ``si_state`` is a 4-tuple (r1, v1, r2, v2) of vectors in metres and m/s.
    Returns ``(SystemParams, StateVector)``; alpha is not derivable from SI
    data, so the returned params carry the causal default alpha = 1/2.
    """
    if m1 <= 0.0 or m2 <= 0.0:
        raise ValidationError("masses must be positive")
    L = length_scale(q1, q2, m2)
    c = SPEED_OF_LIGHT
    r1, v1, r2, v2 = (np.asarray(u, dtype=float) for u in si_state)
    params = SystemParams(m1 / m2, int(np.sign(q1 * q2)), 0.5)
    state = StateVector(r1 / L, v1 / c, r2 / L, v2 / c)
    return params, state


def dimensionless_to_physical(q1, q2, m1, m2, state):
    """Inverse of :func:`physical_to_dimensionless`: the (r1, v1, r2, v2)
    tuple in metres and m/s."""
    if m1 <= 0.0 or m2 <= 0.0:
        raise ValidationError("masses must be positive")
    L = length_scale(q1, q2, m2)
    c = SPEED_OF_LIGHT
    return (state.r1 * L, state.v1 * c, state.r2 * L, state.v2 * c)


def circular_initial_condition(params, r0, dim=3):
    """State that would give circular orbits under the non-relativistic
    instantaneous Coulomb force at separation ``r0``.

    The centre of mass sits at the origin, both particles on the x axis
    (particle 1 on the negative side), velocities along +y for particle 1
    and -y for particle 2.
    """
    if params.sign != -1:
        raise ValidationError("circular initial condition requires an attractive pair")
    if not np.isfinite(r0) or r0 <= 0:
        raise ValidationError(f"r0 must be positive, got {r0}")
    if dim not in (2, 3):
        raise ValidationError(f"dim must be 2 or 3, got {dim}")
    eta = params.eta
    v1 = np.sqrt(1.0 / (eta * (1.0 + eta) * r0))
    v2 = np.sqrt(eta / ((1.0 + eta) * r0))
    if v1 >= 1.0 or v2 >= 1.0:
        raise SuperluminalError(
            f"r0 = {r0} puts the Coulomb circular speed at or beyond c"
        )
    rho1 = r0 / (1.0 + eta)
    rho2 = r0 * eta / (1.0 + eta)
    pad = [0.0] * (dim - 2)
    return StateVector(
        np.array([-rho1, 0.0] + pad),
        np.array([0.0, v1] + pad),
        np.array([rho2, 0.0] + pad),
        np.array([0.0, -v2] + pad),
    )
