"""Pair-interaction force kernels and velocity mass matrices.

Conventions (scaled units, c = 1).  For the force on particle i at the
present time, the other particle j enters through its state on the
backward ("retarded") or forward ("advanced") light cone:

    e   unit vector from r_j(t_d) toward r_i(t)
    w   v_j(t_d), velocity at the delayed time
    p   v_i(t), velocity at the present time
    R   |r_i(t) - r_j(t_d)|

The force splits into an acceleration-independent vector ``f`` and a
matrix coupling ``m`` to the delayed acceleration:

    force_on_i = f - m @ a_j(t_d)

Both branches reduce to one expression with w replaced by +w (retarded)
or -w (advanced):

    d = 1 - w.e
    f = sign (1 - |w|^2) [p x (w x e) + e - w] / (d^3 R^2)
    m = sign [ (1-p.e) d I + d e p^T - (1-p.e)(e-w) e^T - (p.(e-w)) e e^T ]
        / (d^3 R)

which is the explicit component form of the appendices written with outer
products, so the w -> 0 limit needs no special casing.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SingularityError, SuperluminalError, ValidationError

BRANCH_RETARDED = "retarded"
BRANCH_ADVANCED = "advanced"

# Denominators appear cubed; below this the kernel overflows meaningfully.
LIGHTCONE_DENOMINATOR_FLOOR = 1e-9


@dataclass(frozen=True)
class FieldEvalInput:
    """Present state of the receiving particle and delayed state of the
    source particle."""

    r_self: np.ndarray
    v_self: np.ndarray
    r_other: np.ndarray
    v_other: np.ndarray
    branch: str

    def __post_init__(self):
        for name in ("r_self", "v_self", "r_other", "v_other"):
            object.__setattr__(
                self, name, np.asarray(getattr(self, name), dtype=float)
            )
        dims = {getattr(self, n).shape for n in ("r_self", "v_self", "r_other", "v_other")}
        if len(dims) != 1 or next(iter(dims)) not in {(2,), (3,)}:
            raise ValidationError(f"inconsistent or unsupported vector shapes: {dims}")
        if self.branch not in (BRANCH_RETARDED, BRANCH_ADVANCED):
            raise ValidationError(f"unknown branch {self.branch!r}")
        for name in ("v_self", "v_other"):
            if np.linalg.norm(getattr(self, name)) >= 1.0:
                raise SuperluminalError(f"|{name}| >= 1")

    @property
    def dim(self):
        return self.r_self.shape[0]


@dataclass(frozen=True)
class ForceKernel:
    """Acceleration-independent force and delayed-acceleration coupling."""

    f: np.ndarray
    m_coupling: np.ndarray

    def force(self, a_other):
        """Total force given the source's delayed acceleration."""
        return self.f - self.m_coupling @ np.asarray(a_other, dtype=float)


def unit_separation(inp):
    """Unit vector from the delayed source position to the present one."""
    rvec = inp.r_self - inp.r_other
    dist = float(np.linalg.norm(rvec))
    if dist == 0.0:
        raise SingularityError("coincident charge positions")
    return rvec / dist


def _kernel(r_self, v_self, r_other, v_other, branch, sign):
    rvec = r_self - r_other
    dist = float(np.linalg.norm(rvec))
    if dist == 0.0:
        raise SingularityError("coincident charge positions")
    e = rvec / dist
    p = v_self
    w = v_other if branch == BRANCH_RETARDED else -v_other
    d = 1.0 - float(w @ e)
    if abs(d) < LIGHTCONE_DENOMINATOR_FLOOR:
        raise SingularityError(
            f"light-cone denominator |1 -+ v.e| = {abs(d)} below "
            f"{LIGHTCONE_DENOMINATOR_FLOOR}"
        )
    w2 = float(v_other @ v_other)
    pre = sign * (1.0 - w2) / (d**3 * dist**2)
    if e.shape[0] == 3:
        triple = np.cross(p, np.cross(w, e))
    else:
        zeta = w[0] * e[1] - w[1] * e[0]
        triple = np.array([p[1] * zeta, -p[0] * zeta])
    f = pre * (triple + e - w)

    eye = np.eye(e.shape[0])
    pe = float(p @ e)
    ew = e - w
    L = (
        (1.0 - pe) * d * eye
        + d * np.outer(e, p)
        - (1.0 - pe) * np.outer(ew, e)
        - float(p @ ew) * np.outer(e, e)
    )
    m = sign / (d**3 * dist) * L
    return ForceKernel(f, m)


def force_kernel(inp, sign):
    """Force kernel of the appendix expressions, three-dimensional form."""
    if inp.dim != 3:
        raise ValidationError("force_kernel expects 3-vectors; see planar_force_kernel")
    return _kernel(inp.r_self, inp.v_self, inp.r_other, inp.v_other, inp.branch, sign)


def planar_force_kernel(inp, sign):
    """Planar (z = 0) force kernel: 2-vector f and 2x2 coupling."""
    if inp.dim == 3:
        comps = (inp.r_self[2], inp.v_self[2], inp.r_other[2], inp.v_other[2])
        if any(c != 0.0 for c in comps):
            raise ValidationError("planar kernel requires vanishing z components")
        return _kernel(
            inp.r_self[:2], inp.v_self[:2], inp.r_other[:2], inp.v_other[:2],
            inp.branch, sign,
        )
    return _kernel(inp.r_self, inp.v_self, inp.r_other, inp.v_other, inp.branch, sign)


def _check_speed(v):
    v = np.asarray(v, dtype=float)
    s2 = float(v @ v)
    if s2 >= 1.0:
        raise SuperluminalError(f"|v| = {np.sqrt(s2)} >= 1")
    return v, s2


def mass_matrix(v):
    """M = gamma I + gamma^3 v v^T, the velocity mass matrix d(gamma v)/dv."""
    v, s2 = _check_speed(v)
    gamma = 1.0 / np.sqrt(1.0 - s2)
    return gamma * np.eye(v.shape[0]) + gamma**3 * np.outer(v, v)


def mass_matrix_inverse(v):
    """Closed-form inverse sqrt(1 - |v|^2) (I - v v^T)."""
    v, s2 = _check_speed(v)
    return np.sqrt(1.0 - s2) * (np.eye(v.shape[0]) - np.outer(v, v))


def alpha_mix(retarded, advanced, alpha):
    """Weighted combination (1/2 + alpha) retarded + (1/2 - alpha) advanced."""
    if abs(alpha) > 0.5:
        raise ValidationError(f"alpha must lie in [-1/2, 1/2], got {alpha}")
    wr = 0.5 + alpha
    wa = 0.5 - alpha
    return ForceKernel(
        wr * retarded.f + wa * advanced.f,
        wr * retarded.m_coupling + wa * advanced.m_coupling,
    )
