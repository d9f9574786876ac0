"""Delay roots of the light-cone functional equations against a flow.

For a present observer position ``r_other`` and the worldline of particle
j carried by a flow segment, the retarded offset solves

    tau = -|r_other - r_j(tau)|      (tau < 0)

and the advanced offset the mirrored equation with tau > 0.  Sub-luminal
motion crosses each cone exactly once, so bracketing plus bisection is
robust; bisection is also what the underlying algorithm prescribes.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    ConvergenceError,
    FlowTooShortError,
    NoRootError,
    ValidationError,
)
from .rkf45 import eval_dense

BISECTION_MAX_ITER = 200
HARD_BOUND_MARGIN = 1.0 + 1e-6


@dataclass(frozen=True)
class DelayTimes:
    """The four delay offsets from the present instant."""

    tau1_ret: float
    tau2_ret: float
    tau1_adv: float
    tau2_adv: float

    def __post_init__(self):
        if not (self.tau1_ret < 0.0 and self.tau2_ret < 0.0):
            raise ValidationError("retarded offsets must be negative")
        if not (self.tau1_adv > 0.0 and self.tau2_adv > 0.0):
            raise ValidationError("advanced offsets must be positive")


def _position(segment, particle, tau):
    d = segment.dim // 4
    y = eval_dense(segment, tau)
    return y[0:d] if particle == 1 else y[2 * d : 3 * d]


def _max_particle_speed(segment, particle):
    d = segment.dim // 4
    sl = slice(d, 2 * d) if particle == 1 else slice(3 * d, 4 * d)
    return float(np.max(np.linalg.norm(segment.ys[:, sl], axis=1)))


def lightcone_residual(segment, particle, r_other, tau, direction):
    """tau -+ |r_other - r_j(tau)|; zero at the delay root."""
    dist = float(np.linalg.norm(np.asarray(r_other, dtype=float) - _position(segment, particle, tau)))
    return tau + dist if direction < 0 else tau - dist


def bracket_delay(segment, particle, r_other, direction):
    """Sign-changing interval for the light-cone residual.

    Starts from [-2 R0, 0] (mirrored for the advanced cone, direction > 0)
    and expands geometrically by 2 up to the sub-luminal hard bound
    R0 / (1 - beta_max).  Raises :class:`FlowTooShortError` when the flow
    span must be extended first and :class:`NoRootError` when the bound is
    exhausted.
    """
    if segment.dim not in (8, 12):
        raise ValidationError("delay roots require the two-particle layout")
    if particle not in (1, 2):
        raise ValidationError(f"particle must be 1 or 2, got {particle}")
    if segment.ts.shape[0] < 2:
        raise FlowTooShortError("flow has no time span", needed_time=None)
    r_other = np.asarray(r_other, dtype=float)

    r0 = float(np.linalg.norm(r_other - _position(segment, particle, 0.0)))
    if r0 == 0.0:
        raise ValidationError("observer coincides with the particle at tau = 0")
    beta_max = _max_particle_speed(segment, particle)
    if beta_max >= 1.0:
        raise NoRootError("flow contains superluminal knots")
    hard = r0 / (1.0 - beta_max) * HARD_BOUND_MARGIN + 1e-12

    sgn = -1.0 if direction < 0 else 1.0
    near = 0.0
    far = sgn * 2.0 * r0  # the hard bound caps expansion, not the first guess
    g_near = lightcone_residual(segment, particle, r_other, near, direction)
    edge = segment.t_min if sgn < 0 else segment.t_max
    while True:
        # probe no farther than the covered span; a root inside a flow that
        # ended early (maximal interval) is still perfectly usable
        probe = edge if abs(far) > abs(edge) else far
        g_far = lightcone_residual(segment, particle, r_other, probe, direction)
        if g_far == 0.0 or (g_far < 0.0) != (g_near < 0.0):
            far = probe
            break
        if probe != far:
            raise FlowTooShortError(
                f"flow span ends before the bracket point {far}",
                needed_time=float(far),
            )
        if abs(far) >= hard:
            raise NoRootError(
                f"no light-cone root within the sub-luminal bound {sgn * hard}"
            )
        far = sgn * min(2.0 * abs(far), hard)
    return (far, near) if sgn < 0 else (near, far)


def _knot_residual(segment, particle, r_other, i, direction):
    d = segment.dim // 4
    off = 0 if particle == 1 else 2 * d
    dist = float(
        np.linalg.norm(np.asarray(r_other, dtype=float) - segment.ys[i, off : off + d])
    )
    t = float(segment.ts[i])
    return t + dist if direction < 0 else t - dist


def _refine_to_knot_interval(segment, particle, r_other, direction, lo, hi):
    """Clip the bracket to the first knot interval with a sign change.

    The residual is monotone in exact arithmetic (sub-luminal motion), but
    on a flow that stalled at its own singularity the last interpolation
    interval pairs a tiny step with exploding derivatives and can produce
    spurious zeros.  Knot states are exact solution points, so bracketing
    on knot residuals first keeps the bisection inside one healthy
    interval and pins the root nearest the present instant.
    """
    ts = segment.ts
    i0 = int(np.searchsorted(ts, lo, side="left"))
    i1 = int(np.searchsorted(ts, hi, side="right")) - 1
    idx = range(i1, i0 - 1, -1) if direction < 0 else range(i0, i1 + 1)
    prev_t, prev_g = None, None
    for i in idx:
        g = _knot_residual(segment, particle, r_other, i, direction)
        if prev_g is not None and (g < 0.0) != (prev_g < 0.0):
            a, b = sorted((prev_t, float(ts[i])))
            return max(lo, a), min(hi, b)
        prev_t, prev_g = float(ts[i]), g
    return lo, hi


def _bisect(segment, particle, r_other, direction, lo, hi, tol):
    g_lo = lightcone_residual(segment, particle, r_other, lo, direction)
    g_hi = lightcone_residual(segment, particle, r_other, hi, direction)
    if g_lo == 0.0:
        return lo
    if g_hi == 0.0:
        return hi
    if (g_lo < 0.0) == (g_hi < 0.0):
        raise NoRootError("residual does not change sign on the bracket")
    lo2, hi2 = _refine_to_knot_interval(segment, particle, r_other, direction, lo, hi)
    g_lo2 = lightcone_residual(segment, particle, r_other, lo2, direction)
    g_hi2 = lightcone_residual(segment, particle, r_other, hi2, direction)
    if (g_lo2 < 0.0) != (g_hi2 < 0.0):
        lo, hi, g_lo = lo2, hi2, g_lo2
    if g_lo2 == 0.0:
        return lo2
    if g_hi2 == 0.0:
        return hi2
    for _ in range(BISECTION_MAX_ITER):
        mid = 0.5 * (lo + hi)
        g_mid = lightcone_residual(segment, particle, r_other, mid, direction)
        if abs(g_mid) < tol:
            return mid
        if (g_mid < 0.0) == (g_lo < 0.0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    raise ConvergenceError(
        f"bisection residual above {tol} after {BISECTION_MAX_ITER} iterations"
    )


def solve_retarded(segment, particle, r_other, tol=1e-10):
    """Retarded offset tau < 0 with |tau + |r_other - r_j(tau)|| < tol."""
    lo, hi = bracket_delay(segment, particle, r_other, -1)
    return _bisect(segment, particle, r_other, -1, lo, hi, tol)


def solve_advanced(segment, particle, r_other, tol=1e-10):
    """Advanced offset tau > 0 with |tau - |r_other - r_j(tau)|| < tol."""
    lo, hi = bracket_delay(segment, particle, r_other, +1)
    return _bisect(segment, particle, r_other, +1, lo, hi, tol)
