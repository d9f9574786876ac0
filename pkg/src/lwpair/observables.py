"""Observables: momentum, system self-force, singularity time, and the
time-averaged distance between trajectories of consecutive levels."""

from dataclasses import dataclass

import numpy as np

from .errors import (
    DomainError,
    NotApplicableError,
    SuperluminalError,
    ValidationError,
)
from .instantaneous import h0_accels
from .kernels import (
    BRANCH_ADVANCED,
    BRANCH_RETARDED,
    FieldEvalInput,
    force_kernel,
    planar_force_kernel,
)
from .levels import LevelConfig, delayed_data
from .params import ExtendedState, StateVector
from .rkf45 import TERM_SPEED, eval_dense, _max_speed, _refine_event


@dataclass(frozen=True)
class DistanceReport:
    """Time-averaged integrated distances between two runs' positions."""

    n_from: int
    n_to: int
    t_max: float
    d_r1: float
    d_r2: float

    def __post_init__(self):
        if not (np.isfinite(self.d_r1) and np.isfinite(self.d_r2)):
            raise ValidationError("distances must be finite")
        if self.d_r1 < 0 or self.d_r2 < 0:
            raise ValidationError("distances must be non-negative")


def _as_flat(x):
    if isinstance(x, StateVector):
        return x.to_array()
    return np.asarray(x, dtype=float)


def total_momentum(x, params):
    """eta gamma1 v1 + gamma2 v2."""
    y = _as_flat(x)
    d = y.shape[0] // 4
    v1 = y[d : 2 * d]
    v2 = y[3 * d :]
    out = np.zeros(d)
    for mass, v in ((params.eta, v1), (1.0, v2)):
        s2 = float(v @ v)
        if s2 >= 1.0:
            raise SuperluminalError("momentum undefined at or beyond light speed")
        out = out + mass * v / np.sqrt(1.0 - s2)
    return out


def self_force(present, delayed, params):
    """d(p1 + p2)/dt from the mixed kernels and delayed accelerations.

    ``delayed`` holds the four extended states of the flow through the
    present state, ordered (tau1_ret, tau2_ret, tau1_adv, tau2_adv); the
    forces and couplings are rebuilt from them, so the result is exactly
    the right side the dynamics uses.
    """
    y = _as_flat(present)
    d = y.shape[0] // 4
    r1, v1 = y[0:d], y[d : 2 * d]
    r2, v2 = y[2 * d : 3 * d], y[3 * d :]
    e1r, e2r, e1a, e2a = delayed
    kern = force_kernel if d == 3 else planar_force_kernel

    def branch_total(branch, on1, on2):
        k1 = kern(FieldEvalInput(r1, v1, on1.r2, on1.v2, branch), params.sign)
        k2 = kern(FieldEvalInput(r2, v2, on2.r1, on2.v1, branch), params.sign)
        return (
            k1.f + k2.f - k2.m_coupling @ on2.a1 - k1.m_coupling @ on1.a2
        )

    wr = 0.5 + params.alpha
    wa = 0.5 - params.alpha
    out = np.zeros(d)
    if wr != 0.0:
        out = out + wr * branch_total(BRANCH_RETARDED, e2r, e1r)
    if wa != 0.0:
        out = out + wa * branch_total(BRANCH_ADVANCED, e2a, e1a)
    return out


def instantaneous_extended(x, params):
    """The present state extended with the equal-times accelerations."""
    y = _as_flat(x)
    d = y.shape[0] // 4
    acc = h0_accels(y, params)
    return ExtendedState(
        r1=y[0:d], v1=y[d : 2 * d], a1=acc.a1,
        r2=y[2 * d : 3 * d], v2=y[3 * d :], a2=acc.a2,
    )


def self_force_at(x, params, cfg=None, n=0):
    """Self-force along a level-n run at state ``x``.

    For n = 0 the delayed data is the present state itself; for n >= 1 the
    level-(n-1) flow through ``x`` is rebuilt exactly as the field does.
    """
    if n == 0:
        ext = instantaneous_extended(x, params)
        delayed = (ext, ext, ext, ext)
    else:
        cfg = cfg if cfg is not None else LevelConfig()
        _, e1r, e2r, e1a, e2a = delayed_data(
            _as_flat(x), params, cfg, n - 1,
            retarded=params.alpha != -0.5, advanced=params.alpha != 0.5,
        )
        delayed = (e1r, e2r, e1a, e2a)
    return self_force(x, delayed, params)


def singularity_time(traj, v_threshold):
    """Refined crossing time of the faster particle over ``v_threshold``."""
    seg = traj.segment
    if traj.termination.reason == TERM_SPEED:
        smax_end = _max_speed(seg.ys[-1] if seg.t_end >= 0 else seg.ys[0], seg.dim)
        if abs(smax_end - v_threshold) < 1e-9:
            return traj.termination.time
    speeds = np.array([_max_speed(yk, seg.dim) for yk in seg.ys])
    above = np.nonzero(speeds >= v_threshold)[0]
    if above.size == 0:
        raise NotApplicableError(
            f"trajectory never reaches the speed threshold {v_threshold}"
        )
    i = int(above[0])
    if i == 0:
        return float(seg.ts[0])
    return _refine_event(
        lambda tq: _max_speed(eval_dense(seg, tq), seg.dim) - v_threshold,
        float(seg.ts[i - 1]),
        float(seg.ts[i]),
    )


def trajectory_distance(a, b, t_max=None, n_grid=2000):
    """Time-averaged integrated distance between two runs' positions.

    D = (1/t_max) integral_0^t_max ||r_i^b(t) - r_i^a(t)|| dt per particle,
    by the composite trapezoid rule on a uniform grid.  The caller is
    responsible for comparing runs started from the same initial condition;
    ``t_max`` defaults to the shortest common coverage and is echoed in the
    report.
    """
    seg_a, seg_b = a.segment, b.segment
    if seg_a.dim != seg_b.dim:
        raise ValidationError("trajectories have different state dimensions")
    cover = min(seg_a.t_max, seg_b.t_max)
    if t_max is None:
        t_max = cover
    if t_max <= 0:
        raise DomainError("no common forward coverage")
    if t_max > cover + 1e-12:
        raise DomainError(
            f"t_max = {t_max} exceeds the common coverage {cover}"
        )
    if n_grid < 2:
        raise ValidationError("n_grid must be at least 2")
    d = seg_a.dim // 4
    grid = np.linspace(0.0, t_max, n_grid)
    ya = np.array([eval_dense(seg_a, t) for t in grid])
    yb = np.array([eval_dense(seg_b, t) for t in grid])
    dr1 = np.linalg.norm(yb[:, 0:d] - ya[:, 0:d], axis=1)
    dr2 = np.linalg.norm(yb[:, 2 * d : 3 * d] - ya[:, 2 * d : 3 * d], axis=1)
    return DistanceReport(
        n_from=min(a.level, b.level),
        n_to=max(a.level, b.level),
        t_max=float(t_max),
        d_r1=float(np.trapezoid(dr1, grid) / t_max),
        d_r2=float(np.trapezoid(dr2, grid) / t_max),
    )
