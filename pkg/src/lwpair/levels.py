"""Level-n vector fields and their trajectories.

Level 0 is the equal-times system.  For n >= 1, evaluating the level-n
field at a state X means: integrate the level-(n-1) system from X backward
and forward, solve the four light-cone equations on that flow, read the
delayed positions/velocities/accelerations off it, and assemble the forces
with the delayed-acceleration couplings applied.  The recursion re-derives
every lower level per evaluation, so cost grows geometrically with n; the
planar compiled path (:mod:`lwpair.fastpath`) keeps that affordable.
"""

from dataclasses import dataclass

import numpy as np

from .errors import (
    FlowTooShortError,
    IntegrationStallError,
    SimulationError,
    ValidationError,
)
from .instantaneous import h0_field
from .kernels import (
    BRANCH_ADVANCED,
    BRANCH_RETARDED,
    FieldEvalInput,
    force_kernel,
    mass_matrix_inverse,
    planar_force_kernel,
)
from .lightcone import DelayTimes, solve_advanced, solve_retarded
from .params import StateVector
from .rkf45 import (
    TERM_STALL,
    StopCondition,
    TrajectorySegment,
    eval_flow,
    extend_segment,
    integrate,
)

CACHE_PER_EVALUATION = "per-evaluation"
CACHE_NONE = "none"

MAX_FLOW_EXTENSIONS = 64
# a healthy inner flow needs a few thousand knots; beyond this it is
# grinding asymptotically toward its own singularity and the partial flow
# is used as far as it goes
MAX_FLOW_STEPS = 200_000


@dataclass(frozen=True)
class LevelConfig:
    """Numerical knobs of one level construction.

    ``level`` is the default level for run configurations; the field
    operations below always take the level explicitly.
    """

    level: int = 0
    abs_tol: float = 1e-9
    rel_tol: float = 1e-9
    delay_tol: float = 1e-10
    dtau_rel: float = 1e-3
    horizon_factor: float = 2.0
    accel_mode: str = "fd"
    cache: str = CACHE_PER_EVALUATION

    def __post_init__(self):
        if self.level < 0:
            raise ValidationError("level must be non-negative")
        for name in ("abs_tol", "rel_tol", "delay_tol", "dtau_rel", "horizon_factor"):
            if getattr(self, name) <= 0:
                raise ValidationError(f"{name} must be positive")
        if self.accel_mode not in ("fd", "exact"):
            raise ValidationError(f"accel_mode must be 'fd' or 'exact', got {self.accel_mode!r}")
        if self.cache not in (CACHE_PER_EVALUATION, CACHE_NONE):
            raise ValidationError(f"unknown cache policy {self.cache!r}")


@dataclass(frozen=True)
class Termination:
    reason: str
    time: float


@dataclass(frozen=True)
class Trajectory:
    """A solved level-n run."""

    params: object
    level: int
    segment: TrajectorySegment
    termination: Termination

    def state(self, t):
        from .rkf45 import eval_dense

        return eval_dense(self.segment, t)

    @property
    def t_end(self):
        return self.termination.time


def _as_flat(x):
    if isinstance(x, StateVector):
        return x.to_array()
    return np.asarray(x, dtype=float)


def _split(y):
    d = y.shape[0] // 4
    return y[0:d], y[d : 2 * d], y[2 * d : 3 * d], y[3 * d :]


def _annotate(err, level):
    if isinstance(err, SimulationError) and err.level is None:
        err.level = level
    return err


def _build_flow(field, y, t_signed, tolerances, level):
    """Integrate a flow toward the horizon.

    A flow that stalls at its own singularity before the horizon is still
    a valid solution over the span it covers, so the partial segment is
    returned; it becomes fatal only if a delay root lies beyond it.
    """
    try:
        return integrate(
            field,
            y,
            t_signed,
            tolerances,
            clamp_to_target=False,
            field_id=f"level-{level}",
            max_steps=MAX_FLOW_STEPS,
        )
    except IntegrationStallError as err:
        if err.segment is None or err.segment.ts.shape[0] < 2:
            raise _annotate(err, level)
        return err.segment
    except SimulationError as err:
        raise _annotate(err, level)


def _solve_on_flow(field, y, solver, particle, r_other, cfg, level, t_sign, flow=None):
    """Root of one light-cone equation, lazily extending the flow.

    Returns (root, flow); with cache disabled the caller passes flow=None
    every time and the segment is rebuilt from scratch.
    """
    sep = float(np.linalg.norm(_split(y)[0] - _split(y)[2]))
    tolerances = (cfg.abs_tol, cfg.rel_tol)
    if flow is None:
        flow = _build_flow(field, y, t_sign * cfg.horizon_factor * sep, tolerances, level)
    for _ in range(MAX_FLOW_EXTENSIONS):
        try:
            return solver(flow, particle, r_other, cfg.delay_tol), flow
        except FlowTooShortError as err:
            if flow.termination == TERM_STALL:
                raise _annotate(
                    IntegrationStallError(
                        "flow reached its maximal interval before covering "
                        "the delay root"
                    ),
                    level,
                )
            target = err.needed_time if err.needed_time is not None else flow.t_end + t_sign * sep
            target = target + t_sign * sep
            try:
                flow = extend_segment(flow, target, tolerances,
                                      max_steps=MAX_FLOW_STEPS)
            except SimulationError as inner:
                raise _annotate(inner, level)
    raise _annotate(
        IntegrationStallError("flow extension budget exhausted"), level
    )


def delayed_data(x, params, cfg, n, retarded=True, advanced=True):
    """Delay times and delayed extended states on the level-n flow.

    Returns (DelayTimes-or-None, phi(tau1_ret), phi(tau2_ret),
    phi(tau1_adv), phi(tau2_adv)) where each phi is an
    :class:`ExtendedState` of the flow through ``x`` integrated with the
    level-n field (n >= 0).  A branch whose mixing weight is zero is
    never computed (the pure-retarded problem needs no forward flow and
    vice versa); its entries are None, and DelayTimes is only assembled
    when both cones were solved.
    """
    y = _as_flat(x)
    r1, v1, r2, v2 = _split(y)
    sep = float(np.linalg.norm(r1 - r2))
    dtau = cfg.dtau_rel * sep
    field = make_field(n, params, cfg)
    tolerances = (cfg.abs_tol, cfg.rel_tol)
    cached = cfg.cache == CACHE_PER_EVALUATION

    def flow_for(direction):
        return _build_flow(field, y, direction * cfg.horizon_factor * sep, tolerances, n)

    def eval_at(flow, tau, forward):
        if flow is None:
            flow = flow_for(1.0 if forward else -1.0)
        if (
            forward
            and cfg.accel_mode == "fd"
            and tau + dtau > flow.t_max
            and flow.termination != TERM_STALL
        ):
            flow = extend_segment(flow, tau + 2.0 * dtau, tolerances,
                                  max_steps=MAX_FLOW_STEPS)
        # past a stalled flow's edge, eval_with_accel falls back to the field
        return eval_flow(flow, tau, accel_mode=cfg.accel_mode, dtau=dtau), flow

    tau1_ret = tau2_ret = tau1_adv = tau2_adv = None
    e1r = e2r = e1a = e2a = None
    if retarded:
        back = flow_for(-1.0) if cached else None
        tau1_ret, back = _solve_on_flow(field, y, solve_retarded, 1, r2, cfg, n, -1.0, back)
        tau2_ret, back = _solve_on_flow(
            field, y, solve_retarded, 2, r1, cfg, n, -1.0, back if cached else None
        )
        e1r, back = eval_at(back if cached else None, tau1_ret, False)
        e2r, back = eval_at(back if cached else None, tau2_ret, False)
    if advanced:
        fwd = flow_for(1.0) if cached else None
        tau1_adv, fwd = _solve_on_flow(field, y, solve_advanced, 1, r2, cfg, n, 1.0, fwd)
        tau2_adv, fwd = _solve_on_flow(
            field, y, solve_advanced, 2, r1, cfg, n, 1.0, fwd if cached else None
        )
        e1a, fwd = eval_at(fwd if cached else None, tau1_adv, True)
        e2a, fwd = eval_at(fwd if cached else None, tau2_adv, True)

    taus = None
    if retarded and advanced:
        taus = DelayTimes(tau1_ret, tau2_ret, tau1_adv, tau2_adv)
    return taus, e1r, e2r, e1a, e2a


def _delayed_force(r_self, v_self, delayed_r, delayed_v, delayed_a, branch, params, kern):
    k = kern(FieldEvalInput(r_self, v_self, delayed_r, delayed_v, branch), params.sign)
    return k.f - k.m_coupling @ delayed_a


def h_field(n, x, params, cfg=None):
    """Time derivative (v1, a1, v2, a2) of the level-n system at ``x``."""
    if n < 0:
        raise ValidationError("level must be non-negative")
    y = _as_flat(x)
    if n == 0:
        return h0_field(y, params)
    cfg = cfg if cfg is not None else LevelConfig()
    r1, v1, r2, v2 = _split(y)
    kern = force_kernel if r1.shape[0] == 3 else planar_force_kernel

    wr = 0.5 + params.alpha
    wa = 0.5 - params.alpha
    _, e1r, e2r, e1a, e2a = delayed_data(
        y, params, cfg, n - 1, retarded=wr != 0.0, advanced=wa != 0.0
    )

    rhs1 = np.zeros_like(r1)
    rhs2 = np.zeros_like(r2)
    if wr != 0.0:
        rhs1 = rhs1 + wr * _delayed_force(
            r1, v1, e2r.r2, e2r.v2, e2r.a2, BRANCH_RETARDED, params, kern
        )
        rhs2 = rhs2 + wr * _delayed_force(
            r2, v2, e1r.r1, e1r.v1, e1r.a1, BRANCH_RETARDED, params, kern
        )
    if wa != 0.0:
        rhs1 = rhs1 + wa * _delayed_force(
            r1, v1, e2a.r2, e2a.v2, e2a.a2, BRANCH_ADVANCED, params, kern
        )
        rhs2 = rhs2 + wa * _delayed_force(
            r2, v2, e1a.r1, e1a.v1, e1a.a1, BRANCH_ADVANCED, params, kern
        )

    a1 = mass_matrix_inverse(v1) @ rhs1 / params.eta
    a2 = mass_matrix_inverse(v2) @ rhs2
    return np.concatenate([v1, a1, v2, a2])


def make_field(n, params, cfg=None):
    """The level-n field as a plain callable on flat state arrays."""
    if n == 0:
        return lambda y: h0_field(y, params)
    return lambda y: h_field(n, y, params, cfg)


def trajectory(n, x0, params, cfg=None, stop=None, engine="auto"):
    """Integrate the level-n system from ``x0`` under the stop condition.

    ``engine`` selects the implementation: "python" runs the general-path
    construction above, "compiled" the planar fast path, "auto" picks the
    fast path whenever the state is planar and the compiled path is usable.
    The target time is ``stop.t_limit`` (negative for backward runs).
    """
    cfg = cfg if cfg is not None else LevelConfig()
    stop = stop if stop is not None else StopCondition()
    if isinstance(x0, np.ndarray):
        x0 = StateVector.from_array(x0)
    if engine not in ("auto", "python", "compiled"):
        raise ValidationError(f"unknown engine {engine!r}")

    use_fast = False
    if engine in ("auto", "compiled"):
        from . import fastpath

        usable = fastpath.usable(cfg)
        if engine == "compiled" and not (usable and x0.is_planar()):
            raise ValidationError(
                "compiled engine requires a planar state, fd/exact accel, and "
                "the per-evaluation cache policy"
            )
        use_fast = usable and x0.is_planar()

    if use_fast:
        from . import fastpath

        segment = fastpath.run_trajectory(n, x0, params, cfg, stop)
    else:
        field = make_field(n, params, cfg)
        try:
            segment = integrate(
                field,
                x0.to_array(),
                stop.t_limit,
                (cfg.abs_tol, cfg.rel_tol),
                stop=stop,
                field_id=f"level-{n}",
            )
        except SimulationError as err:
            raise _annotate(err, n)
    return Trajectory(
        params=params,
        level=n,
        segment=segment,
        termination=Termination(segment.termination, segment.t_end),
    )
