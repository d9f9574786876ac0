"""Adaptive Runge-Kutta-Fehlberg 4(5) integration with dense output.

Integrates any autonomous vector field ``f(y) -> dy/dt`` from t = 0 toward
a target time (either sign).  Accepted steps are stored as
(time, state, derivative) knots; between knots the solution is evaluated
by cubic Hermite interpolation, which matches the scheme's fourth-order
interpolation accuracy without re-integration.
"""

import dataclasses
from dataclasses import dataclass, replace

import numpy as np

from .errors import (
    DomainError,
    IntegrationStallError,
    SimulationError,
    SuperluminalError,
    ValidationError,
)
from .params import ExtendedState

# Fehlberg 4(5) tableau.
_C = (0.0, 0.25, 3.0 / 8.0, 12.0 / 13.0, 1.0, 0.5)
_A = (
    (),
    (0.25,),
    (3.0 / 32.0, 9.0 / 32.0),
    (1932.0 / 2197.0, -7200.0 / 2197.0, 7296.0 / 2197.0),
    (439.0 / 216.0, -8.0, 3680.0 / 513.0, -845.0 / 4104.0),
    (-8.0 / 27.0, 2.0, -3544.0 / 2565.0, 1859.0 / 4104.0, -11.0 / 40.0),
)
# Fifth-order propagation weights and (5th - 4th) error weights.
_B5 = (16.0 / 135.0, 0.0, 6656.0 / 12825.0, 28561.0 / 56430.0, -9.0 / 50.0, 2.0 / 55.0)
_E = (1.0 / 360.0, 0.0, -128.0 / 4275.0, -2197.0 / 75240.0, 1.0 / 50.0, 2.0 / 55.0)

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
STALL_FLOOR = 1e-12
EVENT_TIME_RESOLUTION = 1e-9

TERM_TARGET = "target"
TERM_SPEED = "speed"
TERM_SEPARATION = "separation"
TERM_STALL = "stall"


@dataclass(frozen=True)
class StopCondition:
    """Early-termination rules for pair-state integrations."""

    v_threshold: float = 0.8
    min_separation: float = 1e-8
    t_limit: float = 1e12

    def __post_init__(self):
        if not (0.0 < self.v_threshold < 1.0):
            raise ValidationError(f"v_threshold must lie in (0, 1), got {self.v_threshold}")
        if not np.isfinite(self.min_separation) or self.min_separation <= 0:
            raise ValidationError("min_separation must be positive and finite")
        if not np.isfinite(self.t_limit):
            raise ValidationError("t_limit must be finite")


@dataclass(frozen=True)
class TrajectorySegment:
    """Dense-output solution of one ODE system.

    Knots are stored with strictly increasing times regardless of the
    integration direction; evaluation is defined on [ts[0], ts[-1]].
    """

    field_id: str
    t_start: float
    t_end: float
    ts: np.ndarray
    ys: np.ndarray
    ks: np.ndarray
    termination: str
    field: object = None
    last_step: float = dataclasses.field(default=0.0, repr=False)

    interpolation_order = 4

    @property
    def t_min(self):
        return float(self.ts[0])

    @property
    def t_max(self):
        return float(self.ts[-1])

    @property
    def dim(self):
        return self.ys.shape[1]

    @property
    def termination_time(self):
        return self.t_end


def _pair_slices(dim):
    """Velocity component ranges for recognized state layouts."""
    if dim in (8, 12):
        d = dim // 4
        return [(d, 2 * d), (3 * d, 4 * d)]
    if dim % 2 == 0:
        return [(dim // 2, dim)]
    raise ValidationError(f"no velocity layout for state dimension {dim}")


def _max_speed(y, dim):
    sl = _pair_slices(dim)
    return max(float(np.linalg.norm(y[a:b])) for a, b in sl)


def _separation(y, dim):
    d = dim // 4
    return float(np.linalg.norm(y[0:d] - y[2 * d : 3 * d]))


def _initial_step(y0, f0, scale, t_target):
    d0 = float(np.sqrt(np.mean((y0 / scale) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / scale) ** 2)))
    if d1 <= 1e-300:
        return abs(t_target)
    h = 0.01 * max(d0, 1e-6) / d1
    return min(h, abs(t_target))


def _hermite(t0, t1, y0, y1, k0, k1, tau):
    h = t1 - t0
    th = (tau - t0) / h
    t2 = th * th
    t3 = t2 * th
    return (
        (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + h * ((t3 - 2.0 * t2 + th) * k0 + (t3 - t2) * k1)
    )


def eval_dense(segment, tau):
    """State at an interior time by cubic Hermite interpolation; knot times
    reproduce the stored knots exactly."""
    ts = segment.ts
    tau = float(tau)
    if tau < ts[0] - 1e-12 or tau > ts[-1] + 1e-12:
        raise DomainError(
            f"time {tau} outside segment span [{ts[0]}, {ts[-1]}]"
        )
    idx = int(np.searchsorted(ts, tau))
    if idx < len(ts) and ts[idx] == tau:
        return segment.ys[idx].copy()
    if idx == 0:
        idx = 1
    if idx == len(ts):
        idx = len(ts) - 1
    i = idx - 1
    return _hermite(
        ts[i], ts[i + 1], segment.ys[i], segment.ys[i + 1],
        segment.ks[i], segment.ks[i + 1], tau,
    )


def _default_dtau(segment, tau):
    y = eval_dense(segment, tau)
    if segment.dim in (8, 12):
        return 1e-3 * _separation(y, segment.dim)
    raise ValidationError("dtau must be given explicitly for non-pair layouts")


def eval_with_accel(segment, tau, accel_mode="fd", dtau=None):
    """Interpolated state plus the time derivative of its velocity block.

    ``fd`` uses the forward difference (v(tau+dtau) - v(tau)) / dtau on the
    dense output; ``exact`` re-evaluates the segment's vector field at the
    interpolated state.  If tau+dtau leaves the covered span, the field (when
    available) is evaluated directly instead.
    """
    y = eval_dense(segment, tau)
    vsl = _pair_slices(segment.dim)

    if accel_mode == "exact":
        if segment.field is None:
            raise ValidationError("segment carries no field; exact mode unavailable")
        k = np.asarray(segment.field(y), dtype=float)
        acc = np.concatenate([k[a:b] for a, b in vsl])
        return y, acc
    if accel_mode != "fd":
        raise ValidationError(f"unknown accel_mode {accel_mode!r}")

    if dtau is None:
        dtau = _default_dtau(segment, tau)
    if dtau <= 0:
        raise ValidationError(f"dtau must be positive, got {dtau}")
    if tau + dtau <= segment.t_max + 1e-12:
        y_plus = eval_dense(segment, min(tau + dtau, segment.t_max))
        v_now = np.concatenate([y[a:b] for a, b in vsl])
        v_plus = np.concatenate([y_plus[a:b] for a, b in vsl])
        return y, (v_plus - v_now) / dtau
    if segment.field is not None:
        k = np.asarray(segment.field(y), dtype=float)
        return y, np.concatenate([k[a:b] for a, b in vsl])
    raise DomainError(
        f"tau + dtau = {tau + dtau} beyond span and no field to re-evaluate"
    )


def eval_flow(segment, tau, accel_mode="fd", dtau=None):
    """Extended state (positions, velocities, accelerations) at ``tau``.

    Requires the two-particle state layout.
    """
    if segment.dim not in (8, 12):
        raise ValidationError("eval_flow requires the two-particle state layout")
    y, acc = eval_with_accel(segment, tau, accel_mode=accel_mode, dtau=dtau)
    d = segment.dim // 4
    return ExtendedState(
        r1=y[0:d], v1=y[d : 2 * d], a1=acc[0:d],
        r2=y[2 * d : 3 * d], v2=y[3 * d :], a2=acc[d:],
    )


def _refine_event(detect, t_lo, t_hi):
    """Bisect the sign change of ``detect`` to the event time resolution.

    ``detect(t)`` must be negative at t_lo and non-negative at t_hi.
    """
    while abs(t_hi - t_lo) > EVENT_TIME_RESOLUTION:
        mid = 0.5 * (t_lo + t_hi)
        if detect(mid) >= 0.0:
            t_hi = mid
        else:
            t_lo = mid
    return t_hi


def integrate(
    field,
    x0,
    t_target,
    tolerances=(1e-9, 1e-9),
    stop=None,
    *,
    field_id="field",
    clamp_to_target=True,
    h_init=None,
    max_steps=10_000_000,
    check_pair_speeds=None,
):
    """Integrate ``dy/dt = field(y)`` from t = 0 toward ``t_target``.

    Returns a :class:`TrajectorySegment`; its ``termination`` records why the
    run ended (reached target, speed threshold, separation floor).  Stop
    conditions apply only to two-particle layouts and are refined to
    EVENT_TIME_RESOLUTION by bisection on the dense output.  With
    ``clamp_to_target=False`` the final step is not shortened, so knot
    placement is independent of the target (used when a flow may be extended
    later).  Step-size underflow raises :class:`IntegrationStallError`
    carrying the partial segment.
    """
    from .params import StateVector  # local import to avoid cycle at module load

    if isinstance(x0, StateVector):
        y = x0.to_array()
    else:
        y = np.asarray(x0, dtype=float).copy()
    dim = y.shape[0]
    atol, rtol = tolerances
    if atol <= 0 or rtol <= 0:
        raise ValidationError("tolerances must be positive")
    if t_target == 0.0:
        raise ValidationError("t_target must be nonzero")

    target = float(t_target)
    if stop is not None:
        if dim not in (8, 12):
            raise ValidationError("stop conditions require the two-particle layout")
        if stop.t_limit * target > 0 and abs(stop.t_limit) < abs(target):
            target = stop.t_limit
    direction = 1.0 if target > 0 else -1.0
    pair = dim in (8, 12)
    if check_pair_speeds is None:
        check_pair_speeds = pair

    f0 = np.asarray(field(y), dtype=float)
    scale = atol + rtol * np.abs(y)
    h = h_init if h_init is not None else _initial_step(y, f0, scale, target)
    h = min(h, abs(target))

    if stop is not None:
        if _max_speed(y, dim) >= stop.v_threshold:
            return TrajectorySegment(
                field_id=field_id, t_start=0.0, t_end=0.0,
                ts=np.array([0.0]), ys=y[None, :].copy(), ks=f0[None, :].copy(),
                termination=TERM_SPEED, field=field, last_step=h,
            )
        if _separation(y, dim) <= stop.min_separation:
            return TrajectorySegment(
                field_id=field_id, t_start=0.0, t_end=0.0,
                ts=np.array([0.0]), ys=y[None, :].copy(), ks=f0[None, :].copy(),
                termination=TERM_SEPARATION, field=field, last_step=h,
            )

    ts = [0.0]
    ys = [y.copy()]
    ks = [f0.copy()]
    t = 0.0
    k1 = f0
    termination = None
    t_end = 0.0
    kk = [None] * 6

    def make_segment(term, tend, hlast):
        ts_a = np.array(ts)
        ys_a = np.array(ys)
        ks_a = np.array(ks)
        if direction < 0:
            ts_a = ts_a[::-1].copy()
            ys_a = ys_a[::-1].copy()
            ks_a = ks_a[::-1].copy()
        return TrajectorySegment(
            field_id=field_id, t_start=0.0, t_end=tend,
            ts=ts_a, ys=ys_a, ks=ks_a,
            termination=term, field=field, last_step=hlast,
        )

    for _ in range(max_steps):
        remaining = abs(target - t)
        if remaining <= abs(target) * 1e-15:
            termination, t_end = TERM_TARGET, t
            break
        if clamp_to_target:
            h = min(h, remaining)
        if h < STALL_FLOOR * max(1.0, abs(t)):
            raise IntegrationStallError(
                f"step size underflow at t = {t}",
                segment=make_segment(TERM_STALL, t, h),
            )

        hs = direction * h
        kk[0] = k1
        failed = False
        for i in range(1, 6):
            yi = y + hs * sum(a * kk[j] for j, a in enumerate(_A[i]))
            if check_pair_speeds and _max_speed(yi, dim) >= 1.0:
                failed = True
                break
            # a trial state probing past a singularity only rejects the step
            try:
                kk[i] = np.asarray(field(yi), dtype=float)
            except SimulationError:
                failed = True
                break
        if failed:
            h *= 0.5
            continue

        err = hs * sum(e * kk[i] for i, e in enumerate(_E) if e != 0.0)
        y_new = y + hs * sum(b * kk[i] for i, b in enumerate(_B5) if b != 0.0)
        scale = atol + rtol * np.abs(y)
        err_norm = float(np.sqrt(np.mean((err / scale) ** 2)))

        if err_norm > 1.0:
            h *= max(MIN_FACTOR, SAFETY * err_norm**-0.2)
            continue

        t_new = t + hs
        if check_pair_speeds and _max_speed(y_new, dim) >= 1.0:
            h *= 0.5
            continue
        try:
            k_new = np.asarray(field(y_new), dtype=float)
        except SimulationError:
            h *= 0.5
            continue
        ts.append(t_new)
        ys.append(y_new)
        ks.append(k_new)

        event = None
        if stop is not None:
            smax = _max_speed(y_new, dim)
            sep = _separation(y_new, dim)
            if smax >= stop.v_threshold:
                event = (TERM_SPEED, lambda yq: _max_speed(yq, dim) - stop.v_threshold)
            elif sep <= stop.min_separation:
                event = (TERM_SEPARATION, lambda yq: stop.min_separation - _separation(yq, dim))
        if event is not None:
            reason, gfun = event
            seg_tmp = make_segment(reason, t_new, h)
            t_ev = _refine_event(
                lambda tq: gfun(eval_dense(seg_tmp, tq)),
                t, t_new,
            ) if gfun(y) < 0.0 else t_new
            y_ev = eval_dense(seg_tmp, t_ev)
            k_ev = np.asarray(field(y_ev), dtype=float)
            ts[-1], ys[-1], ks[-1] = t_ev, y_ev, k_ev
            termination, t_end = reason, t_ev
            break

        if err_norm == 0.0:
            factor = MAX_FACTOR
        else:
            factor = min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * err_norm**-0.2))
        h *= factor
        t, y, k1 = t_new, y_new, k_new
        if not clamp_to_target and abs(t) >= abs(target):
            termination, t_end = TERM_TARGET, t
            break
    else:
        raise IntegrationStallError(
            f"step budget exhausted at t = {t}",
            segment=make_segment(TERM_STALL, t, h),
        )

    return make_segment(termination, t_end, h)


def extend_segment(segment, t_target, tolerances=(1e-9, 1e-9), stop=None,
                   max_steps=10_000_000):
    """Continue an unclamped segment toward a farther target, reusing its
    field and resuming from its last knot."""
    if segment.field is None:
        raise ValidationError("segment carries no field; cannot extend")
    edge = segment.t_max if t_target > 0 else segment.t_min
    if (t_target > 0) != (segment.t_end >= 0):
        raise ValidationError("extension direction differs from the segment's")
    if abs(t_target) <= abs(edge):
        return segment
    y_edge = segment.ys[-1] if t_target > 0 else segment.ys[0]
    try:
        tail = integrate(
            segment.field,
            y_edge,
            t_target - edge,
            tolerances,
            stop=stop,
            field_id=segment.field_id,
            clamp_to_target=False,
            h_init=segment.last_step if segment.last_step > 0 else None,
            max_steps=max_steps,
        )
    except IntegrationStallError as err:
        # keep whatever the tail covered; the caller sees the stall marker
        if err.segment is None or err.segment.ts.shape[0] < 2:
            raise
        tail = err.segment
    ts_t = tail.ts + edge
    if t_target > 0:
        ts_a = np.concatenate([segment.ts, ts_t[1:]])
        ys_a = np.concatenate([segment.ys, tail.ys[1:]])
        ks_a = np.concatenate([segment.ks, tail.ks[1:]])
        t_end = ts_a[-1]
    else:
        ts_a = np.concatenate([ts_t[:-1], segment.ts])
        ys_a = np.concatenate([tail.ys[:-1], segment.ys])
        ks_a = np.concatenate([tail.ks[:-1], segment.ks])
        t_end = ts_a[0]
    return replace(
        segment,
        ts=ts_a, ys=ys_a, ks=ks_a,
        t_end=float(t_end), termination=tail.termination, last_step=tail.last_step,
    )
