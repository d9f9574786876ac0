import numpy as np
import pytest

from lwpair import (
    DomainError,
    IntegrationStallError,
    StopCondition,
    ValidationError,
    circular_initial_condition,
    eval_dense,
    eval_flow,
    extend_segment,
    h0_field,
    integrate,
    make_params,
)
from lwpair.rkf45 import TERM_SPEED, TERM_TARGET, eval_with_accel


def harmonic(y):
    return np.array([y[1], -y[0]])


def zero_field(y):
    return np.zeros_like(y)


def test_zero_field_single_step():
    seg = integrate(zero_field, np.array([1.0, 2.0]), 10.0)
    assert seg.termination == TERM_TARGET
    assert len(seg.ts) == 2
    assert np.array_equal(seg.ys[-1], [1.0, 2.0])


def test_harmonic_returns_after_period():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 2 * np.pi, (1e-8, 1e-8))
    assert seg.termination == TERM_TARGET
    assert np.max(np.abs(seg.ys[-1] - [1.0, 0.0])) < 1e-6


def test_order_check_tolerance_scaling():
    # endpoint error must track the tolerance: step quantization makes a
    # single halving fluctuate around 2.0x, so assert the guaranteed 2x
    # over two halvings plus near-linear scaling across a decade
    errs = {}
    for tol in (1e-6, 2.5e-7, 1e-7):
        seg = integrate(harmonic, np.array([1.0, 0.0]), 2 * np.pi, (tol, tol))
        errs[tol] = np.max(np.abs(seg.ys[-1] - [1.0, 0.0]))
    assert errs[1e-6] / errs[2.5e-7] >= 2.0
    assert errs[1e-6] / errs[1e-7] >= 5.0


def test_dense_output_reproduces_knots():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 5.0, (1e-9, 1e-9))
    for i in range(len(seg.ts)):
        assert np.max(np.abs(eval_dense(seg, seg.ts[i]) - seg.ys[i])) < 1e-14


def test_dense_output_between_knots():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 5.0, (1e-9, 1e-9))
    for t in np.linspace(0.0, 5.0, 57):
        y = eval_dense(seg, t)
        assert np.max(np.abs(y - [np.cos(t), -np.sin(t)])) < 1e-6


def test_dense_output_outside_span_raises():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 5.0)
    with pytest.raises(DomainError):
        eval_dense(seg, 5.5)
    with pytest.raises(DomainError):
        eval_dense(seg, -0.5)


def test_backward_integration_mirrors_forward():
    fwd = integrate(harmonic, np.array([1.0, 0.0]), 3.0, (1e-10, 1e-10))
    back = integrate(harmonic, np.array([1.0, 0.0]), -3.0, (1e-10, 1e-10))
    assert np.all(np.diff(back.ts) > 0)
    for t in np.linspace(0.0, 3.0, 11):
        yf = eval_dense(fwd, t)
        yb = eval_dense(back, -t)
        # cosine is even, sine odd: time reversal flips the velocity
        assert np.max(np.abs(yf - [yb[0], -yb[1]])) < 1e-7


def test_eval_with_accel_harmonic():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 3.0, (1e-10, 1e-10))
    dtau = 1e-5
    _, acc = eval_with_accel(seg, np.pi / 2, accel_mode="fd", dtau=dtau)
    assert abs(acc[0]) < max(1e-6, 10 * dtau)
    _, acc_exact = eval_with_accel(seg, np.pi / 2, accel_mode="exact")
    assert abs(acc_exact[0] - (-np.cos(np.pi / 2))) < 1e-7


def test_eval_flow_initial_condition_exact():
    p = make_params(1, -1, 0.5)
    x0 = circular_initial_condition(p, 50.0)
    seg = integrate(lambda y: h0_field(y, p), x0.to_array(), 100.0)
    ext = eval_flow(seg, 0.0)
    assert np.array_equal(ext.r1, x0.r1)
    assert np.array_equal(ext.v1, x0.v1)
    assert np.array_equal(ext.r2, x0.r2)
    assert np.array_equal(ext.v2, x0.v2)


def test_eval_flow_fd_vs_exact_accel():
    p = make_params(1, -1, 0.5)
    x0 = circular_initial_condition(p, 50.0)
    seg = integrate(lambda y: h0_field(y, p), x0.to_array(), 100.0, (1e-10, 1e-10))
    dtau = 0.05
    for tau in (10.0, 40.0, 80.0):
        fd = eval_flow(seg, tau, accel_mode="fd", dtau=dtau)
        ex = eval_flow(seg, tau, accel_mode="exact")
        # jerk bound ~ |a| * omega, fd error ~ dtau * jerk
        jerk = np.linalg.norm(ex.a1) * 0.004 * 2
        assert np.max(np.abs(fd.a1 - ex.a1)) < max(10 * dtau * jerk, 1e-9)
        assert np.max(np.abs(fd.a2 - ex.a2)) < max(10 * dtau * jerk, 1e-9)


def test_speed_threshold_stop_and_refinement():
    p = make_params(1, -1, 0.5)
    x0 = circular_initial_condition(p, 50.0)
    stop = StopCondition(v_threshold=0.12, min_separation=1e-9, t_limit=1e6)
    seg = integrate(lambda y: h0_field(y, p), x0.to_array(), 1e6, stop=stop)
    assert seg.termination == TERM_SPEED
    y_end = eval_dense(seg, seg.t_end)
    smax = max(np.linalg.norm(y_end[3:6]), np.linalg.norm(y_end[9:12]))
    assert smax == pytest.approx(0.12, abs=1e-6)


def test_time_limit_stop():
    p = make_params(1, -1, 0.5)
    x0 = circular_initial_condition(p, 50.0)
    stop = StopCondition(v_threshold=0.8, min_separation=1e-9, t_limit=25.0)
    seg = integrate(lambda y: h0_field(y, p), x0.to_array(), 1e6, stop=stop)
    assert seg.termination == TERM_TARGET
    assert seg.t_end == pytest.approx(25.0, abs=1e-12)


def test_extend_segment_continues_flow():
    seg = integrate(harmonic, np.array([1.0, 0.0]), 2.0, clamp_to_target=False)
    longer = extend_segment(seg, 6.0)
    assert longer.t_max >= 6.0
    for t in np.linspace(0.0, 6.0, 13):
        assert np.max(np.abs(eval_dense(longer, t) - [np.cos(t), -np.sin(t)])) < 1e-5
    again = extend_segment(longer, 4.0)
    assert again is longer


def test_stall_error_carries_partial_segment():
    calls = [0]

    def nasty(y):
        # blows up fast enough that steps collapse
        calls[0] += 1
        return np.array([1.0 / max(1e-300, (1.0 - y[0])) ** 4, 0.0])

    with pytest.raises(IntegrationStallError) as exc_info:
        integrate(nasty, np.array([0.0, 0.0]), 10.0, (1e-9, 1e-9))
    seg = exc_info.value.segment
    assert seg is not None
    assert seg.termination == "stall"
    assert seg.ts.shape[0] >= 1


def test_tolerance_validation():
    with pytest.raises(ValidationError):
        integrate(harmonic, np.array([1.0, 0.0]), 1.0, (0.0, 1e-9))
    with pytest.raises(ValidationError):
        integrate(harmonic, np.array([1.0, 0.0]), 0.0)
    with pytest.raises(ValidationError):
        StopCondition(v_threshold=1.5)
    with pytest.raises(ValidationError):
        StopCondition(t_limit=np.inf)
