import numpy as np
import pytest

from lwpair import (
    StateVector,
    SuperluminalError,
    ValidationError,
    circular_initial_condition,
    dimensionless_to_physical,
    length_scale,
    make_params,
    physical_to_dimensionless,
)

E_CHARGE = 1.602176634e-19
M_ELECTRON = 9.1093837015e-31
M_PROTON = 1.67262192369e-27
C = 299792458.0


def test_make_params_accepts_table_configurations():
    p = make_params(1, -1, 0.5)
    assert (p.eta, p.sign, p.alpha) == (1.0, -1, 0.5)
    p = make_params(1, -1, 0)
    assert p.alpha == 0.0


@pytest.mark.parametrize(
    "eta,sign,alpha",
    [(0, -1, 0.5), (-2, -1, 0.5), (1, 0, 0.5), (1, 2, 0.5), (1, -1, 0.7), (1, -1, -0.6)],
)
def test_make_params_rejects_out_of_range(eta, sign, alpha):
    with pytest.raises(ValidationError):
        make_params(eta, sign, alpha)


def test_state_vector_validation():
    with pytest.raises(SuperluminalError):
        StateVector([0, 0, 0], [1.0, 0, 0], [1, 0, 0], [0, 0, 0])
    with pytest.raises(ValidationError):
        StateVector([1, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0])
    x = StateVector([0, 0, 0], [0.5, 0, 0], [1, 0, 0], [0, 0, 0])
    assert x.separation == 1.0
    y = x.to_array()
    assert np.array_equal(StateVector.from_array(y).to_array(), y)


def test_scaled_separation_is_one_at_the_length_scale():
    q, m = E_CHARGE, M_ELECTRON
    L = length_scale(q, -q, m)
    si = ([0, 0, 0], [0, 0, 0], [L, 0, 0], [0, 1.0, 0])
    params, state = physical_to_dimensionless(q, -q, m, m, si)
    assert state.separation == pytest.approx(1.0, rel=1e-14)
    assert params.eta == 1.0
    assert params.sign == -1


def test_velocity_scaling_is_fraction_of_c():
    q, m = E_CHARGE, M_ELECTRON
    si = ([0, 0, 0], [0, 0, 0], [1.0, 0, 0], [C / 2, 0, 0])
    _, state = physical_to_dimensionless(q, -q, m, m, si)
    assert np.linalg.norm(state.v2) == pytest.approx(0.5, rel=1e-14)


def test_electron_proton_mass_ratio():
    si = ([0, 0, 0], [0, 0, 0], [1.0, 0, 0], [0, 0, 0])
    params, _ = physical_to_dimensionless(E_CHARGE, -E_CHARGE, M_ELECTRON, M_PROTON, si)
    assert params.eta == pytest.approx(M_ELECTRON / M_PROTON, rel=1e-12)


def test_si_round_trip_identity():
    g = np.random.default_rng(7)
    q1, q2 = 3.2e-19, -1.6e-19
    m1, m2 = 5e-30, 2e-27
    si = (
        g.normal(size=3) * 1e-9,
        g.uniform(-0.3, 0.3, 3) * C,
        g.normal(size=3) * 1e-9 + np.array([5e-9, 0, 0]),
        g.uniform(-0.3, 0.3, 3) * C,
    )
    _, scaled = physical_to_dimensionless(q1, q2, m1, m2, si)
    back = dimensionless_to_physical(q1, q2, m1, m2, scaled)
    for a, b in zip(si, back):
        assert np.allclose(a, b, rtol=1e-12, atol=0.0)


def test_zero_charge_or_mass_rejected():
    si = ([0, 0, 0], [0, 0, 0], [1, 0, 0], [0, 0, 0])
    with pytest.raises(ValidationError):
        physical_to_dimensionless(0.0, -E_CHARGE, M_ELECTRON, M_ELECTRON, si)
    with pytest.raises(ValidationError):
        physical_to_dimensionless(E_CHARGE, -E_CHARGE, M_ELECTRON, 0.0, si)


def newtonian_circular_speeds(eta, r0):
    """Independent force balance: m_i w^2 rho_i = 1/r0^2 with rho1+rho2=r0
    and the centre of mass fixed (eta rho1 = rho2)."""
    rho1 = r0 / (1.0 + eta)
    rho2 = r0 - rho1
    w2 = 1.0 / (r0**2 * rho2)  # from particle 2 (mass 1)
    assert eta * w2 * rho1 == pytest.approx(1.0 / r0**2, rel=1e-12)
    w = np.sqrt(w2)
    return w * rho1, w * rho2


def test_circular_ic_speeds_eta_1():
    p = make_params(1, -1, 0.5)
    x = circular_initial_condition(p, 50.0)
    v1o, v2o = newtonian_circular_speeds(1.0, 50.0)
    assert np.linalg.norm(x.v1) == pytest.approx(v1o, rel=1e-12)
    assert np.linalg.norm(x.v2) == pytest.approx(v2o, rel=1e-12)
    assert np.linalg.norm(x.v1) == pytest.approx(0.1, rel=1e-12)
    assert x.separation == pytest.approx(50.0, rel=1e-14)


def test_circular_ic_momentum_balance_eta_10():
    p = make_params(10, -1, 0.5)
    x = circular_initial_condition(p, 50.0)
    v1, v2 = np.linalg.norm(x.v1), np.linalg.norm(x.v2)
    v1o, v2o = newtonian_circular_speeds(10.0, 50.0)
    assert v1 == pytest.approx(v1o, rel=1e-12)
    assert v2 == pytest.approx(v2o, rel=1e-12)
    assert v2 / v1 == pytest.approx(10.0, rel=1e-12)
    assert np.allclose(10.0 * x.v1 + x.v2, 0.0, atol=1e-15)


def test_circular_ic_speeds_vanish_at_large_r0():
    p = make_params(1, -1, 0.5)
    x = circular_initial_condition(p, 1e12)
    assert np.linalg.norm(x.v1) < 1e-6
    assert np.linalg.norm(x.v2) < 1e-6


def test_circular_ic_geometry_invariants():
    for eta in (0.3, 1.0, 4.5):
        p = make_params(eta, -1, 0.5)
        x = circular_initial_condition(p, 20.0)
        sep = x.r2 - x.r1
        assert abs(float(x.v1 @ sep)) < 1e-15
        assert abs(float(x.v2 @ sep)) < 1e-15
        assert np.allclose(eta * x.v1 + x.v2, 0.0, atol=1e-15)


def test_circular_ic_rejects_relativistic_radius():
    p = make_params(1, -1, 0.5)
    with pytest.raises(SuperluminalError):
        circular_initial_condition(p, 0.4)
    with pytest.raises(ValidationError):
        circular_initial_condition(p, -1.0)
    repulsive = make_params(1, 1, 0.5)
    with pytest.raises(ValidationError):
        circular_initial_condition(repulsive, 50.0)
