import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from helpers import orders
from smectic.energy import bps_decomposition, energy, equipartition_gap
from smectic.entropy import JumpStates, jump_cost
from smectic.grid import Window, gradient, make_grid
from smectic.profile import (
    DislocationSpec,
    LayerPotential,
    ProfileFailure,
    Truncation,
    ansatz_field,
    ansatz_line_energy,
    ansatz_sign,
    bps_verify,
    dislocation_field,
    heat_residual,
    profile_energy,
    profile_rhs,
    solve_profile,
)

RATE = np.sqrt(5) / 4
LOGISTIC = JumpStates.from_states((1, 0, 0.5), (0, 0, 0))
AXIAL = JumpStates.from_states((1, 0, 0.5), (-1, 0, 0.5))


@pytest.fixture(scope="module")
def logistic():
    return solve_profile(LOGISTIC)


@pytest.fixture(scope="module")
def axial():
    return solve_profile(AXIAL)


def test_rhs_examples():
    assert profile_rhs(0.0, LOGISTIC) == 0.0
    assert profile_rhs(1.0, LOGISTIC) == pytest.approx(0.0, abs=1e-15)
    assert profile_rhs(0.5, LOGISTIC) == pytest.approx(np.sqrt(5) / 16, rel=1e-14)
    g = np.linspace(0, 1, 11)
    np.testing.assert_allclose(profile_rhs(g, LOGISTIC), RATE * g * (1 - g), atol=1e-15)


def test_logistic_closed_form(logistic):
    exact = 1 / (1 + np.exp(-RATE * logistic.ts))
    assert np.max(np.abs(logistic.gs - exact)) < 1e-8
    assert np.max(np.abs(logistic.one_minus_g - 1 / (1 + np.exp(RATE * logistic.ts)))) < 1e-8
    assert logistic.decay_plus == pytest.approx(RATE, rel=0.02)
    assert logistic.decay_minus == pytest.approx(RATE, rel=0.02)
    assert min(logistic.fit_r2_plus, logistic.fit_r2_minus) > 0.999
    assert logistic.gs[np.searchsorted(logistic.ts, 0.0)] == 0.5


def test_profile_energy_equals_jump_cost(logistic):
    assert profile_energy(logistic, 1.0) == pytest.approx(1 / (6 * np.sqrt(5)), abs=1e-6)
    vals = [profile_energy(logistic, e) for e in (0.5, 1.0, 2.0)]
    assert max(vals) - min(vals) < 1e-9
    k = solve_profile(JumpStates.from_states((1, 1, 1), (0, 0, 0)))
    assert profile_energy(k, 1.0) == pytest.approx(1 / (3 * np.sqrt(3)), abs=1e-6)


planar = st.tuples(st.floats(-2, 2), st.floats(-2, 2))


@settings(max_examples=15)
@given(planar, planar)
def test_profile_properties_for_compatible_jumps(a, b):
    if np.hypot(a[0] - b[0], a[1] - b[1]) < 0.2:
        return
    j = JumpStates.from_states((*a, 0.5 * (a[0] ** 2 + a[1] ** 2)), (*b, 0.5 * (b[0] ** 2 + b[1] ** 2)))
    rate = np.linalg.norm(j.p) / 2
    sol = solve_profile(j, t_max=max(40.0, 25.0 / rate))
    assert np.all(sol.gs > 0) and np.all(sol.one_minus_g > 0)
    assert np.all(np.diff(sol.gs) >= 0)
    assert sol.decay_plus == pytest.approx(rate, rel=0.02)
    assert profile_energy(sol, 0.3) == pytest.approx(jump_cost(j), abs=1e-6)


def test_short_span_rejected():
    sol = solve_profile(LOGISTIC, t_max=10.0)
    with pytest.raises(ValueError, match="increase t_max"):
        profile_energy(sol, 1.0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_underflowing_tail_is_a_failure():
    j = JumpStates.from_states((3, 0, 4.5), (0, 0, 0))
    with pytest.raises(ProfileFailure):
        solve_profile(j, t_max=400.0, max_step=1.0)


def test_bad_arguments():
    with pytest.raises(ValueError):
        solve_profile(LOGISTIC, t_max=0.0)
    with pytest.raises(ValueError):
        solve_profile(LOGISTIC, tol=-1.0)


def test_profile_csv(tmp_path, logistic):
    p = logistic.to_csv(tmp_path / "profile.csv")
    lines = p.read_text().splitlines()
    assert lines[0] == "t,g,g_prime"
    assert len(lines) == logistic.ts.size + 1


def test_potential_matches_logistic_antiderivative(logistic):
    pot = LayerPotential(logistic, 1.0, extend_tails=True)
    t = np.array([-60.0, -40.0, -3.0, 0.0, 1.7, 40.0, 55.0])
    exact = np.log1p(np.exp(RATE * t)) / RATE - np.log(2) / RATE
    G, g, dg = pot.profile(t)
    np.testing.assert_allclose(G, exact, atol=1e-8)
    assert pot.c_plus == pytest.approx(-np.log(2) / RATE, abs=1e-8)
    assert pot.c_minus == pytest.approx(-np.log(2) / RATE, abs=1e-8)
    np.testing.assert_allclose(dg, RATE * g * (1 - g), atol=1e-8)


def test_ansatz_outside_span_rejected(logistic):
    g = make_grid(5, 3, 3, ((-10, 10), (0, 1), (0, 1)))
    with pytest.raises(ValueError, match="span"):
        ansatz_field(logistic, g, 0.1)
    ansatz_field(logistic, g, 0.1, extend_tails=True)


def test_ansatz_gradient_tails():
    sol = solve_profile(LOGISTIC, t_max=80.0)
    g = make_grid(201, 3, 3, ((-1, 1), (0, 0.1), (0, 0.1)))
    G = gradient(ansatz_field(sol, g, 0.02)).values
    assert np.max(np.abs(G[:, :5] - np.reshape([0, 0, 0], (3, 1, 1, 1)))) < 1e-4
    assert np.max(np.abs(G[:, -5:] - np.reshape([1, 0, 0.5], (3, 1, 1, 1)))) < 1e-4


def test_ansatz_saturates_bps(logistic):
    eps = 0.1
    g = make_grid(401, 3, 401)
    u = ansatz_field(logistic, g, eps)
    e = energy(u, eps)
    assert abs(e.compression - e.bending) / e.bending < 1e-3
    assert equipartition_gap(u, eps) / e.total < 1e-3
    sign = ansatz_sign(LOGISTIC)
    assert bps_decomposition(u, eps, sign).square_term / e.total < 1e-3
    _, l2 = bps_verify(u, eps, sign)
    assert l2 / np.sqrt(g.volume) < 1e-3


def test_truncated_ansatz_is_affine_on_slabs(axial):
    eps, tr = 0.05, Truncation(0.1, 0.1)
    g = make_grid(101, 5, 5)
    u = ansatz_field(axial, g, eps, tr)
    G = gradient(u).values
    X = g.coords()[0]
    hi, lo = X > 0.42, X < -0.42
    for d, (mp, mm) in enumerate(zip(AXIAL.m_plus, AXIAL.m_minus)):
        assert np.max(np.abs(G[d][hi] - mp)) < 1e-12
        assert np.max(np.abs(G[d][lo] - mm)) < 1e-12


def test_truncation_blend_is_c2(axial):
    pot = LayerPotential(axial, 0.1)
    tr = Truncation()
    for edge in (tr.inner, tr.outer, -tr.inner, -tr.outer):
        left = pot(np.array([edge - 1e-9]), tr)
        right = pot(np.array([edge + 1e-9]), tr)
        for a, b in zip(left, right):
            assert abs(a[0] - b[0]) < 1e-6


def test_ansatz_excess_decreases_with_eps(axial):
    jc = jump_cost(AXIAL)
    excess = [ansatz_line_energy(axial, e, Truncation()) - jc for e in (0.2, 0.1, 0.05)]
    assert excess[0] > excess[1] > excess[2] > 0


def test_line_energy_untruncated_matches_jump_cost(axial):
    assert ansatz_line_energy(axial, 0.02) == pytest.approx(jump_cost(AXIAL), abs=1e-8)


def test_dislocation_plateaus_and_trivial_case():
    spec = DislocationSpec(b=0.5, epsilon=0.2, x_range=(-8, 8), nx=161, nz=21)
    u = dislocation_field(spec)
    assert np.max(np.abs(u.values[0])) < 1e-6
    assert np.max(np.abs(u.values[-1] - 0.25)) < 1e-6
    assert np.all(dislocation_field(DislocationSpec(b=0.0, nx=11, nz=5)).values == 0)


def test_dislocation_spec_validation():
    with pytest.raises(ValueError, match="z_range"):
        DislocationSpec(z_range=(0.0, 1.0))
    with pytest.raises(ValueError, match="epsilon"):
        DislocationSpec(epsilon=-0.1)
    assert DislocationSpec(sign=-1).grid().box[2] == (-1.5, -0.5)


@pytest.mark.parametrize("sign", [1, -1])
def test_dislocation_solves_bps_equation(sign):
    errs, heat = [], []
    window = Window((0.1, 0.9), (0, 1), (0.1, 0.9))
    for nx, nz in ((51, 26), (101, 51), (201, 101)):
        spec = DislocationSpec(sign=sign, nx=nx, nz=nz)
        errs.append(bps_verify(dislocation_field(spec), spec.epsilon, sign, window)[0])
        heat.append(np.max(np.abs(heat_residual(spec).values[1:-1, :, 1:-1])))
    assert min(orders(errs)) >= 1.8
    assert min(orders(heat)) >= 1.8


def test_ground_state_passes_bps_verify():
    g = make_grid(9, 9, 9)
    from smectic.grid import sample_field

    u = sample_field(g, lambda x, y, z: 0.4 * x - 0.2 * y + 0.1 * z)
    for s in (1, -1):
        assert max(bps_verify(u, 0.3, s)) < 1e-13
