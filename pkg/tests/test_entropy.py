import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from helpers import orders
from smectic.entropy import (
    DIAGONAL,
    STANDARD,
    Frame,
    IncompatibleJumpError,
    JumpStates,
    div_sigma,
    entropy_density_eig,
    entropy_sup_rotations,
    frame_cost,
    frame_flux,
    jump_cost,
    rotation_combo_check,
    sigma_frame,
)
from smectic.grid import make_grid, sample_field

real = st.floats(-3, 3, allow_nan=False)
angle = st.floats(0, 2 * np.pi, allow_nan=False)


def compatible(a, b):
    return (a[0], a[1], 0.5 * (a[0] ** 2 + a[1] ** 2)), (b[0], b[1], 0.5 * (b[0] ** 2 + b[1] ** 2))


planar = st.tuples(real, real)


@st.composite
def jumps(draw):
    a, b = draw(planar), draw(planar)
    if np.hypot(a[0] - b[0], a[1] - b[1]) < 1e-3:
        b = (b[0] + 1.0, b[1])
    return JumpStates.from_states(*compatible(a, b))


@given(angle)
def test_frame_orthonormal(theta):
    f = Frame(theta)
    assert abs(f.xi @ f.eta) < 1e-15
    assert np.linalg.norm(f.xi) == pytest.approx(1, abs=1e-15)
    # positive orientation: eta is xi rotated by +pi/2
    assert f.xi[0] * f.eta[1] - f.xi[1] * f.eta[0] == pytest.approx(1, abs=1e-15)


def test_sigma_values():
    assert np.all(sigma_frame([0, 0, 0], STANDARD) == 0)
    np.testing.assert_allclose(sigma_frame([1, 0, 0.5], STANDARD), [1 / 3, 0, -0.5], atol=1e-15)
    np.testing.assert_allclose(sigma_frame([0, 1, 0.5], STANDARD), [0, -1 / 3, 0.5], atol=1e-15)


def test_sigma_is_vectorised():
    rng = np.random.default_rng(3)
    m = rng.standard_normal((3, 4, 5))
    out = sigma_frame(m, DIAGONAL)
    assert out.shape == (3, 4, 5)
    np.testing.assert_allclose(out[:, 2, 3], sigma_frame(m[:, 2, 3], DIAGONAL), rtol=1e-15)


def test_combo_examples():
    assert rotation_combo_check([0.3, -1.2, 2.0], 0.0) == 0.0
    assert rotation_combo_check([1, 2, 2.5], np.pi / 3) < 1e-12


@given(st.tuples(real, real, real), angle)
def test_combo_identity(m, theta):
    assert rotation_combo_check(m, theta) <= 1e-12


def test_divergence_identity_symbolic():
    sympy = pytest.importorskip("sympy")
    x, y, z, t = sympy.symbols("x y z t", real=True)
    u = sympy.sin(x + 2 * y) * sympy.exp(z / 3) + x**2 * y * z
    grad = [sympy.diff(u, v) for v in (x, y, z)]
    xi = (sympy.cos(t), sympy.sin(t))
    eta = (-sympy.sin(t), sympy.cos(t))
    mx = grad[0] * xi[0] + grad[1] * xi[1]
    me = grad[0] * eta[0] + grad[1] * eta[1]
    a = grad[2] * mx - mx * me**2 / 2 - mx**3 / 6
    b = -grad[2] * me + me * mx**2 / 2 + me**3 / 6
    S = (a * xi[0] + b * eta[0], a * xi[1] + b * eta[1], me**2 / 2 - mx**2 / 2)
    div = sum(sympy.diff(S[i], v) for i, v in enumerate((x, y, z)))
    R = grad[2] - (grad[0] ** 2 + grad[1] ** 2) / 2
    d2 = lambda e: sum(e[i] * e[k] * sympy.diff(u, p, q) for i, p in enumerate((x, y)) for k, q in enumerate((x, y)))
    lhs = sympy.lambdify((x, y, z, t), div - R * (d2(xi) - d2(eta)))
    rng = np.random.default_rng(0)
    for _ in range(20):
        assert abs(lhs(*rng.uniform(-1, 1, 3), rng.uniform(0, np.pi))) < 1e-10


def test_product_form_saddle():
    g = make_grid(5, 5, 5, ((-1, 1), (-1, 1), (-1, 1)))
    u = sample_field(g, lambda x, y, z: (x**2 - y**2) / 2)
    _, prod = div_sigma(u, STANDARD)
    assert prod.values[g.index_of(1, 1, 0)] == pytest.approx(-2.0, abs=1e-12)
    gs = sample_field(g, lambda x, y, z: x + z / 2)
    assert np.max(np.abs(div_sigma(gs, Frame(0.4))[1].values)) < 1e-13


@pytest.mark.parametrize("theta", [0.0, 0.7])
def test_divergence_identity_converges(smooth_field, theta):
    errs = []
    for n in (17, 33, 65):
        s, p = div_sigma(smooth_field(n), Frame(theta))
        errs.append(np.max(np.abs(s.values - p.values)[2:-2, 2:-2, 2:-2]))
    assert min(orders(errs)) >= 1.8


def test_eigen_density_examples():
    g = make_grid(5, 5, 5, ((-1, 1), (-1, 1), (-1, 1)))
    u = sample_field(g, lambda x, y, z: (x**2 - y**2) / 2)
    assert entropy_density_eig(u).values[g.index_of(1, 1, 0)] == pytest.approx(2.0, abs=1e-12)
    radial = sample_field(g, lambda x, y, z: (x**2 + y**2) / 2)
    assert np.max(entropy_density_eig(radial).values) < 1e-11
    assert np.max(entropy_sup_rotations(radial, 7).values) < 1e-11
    flat = sample_field(g, lambda x, y, z: 0.2 * y + 0.02 * z)
    assert np.max(entropy_density_eig(flat).values) < 1e-13


def test_rotation_sup_matches_eigen_density_for_saddle():
    g = make_grid(9, 9, 5)
    u = sample_field(g, lambda x, y, z: (x**2 - y**2) / 2 + 0.3 * x * y)
    eig = entropy_density_eig(u).values
    sup = entropy_sup_rotations(u, 180).values
    mask = eig > 1e-8
    assert np.max((eig[mask] - sup[mask]) / eig[mask]) < 1e-3


def test_rotation_sup_bounded_and_monotone(smooth_field):
    u = smooth_field(9)
    eig = entropy_density_eig(u).values
    prev = None
    for n in (3, 6, 12, 24):
        sup = entropy_sup_rotations(u, n).values
        assert np.all(sup <= eig + 1e-12)
        if prev is not None:
            assert np.all(sup >= prev - 1e-15)
        prev = sup


def test_rotation_count_validated(smooth_field):
    with pytest.raises(ValueError):
        entropy_sup_rotations(smooth_field(5), 1)


def test_jump_cost_values():
    j = JumpStates.from_states((1, 0, 0.5), (0, 0, 0))
    assert jump_cost(j) == pytest.approx(1 / (6 * np.sqrt(5)), rel=1e-14)
    assert jump_cost(j.swapped()) == jump_cost(j)
    k = JumpStates.from_states((1, 1, 1), (0, 0, 0))
    assert jump_cost(k) == pytest.approx(4 / (12 * np.sqrt(3)), rel=1e-14)


def test_layer_condition_violation_named():
    with pytest.raises(IncompatibleJumpError) as err:
        JumpStates.from_states((1, 0, 0.4), (0, 0, 0))
    assert err.value.condition == "layer"
    assert "m_plus" in str(err.value)


def test_normal_condition_violation_named():
    with pytest.raises(IncompatibleJumpError) as err:
        JumpStates((1, 0, 0.5), (0, 0, 0), (1, 0, 0))
    assert err.value.condition == "normal"
    with pytest.raises(IncompatibleJumpError) as err:
        JumpStates.from_states((1, 0, 0.5), (1, 0, 0.5))
    assert err.value.condition == "normal"


def test_json_roundtrip():
    j = JumpStates.from_states((0.5, -1, 0.625), (0, 0, 0))
    d = json.loads(j.to_json())
    assert set(d) == {"m_plus", "m_minus", "nu"}
    assert JumpStates.from_dict(d) == j


def test_frame_cost_examples():
    j = JumpStates.from_states((1, 0, 0.5), (0, 0, 0))
    assert frame_cost(j, Frame.along(j.jump_perp)) == pytest.approx(jump_cost(j), rel=1e-14)
    k = JumpStates.from_states((1, 1, 1), (0, 0, 0))
    assert frame_cost(k, Frame(0.0)) < 1e-15


@given(jumps(), angle)
def test_frame_cost_formula_matches_flux_and_bound(j, theta):
    f = Frame(theta)
    fc = frame_cost(j, f)
    assert fc == pytest.approx(frame_flux(j, f), rel=1e-9, abs=1e-12)
    assert fc <= jump_cost(j) + 1e-12


@given(jumps())
def test_sampled_frame_maximum_attains_jump_cost(j):
    best = max(frame_cost(j, Frame(k * np.pi / 360)) for k in range(360))
    assert best == pytest.approx(jump_cost(j), rel=1e-4)


@given(planar, planar, angle)
def test_jump_cost_rotation_invariant(a, b, phi):
    if np.hypot(a[0] - b[0], a[1] - b[1]) < 1e-3:
        return
    c, s = np.cos(phi), np.sin(phi)
    rot = lambda v: (c * v[0] - s * v[1], s * v[0] + c * v[1])
    j = JumpStates.from_states(*compatible(a, b))
    k = JumpStates.from_states(*compatible(rot(a), rot(b)))
    assert jump_cost(k) == pytest.approx(jump_cost(j), rel=1e-9)
