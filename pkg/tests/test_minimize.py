import numpy as np
import pytest

from smectic.energy import energy
from smectic.entropy import JumpStates
from smectic.grid import make_grid, quadrature_weights, sample_field
from smectic.minimize import (
    MinimizeConfig,
    affine_blend,
    clamp_mask,
    compactness_diagnostics,
    cube_experiment,
    energy_gradient,
    minimize,
    window_weights,
)

AXIAL = JumpStates.from_states((1, 0, 0.5), (-1, 0, 0.5))


def _ground(grid, m=(0.3, -0.4, 0.125)):
    return sample_field(grid, lambda x, y, z: m[0] * x + m[1] * y + m[2] * z)


def _bump(grid):
    X, Y, Z = grid.coords()
    return 0.01 * np.exp(-40 * (X**2 + Y**2 + Z**2))


@pytest.mark.parametrize("seed", range(20))
def test_gradient_matches_finite_differences(seed):
    rng = np.random.default_rng(seed)
    g = make_grid(7, 6, 8)
    u = g_field = sample_field(g, lambda x, y, z: 0.3 * x * z + 0.2 * np.sin(2 * y) + 0.1 * z)
    u = g_field.with_values(g_field.values + 0.05 * rng.standard_normal(g.shape))
    eps = 0.3
    grad = energy_gradient(u, eps).values
    d = rng.standard_normal(g.shape)
    h = 1e-6
    plus = energy(u.with_values(u.values + h * d), eps).total
    minus = energy(u.with_values(u.values - h * d), eps).total
    fd = (plus - minus) / (2 * h)
    an = float(np.sum(grad * d))
    assert abs(fd - an) <= 1e-6 * max(1.0, abs(an))


def test_gradient_vanishes_on_ground_state_and_clamps():
    g = make_grid(11, 11, 11)
    u = _ground(g)
    assert np.max(np.abs(energy_gradient(u, 0.5).values)) < 1e-12
    clamp = clamp_mask(g, (1, 0, 0), 0.1)
    bumped = u.with_values(u.values + _bump(g))
    assert np.all(energy_gradient(bumped, 0.5, clamp).values[clamp] == 0.0)


def test_clamp_and_window_are_complementary_inside_frame():
    g = make_grid(21, 9, 9)
    clamp = clamp_mask(g, (1, 0, 0), 0.1, frame_nodes=0)
    w = window_weights(g, (1, 0, 0), 0.1)
    assert np.all((w > 0) == ~clamp)
    assert np.all(clamp_mask(g, (1, 0, 0), 0.1)[:, :2, :])


def test_degenerate_jump_relaxes_to_ground_state():
    g = make_grid(13, 13, 13)
    u0 = _ground(g)
    bump = _bump(g)
    bump[clamp_mask(g, (1, 0, 0), 0.1)] = 0.0
    start = u0.with_values(u0.values + bump)
    cfg = MinimizeConfig(epsilon=1.0, max_iters=3000, grad_tol=1e-10)
    rep = minimize(start, cfg, weights=quadrature_weights(g))
    assert rep.final_energy < 1e-8
    assert rep.final_energy < rep.initial_energy


def test_clamped_values_are_untouched():
    g = make_grid(17, 9, 9)
    cfg = MinimizeConfig(epsilon=0.2, max_iters=30)
    start = affine_blend(g, AXIAL, cfg.epsilon)
    rep = minimize(start, cfg, AXIAL)
    clamp = clamp_mask(g, AXIAL.nu, cfg.slab, cfg.frame_nodes)
    assert np.array_equal(rep.field.values[clamp], start.values[clamp])


def test_energy_trajectory_nonincreasing():
    res = cube_experiment(AXIAL, MinimizeConfig(epsilon=0.1, max_iters=40), n=(33, 9, 9))
    e = np.array(res.report.energies)
    assert np.all(np.diff(e) <= 0)
    assert res.report.iterations == len(e) - 1 <= 40


def test_fixed_step_mode_and_failure_reason():
    g = make_grid(13, 13, 13)
    u0 = _ground(g)
    start = u0.with_values(u0.values + _bump(g))
    w = quadrature_weights(g)
    ok = minimize(start, MinimizeConfig(epsilon=1.0, step_rule="fixed", fixed_step=1e-4, max_iters=20), weights=w)
    assert ok.termination == "max_iters" and all(s == 1e-4 for s in ok.steps[1:])
    bad = minimize(start, MinimizeConfig(epsilon=1.0, step_rule="fixed", fixed_step=1e3, max_iters=20), weights=w)
    assert bad.termination == "line_search_failed"
    assert bad.iterations == 0


def test_grad_tol_termination():
    g = make_grid(9, 9, 9)
    rep = minimize(_ground(g), MinimizeConfig(epsilon=1.0), weights=quadrature_weights(g))
    assert rep.termination == "grad_tol" and rep.iterations == 0


def test_iterations_csv(tmp_path):
    g = make_grid(9, 9, 9)
    start = _ground(g).with_values(_ground(g).values + _bump(g))
    rep = minimize(start, MinimizeConfig(epsilon=1.0, max_iters=5), weights=quadrature_weights(g))
    lines = rep.iterations_csv(tmp_path / "it.csv").read_text().splitlines()
    assert lines[0] == "iter,energy,grad_norm,step"
    assert len(lines) == rep.iterations + 2


@pytest.mark.parametrize(
    "kw",
    [
        {"epsilon": 0.0},
        {"epsilon": 0.1, "step_rule": "newton"},
        {"epsilon": 0.1, "slab": 0.5},
        {"epsilon": 0.1, "slab": 0.3, "blend": 0.25},
        {"epsilon": 0.1, "armijo": 1.5},
        {"epsilon": 0.1, "max_iters": -1},
        {"epsilon": 0.1, "init": "random"},
    ],
)
def test_config_validation(kw):
    with pytest.raises(ValueError):
        MinimizeConfig(**kw)


def test_provided_init_requires_field():
    with pytest.raises(ValueError, match="initial field"):
        cube_experiment(AXIAL, MinimizeConfig(epsilon=0.1, init="provided", max_iters=1), n=9)


def test_compactness_on_ground_state_and_paraboloid():
    g = make_grid(17, 17, 17)
    rep = compactness_diagnostics(_ground(g))
    assert rep.curl_l2 < 1e-12 and rep.curl_hminus1 < 1e-12 and rep.div_b_l1 < 1e-12
    m = np.array([0.3, -0.4, 0.125])
    assert rep.lp_norms["2"] == pytest.approx(np.linalg.norm(m), rel=1e-12)
    para = sample_field(g, lambda x, y, z: 0.5 * (x**2 + y**2))
    assert compactness_diagnostics(para).lap_nonneg_fraction == 1.0
    with pytest.raises(ValueError):
        compactness_diagnostics(para, ps=(0.5,))


def test_curl_residual_is_compression_derivative():
    g = make_grid(17, 17, 17)
    u = sample_field(g, lambda x, y, z: 0.2 * x * z + 0.1 * np.sin(x + 2 * y))
    rep = compactness_diagnostics(u)
    assert rep.curl_l2 > 0
    assert rep.curl_hminus1 < rep.curl_l2
