"""Gradient descent on the discrete energy with clamped boundary data.

The functional minimised is the discrete energy restricted to the free
window ``|x . nu| < 1/2 - slab``::

    E_w(u) = sum_nodes w * (R^2 / (2 eps) + eps * (lap_perp u)^2 / 2)

with ``w`` the trapezoid weights masked to the window.  Its gradient is
assembled from the transposes of the same sparse stencils, so it is exact
for the discrete functional.  Nodes in the two slabs next to the
``nu``-faces and in a thin frame along every face of the box are frozen.
"""

from __future__ import annotations

import csv
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Union

import numpy as np
from scipy.fft import dstn

from .energy import EnergyBreakdown, _check_eps, energy, energy_terms, equipartition_gap, strains
from .entropy import JumpStates, jump_cost
from .grid import Grid3, ScalarField, d1, d2, make_grid, quadrature_weights
from .profile import Truncation, ansatz_field, solve_profile

STEP_RULES = ("backtracking", "fixed")
INITS = ("ansatz", "affine-blend", "provided")


@dataclass(frozen=True)
class MinimizeConfig:
    epsilon: float
    max_iters: int = 200
    step_rule: str = "backtracking"
    armijo: float = 1e-4
    fixed_step: float = 1e-6
    initial_step: float = 1e-6
    max_halvings: int = 60
    grad_tol: float = 1e-8
    slab: float = 0.1
    blend: float = 0.1
    frame_nodes: int = 2
    init: str = "ansatz"

    def __post_init__(self):
        _check_eps(self.epsilon)
        if self.step_rule not in STEP_RULES:
            raise ValueError(f"step_rule must be one of {STEP_RULES}, got {self.step_rule!r}")
        if self.init not in INITS:
            raise ValueError(f"init must be one of {INITS}, got {self.init!r}")
        if not 0 < self.slab < 0.5:
            raise ValueError(f"slab fraction {self.slab} must lie in (0, 1/2)")
        if not 0 < self.blend < 0.5 - self.slab:
            raise ValueError(f"blend {self.blend} must lie in (0, 1/2 - slab)")
        for name in ("armijo", "fixed_step", "initial_step", "grad_tol"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if not 0 < self.armijo < 1:
            raise ValueError("armijo constant must lie in (0, 1)")
        if int(self.max_iters) != self.max_iters or self.max_iters < 0:
            raise ValueError("max_iters must be a nonnegative integer")
        if int(self.frame_nodes) != self.frame_nodes or self.frame_nodes < 0:
            raise ValueError("frame_nodes must be a nonnegative integer")

    @property
    def truncation(self) -> Truncation:
        return Truncation(self.slab, self.blend)

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class MinimizeReport:
    energies: List[float]
    grad_norms: List[float]
    steps: List[float]
    final: EnergyBreakdown
    equipartition_gap: float
    lower_bound: float
    upper_bound: Optional[float]
    iterations: int
    termination: str
    lower_bound_slack: float = 0.05
    field: Optional[ScalarField] = field(default=None, repr=False)

    @property
    def initial_energy(self) -> float:
        return self.energies[0]

    @property
    def final_energy(self) -> float:
        return self.energies[-1]

    def bracket_holds(self, upper_slack: float = 1e-6) -> bool:
        lo_ok = self.final_energy >= (1 - self.lower_bound_slack) * self.lower_bound
        hi_ok = self.upper_bound is None or self.final_energy <= self.upper_bound + upper_slack
        return bool(lo_ok and hi_ok)

    def to_dict(self) -> dict:
        return {
            "iterations": self.iterations,
            "termination": self.termination,
            "initial_energy": self.initial_energy,
            "final_energy": self.final_energy,
            "final": self.final.to_dict(),
            "equipartition_gap": self.equipartition_gap,
            "lower_bound": self.lower_bound,
            "lower_bound_slack": self.lower_bound_slack,
            "upper_bound": self.upper_bound,
            "bracket_holds": self.bracket_holds(),
        }

    def iterations_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["iter", "energy", "grad_norm", "step"])
            for k, (e, g, s) in enumerate(zip(self.energies, self.grad_norms, self.steps)):
                w.writerow([k, repr(e), repr(g), repr(s)])
        return path


# --------------------------------------------------------------------------
# clamps and windows


def normal_coordinate(grid: Grid3, nu: Sequence[float]) -> np.ndarray:
    X, Y, Z = grid.coords()
    return nu[0] * X + nu[1] * Y + nu[2] * Z


def clamp_mask(grid: Grid3, nu: Sequence[float], slab: float, frame_nodes: int = 2, half_width: float = 0.5) -> np.ndarray:
    """True on frozen nodes: the two slabs ``|x . nu| >= half_width - slab``
    and the outer ``frame_nodes`` layers along every face."""
    mask = np.abs(normal_coordinate(grid, nu)) >= half_width - slab - 1e-12
    k = int(frame_nodes)
    if k > 0:
        for d in range(3):
            idx = [slice(None)] * 3
            idx[d] = slice(0, k)
            mask[tuple(idx)] = True
            idx[d] = slice(grid.shape[d] - k, None)
            mask[tuple(idx)] = True
    return mask


def window_weights(grid: Grid3, nu: Sequence[float], slab: float, half_width: float = 0.5) -> np.ndarray:
    """Trapezoid weights restricted to the free window ``|x . nu| < half_width - slab``."""
    inside = np.abs(normal_coordinate(grid, nu)) < half_width - slab - 1e-12
    return quadrature_weights(grid) * inside


# --------------------------------------------------------------------------
# energy and exact gradient


def _energy_value(a: np.ndarray, grid: Grid3, eps: float, w: np.ndarray) -> float:
    comp, bend = energy_terms(a, grid, eps, w)
    return comp + bend


def _gradient_array(a: np.ndarray, grid: Grid3, eps: float, w: np.ndarray) -> np.ndarray:
    ux, uy, _, R, lap = strains(a, grid)
    c = w * R / eps
    bl = eps * w * lap
    g = d1(c, grid, 2, transpose=True)
    g -= d1(c * ux, grid, 0, transpose=True)
    g -= d1(c * uy, grid, 1, transpose=True)
    g += d2(bl, grid, 0, transpose=True) + d2(bl, grid, 1, transpose=True)
    return g


def energy_gradient(
    u: ScalarField, eps: float, clamp: Optional[np.ndarray] = None, weights: Optional[np.ndarray] = None
) -> ScalarField:
    """Exact gradient of the weighted discrete energy, zero on clamped nodes.

    ``weights`` defaults to the full-box trapezoid weights, so the gradient
    is that of ``energy(u, eps).total``.
    """
    eps = _check_eps(eps)
    w = quadrature_weights(u.grid) if weights is None else weights
    g = _gradient_array(u.values, u.grid, eps, w)
    if clamp is not None:
        g[clamp] = 0.0
    return u.with_values(g, "energy_gradient")


# --------------------------------------------------------------------------
# descent


def _breakdown(u: ScalarField, eps: float, w: np.ndarray) -> EnergyBreakdown:
    e = energy(u, eps, w)
    e.region = "window"
    return e


def minimize(
    u0: ScalarField,
    cfg: MinimizeConfig,
    j: Optional[JumpStates] = None,
    clamp: Optional[np.ndarray] = None,
    weights: Optional[np.ndarray] = None,
    upper_bound: Optional[float] = None,
) -> MinimizeReport:
    """Steepest descent with Armijo backtracking (or a fixed step).

    The clamp mask and window default to those built from ``j.nu`` (or the
    x axis without jump data).  The first trial step of each line search is
    the Barzilai-Borwein step of the previous iteration.
    """
    eps = cfg.epsilon
    grid = u0.grid
    nu = j.nu if j is not None else (1.0, 0.0, 0.0)
    if clamp is None:
        clamp = clamp_mask(grid, nu, cfg.slab, cfg.frame_nodes)
    if weights is None:
        weights = window_weights(grid, nu, cfg.slab)
    free = ~clamp

    a = u0.values.copy()
    E = _energy_value(a, grid, eps, weights)
    g = _gradient_array(a, grid, eps, weights)
    g[clamp] = 0.0
    gn = float(np.linalg.norm(g))
    energies, gnorms, steps = [E], [gn], [0.0]
    step = cfg.initial_step if cfg.step_rule == "backtracking" else cfg.fixed_step
    reason = "max_iters"
    for _ in range(cfg.max_iters):
        if gn <= cfg.grad_tol:
            reason = "grad_tol"
            break
        if cfg.step_rule == "fixed":
            t = cfg.fixed_step
            trial = a - t * g
            E_new = _energy_value(trial, grid, eps, weights)
            if not E_new < E:
                reason = "line_search_failed"
                break
        else:
            t = step
            for _ in range(cfg.max_halvings):
                trial = a - t * g
                E_new = _energy_value(trial, grid, eps, weights)
                if E_new <= E - cfg.armijo * t * gn**2 and E_new < E:
                    break
                t *= 0.5
            else:
                reason = "line_search_failed"
                break
        trial[clamp] = a[clamp]
        g_new = _gradient_array(trial, grid, eps, weights)
        g_new[clamp] = 0.0
        # Barzilai-Borwein trial step for the next line search
        s_vec = (trial - a)[free]
        y_vec = (g_new - g)[free]
        sy = float(s_vec @ y_vec)
        if sy > 0:
            step = float(s_vec @ s_vec) / sy
        else:
            step = 2.0 * t
        a, E, g = trial, E_new, g_new
        gn = float(np.linalg.norm(g))
        energies.append(E)
        gnorms.append(gn)
        steps.append(t)
    else:
        if gn <= cfg.grad_tol:
            reason = "grad_tol"

    u = u0.with_values(a, "minimizer")
    final = _breakdown(u, eps, weights)
    return MinimizeReport(
        energies=energies,
        grad_norms=gnorms,
        steps=steps,
        final=final,
        equipartition_gap=equipartition_gap(u, eps, weights),
        lower_bound=jump_cost(j) if j is not None else 0.0,
        upper_bound=upper_bound,
        iterations=len(energies) - 1,
        termination=reason,
        field=u,
    )


# --------------------------------------------------------------------------
# initial conditions


def affine_blend(grid: Grid3, j: JumpStates, eps: float, slab: float = 0.1) -> ScalarField:
    """Continuous blend of the two affine states across the free window.

    Each side uses ``m^± . x`` shifted so that both agree on ``x . nu = 0``;
    the blend weight is a C^2 ramp in ``x . nu`` over ``|x . nu| < 1/2 - slab``.
    """
    X, Y, Z = grid.coords()
    s = normal_coordinate(grid, j.nu)
    mp, mm = np.asarray(j.m_plus), np.asarray(j.m_minus)
    lp = mp[0] * X + mp[1] * Y + mp[2] * Z
    lm = mm[0] * X + mm[1] * Y + mm[2] * Z
    half = 0.5 - slab
    r = np.clip((s + half) / (2 * half), 0.0, 1.0)
    chi = r**3 * (10 - 15 * r + 6 * r**2)
    return ScalarField(grid, (1 - chi) * lm + chi * lp, "affine_blend")


@dataclass
class CubeResult:
    epsilon: float
    report: MinimizeReport
    ansatz_energy: float
    jump_cost: float

    def to_dict(self) -> dict:
        d = self.report.to_dict()
        d.update({"epsilon": self.epsilon, "ansatz_energy": self.ansatz_energy, "jump_cost": self.jump_cost})
        return d


def cube_experiment(
    j: JumpStates,
    cfg: MinimizeConfig,
    n: Union[int, Sequence[int]] = 49,
    t_max: float = 40.0,
    tol: float = 1e-10,
    u0: Optional[ScalarField] = None,
) -> CubeResult:
    """Minimise on the centred unit cube between clamped jump data.

    The upper bound is the window energy of the truncated ansatz on the same
    grid; the lower bound is the jump cost (per unit layer area, which is
    the cross-section of the cube for an axis normal).
    """
    shape = (n, n, n) if np.isscalar(n) else tuple(n)
    grid = make_grid(*shape) if u0 is None else u0.grid
    sol = solve_profile(j, t_max, tol)
    ansatz = ansatz_field(sol, grid, cfg.epsilon, cfg.truncation)
    w = window_weights(grid, j.nu, cfg.slab)
    upper = _energy_value(ansatz.values, grid, cfg.epsilon, w)
    if cfg.init == "ansatz":
        start = ansatz
    elif cfg.init == "affine-blend":
        start = affine_blend(grid, j, cfg.epsilon, cfg.slab)
        # clamped data must match the ansatz so that the bracket is comparable
        clamp = clamp_mask(grid, j.nu, cfg.slab, cfg.frame_nodes)
        vals = start.values.copy()
        vals[clamp] = ansatz.values[clamp]
        start = start.with_values(vals)
    else:
        if u0 is None:
            raise ValueError("init 'provided' requires an initial field")
        start = u0
    report = minimize(start, cfg, j, weights=w, upper_bound=upper)
    return CubeResult(cfg.epsilon, report, upper, jump_cost(j))


# --------------------------------------------------------------------------
# compactness diagnostics


@dataclass
class CompactnessReport:
    lp_norms: dict
    curl_l2: float
    curl_x_l2: float
    curl_y_l2: float
    curl_hminus1: float
    div_b_l1: float
    lap_nonneg_fraction: float

    def to_dict(self) -> dict:
        return asdict(self)


def _dirichlet_hminus1(r: np.ndarray, grid: Grid3) -> float:
    """Discrete H^{-1} norm of ``r`` on the interior nodes (zero Dirichlet data).

    Solves ``-Lap phi = r`` with the 7-point Laplacian by a type-I sine
    transform and returns ``sqrt(sum h^3 r phi)``.
    """
    inner = r[1:-1, 1:-1, 1:-1]
    lam = 0.0
    shape = inner.shape
    for d, (n, h) in enumerate(zip(grid.shape, grid.spacing)):
        k = np.arange(1, n - 1)
        ev = (2.0 / h**2) * (1 - np.cos(np.pi * k / (n - 1)))
        sh = [1, 1, 1]
        sh[d] = shape[d]
        lam = lam + ev.reshape(sh)
    rhat = dstn(inner, type=1, norm="ortho")
    cell = float(np.prod(grid.spacing))
    return float(np.sqrt(cell * np.sum(rhat**2 / lam)))


def compactness_diagnostics(u: ScalarField, ps: Sequence[float] = (2.0, 4.0), region=None) -> CompactnessReport:
    """Div-curl diagnostics of ``E = (grad_perp u, |grad_perp u|^2/2)`` and
    ``B = (-grad_perp u |grad_perp u|^2/2, |grad_perp u|^2/2)``.

    The curl residuals are ``d_z(u_x) - d_x(|grad_perp u|^2/2)`` and the
    y-analogue; the third curl component vanishes identically because the
    axis stencils commute.
    """
    for p in ps:
        if not p >= 1:
            raise ValueError(f"exponent {p} must be >= 1")
    g = u.grid
    w = quadrature_weights(g, region)
    a = u.values
    ux, uy, uz = (d1(a, g, d) for d in range(3))
    half_q = 0.5 * (ux**2 + uy**2)
    cx = d1(ux, g, 2) - d1(half_q, g, 0)
    cy = d1(uy, g, 2) - d1(half_q, g, 1)
    mag = np.sqrt(ux**2 + uy**2 + uz**2)
    norms = {f"{p:g}": float(np.sum(w * mag**p) ** (1.0 / p)) for p in ps}
    div_b = d1(half_q, g, 2) - d1(ux * half_q, g, 0) - d1(uy * half_q, g, 1)
    lap = d2(a, g, 0) + d2(a, g, 1)
    curl_x = math.sqrt(float(np.sum(w * cx**2)))
    curl_y = math.sqrt(float(np.sum(w * cy**2)))
    hm1 = math.hypot(_dirichlet_hminus1(cx, g), _dirichlet_hminus1(cy, g))
    return CompactnessReport(
        lp_norms=norms,
        curl_l2=math.hypot(curl_x, curl_y),
        curl_x_l2=curl_x,
        curl_y_l2=curl_y,
        curl_hminus1=hm1,
        div_b_l1=float(np.sum(w * np.abs(div_b))),
        lap_nonneg_fraction=float(np.mean(lap >= -1e-12)),
    )
