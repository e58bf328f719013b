"""Experiment drivers: each writes its artifacts into an ``OutputDir``."""

from __future__ import annotations

import math
from typing import Callable, Dict, List

import numpy as np
from scipy.stats import linregress

from .config import ExperimentConfig
from .energy import bps_decomposition, curvature_flux_check, energy
from .entropy import (
    Frame,
    JumpStates,
    div_sigma,
    entropy_density_eig,
    entropy_sup_rotations,
    frame_cost,
    jump_cost,
    rotation_combo_check,
)
from .grid import ScalarField, VectorField3, Window, boundary_flux, divergence, integrate, load_field, make_grid, sample_field
from .minimize import (
    MinimizeConfig,
    compactness_diagnostics,
    cube_experiment,
    window_weights,
)
from .outputs import OutputDir
from .profile import (
    DislocationSpec,
    ansatz_line_energy,
    bps_verify,
    dislocation_field,
    heat_residual,
    profile_energy,
    solve_profile,
)


def observed_orders(errors: List[float]) -> List[float]:
    """log2 ratios of successive errors (grids refined by a factor two)."""
    out = []
    for a, b in zip(errors[:-1], errors[1:]):
        out.append(math.log2(a / b) if a > 0 and b > 0 else float("nan"))
    return out


def trig_field(seed: int, modes: int = 3) -> Callable:
    """A smooth random trigonometric function of (x, y, z) fixed by ``seed``."""
    rng = np.random.default_rng(seed)
    ks = rng.uniform(-1.5, 1.5, size=(modes, 3))
    amps = rng.uniform(0.3, 1.0, size=modes)
    phases = rng.uniform(0, 2 * np.pi, size=modes)

    def f(x, y, z):
        total = 0.0
        for k, a, ph in zip(ks, amps, phases):
            total = total + a * np.sin(k[0] * x + k[1] * y + k[2] * z + ph)
        return total

    return f


def _descent_config(p: dict, eps: float) -> MinimizeConfig:
    return MinimizeConfig(
        epsilon=eps,
        max_iters=p["max_iters"],
        step_rule=p["step_rule"],
        armijo=p["armijo"],
        fixed_step=p["fixed_step"],
        grad_tol=p["grad_tol"],
        slab=p["slab"],
        blend=p["blend"],
        frame_nodes=p["frame_nodes"],
        init=p["init"],
    )


def excess_law(eps: List[float], excess: List[float]) -> dict:
    """Least-squares fits of ``ln excess`` against ``1/eps`` and against ``eps``.

    The first reads ``excess ~ c1 exp(-c2/eps)``, the second
    ``excess ~ c1 exp(-c2 eps)``; ``r2`` says which describes the sweep.
    """
    pts = [(e, x) for e, x in zip(eps, excess) if x > 0]
    if len(pts) < 3:
        return {}
    e = np.array([a for a, _ in pts])
    y = np.log([b for _, b in pts])
    out = {}
    for name, x in (("inverse_eps", 1.0 / e), ("eps", e)):
        fit = linregress(x, y)
        out[name] = {"c1": float(np.exp(fit.intercept)), "c2": float(-fit.slope), "r2": float(fit.rvalue**2)}
    return out


def _tag(eps: float) -> str:
    return f"{eps:g}"


# --------------------------------------------------------------------------


def run_profile(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    j: JumpStates = cfg.extras["jump"]
    sol = solve_profile(j, p["t_max"], p["tol"])
    out.write_csv("profile.csv", ["t", "g", "g_prime"], zip(sol.ts, sol.gs, sol.dgs))
    jc = jump_cost(j)
    energies = {_tag(e): profile_energy(sol, e) for e in p["epsilon"]}
    gap = max(abs(v - jc) for v in energies.values())
    summary = {"jump": j.to_dict(), "jump_cost": jc, "energy": energies, "gap": gap, "solution": sol.summary()}
    out.write_json("profile.json", summary)
    return summary


def run_cube(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    j: JumpStates = cfg.extras["jump"]
    sol = solve_profile(j, p["t_max"], p["tol"])
    rows, runs = [], []
    for eps in p["epsilon"]:
        mc = _descent_config(p, eps)
        res = cube_experiment(j, mc, p["n"], p["t_max"], p["tol"])
        rep = res.report
        w = window_weights(rep.field.grid, j.nu, mc.slab)
        comp = compactness_diagnostics(rep.field, p["compactness_p"], w)
        line = ansatz_line_energy(sol, eps, mc.truncation)
        rec = res.to_dict()
        rec.update({"ansatz_line_energy": line, "ansatz_excess": line - res.jump_cost, "compactness": comp.to_dict()})
        runs.append(rec)
        rows.append(
            [eps, res.jump_cost, res.ansatz_energy, line, line - res.jump_cost, rep.final_energy,
             rep.equipartition_gap, comp.curl_l2, comp.curl_hminus1, comp.div_b_l1, rep.iterations]
        )
        out.write_csv(f"iterations_eps{_tag(eps)}.csv", ["iter", "energy", "grad_norm", "step"],
                      ([k, e, g, s] for k, (e, g, s) in enumerate(zip(rep.energies, rep.grad_norms, rep.steps))))
        if p["save_fields"]:
            out.write_field(f"minimizer_eps{_tag(eps)}", rep.field)
    out.write_csv(
        "sweep.csv",
        ["epsilon", "jump_cost", "ansatz_energy", "ansatz_line_energy", "ansatz_excess", "final_energy",
         "equipartition_gap", "curl_l2", "curl_hminus1", "div_b_l1", "iterations"],
        rows,
    )
    law = excess_law([r["epsilon"] for r in runs], [r["ansatz_excess"] for r in runs])
    summary = {"jump": j.to_dict(), "n": p["n"], "runs": runs, "excess_law": law}
    out.write_json("cube.json", summary)
    return summary


def run_minimize(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    j: JumpStates = cfg.extras["jump"]
    runs = []
    for eps in p["epsilon"]:
        mc = _descent_config(p, eps)
        if p["init"] == "provided":
            u0 = load_field(cfg.extras["initial_field_path"])
            if not isinstance(u0, ScalarField):
                raise ValueError("initial_field must be a scalar field dump")
            res = cube_experiment(j, mc, u0.grid.shape, p["t_max"], p["tol"], u0=u0)
        else:
            res = cube_experiment(j, mc, p["n"], p["t_max"], p["tol"])
        rep = res.report
        comp = compactness_diagnostics(rep.field, p["compactness_p"], window_weights(rep.field.grid, j.nu, mc.slab))
        rec = res.to_dict()
        rec["compactness"] = comp.to_dict()
        runs.append(rec)
        out.write_csv(f"iterations_eps{_tag(eps)}.csv", ["iter", "energy", "grad_norm", "step"],
                      ([k, e, g, s] for k, (e, g, s) in enumerate(zip(rep.energies, rep.grad_norms, rep.steps))))
        if p["save_fields"]:
            out.write_field(f"minimizer_eps{_tag(eps)}", rep.field)
    summary = {"jump": j.to_dict(), "runs": runs}
    out.write_json("minimize.json", summary)
    return summary


def run_dislocation(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    window = Window((0.1, 0.9), (0.0, 1.0), (0.1, 0.9))
    results = []
    for eps in p["epsilon"]:
        levels = []
        nx, nz = p["nx"], p["nz"]
        for level in range(p["refinements"] + 1):
            spec = DislocationSpec(p["b"], eps, p["sign"], tuple(p["x_range"]), tuple(p["z_range"]), nx, nz)
            u = dislocation_field(spec)
            mx, l2 = bps_verify(u, eps, spec.sign, window)
            heat = float(np.max(np.abs(heat_residual(spec).values[1:-1, :, 1:-1])))
            levels.append({"nx": nx, "nz": nz, "hx": u.grid.hx, "max_residual": mx, "l2_residual": l2, "heat_residual": heat})
            if level == 0:
                plateau = {
                    "left": float(np.max(np.abs(u.values[0]))),
                    "right": float(np.max(np.abs(u.values[-1] - 0.5 * spec.b))),
                }
                if p["save_fields"]:
                    out.write_field(f"dislocation_eps{_tag(eps)}", u)
            nx, nz = 2 * nx - 1, 2 * nz - 1
        results.append(
            {
                "epsilon": eps,
                "levels": levels,
                "residual_orders": observed_orders([lv["max_residual"] for lv in levels]),
                "heat_orders": observed_orders([lv["heat_residual"] for lv in levels]),
                "plateau_deviation": plateau,
            }
        )
    summary = {"b": p["b"], "sign": p["sign"], "results": results}
    out.write_csv(
        "dislocation.csv",
        ["epsilon", "nx", "nz", "max_residual", "l2_residual", "heat_residual"],
        ([r["epsilon"], lv["nx"], lv["nz"], lv["max_residual"], lv["l2_residual"], lv["heat_residual"]]
         for r in results for lv in r["levels"]),
    )
    out.write_json("dislocation.json", summary)
    return summary


def run_entropy_check(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    rng = np.random.default_rng(cfg.seed)
    ms = rng.uniform(-2, 2, size=(p["samples"], 3))
    thetas = rng.uniform(0, np.pi, size=p["samples"])
    combo = max(rotation_combo_check(m, t) for m, t in zip(ms, thetas))

    f = trig_field(cfg.seed)
    u = sample_field(make_grid(p["n"], p["n"], p["n"]), f)
    eig = entropy_density_eig(u).values
    sup = entropy_sup_rotations(u, p["n_theta"]).values
    big = eig > 1e-8 * eig.max()
    sup_rel = float(np.max((eig[big] - sup[big]) / eig[big]))
    sup_above = float(np.max(sup - eig))

    # jump cost against the sampled frame maximum for a random compatible jump
    mp, mm = rng.uniform(-1.5, 1.5, size=2), rng.uniform(-1.5, 1.5, size=2)
    j = JumpStates.from_states((*mp, 0.5 * mp @ mp), (*mm, 0.5 * mm @ mm))
    frames = [frame_cost(j, Frame(k * np.pi / p["n_theta"])) for k in range(p["n_theta"])]
    jc = jump_cost(j)

    errs = []
    for n in p["sizes"]:
        s, prod = div_sigma(sample_field(make_grid(n, n, n), f))
        errs.append(float(np.max(np.abs(s.values - prod.values)[2:-2, 2:-2, 2:-2])))
    summary = {
        "combo_max_deviation": combo,
        "sup_vs_eig_max_rel_shortfall": sup_rel,
        "sup_minus_eig_max": sup_above,
        "jump": j.to_dict(),
        "jump_cost": jc,
        "frame_cost_max": max(frames),
        "frame_cost_rel_gap": (jc - max(frames)) / jc,
        "div_sigma_sizes": p["sizes"],
        "div_sigma_errors": errs,
        "div_sigma_orders": observed_orders(errs),
    }
    out.write_csv("div_sigma.csv", ["n", "interior_max_error"], zip(p["sizes"], errs))
    out.write_json("entropy.json", summary)
    return summary


def run_identity_suite(cfg: ExperimentConfig, out: OutputDir) -> dict:
    p = cfg.params
    f = trig_field(cfg.seed)
    rows = []
    cols: Dict[str, List[float]] = {"divergence_theorem": [], "curvature_flux": [], "div_sigma": []}
    for eps in p["epsilon"]:
        cols[f"bps_plus_eps{_tag(eps)}"] = []
        cols[f"bps_minus_eps{_tag(eps)}"] = []
    for n in p["sizes"]:
        g = make_grid(n, n, n)
        u = sample_field(g, f)
        X, Y, Z = g.coords()
        F = VectorField3(g, np.stack([np.sin(X + Y), np.cos(Y * Z), X * Z**2]), "F")
        cols["divergence_theorem"].append(abs(integrate(divergence(F)) - boundary_flux(F)))
        cols["curvature_flux"].append(curvature_flux_check(u).mismatch)
        s, prod = div_sigma(u)
        cols["div_sigma"].append(float(np.max(np.abs(s.values - prod.values)[2:-2, 2:-2, 2:-2])))
        for eps in p["epsilon"]:
            total = energy(u, eps).total
            cols[f"bps_plus_eps{_tag(eps)}"].append(abs(bps_decomposition(u, eps, 1).reconstructed_total - total))
            cols[f"bps_minus_eps{_tag(eps)}"].append(abs(bps_decomposition(u, eps, -1).reconstructed_total - total))
    names = list(cols)
    for i, n in enumerate(p["sizes"]):
        rows.append([n] + [cols[k][i] for k in names])
    out.write_csv("identities.csv", ["n"] + names, rows)
    summary = {
        "sizes": p["sizes"],
        "errors": cols,
        "orders": {k: observed_orders(v) for k, v in cols.items()},
    }
    out.write_json("identities.json", summary)
    return summary


RUNNERS = {
    "profile": run_profile,
    "cube": run_cube,
    "minimize": run_minimize,
    "dislocation": run_dislocation,
    "entropy-check": run_entropy_check,
    "identity-suite": run_identity_suite,
}
