"""The smectic energy, its BPS decomposition and curvature identities.

    E_eps(u) = 1/2 * int [ R^2 / eps + eps * (lap_perp u)^2 ],
    R = u_z - |grad_perp u|^2 / 2.

The sign convention of the BPS decomposition is ``sign=+1`` for the squared
term ``(R - eps*lap_perp u)^2`` together with ``+2/3 int K u`` and
``+flux(Xi)``; ``sign=-1`` flips all three.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import NamedTuple, Optional

import numpy as np

from .grid import (
    Grid3,
    Region,
    ScalarField,
    VectorField3,
    Window,
    boundary_flux,
    d1,
    d2,
    integrate,
    perp_hessian,
    quadrature_weights,
)


def _check_eps(eps: float) -> float:
    eps = float(eps)
    if not eps > 0 or not np.isfinite(eps):
        raise ValueError(f"epsilon must be a positive finite number, got {eps}")
    return eps


def _check_sign(sign: int) -> int:
    if sign not in (1, -1):
        raise ValueError(f"sign must be +1 or -1, got {sign}")
    return int(sign)


def _region_descriptor(region: Region):
    if region is None:
        return "full"
    if isinstance(region, Window):
        return region.to_dict()
    return "weights"


@dataclass
class EnergyBreakdown:
    epsilon: float
    compression: float
    bending: float
    total: float
    curvature_integral: float
    region: object = "full"

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class BpsDecomposition:
    sign: int
    epsilon: float
    square_term: float
    curvature_term: float
    flux_term: float
    reconstructed_total: float

    def to_dict(self) -> dict:
        return asdict(self)


class CurvatureFlux(NamedTuple):
    volume_integral: float
    flux_integral: float
    mismatch: float


# --------------------------------------------------------------------------
# nodal quantities on raw arrays (shared with the minimizer)


def strains(a: np.ndarray, grid: Grid3):
    """Return (u_x, u_y, u_z, R, lap_perp) for the nodal array ``a``."""
    ux, uy, uz = (d1(a, grid, d) for d in range(3))
    R = uz - 0.5 * (ux**2 + uy**2)
    lap = d2(a, grid, 0) + d2(a, grid, 1)
    return ux, uy, uz, R, lap


def energy_terms(a: np.ndarray, grid: Grid3, eps: float, weights: np.ndarray):
    """(compression, bending) of the discrete energy with quadrature ``weights``."""
    _, _, _, R, lap = strains(a, grid)
    comp = 0.5 / eps * float(np.sum(weights * R**2))
    bend = 0.5 * eps * float(np.sum(weights * lap**2))
    return comp, bend


# --------------------------------------------------------------------------


def compression_residual(u: ScalarField) -> ScalarField:
    """Nodewise R = u_z - |grad_perp u|^2 / 2."""
    return u.with_values(strains(u.values, u.grid)[3], "R")


def gauss_curvature(u: ScalarField) -> ScalarField:
    """Approximate Gaussian curvature det(grad_perp^2 u)."""
    return u.with_values(perp_hessian(u).det(), "K")


def energy(u: ScalarField, eps: float, region: Region = None) -> EnergyBreakdown:
    eps = _check_eps(eps)
    w = quadrature_weights(u.grid, region)
    comp, bend = energy_terms(u.values, u.grid, eps, w)
    K = gauss_curvature(u).values
    return EnergyBreakdown(
        epsilon=eps,
        compression=comp,
        bending=bend,
        total=comp + bend,
        curvature_integral=float(np.sum(w * K)),
        region=_region_descriptor(region),
    )


def optimal_epsilon(u: ScalarField, region: Region = None) -> float:
    """The eps minimising energy(u, eps) for fixed u: sqrt(int R^2 / int lap^2)."""
    w = quadrature_weights(u.grid, region)
    _, _, _, R, lap = strains(u.values, u.grid)
    return float(np.sqrt(np.sum(w * R**2) / np.sum(w * lap**2)))


def curvature_flux_field(u: ScalarField) -> VectorField3:
    """(1/2)(grad_perp u lap_perp u - grad_perp |grad_perp u|^2 / 2, 0)."""
    g = u.grid
    ux, uy = d1(u.values, g, 0), d1(u.values, g, 1)
    H = perp_hessian(u)
    lap = H.trace()
    # grad_perp |grad_perp u|^2 / 2 via the chain rule
    hx = ux * H.xx + uy * H.xy
    hy = ux * H.xy + uy * H.yy
    vals = np.stack([0.5 * (ux * lap - hx), 0.5 * (uy * lap - hy), np.zeros(g.shape)])
    return VectorField3(g, vals, "K_flux")


def curvature_flux_check(u: ScalarField) -> CurvatureFlux:
    vol = integrate(gauss_curvature(u))
    flux = boundary_flux(curvature_flux_field(u))
    return CurvatureFlux(vol, flux, abs(vol - flux))


def bps_residual(u: ScalarField, eps: float, sign: int) -> ScalarField:
    """Nodewise R - sign * eps * lap_perp u."""
    eps, sign = _check_eps(eps), _check_sign(sign)
    _, _, _, R, lap = strains(u.values, u.grid)
    return u.with_values(R - sign * eps * lap, "bps_residual")


def equipartition_gap(u: ScalarField, eps: float, region: Region = None) -> float:
    """|(1/eps) int R^2 - eps int (lap_perp u)^2|."""
    eps = _check_eps(eps)
    comp, bend = energy_terms(u.values, u.grid, eps, quadrature_weights(u.grid, region))
    return abs(2.0 * comp - 2.0 * bend)


def calibration_field(u: ScalarField) -> VectorField3:
    """The BPS calibration Xi(u) whose divergence plus (2/3) K u equals R lap_perp u."""
    g = u.grid
    a = u.values
    ux, uy, uz = (d1(a, g, d) for d in range(3))
    H = perp_hessian(u)
    lap = H.trace()
    q = ux**2 + uy**2
    # grad_perp |grad_perp u|^2 = 2 * Hessian . grad_perp u
    qx = 2.0 * (ux * H.xx + uy * H.xy)
    qy = 2.0 * (ux * H.xy + uy * H.yy)
    coef = uz - q / 6.0 - a * lap / 3.0
    vals = np.stack([coef * ux + a * qx / 6.0, coef * uy + a * qy / 6.0, -0.5 * q])
    return VectorField3(g, vals, "Xi")


def bps_decomposition(u: ScalarField, eps: float, sign: int) -> BpsDecomposition:
    eps, sign = _check_eps(eps), _check_sign(sign)
    res = bps_residual(u, eps, sign)
    square = 0.5 / eps * integrate(res.values**2, grid=u.grid)
    curv = sign * (2.0 / 3.0) * integrate(gauss_curvature(u).values * u.values, grid=u.grid)
    flux = sign * boundary_flux(calibration_field(u))
    return BpsDecomposition(sign, eps, square, curv, flux, square + curv + flux)
