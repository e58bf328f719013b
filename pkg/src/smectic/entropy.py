"""Rotated entropies, their divergence identity and the sharp jump cost.

For an orthonormal frame ``xi = (cos t, sin t)``, ``eta = (-sin t, cos t)``
and ``m = (m_perp, m3)`` with ``m_xi = m_perp . xi``, ``m_eta = m_perp . eta``::

    Sigma(m) = (m3 m_xi - m_xi m_eta^2/2 - m_xi^3/6) xi
             + (-m3 m_eta + m_eta m_xi^2/2 + m_eta^3/6) eta
             + (m_eta^2/2 - m_xi^2/2) z_hat

For smooth u, div Sigma(grad u) = R (u_xixi - u_etaeta).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence, Tuple

import numpy as np

from .energy import strains
from .grid import ScalarField, VectorField3, divergence, perp_hessian

COMPAT_TOL = 1e-12


@dataclass(frozen=True)
class Frame:
    theta: float = 0.0

    @property
    def xi(self) -> np.ndarray:
        return np.array([np.cos(self.theta), np.sin(self.theta)])

    @property
    def eta(self) -> np.ndarray:
        return np.array([-np.sin(self.theta), np.cos(self.theta)])

    @classmethod
    def along(cls, v: Sequence[float]) -> "Frame":
        """Frame whose xi points along the planar vector ``v``."""
        return cls(float(np.arctan2(v[1], v[0])))


STANDARD = Frame(0.0)
DIAGONAL = Frame(np.pi / 4)


def sigma_frame(m, frame: Frame) -> np.ndarray:
    """Sigma_{xi eta}(m); ``m`` has shape (3,) or (3, ...)."""
    m = np.asarray(m, dtype=float)
    xi, eta = frame.xi, frame.eta
    mx = m[0] * xi[0] + m[1] * xi[1]
    me = m[0] * eta[0] + m[1] * eta[1]
    a = m[2] * mx - 0.5 * mx * me**2 - mx**3 / 6.0
    b = -m[2] * me + 0.5 * me * mx**2 + me**3 / 6.0
    return np.stack([a * xi[0] + b * eta[0], a * xi[1] + b * eta[1], 0.5 * me**2 - 0.5 * mx**2])


def rotation_combo_check(m, theta: float) -> float:
    """Max deviation of Sigma_theta from cos(2t) Sigma_0 + sin(2t) Sigma_{pi/4}."""
    lhs = sigma_frame(m, Frame(theta))
    rhs = np.cos(2 * theta) * sigma_frame(m, STANDARD) + np.sin(2 * theta) * sigma_frame(m, DIAGONAL)
    return float(np.max(np.abs(lhs - rhs)))


def _frame_second_difference(H, frame: Frame) -> np.ndarray:
    """u_xixi - u_etaeta = cos(2t)(u_xx - u_yy) + 2 sin(2t) u_xy."""
    c, s = np.cos(2 * frame.theta), np.sin(2 * frame.theta)
    return c * (H.xx - H.yy) + 2.0 * s * H.xy


def div_sigma(u: ScalarField, frame: Frame = STANDARD) -> Tuple[ScalarField, ScalarField]:
    """(stencil divergence of Sigma(grad u), product form R (u_xixi - u_etaeta))."""
    g = u.grid
    ux, uy, uz, R, _ = strains(u.values, g)
    S = VectorField3(g, sigma_frame(np.stack([ux, uy, uz]), frame), "Sigma")
    stencil = divergence(S)
    product = u.with_values(R * _frame_second_difference(perp_hessian(u), frame), "div_sigma_product")
    return stencil, product


def entropy_density_eig(u: ScalarField) -> ScalarField:
    R = strains(u.values, u.grid)[3]
    return u.with_values(np.abs(R) * perp_hessian(u).eigen_gap(), "entropy_density")


def entropy_sup_rotations(u: ScalarField, n_theta: int) -> ScalarField:
    """Nodewise max over theta = k pi / n_theta of |R (u_xixi - u_etaeta)|."""
    if int(n_theta) != n_theta or n_theta < 2:
        raise ValueError(f"n_theta must be an integer >= 2, got {n_theta}")
    R = np.abs(strains(u.values, u.grid)[3])
    H = perp_hessian(u)
    best = np.zeros(u.grid.shape)
    for k in range(int(n_theta)):
        np.maximum(best, np.abs(_frame_second_difference(H, Frame(k * np.pi / n_theta))), out=best)
    return u.with_values(R * best, "entropy_sup")


# --------------------------------------------------------------------------
# Jumps


class IncompatibleJumpError(ValueError):
    """Jump states violating the layer condition or the normal condition.

    ``condition`` is ``"layer"`` when m3 != |m_perp|^2 / 2 on a side, and
    ``"normal"`` when nu is not a unit vector parallel to m_plus - m_minus.
    """

    def __init__(self, condition: str, message: str):
        super().__init__(message)
        self.condition = condition


@dataclass(frozen=True)
class JumpStates:
    m_plus: Tuple[float, float, float]
    m_minus: Tuple[float, float, float]
    nu: Tuple[float, float, float]

    def __post_init__(self):
        for name in ("m_plus", "m_minus", "nu"):
            v = tuple(float(c) for c in getattr(self, name))
            if len(v) != 3 or not all(np.isfinite(v)):
                raise ValueError(f"{name} must be three finite numbers")
            object.__setattr__(self, name, v)
        self.validate()

    @classmethod
    def from_states(cls, m_plus, m_minus) -> "JumpStates":
        """Build with nu = (m_plus - m_minus) / |m_plus - m_minus|."""
        p = np.asarray(m_plus, float) - np.asarray(m_minus, float)
        n = np.linalg.norm(p)
        if n == 0:
            raise IncompatibleJumpError("normal", "m_plus equals m_minus: no jump")
        return cls(tuple(m_plus), tuple(m_minus), tuple(p / n))

    @classmethod
    def from_dict(cls, d: dict) -> "JumpStates":
        if d.get("nu") is None:
            return cls.from_states(d["m_plus"], d["m_minus"])
        return cls(tuple(d["m_plus"]), tuple(d["m_minus"]), tuple(d["nu"]))

    def to_dict(self) -> dict:
        return {"m_plus": list(self.m_plus), "m_minus": list(self.m_minus), "nu": list(self.nu)}

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    def validate(self) -> None:
        for side in ("m_plus", "m_minus"):
            m = getattr(self, side)
            defect = m[2] - 0.5 * (m[0] ** 2 + m[1] ** 2)
            if abs(defect) > COMPAT_TOL:
                raise IncompatibleJumpError(
                    "layer", f"{side} violates m3 = |m_perp|^2/2 (defect {defect:.3e})"
                )
        p = self.p
        pn = np.linalg.norm(p)
        if pn == 0:
            raise IncompatibleJumpError("normal", "m_plus equals m_minus: no jump")
        nu = np.asarray(self.nu)
        if abs(np.linalg.norm(nu) - 1.0) > COMPAT_TOL:
            raise IncompatibleJumpError("normal", f"nu is not a unit vector (|nu| = {np.linalg.norm(nu)!r})")
        if np.linalg.norm(np.cross(nu, p / pn)) > COMPAT_TOL:
            raise IncompatibleJumpError("normal", "nu is not parallel to m_plus - m_minus")

    @property
    def p(self) -> np.ndarray:
        return np.asarray(self.m_plus) - np.asarray(self.m_minus)

    @property
    def jump_perp(self) -> np.ndarray:
        return self.p[:2]

    def swapped(self) -> "JumpStates":
        return JumpStates(self.m_minus, self.m_plus, tuple(-np.asarray(self.nu)))


def jump_cost(j: JumpStates) -> float:
    """|m_perp^+ - m_perp^-|^4 / (12 |m^+ - m^-|)."""
    j.validate()
    return float(np.linalg.norm(j.jump_perp) ** 4 / (12.0 * np.linalg.norm(j.p)))


def frame_cost(j: JumpStates, frame: Frame) -> float:
    """|(p_xi)^4 - (p_eta)^4| / (12 |p|) for the frame (xi, eta)."""
    j.validate()
    pp = j.jump_perp
    a, b = pp @ frame.xi, pp @ frame.eta
    return float(abs(a**4 - b**4) / (12.0 * np.linalg.norm(j.p)))


def frame_flux(j: JumpStates, frame: Frame) -> float:
    """|(Sigma(m^+) - Sigma(m^-)) . nu| evaluated directly."""
    j.validate()
    diff = sigma_frame(j.m_plus, frame) - sigma_frame(j.m_minus, frame)
    return float(abs(diff @ np.asarray(j.nu)))
