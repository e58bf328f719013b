"""One-dimensional transition profiles, the layered ansatz and edge dislocations.

The profile ``g`` solves ``g' = |R(g)| / |p_perp . nu_perp|``, ``g(0) = 1/2``
with ``p = m_plus - m_minus`` and

    R(g) = g p3 + m3^- - |g p_perp + m_perp^-|^2 / 2,

the compression strain of ``grad u = g p + m^-``.  For compatible states
``R(g) = |p_perp|^2 g (1 - g) / 2`` so ``g`` is a logistic curve, but the
solver integrates the general right-hand side.

Near ``g = 1`` the profile is integrated in ``q = 1 - g`` so that the upper
tail keeps full relative precision.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Tuple, Union

import numpy as np
from scipy import integrate as spi
from scipy.interpolate import CubicHermiteSpline
from scipy.special import erfc
from scipy.stats import linregress

from .energy import _check_eps, _check_sign, bps_residual
from .entropy import JumpStates
from .grid import Grid3, Region, ScalarField, d1, d2, integrate, make_grid, quadrature_weights

SPAN_TOL = 1e-8


class ProfileFailure(RuntimeError):
    """The profile integration did not produce an admissible solution."""


# --------------------------------------------------------------------------
# right-hand side


def _denominator(j: JumpStates) -> float:
    return float(abs(j.jump_perp @ np.asarray(j.nu)[:2]))


def _strain_from_below(g, j: JumpStates):
    """R(g) expanded about g = 0 (exact, stable for small g)."""
    p, mm = j.p, np.asarray(j.m_minus)
    c0 = mm[2] - 0.5 * (mm[0] ** 2 + mm[1] ** 2)
    c1 = p[2] - p[:2] @ mm[:2]
    return c0 + g * c1 - 0.5 * g**2 * (p[:2] @ p[:2])


def _strain_from_above(q, j: JumpStates):
    """R(1 - q) expanded about q = 0."""
    p, mp = j.p, np.asarray(j.m_plus)
    c0 = mp[2] - 0.5 * (mp[0] ** 2 + mp[1] ** 2)
    c1 = -p[2] + p[:2] @ mp[:2]
    return c0 + q * c1 - 0.5 * q**2 * (p[:2] @ p[:2])


def profile_rhs(g, j: JumpStates):
    """|g p3 + m3^- - (g p1 + m1^-)^2/2 - (g p2 + m2^-)^2/2| / |p_perp . nu_perp|."""
    p, mm = j.p, np.asarray(j.m_minus)
    r = g * p[2] + mm[2] - 0.5 * (g * p[0] + mm[0]) ** 2 - 0.5 * (g * p[1] + mm[1]) ** 2
    return np.abs(r) / _denominator(j)


# --------------------------------------------------------------------------
# solution


@dataclass
class ProfileSolution:
    j: JumpStates
    ts: np.ndarray
    gs: np.ndarray
    one_minus_g: np.ndarray
    dgs: np.ndarray
    decay_plus: float
    decay_minus: float
    fit_r2_plus: float
    fit_r2_minus: float
    denom: float
    t_max: float
    tol: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def t_span(self) -> Tuple[float, float]:
        return float(self.ts[0]), float(self.ts[-1])

    def g(self, t):
        """Profile value by cubic Hermite interpolation of the samples."""
        return self._spline("g", self.gs)(t)

    def g_prime(self, t):
        return self._spline("g", self.gs).derivative()(t)

    def _spline(self, key, values, deriv_sign=1.0):
        if key not in self._cache:
            self._cache[key] = CubicHermiteSpline(self.ts, values, deriv_sign * self.dgs)
        return self._cache[key]

    def lower_spline(self):
        return self._spline("g", self.gs)

    def upper_spline(self):
        """Spline of q = 1 - g."""
        return self._spline("q", self.one_minus_g, -1.0)

    def summary(self) -> dict:
        return {
            "t_max": self.t_max,
            "tol": self.tol,
            "samples": int(self.ts.size),
            "decay_plus": self.decay_plus,
            "decay_minus": self.decay_minus,
            "fit_r2_plus": self.fit_r2_plus,
            "fit_r2_minus": self.fit_r2_minus,
            "denom": self.denom,
        }

    def to_csv(self, path: Union[str, Path]) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "g", "g_prime"])
            for row in zip(self.ts, self.gs, self.dgs):
                w.writerow([repr(float(v)) for v in row])
        return path


def _integrate_half(fun, t_end: float, y0: float, tol: float, max_step: float):
    res = spi.solve_ivp(
        fun,
        (0.0, t_end),
        [y0],
        method="DOP853",
        atol=tol,
        rtol=max(tol, 1e-13),
        max_step=max_step,
    )
    if not res.success:
        raise ProfileFailure(f"integration towards t={t_end} failed: {res.message}")
    return res.t, res.y[0]


def _decay_fit(t: np.ndarray, dist: np.ndarray):
    """Rate and R^2 of log(dist) ~ a - rate * |t|."""
    fit = linregress(np.abs(t), np.log(dist))
    return float(-fit.slope), float(fit.rvalue**2)


def solve_profile(j: JumpStates, t_max: float = 40.0, tol: float = 1e-10, max_step: float = 0.05) -> ProfileSolution:
    """Integrate the profile on ``[-t_max, t_max]`` from ``g(0) = 1/2``.

    The lower half is integrated in ``g`` backwards, the upper half in
    ``q = 1 - g`` forwards, both with an embedded 8(5,3) Runge-Kutta pair.
    Decay rates are fitted on the outer quarter of each half.
    """
    if not t_max > 0 or not tol > 0:
        raise ValueError("t_max and tol must be positive")
    j.validate()
    d = _denominator(j)

    def lower(t, y):
        return np.abs(_strain_from_below(y, j)) / d

    def upper(t, y):
        return -np.abs(_strain_from_above(y, j)) / d

    tb, gb = _integrate_half(lower, -t_max, 0.5, tol, max_step)
    tf, qf = _integrate_half(upper, t_max, 0.5, tol, max_step)

    for name, vals in (("g", gb), ("1 - g", qf)):
        if np.any(vals < -tol) or np.any(vals > 1 + tol):
            raise ProfileFailure(f"{name} left [0, 1]: range [{vals.min()!r}, {vals.max()!r}]")
        if np.any(vals <= 0):
            raise ProfileFailure(f"{name} reached 0 inside the span; reduce t_max")
    # the signed strain must be nonnegative along the whole path
    rb, rf = _strain_from_below(gb, j), _strain_from_above(qf, j)
    worst = min(rb.min(), rf.min())
    if worst < -tol:
        raise ProfileFailure(f"compression strain changes sign along the profile (min {worst!r})")

    ts = np.concatenate([tb[:0:-1], tf])
    g = np.concatenate([gb[:0:-1], 1.0 - qf])
    q = np.concatenate([1.0 - gb[:0:-1], qf])
    dg = np.concatenate([np.abs(rb[:0:-1]), np.abs(rf)]) / d
    if np.any(np.diff(ts) <= 0):
        raise ProfileFailure("sample times are not strictly increasing")
    if np.any(np.diff(g) < 0):
        raise ProfileFailure("profile is not monotone")

    sel_f = tf >= 0.75 * t_max
    sel_b = tb <= -0.75 * t_max
    if sel_f.sum() < 3 or sel_b.sum() < 3:
        raise ProfileFailure("too few samples in the tails for a decay fit; reduce max_step")
    kp, r2p = _decay_fit(tf[sel_f], qf[sel_f])
    km, r2m = _decay_fit(tb[sel_b], gb[sel_b])
    return ProfileSolution(j, ts, g, q, dg, kp, km, r2p, r2m, d, float(t_max), float(tol))


# --------------------------------------------------------------------------
# energy of the profile


def _check_span(sol: ProfileSolution) -> None:
    lo, hi = sol.gs[0], sol.one_minus_g[-1]
    if lo > SPAN_TOL or hi > SPAN_TOL:
        raise ValueError(
            f"profile span too short: g(-t_max)={lo:.2e}, 1-g(t_max)={hi:.2e}; increase t_max"
        )


def profile_energy(sol: ProfileSolution, eps: float, order: int = 6) -> float:
    """Energy per unit area of the layer ``grad u = g(s/eps) p + m^-``.

    Evaluates ``1/2 int [R^2/eps + eps (g'(s/eps) p_perp.nu_perp / eps)^2] ds``
    by Gauss-Legendre quadrature on every solver step, with ``g`` and ``g'``
    taken from the Hermite interpolant (not from the right-hand side).
    """
    eps = _check_eps(eps)
    _check_span(sol)
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = sol.ts[:-1], sol.ts[1:]
    half = 0.5 * (b - a)
    t = (0.5 * (a + b))[:, None] + half[:, None] * x[None, :]
    wt = half[:, None] * w[None, :]
    low = t <= 0
    lo_s, up_s = sol.lower_spline(), sol.upper_spline()
    R = np.where(low, _strain_from_below(lo_s(t), sol.j), _strain_from_above(up_s(t), sol.j))
    dg = np.where(low, lo_s.derivative()(t), -up_s.derivative()(t))
    s_w = eps * wt
    dens = R**2 / eps + eps * (dg * sol.denom / eps) ** 2
    return float(0.5 * np.sum(s_w * dens))


# --------------------------------------------------------------------------
# the layered ansatz


@dataclass(frozen=True)
class Truncation:
    """Blend the ansatz to its affine limits near ``|x . nu| = 1/2``.

    Nodes with ``|s| >= 1/2 - slab`` carry the exact affine data; the
    potential is blended over ``[1/2 - slab - blend, 1/2 - slab]`` with the
    C^2 ramp ``6r^5 - 15r^4 + 10r^3``.
    """

    slab: float = 0.1
    blend: float = 0.1
    half_width: float = 0.5

    def __post_init__(self):
        if not (0 < self.slab < 0.5 and self.blend > 0 and self.slab + self.blend < self.half_width):
            raise ValueError(f"invalid truncation slab={self.slab}, blend={self.blend}")

    @property
    def outer(self) -> float:
        return self.half_width - self.slab

    @property
    def inner(self) -> float:
        return self.outer - self.blend


def _ramp(r):
    r = np.clip(r, 0.0, 1.0)
    return r**3 * (10 - 15 * r + 6 * r**2), 30 * r**2 * (1 - r) ** 2, 60 * r * (1 - r) * (1 - 2 * r)


class LayerPotential:
    """``phi(s) = (p.nu) eps G(s/eps)`` with ``G(t) = int_0^t g``.

    ``G`` is the exact antiderivative of the Hermite interpolant of ``g``.
    Outside the sampled span ``G`` is either continued with the fitted
    exponential tails (``extend_tails=True``) or rejected.
    """

    def __init__(self, sol: ProfileSolution, eps: float, extend_tails: bool = False):
        self.sol = sol
        self.eps = _check_eps(eps)
        self.extend_tails = extend_tails
        self.slope = float(sol.j.p @ np.asarray(sol.j.nu))
        spline = sol.lower_spline()
        anti = spline.antiderivative()
        self._G = lambda t: anti(t) - anti(0.0)
        t0, t1 = sol.t_span
        self._t0, self._t1 = t0, t1
        self._G0, self._G1 = float(self._G(t0)), float(self._G(t1))
        self._g0, self._q1 = float(sol.gs[0]), float(sol.one_minus_g[-1])
        # lim G(t) - t as t -> +inf and lim G(t) as t -> -inf
        self.c_plus = self._G1 - t1 - self._q1 / sol.decay_plus
        self.c_minus = self._G0 - self._g0 / sol.decay_minus

    def _check(self, t):
        if not self.extend_tails and (np.min(t) < self._t0 - 1e-12 or np.max(t) > self._t1 + 1e-12):
            raise ValueError(
                f"stretched coordinate range [{np.min(t):.3g}, {np.max(t):.3g}] exceeds the profile span "
                f"[{self._t0:.3g}, {self._t1:.3g}]; increase t_max or enable tail extension"
            )

    def profile(self, t):
        """(G, g, g') at stretched coordinates ``t``."""
        t = np.asarray(t, dtype=float)
        self._check(t)
        sol = self.sol
        tc = np.clip(t, self._t0, self._t1)
        G, g, dg = self._G(tc), sol.g(tc), sol.g_prime(tc)
        hi, lo = t > self._t1, t < self._t0
        if hi.any():
            k, dt = sol.decay_plus, t[hi] - self._t1
            e = np.exp(-k * dt)
            G[hi] = self._G1 + dt - self._q1 / k * (1 - e)
            g[hi] = 1 - self._q1 * e
            dg[hi] = k * self._q1 * e
        if lo.any():
            k, dt = sol.decay_minus, self._t0 - t[lo]
            e = np.exp(-k * dt)
            G[lo] = self._G0 - self._g0 / k * (1 - e)
            g[lo] = self._g0 * e
            dg[lo] = k * self._g0 * e
        return G, g, dg

    def __call__(self, s, truncation: Optional[Truncation] = None):
        """(phi, phi', phi'') at signed distances ``s``; blended if truncated."""
        s = np.asarray(s, dtype=float)
        eps, a = self.eps, self.slope
        if truncation is None:
            G, g, dg = self.profile(s / eps)
            return a * eps * G, a * g, a * dg / eps
        inside = np.abs(s) < truncation.outer
        phi = np.empty_like(s)
        d1 = np.empty_like(s)
        d2 = np.empty_like(s)
        # affine limits
        up = s >= 0
        lim = np.where(up, a * (s + eps * self.c_plus), a * eps * self.c_minus)
        dlim = np.where(up, a, 0.0)
        phi[~inside], d1[~inside], d2[~inside] = lim[~inside], dlim[~inside], 0.0
        if inside.any():
            si = s[inside]
            G, g, dg = self.profile(si / eps)
            f, f1, f2 = a * eps * G, a * g, a * dg / eps
            r = (np.abs(si) - truncation.inner) / truncation.blend
            chi, c1, c2 = _ramp(r)
            c1 = c1 * np.sign(si) / truncation.blend
            c2 = c2 / truncation.blend**2
            li, dli = lim[inside], dlim[inside]
            phi[inside] = (1 - chi) * f + chi * li
            d1[inside] = (1 - chi) * f1 + chi * dli + c1 * (li - f)
            d2[inside] = (1 - chi) * f2 + 2 * c1 * (dli - f1) + c2 * (li - f)
        return phi, d1, d2


def ansatz_field(
    sol: ProfileSolution,
    grid: Grid3,
    eps: float,
    truncation: Optional[Truncation] = None,
    extend_tails: bool = False,
) -> ScalarField:
    """u(x) = phi(x . nu) + m^- . x with ``grad u = g((x . nu)/eps) p + m^-``."""
    pot = LayerPotential(sol, eps, extend_tails)
    X, Y, Z = grid.coords()
    nu, mm = sol.j.nu, sol.j.m_minus
    s = nu[0] * X + nu[1] * Y + nu[2] * Z
    phi = pot(s, truncation)[0]
    return ScalarField(grid, phi + mm[0] * X + mm[1] * Y + mm[2] * Z, "ansatz")


def ansatz_line_energy(
    sol: ProfileSolution,
    eps: float,
    truncation: Optional[Truncation] = None,
    half_width: float = 0.5,
    extend_tails: bool = False,
) -> float:
    """Energy per unit layer area of the ansatz on ``|x . nu| <= half_width``.

    Continuum value by adaptive quadrature in the normal coordinate; used to
    measure the excess over the jump cost without grid error.
    """
    pot = LayerPotential(sol, eps, extend_tails)
    nu, mm = np.asarray(sol.j.nu), np.asarray(sol.j.m_minus)
    n2 = nu[0] ** 2 + nu[1] ** 2

    def density(s):
        _, d1, d2 = pot(np.atleast_1d(s), truncation)
        m = d1[:, None] * nu[None, :] + mm[None, :]
        R = m[:, 2] - 0.5 * (m[:, 0] ** 2 + m[:, 1] ** 2)
        return float((0.5 * (R**2 / pot.eps + pot.eps * (d2 * n2) ** 2))[0])

    breaks = [-half_width, 0.0, half_width]
    if truncation is not None:
        breaks += [-truncation.outer, -truncation.inner, truncation.inner, truncation.outer]
    breaks = sorted({b for b in breaks if -half_width <= b <= half_width})
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        val, _ = spi.quad(density, lo, hi, epsabs=1e-11, epsrel=1e-9, limit=400)
        total += val
    return total


def ansatz_sign(j: JumpStates) -> int:
    """Sign of the BPS equation solved by the ansatz: sign(p . nu)."""
    return 1 if float(j.p @ np.asarray(j.nu)) > 0 else -1


# --------------------------------------------------------------------------
# edge dislocation from the Hopf-Cole transform


@dataclass(frozen=True)
class DislocationSpec:
    """Edge dislocation of Burgers magnitude ``b`` on an (x, z) rectangle.

    ``z_range`` is the distance from the dislocation core and must be
    positive.  For ``sign=+1`` the field lives at ``z in z_range``; for
    ``sign=-1`` it is the mirror solution at ``z in -z_range``.
    """

    b: float = 0.5
    epsilon: float = 0.2
    sign: int = 1
    x_range: Tuple[float, float] = (-5.0, 5.0)
    z_range: Tuple[float, float] = (0.5, 1.5)
    nx: int = 201
    nz: int = 101
    ny: int = 3
    y_range: Tuple[float, float] = (-0.5, 0.5)

    def __post_init__(self):
        _check_eps(self.epsilon)
        _check_sign(self.sign)
        if not np.isfinite(self.b):
            raise ValueError("b must be finite")
        z0, z1 = self.z_range
        if not 0 < z0 < z1:
            raise ValueError(f"z_range {self.z_range} must satisfy 0 < z0 < z1")

    def heat_grid(self) -> Grid3:
        """Grid in the heat-equation variables (distance from the core)."""
        return make_grid(self.nx, self.ny, self.nz, (tuple(self.x_range), tuple(self.y_range), tuple(self.z_range)))

    def grid(self) -> Grid3:
        z0, z1 = self.z_range
        zr = (z0, z1) if self.sign > 0 else (-z1, -z0)
        return make_grid(self.nx, self.ny, self.nz, (tuple(self.x_range), tuple(self.y_range), zr))

    def to_dict(self) -> dict:
        return {
            "b": self.b,
            "epsilon": self.epsilon,
            "sign": self.sign,
            "x_range": list(self.x_range),
            "z_range": list(self.z_range),
            "nx": self.nx,
            "nz": self.nz,
        }


def _erf_weight(x, z, eps):
    """(1/sqrt(pi)) int_{-inf}^{x / (2 sqrt(eps z))} exp(-t^2) dt."""
    return 0.5 * erfc(-x / (2.0 * np.sqrt(eps * z)))


def heat_solution(x, z, b: float, eps: float, sign: int):
    """S(x, z) = 1 + (exp(sign b / (4 eps)) - 1) * erf-weight; solves S_z = eps S_xx."""
    return 1.0 + np.expm1(sign * b / (4.0 * eps)) * _erf_weight(x, z, eps)


def dislocation_field(spec: DislocationSpec) -> ScalarField:
    """Layer displacement ``u = sign 2 eps ln S`` on the physical grid."""
    grid = spec.grid()
    X, _, Z = grid.coords()
    eps, sg = spec.epsilon, spec.sign
    w = _erf_weight(X, sg * Z, eps)
    u = sg * 2.0 * eps * np.log1p(np.expm1(sg * spec.b / (4.0 * eps)) * w)
    return ScalarField(grid, u, "dislocation")


def heat_residual(spec: DislocationSpec) -> ScalarField:
    """Stencil residual S_z - eps S_xx of the sampled heat solution."""
    g = spec.heat_grid()
    X, _, Z = g.coords()
    S = heat_solution(X, Z, spec.b, spec.epsilon, spec.sign)
    return ScalarField(g, d1(S, g, 2) - spec.epsilon * d2(S, g, 0), "heat_residual")


def bps_verify(u: ScalarField, eps: float, sign: int, window: Region = None) -> Tuple[float, float]:
    """(max, L2) norms of R - sign eps lap_perp u over ``window``."""
    res = bps_residual(u, eps, sign).values
    w = quadrature_weights(u.grid, window)
    mask = w > 0
    return float(np.max(np.abs(res[mask]))), float(np.sqrt(integrate(res**2, w, u.grid)))
