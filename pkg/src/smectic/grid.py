"""Uniform node-centred 3D grids, finite-difference calculus and quadrature.

All stencils are second order.  Interior first derivatives are central
differences; on the faces a three-point one-sided stencil is used.  Second
derivatives use the compact three-point stencil in the interior and a
four-point one-sided stencil on the faces (three-point when only three nodes
exist).  Every operator is assembled as a sparse 1D matrix applied along one
axis, so exact adjoints are available through the transpose.

Arrays are indexed ``[i, j, k]`` with ``i`` the x index.  The flat storage
order used for dumps is x-fastest, i.e. ``values.ravel(order="F")``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Callable, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.sparse as sp

Box = Tuple[Tuple[float, float], Tuple[float, float], Tuple[float, float]]

UNIT_CUBE: Box = ((0.0, 1.0), (0.0, 1.0), (0.0, 1.0))
CENTERED_CUBE: Box = ((-0.5, 0.5), (-0.5, 0.5), (-0.5, 0.5))


@dataclass(frozen=True)
class Grid3:
    """Uniform rectilinear grid on an axis-aligned box."""

    nx: int
    ny: int
    nz: int
    box: Box = CENTERED_CUBE

    def __post_init__(self):
        for name, n in zip("xyz", self.shape):
            if int(n) != n or n < 3:
                raise ValueError(f"n{name}={n}: at least 3 nodes per axis are required")
        box = tuple((float(a), float(b)) for a, b in self.box)
        if len(box) != 3:
            raise ValueError("box must have three (lo, hi) pairs")
        for name, (a, b) in zip("xyz", box):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ValueError(f"{name}-range {a, b} is not finite")
            if not b > a:
                raise ValueError(f"{name}-range ({a}, {b}) is empty or inverted")
        object.__setattr__(self, "box", box)

    @property
    def shape(self) -> Tuple[int, int, int]:
        return (self.nx, self.ny, self.nz)

    @property
    def size(self) -> int:
        return self.nx * self.ny * self.nz

    @property
    def spacing(self) -> Tuple[float, float, float]:
        return tuple((b - a) / (n - 1) for (a, b), n in zip(self.box, self.shape))

    @property
    def hx(self) -> float:
        return self.spacing[0]

    @property
    def hy(self) -> float:
        return self.spacing[1]

    @property
    def hz(self) -> float:
        return self.spacing[2]

    @property
    def volume(self) -> float:
        return float(np.prod([b - a for a, b in self.box]))

    def axis(self, d: int) -> np.ndarray:
        (a, b), n = self.box[d], self.shape[d]
        return a + (b - a) * np.arange(n) / (n - 1)

    def coords(self) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        return np.meshgrid(self.axis(0), self.axis(1), self.axis(2), indexing="ij")

    def node(self, i: int, j: int, k: int) -> Tuple[float, float, float]:
        return tuple(float(self.axis(d)[idx]) for d, idx in enumerate((i, j, k)))

    def index_of(self, x: float, y: float, z: float) -> Tuple[int, int, int]:
        """Index of the node at the given coordinates (must be a node)."""
        idx = []
        for d, c in enumerate((x, y, z)):
            (a, b), n = self.box[d], self.shape[d]
            t = (c - a) / (b - a) * (n - 1)
            r = int(round(t))
            if abs(t - r) > 1e-9 or not 0 <= r < n:
                raise ValueError(f"coordinate {c} is not a node on axis {'xyz'[d]}")
            idx.append(r)
        return tuple(idx)

    def to_dict(self) -> dict:
        return {"nx": self.nx, "ny": self.ny, "nz": self.nz, "box": [list(p) for p in self.box]}


def make_grid(nx: int, ny: int, nz: int, box: Box = CENTERED_CUBE) -> Grid3:
    return Grid3(int(nx), int(ny), int(nz), box)


def _check_values(grid: Grid3, values: np.ndarray, trailing: Tuple[int, ...] = ()) -> np.ndarray:
    values = np.asarray(values, dtype=float)
    want = trailing + grid.shape
    if values.shape != want:
        raise ValueError(f"values have shape {values.shape}, expected {want}")
    if not np.all(np.isfinite(values)):
        bad = np.argwhere(~np.isfinite(values))[0]
        raise ValueError(f"non-finite value at index {tuple(int(b) for b in bad)}")
    return values


@dataclass
class ScalarField:
    grid: Grid3
    values: np.ndarray
    name: str = "u"

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values)

    def with_values(self, values: np.ndarray, name: Optional[str] = None) -> "ScalarField":
        return ScalarField(self.grid, values, self.name if name is None else name)

    def flat(self) -> np.ndarray:
        """Values in storage order (x fastest)."""
        return self.values.ravel(order="F")


@dataclass
class VectorField3:
    """Three components per node, stored component-first ``(3, nx, ny, nz)``."""

    grid: Grid3
    values: np.ndarray
    name: str = "F"

    def __post_init__(self):
        self.values = _check_values(self.grid, self.values, (3,))

    def component(self, d: int) -> ScalarField:
        return ScalarField(self.grid, self.values[d], f"{self.name}_{'xyz'[d]}")


@dataclass
class HessianPerp:
    """Horizontal Hessian (u_xx, u_xy; u_xy, u_yy) with one stored off-diagonal."""

    grid: Grid3
    xx: np.ndarray
    xy: np.ndarray
    yy: np.ndarray

    def matrix(self, i: int, j: int, k: int) -> np.ndarray:
        return np.array([[self.xx[i, j, k], self.xy[i, j, k]], [self.xy[i, j, k], self.yy[i, j, k]]])

    def eigen_gap(self) -> np.ndarray:
        """|lambda_1 - lambda_2| from the closed form for symmetric 2x2 matrices."""
        return np.sqrt((self.xx - self.yy) ** 2 + 4.0 * self.xy**2)

    def det(self) -> np.ndarray:
        return self.xx * self.yy - self.xy**2

    def trace(self) -> np.ndarray:
        return self.xx + self.yy


def sample_field(grid: Grid3, f: Callable, name: str = "u") -> ScalarField:
    """Evaluate ``f(x, y, z)`` (vectorised) at every node."""
    X, Y, Z = grid.coords()
    vals = np.broadcast_to(np.asarray(f(X, Y, Z), dtype=float), grid.shape).copy()
    bad = ~np.isfinite(vals)
    if bad.any():
        i, j, k = (int(v) for v in np.argwhere(bad)[0])
        raise ValueError(f"f is not finite at node ({i}, {j}, {k}) = {grid.node(i, j, k)}")
    return ScalarField(grid, vals, name)


# --------------------------------------------------------------------------
# 1D operators


@lru_cache(maxsize=64)
def first_difference_matrix(n: int, h: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    D[0, :3] = [-1.5, 2.0, -0.5]
    D[n - 1, n - 3:] = [0.5, -2.0, 1.5]
    for i in range(1, n - 1):
        D[i, i - 1] = -0.5
        D[i, i + 1] = 0.5
    return (D / h).tocsr()


@lru_cache(maxsize=64)
def second_difference_matrix(n: int, h: float) -> sp.csr_matrix:
    D = sp.lil_matrix((n, n))
    for i in range(1, n - 1):
        D[i, i - 1 : i + 2] = [1.0, -2.0, 1.0]
    if n >= 4:
        D[0, :4] = [2.0, -5.0, 4.0, -1.0]
        D[n - 1, n - 4:] = [-1.0, 4.0, -5.0, 2.0]
    else:
        D[0, :3] = [1.0, -2.0, 1.0]
        D[n - 1, :3] = [1.0, -2.0, 1.0]
    return (D / h**2).tocsr()


def apply_along(M: sp.spmatrix, a: np.ndarray, axis: int) -> np.ndarray:
    """Apply the square matrix ``M`` along ``axis`` of ``a``."""
    moved = np.moveaxis(a, axis, 0)
    shape = moved.shape
    out = M @ moved.reshape(shape[0], -1)
    return np.moveaxis(np.asarray(out).reshape(shape), 0, axis)


@lru_cache(maxsize=64)
def _transposed(order: int, n: int, h: float) -> sp.csr_matrix:
    M = first_difference_matrix(n, h) if order == 1 else second_difference_matrix(n, h)
    return M.T.tocsr()


def d1(a: np.ndarray, grid: Grid3, axis: int, transpose: bool = False) -> np.ndarray:
    """First derivative along ``axis`` (or its adjoint when ``transpose``)."""
    n, h = grid.shape[axis], grid.spacing[axis]
    M = _transposed(1, n, h) if transpose else first_difference_matrix(n, h)
    return apply_along(M, a, axis - 3 + a.ndim)


def d2(a: np.ndarray, grid: Grid3, axis: int, transpose: bool = False) -> np.ndarray:
    n, h = grid.shape[axis], grid.spacing[axis]
    M = _transposed(2, n, h) if transpose else second_difference_matrix(n, h)
    return apply_along(M, a, axis - 3 + a.ndim)


# --------------------------------------------------------------------------
# Field operators


def gradient(u: ScalarField) -> VectorField3:
    g = u.grid
    vals = np.stack([d1(u.values, g, d) for d in range(3)])
    return VectorField3(g, vals, f"grad_{u.name}")


def perp_laplacian(u: ScalarField) -> ScalarField:
    g = u.grid
    return ScalarField(g, d2(u.values, g, 0) + d2(u.values, g, 1), f"lap_perp_{u.name}")


def perp_hessian(u: ScalarField) -> HessianPerp:
    g = u.grid
    a = u.values
    return HessianPerp(g, d2(a, g, 0), d1(d1(a, g, 1), g, 0), d2(a, g, 1))


def divergence(F: VectorField3) -> ScalarField:
    g = F.grid
    return ScalarField(g, sum(d1(F.values[d], g, d) for d in range(3)), f"div_{F.name}")


# --------------------------------------------------------------------------
# Quadrature


def trapezoid_weights_1d(n: int, h: float) -> np.ndarray:
    w = np.full(n, h)
    w[0] = w[-1] = 0.5 * h
    return w


@dataclass(frozen=True)
class Window:
    """Sub-box given as fractions of the domain along each axis."""

    x: Tuple[float, float] = (0.0, 1.0)
    y: Tuple[float, float] = (0.0, 1.0)
    z: Tuple[float, float] = (0.0, 1.0)

    def __post_init__(self):
        for name, (a, b) in zip("xyz", (self.x, self.y, self.z)):
            if not (0.0 <= a <= b <= 1.0):
                raise ValueError(f"window {name}-fractions ({a}, {b}) must satisfy 0 <= lo <= hi <= 1")

    @classmethod
    def interior(cls, margin: float) -> "Window":
        return cls((margin, 1 - margin), (margin, 1 - margin), (margin, 1 - margin))

    def to_dict(self) -> dict:
        return {"x": list(self.x), "y": list(self.y), "z": list(self.z)}


Region = Union[None, Window, np.ndarray]


def _window_weights_1d(grid: Grid3, d: int, lo: float, hi: float) -> np.ndarray:
    (a, b), n = grid.box[d], grid.shape[d]
    t = (grid.axis(d) - a) / (b - a)
    tol = 1e-12
    idx = np.flatnonzero((t >= lo - tol) & (t <= hi + tol))
    if idx.size < 2:
        raise ValueError(f"window along {'xyz'[d]} = ({lo}, {hi}) contains fewer than two nodes")
    w = np.zeros(n)
    w[idx] = grid.spacing[d]
    w[idx[0]] = w[idx[-1]] = 0.5 * grid.spacing[d]
    return w


def quadrature_weights(grid: Grid3, region: Region = None) -> np.ndarray:
    """Tensor-product trapezoid weights; a ``Window`` restricts to a sub-box.

    An ndarray ``region`` is taken as precomputed weights and returned as is.
    """
    if isinstance(region, np.ndarray):
        if region.shape != grid.shape:
            raise ValueError("weight array does not match grid")
        return region
    if region is None:
        region = Window()
    ws = [_window_weights_1d(grid, d, *lim) for d, lim in enumerate((region.x, region.y, region.z))]
    return ws[0][:, None, None] * ws[1][None, :, None] * ws[2][None, None, :]


def integrate(f: Union[ScalarField, np.ndarray], region: Region = None, grid: Optional[Grid3] = None) -> float:
    if isinstance(f, ScalarField):
        grid, vals = f.grid, f.values
    else:
        vals = np.asarray(f, dtype=float)
    return float(np.sum(quadrature_weights(grid, region) * vals))


def boundary_flux(F: VectorField3) -> float:
    """Outward flux of ``F`` through the six box faces (trapezoid on faces)."""
    g = F.grid
    w = [trapezoid_weights_1d(n, h) for n, h in zip(g.shape, g.spacing)]
    total = 0.0
    for d in range(3):
        others = [e for e in range(3) if e != d]
        wf = np.outer(w[others[0]], w[others[1]])
        comp = F.values[d]
        hi = np.take(comp, -1, axis=d)
        lo = np.take(comp, 0, axis=d)
        total += float(np.sum(wf * hi)) - float(np.sum(wf * lo))
    return total


# --------------------------------------------------------------------------
# Dumps


def save_field(field: Union[ScalarField, VectorField3], path: Union[str, Path], name: Optional[str] = None) -> Tuple[Path, Path]:
    """Write ``<path>.bin`` (little-endian float64, x fastest) and a JSON sidecar."""
    path = Path(path)
    if isinstance(field, ScalarField):
        flat = field.flat()
        ncomp = 1
    else:
        # node-major, components interleaved
        flat = np.stack([field.values[d].ravel(order="F") for d in range(3)], axis=1).ravel()
        ncomp = 3
    bin_path = path.with_suffix(".bin")
    json_path = path.with_suffix(".json")
    flat.astype("<f8").tofile(bin_path)
    meta = field.grid.to_dict()
    meta["name"] = name or field.name
    if ncomp != 1:
        meta["components"] = ncomp
    json_path.write_text(json.dumps(meta, indent=2) + "\n")
    return bin_path, json_path


def load_field(path: Union[str, Path]) -> Union[ScalarField, VectorField3]:
    path = Path(path)
    meta = json.loads(path.with_suffix(".json").read_text())
    grid = Grid3(meta["nx"], meta["ny"], meta["nz"], tuple(tuple(p) for p in meta["box"]))
    flat = np.fromfile(path.with_suffix(".bin"), dtype="<f8")
    ncomp = meta.get("components", 1)
    if ncomp == 1:
        return ScalarField(grid, flat.reshape(grid.shape, order="F"), meta["name"])
    comps = flat.reshape(-1, ncomp)
    vals = np.stack([comps[:, d].reshape(grid.shape, order="F") for d in range(ncomp)])
    return VectorField3(grid, vals, meta["name"])


def field_to_csv(field: ScalarField, path: Union[str, Path]) -> Path:
    path = Path(path)
    X, Y, Z = field.grid.coords()
    cols = [a.ravel(order="F") for a in (X, Y, Z, field.values)]
    with open(path, "w") as fh:
        fh.write("x,y,z,value\n")
        for row in zip(*cols):
            fh.write(",".join(repr(float(v)) for v in row) + "\n")
    return path
