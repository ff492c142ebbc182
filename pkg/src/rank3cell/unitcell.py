"""Single-scale periodic unit cells approximating a rank-3 laminate.

Every layer family n is the periodic stripe pattern

    rho_n(x) = H(cos(2 pi (n_n . x) / lambda_n) - cos(pi w_n))

and the cell density is min(sum_n rho_n, 1). The cell is a unit-area
parallelogram spanned by lattice vectors a1, a2 chosen so that every family is
periodic on it: ``n_n . a_i / lambda_n`` is an integer for all n, i. Points are
addressed by parametric coordinates (u, v) in [0, 1)^2 with x = u a1 + v a2, so
each family's phase is the integer combination k_n1 u + k_n2 v.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache
from math import gcd

import numpy as np
from scipy.stats import qmc

from .reconstruct import Rank3Laminate

# layers contributing less than this are too thin to resolve and are dropped
MIN_LAYER_CONTRIBUTION = 1e-3
PARALLEL_TOL = 1e-4


class DegenerateGeometryError(ValueError):
    pass


@dataclass(frozen=True)
class ParallelogramCell:
    """Unit-area periodic cell with its layer families.

    ``normals`` (k, 2), ``lambda_tilde`` (k,) and ``weights`` (k,) describe the
    k <= 3 layer families kept from the laminate; ``area_raw`` is the area of the
    cell before normalization to unit area.
    """

    a1: np.ndarray
    a2: np.ndarray
    normals: np.ndarray = field(default_factory=lambda: np.zeros((0, 2)))
    lambda_tilde: np.ndarray = field(default_factory=lambda: np.zeros(0))
    weights: np.ndarray = field(default_factory=lambda: np.zeros(0))
    area_raw: float = 1.0

    @classmethod
    def unit_square(cls) -> "ParallelogramCell":
        return cls(np.array([1.0, 0.0]), np.array([0.0, 1.0]))

    @property
    def area(self) -> float:
        return float(self.a1[0] * self.a2[1] - self.a1[1] * self.a2[0])

    @property
    def basis(self) -> np.ndarray:
        """Columns a1, a2."""
        return np.column_stack([self.a1, self.a2])

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def crossing_numbers(self) -> np.ndarray:
        """(k, 2) array of n_n . a_i / lambda_n; integers for a periodic cell."""
        if self.n_layers == 0:
            return np.zeros((0, 2))
        return (self.normals @ self.basis) / self.lambda_tilde[:, None]

    def integer_crossings(self) -> np.ndarray:
        return np.rint(self.crossing_numbers()).astype(int)

    def lines_per_cell(self) -> list[int]:
        return [gcd(int(abs(k1)), int(abs(k2))) for k1, k2 in self.integer_crossings()]

    def to_dict(self) -> dict:
        return {"a1": self.a1.tolist(), "a2": self.a2.tolist(), "normals": self.normals.tolist(),
                "lambda_tilde": self.lambda_tilde.tolist(), "weights": self.weights.tolist(),
                "area_raw": self.area_raw}


@dataclass
class DensityField:
    """Element densities on an nx-by-ny grid over a periodic cell.

    ``rho`` has shape (ny, nx); element (i, j) covers parametric coordinates
    [i/nx, (i+1)/nx] x [j/ny, (j+1)/ny] and sits at ``rho[j, i]``.
    """

    rho: np.ndarray
    cell: ParallelogramCell = field(default_factory=ParallelogramCell.unit_square)

    def __post_init__(self):
        self.rho = np.asarray(self.rho, dtype=float)
        if self.rho.ndim != 2:
            raise ValueError("rho must be a 2-D (ny, nx) array")
        if np.any(self.rho < -1e-12) or np.any(self.rho > 1 + 1e-12):
            raise ValueError("densities must lie in [0, 1]")

    @property
    def nx(self) -> int:
        return self.rho.shape[1]

    @property
    def ny(self) -> int:
        return self.rho.shape[0]

    @property
    def volume(self) -> float:
        return measure_volume(self)


def _tangent(theta):
    return np.array([-np.sin(theta), np.cos(theta)])


def _normal(theta):
    return np.array([np.cos(theta), np.sin(theta)])


def layer_spacings(theta) -> tuple[float, float, float, float]:
    """Spacings (lambda1, lambda2, lambda3 = 1) and parallelogram area A."""
    t1, t2, t3 = theta
    d1, d2 = t1 - t3, t2 - t3
    for gap in (d1, d2, t1 - t2):
        if abs(np.sin(gap)) < np.sin(PARALLEL_TOL):
            raise DegenerateGeometryError("layers are nearly parallel; use the rank-2 cell")
    lam3 = 1.0
    L = abs(lam3 / np.tan(d2) - lam3 / np.tan(d1))
    lam1 = abs(np.sin(d1)) * L
    lam2 = abs(np.sin(d2)) * L
    area = abs(lam3 ** 2 / np.tan(d2) - lam3 ** 2 / np.tan(d1))
    return float(lam1), float(lam2), float(lam3), float(area)


def reduce_lattice(a1, a2):
    """Lagrange-Gauss reduction: the shortest, most orthogonal basis of the same lattice."""
    a1, a2 = np.asarray(a1, dtype=float), np.asarray(a2, dtype=float)
    if a1 @ a1 > a2 @ a2:
        a1, a2 = a2, a1
    for _ in range(100):
        k = np.rint((a1 @ a2) / (a1 @ a1))
        if k == 0:
            break
        a2 = a2 - k * a1
        if a2 @ a2 < a1 @ a1:
            a1, a2 = a2, a1
        else:
            break
    return a1, a2


def _right_handed(a1, a2):
    if a1[0] * a2[1] - a1[1] * a2[0] < 0:
        a2 = -a2
    return a1, a2


def _active_layers(laminate: Rank3Laminate):
    """Layers worth resolving, with nearly parallel families merged."""
    keep = []
    for p, th in zip(laminate.p, laminate.theta):
        if p < MIN_LAYER_CONTRIBUTION:
            continue
        for entry in keep:
            if abs(np.sin(th - entry[1])) < np.sin(PARALLEL_TOL):
                entry[0] += p
                break
        else:
            keep.append([p, th])
    if not keep:
        raise DegenerateGeometryError("laminate has no resolvable layers")
    keep.sort(key=lambda e: -e[0])
    return np.array([e[0] for e in keep]), np.array([e[1] for e in keep])


def build_cell(laminate: Rank3Laminate, reduce: bool = True) -> ParallelogramCell:
    """Unit-area periodic cell for the laminate's layer families.

    Three families: layer 3 is the base with spacing 1, a1 runs along t3 with
    length L and a2 along t1 with length lambda3 / sin(theta1 - theta3), all
    scaled by 1/sqrt(A). Two families get equal spacings on a rhombus, one
    family a unit square rotated into the layer frame. With ``reduce`` the
    lattice basis is replaced by its reduced equivalent, which spans the same
    periodic pattern with less skewed elements.
    """
    p, theta = _active_layers(laminate)
    k = len(p)
    if k == 1:
        a1, a2 = _tangent(theta[0]), _normal(theta[0])
        lam = np.array([1.0])
        area_raw = 1.0
    elif k == 2:
        s = abs(np.sin(theta[0] - theta[1]))
        lam_val = np.sqrt(s)
        lam = np.array([lam_val, lam_val])
        a1 = _tangent(theta[1]) * lam_val / s
        a2 = _tangent(theta[0]) * lam_val / s
        area_raw = 1.0
    else:
        lam1, lam2, lam3, area = layer_spacings(theta)
        L = abs(lam3 / np.tan(theta[1] - theta[2]) - lam3 / np.tan(theta[0] - theta[2]))
        root = np.sqrt(area)
        a1 = (L / root) * _tangent(theta[2])
        a2 = (lam3 / (root * np.sin(theta[0] - theta[2]))) * _tangent(theta[0])
        lam = np.array([lam1, lam2, lam3]) / root
        area_raw = area
    if reduce:
        a1, a2 = reduce_lattice(a1, a2)
    a1, a2 = _right_handed(a1, a2)
    normals = np.array([_normal(t) for t in theta])
    return ParallelogramCell(a1, a2, normals, lam, p, float(area_raw))


def _cos_phase(cell: ParallelogramCell, u, v):
    """cos(2 pi (n . x) / lambda) per family at parametric points; (k, npts)."""
    k = cell.integer_crossings()
    phase = k[:, 0, None] * u.ravel()[None, :] + k[:, 1, None] * v.ravel()[None, :]
    return np.cos(2 * np.pi * (phase - np.rint(phase)))


def _solid(cos_phase, widths):
    """Union of the layer stripes; cos_phase (k, npts) holds cos(2 pi phase), widths (k,)."""
    inside = (cos_phase > np.cos(np.pi * widths)[:, None]) | (widths[:, None] >= 1.0)
    return np.any(inside, axis=0)


def sample_density(cell: ParallelogramCell, widths, u, v) -> np.ndarray:
    """Sharp density min(sum rho_n, 1) at parametric points (u, v)."""
    widths = np.asarray(widths, dtype=float)
    return _solid(_cos_phase(cell, np.asarray(u), np.asarray(v)), widths).reshape(np.shape(u)).astype(float)


@lru_cache(maxsize=4)
def volume_samples(quad: int) -> np.ndarray:
    """(n, 2) low-discrepancy points in the unit square, n = quad**2 rounded up to a power of two."""
    m = int(np.ceil(np.log2(quad * quad)))
    pts = qmc.Sobol(2, scramble=True, seed=20240611).random_base2(m)
    pts.setflags(write=False)
    return pts


def width_bisection(laminate: Rank3Laminate, cell: ParallelogramCell, quad: int = 1024,
                    tol: float = 1e-4, max_iter: int = 60):
    """Scale psi with widths w = psi p so the cell's stiff fraction equals ``laminate.f``.

    The volume is measured on quad**2 scrambled Sobol points of the sharp
    field. A regular grid would not do: every family's phase is an integer
    combination of the grid coordinates, so the measured volume would move in
    steps far coarser than the tolerance. Returns (psi, widths, achieved volume).
    """
    f = laminate.f
    p = cell.weights
    u, v = volume_samples(quad).T
    cos_phase = _cos_phase(cell, u, v)

    def volume(psi):
        return float(np.mean(_solid(cos_phase, np.minimum(psi * p, 1.0))))

    lo, hi = f, 1.0 / p.max()
    if volume(hi) < f - tol:  # only when the widest layer was dropped
        return hi, np.minimum(hi * p, 1.0), volume(hi)
    if volume(lo) >= f - tol:
        return lo, lo * p, volume(lo)
    psi, vol = hi, volume(hi)
    for _ in range(max_iter):
        psi = 0.5 * (lo + hi)
        vol = volume(psi)
        if abs(vol - f) <= tol:
            break
        if vol < f:
            lo = psi
        else:
            hi = psi
    return psi, np.minimum(psi * p, 1.0), vol


def _r2_offsets(n: int) -> np.ndarray:
    """First n points of the additive recurrence with the plastic-number increments."""
    g = 1.324717957244746
    alpha = np.array([1 / g, 1 / g ** 2])
    return np.mod(0.5 + np.arange(n)[:, None] * alpha[None, :], 1.0)


def project_density(cell: ParallelogramCell, widths, nx: int, ny: int, supersample: int = 3) -> DensityField:
    """Element densities as the fraction of supersample points lying in a stripe.

    Each element holds an s-by-s stratified pattern whose points are shifted
    within their strata by an element-dependent quasi-random offset. On a
    regular pattern the stripe edges alias coherently across elements and the
    volume error only decays like 1/n with a fluctuating sign.
    """
    s = supersample
    i = np.arange(nx)
    j = np.arange(ny)
    shift = _r2_offsets(nx * ny).reshape(ny, nx, 2)
    a = np.arange(s)
    u = (i[None, :, None, None] + (a[None, None, None, :] + shift[:, :, None, None, 0]) / s) / nx
    v = (j[:, None, None, None] + (a[None, None, :, None] + shift[:, :, None, None, 1]) / s) / ny
    u, v = np.broadcast_arrays(u, v)
    solid = sample_density(cell, widths, u, v)
    rho = solid.reshape(ny, nx, s * s).mean(axis=2)
    return DensityField(rho, cell)


def map_laminate(laminate: Rank3Laminate, nx: int, ny: int, supersample: int = 3, quad: int = 1024):
    """Cell, widths and projected field for a laminate in one call."""
    cell = build_cell(laminate)
    psi, widths, _ = width_bisection(laminate, cell, quad)
    return cell, psi, widths, project_density(cell, widths, nx, ny, supersample)


def measure_volume(field: DensityField) -> float:
    return float(np.mean(field.rho))
