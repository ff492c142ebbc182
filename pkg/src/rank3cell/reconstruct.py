"""Reconstruction of a rank-3 laminate from its four trigonometric moments.

The moments are rotated by an angle ``gamma`` that zeroes the fourth one. The
rotated point is then written as a convex combination of a rank-1 corner of
the three-dimensional moment set and a point on its boundary, and the boundary
point is resolved into two layers.

Two layers with doubled angles z_1, z_2 on the unit circle satisfy the moment
recursion ``c2 - e1 c1 + e2 = 0`` and ``c1 - e1 + e2 conj(c1) = 0`` with
``e1 = z1 + z2`` and ``e2 = z1 z2``. Both relations are linear in (e1, e2), so
the layers follow in closed form from a quadratic.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial

from .laminate import MomentVector, toeplitz_determinant


class ReconstructionError(ValueError):
    pass


# rank-1 corners of the rotated moment set and their layer angles
CORNERS = (
    (np.array([1.0, 0.0, 1.0]), 0.0),
    (np.array([-1.0, 0.0, 1.0]), np.pi / 2),
    (np.array([0.0, 1.0, -1.0]), np.pi / 4),
    (np.array([0.0, -1.0, -1.0]), -np.pi / 4),
)

RANK1_TOL = 1e-7


def normalize_angle(theta):
    """Map orientations onto (-pi/2, pi/2]."""
    t = np.mod(np.asarray(theta, dtype=float) + np.pi / 2, np.pi) - np.pi / 2
    t = np.where(t <= -np.pi / 2 + 1e-15, t + np.pi, t)
    return t if t.ndim else float(t)


@dataclass(frozen=True)
class RotatedMoments:
    mt1: float
    mt2: float
    mt3: float
    gamma: float
    mt4: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.mt1, self.mt2, self.mt3])


@dataclass(frozen=True)
class Rank2BoundarySolution:
    """Split of the rotated moments into a corner and a rank-2 boundary point."""

    b: np.ndarray
    alpha: float
    corner: np.ndarray
    corner_angle: float
    t_angle: float
    beta_b: float
    p1b: float
    p2b: float
    theta1b: float
    theta2b: float
    delta: float


@dataclass(frozen=True)
class Rank3Laminate:
    """Layer contributions ``p``, normal angles ``theta``, stiff widths ``mu``, fraction ``f``."""

    p: np.ndarray
    theta: np.ndarray
    mu: np.ndarray
    f: float
    rank: int
    gamma: float = 0.0

    @classmethod
    def from_layers(cls, p, theta, f: float, gamma: float = 0.0) -> "Rank3Laminate":
        p = np.zeros(3) + np.asarray(p, dtype=float)
        theta = normalize_angle(np.zeros(3) + np.asarray(theta, dtype=float))
        return cls(p, theta, layer_widths(p, f), float(f), int(np.sum(p > 1e-9)), gamma)

    @classmethod
    def from_widths(cls, theta, mu) -> "Rank3Laminate":
        """Inverse of the width relations: fraction and contributions from stiff widths."""
        mu = np.asarray(mu, dtype=float)
        f = stiff_fraction(mu)
        remaining = np.concatenate([[1.0], np.cumprod(1 - mu)[:-1]])
        p = mu * remaining / f
        return cls.from_layers(p, theta, f)

    @property
    def moments(self) -> MomentVector:
        return MomentVector.from_layers(self.p, self.theta)

    def to_dict(self) -> dict:
        return {"p": self.p.tolist(), "theta": self.theta.tolist(), "mu": self.mu.tolist(),
                "f": self.f, "rank": self.rank, "gamma": self.gamma}


def layer_widths(p, f: float) -> np.ndarray:
    """Relative stiff widths of the three lamination steps."""
    p = np.asarray(p, dtype=float)
    mu = np.zeros(3)
    covered = 0.0  # mu1 + mu2 - mu1 mu2 after two steps, i.e. 1 - prod(1 - mu)
    for n in range(3):
        free = 1.0 - covered
        mu[n] = p[n] * f / free if free > 1e-15 else 0.0
        covered = covered + (1.0 - covered) * mu[n]
    return mu


def stiff_fraction(mu) -> float:
    mu1, mu2, mu3 = mu
    return float(mu1 + (1 - mu1) * mu2 + (1 - mu1) * (1 - mu2) * mu3)


def rotation_angle(m) -> float:
    """Angle gamma that zeroes the fourth rotated moment (0 when m3 = m4 = 0)."""
    m = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    if m[2] == 0.0 and m[3] == 0.0:
        return 0.0
    # + 0.0 turns -0.0 into 0.0 so m = (., ., -1, 0) maps to pi/4, not -pi/4
    return 0.25 * float(np.arctan2(-m[3] + 0.0, m[2]))


def rotate_moments(m, gamma: float, check: bool = True) -> RotatedMoments:
    m1, m2, m3, m4 = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    c2, s2 = np.cos(2 * gamma), np.sin(2 * gamma)
    c4, s4 = np.cos(4 * gamma), np.sin(4 * gamma)
    mt4 = m3 * s4 + m4 * c4
    if check and abs(mt4) > 1e-10:
        raise ReconstructionError(f"rotation leaves fourth moment {mt4:.3g}; gamma is inconsistent")
    return RotatedMoments(m1 * c2 - m2 * s2, m1 * s2 + m2 * c2, m3 * c4 - m4 * s4, gamma, mt4)


def _rotated_boundary_residual(b) -> float:
    """2 b1^2 (1 - b3) + 2 b2^2 (1 + b3) - (1 - b3^2); zero on the boundary."""
    b1, b2, b3 = b
    return 2 * b1 ** 2 * (1 - b3) + 2 * b2 ** 2 * (1 + b3) - (1 - b3 ** 2)


def detect_rank1(rm: RotatedMoments) -> Rank3Laminate | None:
    """Single-layer laminate if the rotated moments sit on a corner, else None."""
    mt = rm.as_array()
    if abs(mt[0] ** 2 + mt[1] ** 2 - 1.0) > RANK1_TOL or abs(_rotated_boundary_residual(mt)) > RANK1_TOL:
        return None
    corner, angle = min(CORNERS, key=lambda c: np.linalg.norm(c[0] - mt))
    return Rank3Laminate.from_layers([1.0, 0.0, 0.0], [angle - rm.gamma] * 3, 1.0, rm.gamma)


def boundary_to_rank2(b):
    """Two layers (p1, p2, theta1, theta2) whose moments reproduce boundary point ``b``.

    Also returns the boundary parameters (beta_b, t) with
    b = (cos beta_b cos t, sin beta_b sin t, cos 2 beta_b).
    """
    b = np.asarray(b, dtype=float)
    if abs(_rotated_boundary_residual(b)) > 1e-8:
        raise ReconstructionError(f"{b} is not on the boundary of the rotated moment set")
    c1 = complex(b[0], b[1])
    r2 = abs(c1) ** 2
    if r2 > 1.0 - 1e-9:
        raise ReconstructionError("boundary point is a rank-1 corner; use the single-layer path")
    e2 = (c1 * c1 - b[2]) / (1.0 - r2)
    e1 = c1 + e2 * np.conj(c1)
    z = np.roots([1.0, -e1, e2])
    z = z / np.abs(z)
    z1, z2 = z
    if abs(z1 - z2) < 1e-12:
        p1 = 1.0
    else:
        # least squares on c1 = p1 z1 + (1 - p1) z2 with p1 real
        d = z1 - z2
        p1 = float(np.real((c1 - z2) * np.conj(d)) / abs(d) ** 2)
    p1 = min(max(p1, 0.0), 1.0)
    theta1, theta2 = 0.5 * np.angle(z1), 0.5 * np.angle(z2)

    beta_b = 0.5 * float(np.arccos(np.clip(b[2], -1.0, 1.0)))
    cb, sb = np.cos(beta_b), np.sin(beta_b)
    t = float(np.arctan2(b[1] / sb if sb > 1e-12 else 0.0, b[0] / cb if cb > 1e-12 else 0.0))
    return p1, 1.0 - p1, float(theta1), float(theta2), beta_b, t


def _ray_exit(a: np.ndarray, m: np.ndarray) -> float:
    """Largest-|s| real root of the boundary equation along b = a + s (m - a)."""
    d = m - a
    b1, b2, b3 = (Polynomial([a[k], d[k]]) for k in range(3))
    poly = 2 * b1 ** 2 * (1 - b3) + 2 * b2 ** 2 * (1 + b3) - (1 - b3 ** 2)
    roots = poly.roots()
    real = roots[np.abs(roots.imag) <= 1e-9 * np.maximum(1.0, np.abs(roots.real))].real
    if real.size == 0:
        return np.nan
    return float(real[np.argmax(np.abs(real))])


def split_corner_boundary(rm: RotatedMoments) -> Rank2BoundarySolution:
    """Write the rotated moments as alpha * corner + (1 - alpha) * boundary point.

    Corners are tried in a fixed order; the first giving alpha in [0, 1) and a
    boundary point that is not itself a corner is used.
    """
    mt = rm.as_array()
    if abs(_rotated_boundary_residual(mt)) <= 1e-12 and mt[0] ** 2 + mt[1] ** 2 < 1 - 1e-9:
        corner, angle = CORNERS[0]
        return _boundary_solution(mt, 0.0, corner, angle)
    for corner, angle in CORNERS:
        if np.linalg.norm(mt - corner) < 1e-12:
            continue
        s = _ray_exit(corner, mt)
        if not np.isfinite(s) or abs(s) < 1e-12:
            continue
        alpha = 1.0 - 1.0 / s
        if -1e-8 <= alpha < 0.0:
            alpha = 0.0
        if not 0.0 <= alpha <= 1.0 - 1e-12:
            continue
        b = corner + s * (mt - corner) if alpha > 0 else mt
        if b[0] ** 2 + b[1] ** 2 > 1.0 - 1e-9:
            continue
        return _boundary_solution(b, alpha, corner, angle)
    raise ReconstructionError(f"no corner splits the rotated moments {mt}")


def _boundary_solution(b, alpha, corner, angle) -> Rank2BoundarySolution:
    p1, p2, th1, th2, beta_b, t = boundary_to_rank2(b)
    return Rank2BoundarySolution(np.asarray(b, dtype=float), float(alpha), corner, angle, t, beta_b,
                                 p1, p2, th1, th2, float(normalize_angle(th2 - th1)))


def reconstruct(m, f: float) -> Rank3Laminate:
    """A rank-3 (or lower) laminate with moments ``m`` and stiff fraction ``f``."""
    if not 0.0 < f <= 1.0:
        raise ValueError(f"f must lie in (0, 1], got {f}")
    m = m if isinstance(m, MomentVector) else MomentVector.from_array(m)
    gamma = rotation_angle(m)
    rm = rotate_moments(m, gamma)
    single = detect_rank1(rm)
    if single is not None:
        return Rank3Laminate.from_layers(single.p, single.theta, f, gamma)
    split = split_corner_boundary(rm)
    a = split.alpha
    p = np.array([a, (1 - a) * split.p1b, (1 - a) * split.p2b])
    theta = np.array([split.corner_angle, split.theta1b, split.theta2b]) - gamma
    if a == 0.0:
        # keep the populated layers first
        p, theta = p[[1, 2, 0]], theta[[1, 2, 0]]
    return Rank3Laminate.from_layers(p, theta, f, gamma)


def moment_error(laminate: Rank3Laminate, m) -> float:
    m = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    return float(np.max(np.abs(laminate.moments.as_array() - m)))


def is_interior(m, tol: float = 1e-9) -> bool:
    m = m.as_array() if isinstance(m, MomentVector) else np.asarray(m, dtype=float)
    return bool(toeplitz_determinant(m) > tol and m[0] ** 2 + m[1] ** 2 < 1 - tol)
