"""Plane-stress tensor algebra in the xi basis and compliance of finite-rank laminates.

Symmetric 2x2 tensors are stored by their coordinates in the orthonormal basis

    xi_1 = diag(1, -1)/sqrt(2),   xi_2 = [[0, 1], [1, 0]]/sqrt(2),   xi_3 = I/sqrt(2)

and fourth-order tensors as symmetric 3x3 matrices in the same basis. Layer
orientations ``theta`` are the angles of the layer *normals*; the tangent of a
layer is ``t = (-sin theta, cos theta)``.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

SQRT2 = np.sqrt(2.0)

# d M / d m_k for the moment matrix below
MOMENT_MATRIX_DERIVATIVES = 0.25 * np.array([
    [[0, 0, -2], [0, 0, 0], [-2, 0, 0]],
    [[0, 0, 0], [0, 0, -2], [0, -2, 0]],
    [[1, 0, 0], [0, -1, 0], [0, 0, 0]],
    [[0, 1, 0], [1, 0, 0], [0, 0, 0]],
], dtype=float)
_MOMENT_MATRIX_CONSTANT = 0.25 * np.diag([1.0, 1.0, 2.0])


class DegenerateLaminateError(ValueError):
    """Raised when the laminate formula hits a singular inner matrix."""


@dataclass(frozen=True)
class MaterialPair:
    """Two isotropic phases sharing a Poisson's ratio, plus the stiff-phase fraction."""

    e_plus: float = 1.0
    e_minus: float | None = None
    nu: float = 0.3
    f: float = 0.5

    def __post_init__(self):
        if self.e_minus is None:
            object.__setattr__(self, "e_minus", 1e-9 * self.e_plus)
        if not self.e_plus > 0:
            raise ValueError(f"e_plus must be positive, got {self.e_plus}")
        if not 0 < self.e_minus <= self.e_plus:
            raise ValueError(f"e_minus must lie in (0, e_plus], got {self.e_minus}")
        if not -1.0 < self.nu < 0.5:
            raise ValueError(f"nu must lie in (-1, 0.5), got {self.nu}")
        if not 0.0 < self.f <= 1.0:
            raise ValueError(f"f must lie in (0, 1], got {self.f}")

    def with_fraction(self, f: float) -> "MaterialPair":
        return MaterialPair(self.e_plus, self.e_minus, self.nu, f)

    @property
    def compliance_plus(self) -> np.ndarray:
        return isotropic_compliance(self.e_plus, self.nu)

    @property
    def compliance_minus(self) -> np.ndarray:
        return isotropic_compliance(self.e_minus, self.nu)


@dataclass(frozen=True)
class StressCase:
    s11: float
    s22: float
    s12: float
    weight: float = 1.0

    @property
    def tensor(self) -> np.ndarray:
        return np.array([[self.s11, self.s12], [self.s12, self.s22]])

    def xi(self) -> np.ndarray:
        return to_xi_coords(self)


class LoadSet:
    """Weighted stress cases with weights normalized to sum to one.

    Parameters
    ----------
    cases : iterable of StressCase
        Stress cases; their ``weight`` fields are the relative weights.
    normalize : bool
        Rescale the weights to sum to one. When False the weights must already
        sum to one within 1e-12.
    """

    def __init__(self, cases: Iterable[StressCase], normalize: bool = True):
        cases = list(cases)
        if not cases:
            raise ValueError("a LoadSet needs at least one stress case")
        w = np.array([c.weight for c in cases], dtype=float)
        if np.any(w < 0):
            raise ValueError("stress case weights must be non-negative")
        total = w.sum()
        if total <= 0:
            raise ValueError("stress case weights sum to zero")
        if normalize:
            w = w / total
        elif abs(total - 1.0) > 1e-12:
            raise ValueError(f"weights sum to {total}, expected 1")
        self.cases = tuple(StressCase(c.s11, c.s22, c.s12, float(wi)) for c, wi in zip(cases, w))

    @classmethod
    def from_tensors(cls, tensors: Sequence, weights: Sequence[float] | None = None) -> "LoadSet":
        tensors = [np.asarray(t, dtype=float) for t in tensors]
        if weights is None:
            weights = np.ones(len(tensors))
        return cls(StressCase(t[0, 0], t[1, 1], 0.5 * (t[0, 1] + t[1, 0]), w)
                   for t, w in zip(tensors, weights))

    def __len__(self):
        return len(self.cases)

    def __iter__(self):
        return iter(self.cases)

    def __repr__(self):
        return f"LoadSet({list(self.cases)!r})"

    @property
    def weights(self) -> np.ndarray:
        return np.array([c.weight for c in self.cases])

    @property
    def stresses(self) -> np.ndarray:
        """(n, 3) array of (s11, s22, s12)."""
        return np.array([[c.s11, c.s22, c.s12] for c in self.cases])

    @property
    def xi(self) -> np.ndarray:
        """(n, 3) array of xi coordinates."""
        return to_xi_coords(self.stresses)

    def rotated(self, phi: float) -> "LoadSet":
        """Every stress tensor rotated by ``phi`` (sigma -> R sigma R^T)."""
        c, s = np.cos(phi), np.sin(phi)
        rot = np.array([[c, -s], [s, c]])
        return LoadSet.from_tensors([rot @ case.tensor @ rot.T for case in self.cases], self.weights)

    def scaled(self, factor: float) -> "LoadSet":
        return LoadSet.from_tensors([factor * case.tensor for case in self.cases], self.weights)


def to_xi_coords(sigma) -> np.ndarray:
    """Coordinates of a symmetric tensor (or stack of them) in the xi basis.

    Accepts a StressCase or an array whose last axis is (s11, s22, s12).
    """
    if isinstance(sigma, StressCase):
        sigma = (sigma.s11, sigma.s22, sigma.s12)
    s = np.asarray(sigma, dtype=float)
    s11, s22, s12 = s[..., 0], s[..., 1], s[..., 2]
    return np.stack([(s11 - s22) / SQRT2, SQRT2 * s12, (s11 + s22) / SQRT2], axis=-1)


def from_xi_coords(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    return np.stack([(x[..., 2] + x[..., 0]) / SQRT2,
                     (x[..., 2] - x[..., 0]) / SQRT2,
                     x[..., 1] / SQRT2], axis=-1)


def isotropic_compliance(E: float, nu: float) -> np.ndarray:
    """Plane-stress isotropic compliance, diag(1/2mu, 1/2mu, 1/2kappa) in the xi basis."""
    if not E > 0:
        raise ValueError(f"Young's modulus must be positive, got {E}")
    mu = E / (2.0 * (1.0 + nu))
    kappa = E / (2.0 * (1.0 - nu))
    return np.diag([1.0 / (2 * mu), 1.0 / (2 * mu), 1.0 / (2 * kappa)])


def isotropic_stiffness(E: float, nu: float) -> np.ndarray:
    return np.linalg.inv(isotropic_compliance(E, nu))


@dataclass(frozen=True)
class MomentVector:
    """Trigonometric moments of a set of layer directions."""

    m1: float
    m2: float
    m3: float
    m4: float

    @classmethod
    def from_array(cls, m) -> "MomentVector":
        m = np.asarray(m, dtype=float).ravel()
        return cls(float(m[0]), float(m[1]), float(m[2]), float(m[3]))

    @classmethod
    def from_layers(cls, p, theta) -> "MomentVector":
        p = np.asarray(p, dtype=float)
        theta = np.asarray(theta, dtype=float)
        return cls(float(p @ np.cos(2 * theta)), float(p @ np.sin(2 * theta)),
                   float(p @ np.cos(4 * theta)), float(p @ np.sin(4 * theta)))

    def as_array(self) -> np.ndarray:
        return np.array([self.m1, self.m2, self.m3, self.m4])

    def residuals(self) -> np.ndarray:
        return moment_feasibility(self)

    def is_feasible(self, tol: float = 1e-8) -> bool:
        return bool(np.all(self.residuals() <= tol))


def _as_moment_array(m) -> np.ndarray:
    if isinstance(m, MomentVector):
        return m.as_array()
    return np.asarray(m, dtype=float)


def moment_matrix(m) -> np.ndarray:
    """xi-basis matrix of sum_n p_n (t_n x t_n) x (t_n x t_n) in terms of the moments."""
    m = _as_moment_array(m)
    return _MOMENT_MATRIX_CONSTANT + np.tensordot(m, MOMENT_MATRIX_DERIVATIVES, axes=(-1, 0))


def layer_moment_matrix(p, theta) -> np.ndarray:
    """The same matrix assembled directly from layer tangents, without moments."""
    total = np.zeros((3, 3))
    for pn, th in zip(np.atleast_1d(p), np.atleast_1d(theta)):
        t = np.array([-np.sin(th), np.cos(th)])
        tt = np.outer(t, t)
        v = to_xi_coords((tt[0, 0], tt[1, 1], tt[0, 1]))
        total += pn * np.outer(v, v)
    return total


def moment_feasibility(m) -> np.ndarray:
    """Signed residuals (g1, g2, g3) of the three moment constraints; feasible iff all <= 0.

    The third constraint is evaluated in the form multiplied through by
    (1 - m3^2) once |m3| is within 1e-9 of one.
    """
    m1, m2, m3, m4 = _as_moment_array(m)
    g1 = m1 ** 2 + m2 ** 2 - 1.0
    g2 = abs(m3) - 1.0
    if abs(m3) > 1.0 - 1e-9:
        g3 = (2 * m1 ** 2 * (1 - m3) + 2 * m2 ** 2 * (1 + m3) + m4 ** 2
              - 4 * m1 * m2 * m4) - (1 - m3 ** 2)
    else:
        g3 = (2 * m1 ** 2 / (1 + m3) + 2 * m2 ** 2 / (1 - m3)
              + (m4 ** 2 - 4 * m1 * m2 * m4) / (1 - m3 ** 2) - 1.0)
    return np.array([g1, g2, g3])


def toeplitz_determinant(m) -> np.ndarray:
    """det of the Hermitian Toeplitz matrix of (1, m1 + i m2, m3 + i m4).

    Equals (1 - m3^2) times minus the third residual; vectorized over leading axes.
    """
    m = _as_moment_array(m)
    m1, m2, m3, m4 = m[..., 0], m[..., 1], m[..., 2], m[..., 3]
    return (1 - m3 ** 2) - (2 * m1 ** 2 * (1 - m3) + 2 * m2 ** 2 * (1 + m3) + m4 ** 2
                            - 4 * m1 * m2 * m4)


def laminate_inner_base(mat: MaterialPair) -> np.ndarray:
    """B = -(C+ - C-)^-1, positive definite since the minus phase is more compliant."""
    diff = mat.compliance_plus - mat.compliance_minus
    if np.max(np.abs(diff)) <= 1e-14 * np.max(np.abs(mat.compliance_minus)):
        raise DegenerateLaminateError("the two phases are identical")
    return -np.linalg.inv(diff)


def effective_compliance(m, mat: MaterialPair) -> np.ndarray:
    """C^H = C+ - (1 - f) [(C+ - C-)^-1 - f E+ M]^-1 in the xi basis."""
    cplus = mat.compliance_plus
    if mat.f >= 1.0:
        return cplus
    inner = -laminate_inner_base(mat) - mat.f * mat.e_plus * moment_matrix(m)
    try:
        cond = np.linalg.cond(inner)
    except np.linalg.LinAlgError as exc:  # pragma: no cover - cond rarely raises
        raise DegenerateLaminateError(str(exc)) from exc
    if not np.isfinite(cond) or cond > 1e15:
        raise DegenerateLaminateError(f"inner laminate matrix is singular (cond={cond:.3g})")
    ch = cplus - (1.0 - mat.f) * np.linalg.inv(inner)
    return 0.5 * (ch + ch.T)


def energy_from_compliance(compliance: np.ndarray, loads: LoadSet) -> float:
    """1/2 sum_j w_j s_j^T C s_j with s_j the xi coordinates of the load stresses."""
    s = loads.xi
    return 0.5 * float(np.einsum("j,ja,ab,jb->", loads.weights, s, compliance, s))


def complementary_energy(m, loads: LoadSet, mat: MaterialPair) -> float:
    return energy_from_compliance(effective_compliance(m, mat), loads)
