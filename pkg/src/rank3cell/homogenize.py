"""Periodic finite-element homogenization of a unit-cell density field.

Bilinear quadrilaterals on a uniform grid over a (possibly sheared) periodic
cell. All elements are congruent parallelograms, so a single 8x8 element
stiffness serves the whole mesh. Three cell problems with unit macroscopic
strains (11, 22 and engineering shear 12) share one factorization; the
effective stiffness follows from mutual energies of the total element
displacements, and its element-wise derivatives from the same fields.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .laminate import SQRT2, LoadSet, MaterialPair
from .unitcell import DensityField, ParallelogramCell

try:  # CHOLMOD through cvxopt; reuses the symbolic factorization across designs
    from cvxopt import cholmod as _cholmod
    from cvxopt import matrix as _cvx_matrix
    from cvxopt import spmatrix as _cvx_spmatrix
except ImportError:  # pragma: no cover - exercised only without cvxopt
    _cholmod = None

log = logging.getLogger(__name__)

RESIDUAL_TOL = 1e-10

# xi strain coordinates -> Voigt strain (e11, e22, gamma12)
XI_TO_VOIGT = np.array([
    [1 / SQRT2, 0.0, 1 / SQRT2],
    [-1 / SQRT2, 0.0, 1 / SQRT2],
    [0.0, SQRT2, 0.0],
])


class HomogenizationError(RuntimeError):
    pass


def voigt_to_xi(stiffness_voigt: np.ndarray) -> np.ndarray:
    """Stiffness in engineering Voigt notation to the xi basis."""
    return XI_TO_VOIGT.T @ stiffness_voigt @ XI_TO_VOIGT


def xi_to_voigt(stiffness_xi: np.ndarray) -> np.ndarray:
    inv = np.linalg.inv(XI_TO_VOIGT)
    return inv.T @ stiffness_xi @ inv


def plane_stress_matrix(E: float, nu: float) -> np.ndarray:
    return E / (1 - nu ** 2) * np.array([[1, nu, 0], [nu, 1, 0], [0, 0, (1 - nu) / 2]])


_GAUSS = np.array([-1.0, 1.0]) / np.sqrt(3.0)
_NODE_XI = np.array([[-1, -1], [1, -1], [1, 1], [-1, 1]], dtype=float)


def element_stiffness(h1, h2, E: float = 1.0, nu: float = 0.3) -> np.ndarray:
    """8x8 stiffness of a bilinear element spanned by edge vectors h1, h2.

    Nodes are ordered (0, h1, h1 + h2, h2), degrees of freedom (ux, uy) per node.
    Two-point Gauss quadrature is exact because the Jacobian is constant.
    """
    h1, h2 = np.asarray(h1, dtype=float), np.asarray(h2, dtype=float)
    coords = np.array([[0, 0], h1, h1 + h2, h2])
    D = plane_stress_matrix(E, nu)
    ke = np.zeros((8, 8))
    for xi in _GAUSS:
        for eta in _GAUSS:
            dN = 0.25 * np.array([_NODE_XI[:, 0] * (1 + _NODE_XI[:, 1] * eta),
                                  _NODE_XI[:, 1] * (1 + _NODE_XI[:, 0] * xi)])
            J = dN @ coords
            detJ = np.linalg.det(J)
            if detJ <= 1e-14 * (h1 @ h1 + h2 @ h2):
                raise ValueError("degenerate element geometry (non-positive Jacobian)")
            dNx = np.linalg.solve(J, dN)
            B = np.zeros((3, 8))
            B[0, 0::2] = dNx[0]
            B[1, 1::2] = dNx[1]
            B[2, 0::2] = dNx[1]
            B[2, 1::2] = dNx[0]
            ke += B.T @ D @ B * detJ
    return 0.5 * (ke + ke.T)


class PeriodicMesh:
    """Uniform nx-by-ny grid of parallelogram elements on a periodic cell."""

    def __init__(self, nx: int, ny: int, cell: ParallelogramCell | None = None):
        if nx < 2 or ny < 2:
            raise ValueError("a periodic mesh needs at least 2x2 elements")
        self.nx, self.ny = int(nx), int(ny)
        self.cell = cell or ParallelogramCell.unit_square()
        self.h1 = self.cell.a1 / nx
        self.h2 = self.cell.a2 / ny
        self.element_area = float(self.h1[0] * self.h2[1] - self.h1[1] * self.h2[0])
        if self.element_area <= 0:
            raise ValueError("lattice vectors must be right-handed")
        i, j = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
        i, j = i.ravel(), j.ravel()
        ip, jp = (i + 1) % nx, (j + 1) % ny
        self.element_nodes = np.stack([j * nx + i, j * nx + ip, jp * nx + ip, jp * nx + i], axis=1)
        self.edof = (2 * np.repeat(self.element_nodes, 2, axis=1) + np.tile([0, 1], 4)).astype(np.int64)

    @property
    def n_elements(self) -> int:
        return self.nx * self.ny

    @property
    def n_nodes(self) -> int:
        return self.nx * self.ny

    @property
    def cell_area(self) -> float:
        return self.element_area * self.n_elements

    def centroids(self) -> np.ndarray:
        """Physical element centres, shape (n_elements, 2), in element order."""
        i, j = np.meshgrid(np.arange(self.nx) + 0.5, np.arange(self.ny) + 0.5, indexing="xy")
        return np.outer(i.ravel(), self.h1) + np.outer(j.ravel(), self.h2)

    def local_coordinates(self) -> np.ndarray:
        return np.array([[0, 0], self.h1, self.h1 + self.h2, self.h2])

    def unit_strain_displacements(self) -> np.ndarray:
        """(8, 3) nodal displacements of the three unit strains on one element."""
        X = self.local_coordinates()
        u0 = np.zeros((8, 3))
        u0[0::2, 0] = X[:, 0]
        u0[1::2, 1] = X[:, 1]
        u0[0::2, 2] = 0.5 * X[:, 1]
        u0[1::2, 2] = 0.5 * X[:, 0]
        return u0


@dataclass
class HomogenizedTensor:
    """Effective stiffness of a density field plus the data for its sensitivities.

    ``element_energies[e]`` is the 3x3 matrix of mutual unit-modulus energies
    of element e; the stiffness is sum_e E_e element_energies[e] / |cell|.
    """

    voigt: np.ndarray
    element_energies: np.ndarray
    modulus_derivative: np.ndarray
    cell_area: float
    residual: float

    @property
    def xi(self) -> np.ndarray:
        return voigt_to_xi(self.voigt)

    @property
    def compliance_xi(self) -> np.ndarray:
        return np.linalg.inv(self.xi)

    def voigt_derivatives(self) -> np.ndarray:
        """(n_elements, 3, 3) derivatives of the Voigt stiffness w.r.t. each density."""
        return self.modulus_derivative[:, None, None] * self.element_energies / self.cell_area


class CellModel:
    """Assembly and cached factorization pattern for one mesh and Poisson's ratio."""

    def __init__(self, mesh: PeriodicMesh, nu: float = 0.3):
        self.mesh = mesh
        self.nu = nu
        self.k0 = element_stiffness(mesh.h1, mesh.h2, 1.0, nu)
        self.u0 = mesh.unit_strain_displacements()
        self.f0 = self.k0 @ self.u0  # element load per unit modulus
        ndof = 2 * mesh.n_nodes
        self.ndof = ndof
        edof = mesh.edof
        rows = np.repeat(edof, 8, axis=1).ravel()
        cols = np.tile(edof, (1, 8)).ravel()
        # first node is fixed to remove rigid translations
        keep = (rows >= 2) & (cols >= 2)
        rows, cols = rows[keep] - 2, cols[keep] - 2
        self._entry_keep = keep
        n = ndof - 2
        keys = cols * n + rows
        uniq, self._entry_pos = np.unique(keys, return_inverse=True)
        self._rows = (uniq % n).astype(np.int64)
        cols_u = (uniq // n).astype(np.int64)
        self._indptr = np.concatenate([[0], np.cumsum(np.bincount(cols_u, minlength=n))])
        self._nnz = len(uniq)
        self._n = n
        self._lower = self._rows >= cols_u
        self._symbolic = None
        if _cholmod is not None:
            self._I = _cvx_matrix(self._rows[self._lower].astype(int).tolist(), tc="i")
            self._J = _cvx_matrix(cols_u[self._lower].astype(int).tolist(), tc="i")

    def assemble(self, moduli: np.ndarray) -> sp.csc_matrix:
        vals = (moduli[:, None] * self.k0.ravel()[None, :]).ravel()[self._entry_keep]
        data = np.bincount(self._entry_pos, weights=vals, minlength=self._nnz)
        return sp.csc_matrix((data, self._rows, self._indptr), shape=(self._n, self._n))

    def loads(self, moduli: np.ndarray) -> np.ndarray:
        F = np.zeros((self.ndof, 3))
        idx = self.mesh.edof.ravel()
        for c in range(3):
            F[:, c] = np.bincount(idx, weights=(moduli[:, None] * self.f0[None, :, c]).ravel(),
                                  minlength=self.ndof)
        return F[2:]

    def _factorize(self, K: sp.csc_matrix):
        if _cholmod is not None:
            A = _cvx_spmatrix(_cvx_matrix(K.data[self._lower]), self._I, self._J, (self._n, self._n))
            if self._symbolic is None:
                self._symbolic = _cholmod.symbolic(A)
            factor = self._symbolic
            # numeric() overwrites the factor object in place, so copy-free reuse is safe
            # only because one model is never shared across threads
            _cholmod.numeric(A, factor)

            def solve(b):
                x = _cvx_matrix(np.asfortranarray(b))
                _cholmod.solve(factor, x)
                return np.array(x).reshape(b.shape)
            return solve
        lu = spla.splu(K, permc_spec="MMD_AT_PLUS_A")
        return lu.solve

    def solve(self, moduli: np.ndarray):
        K = self.assemble(moduli)
        F = self.loads(moduli)
        solve = self._factorize(K)
        x = solve(F)
        fnorm = np.linalg.norm(F)
        res = np.linalg.norm(K @ x - F) / fnorm if fnorm > 0 else 0.0
        for _ in range(3):
            if res <= RESIDUAL_TOL:
                break
            x = x + solve(F - K @ x)
            res = np.linalg.norm(K @ x - F) / fnorm
        if res > RESIDUAL_TOL:
            raise HomogenizationError(f"cell problem residual {res:.3g} exceeds {RESIDUAL_TOL}")
        chi = np.zeros((self.ndof, 3))
        chi[2:] = x
        return chi, res

    def homogenize(self, rho_phys: np.ndarray, mat: MaterialPair, p_simp: float = 3.0) -> HomogenizedTensor:
        rho = np.asarray(rho_phys, dtype=float).ravel()
        if rho.size != self.mesh.n_elements:
            raise ValueError(f"expected {self.mesh.n_elements} densities, got {rho.size}")
        moduli = mat.e_minus + rho ** p_simp * (mat.e_plus - mat.e_minus)
        dmod = p_simp * rho ** (p_simp - 1) * (mat.e_plus - mat.e_minus)
        chi, res = self.solve(moduli)
        U = self.u0[None, :, :] - chi[self.mesh.edof]
        energies = np.einsum("eai,ab,ebj->eij", U, self.k0, U)
        energies = 0.5 * (energies + energies.transpose(0, 2, 1))
        area = self.mesh.cell_area
        voigt = np.einsum("e,eij->ij", moduli, energies) / area
        asym = np.max(np.abs(voigt - voigt.T)) / np.max(np.abs(voigt))
        if asym > 1e-9:
            raise HomogenizationError(f"homogenized stiffness is not symmetric ({asym:.3g})")
        return HomogenizedTensor(0.5 * (voigt + voigt.T), energies, dmod, area, res)


@lru_cache(maxsize=8)
def _cached_model(nx, ny, a1, a2, nu):
    cell = ParallelogramCell(np.array(a1), np.array(a2))
    return CellModel(PeriodicMesh(nx, ny, cell), nu)


def model_for(field: DensityField, nu: float) -> CellModel:
    cell = field.cell
    return _cached_model(field.nx, field.ny, tuple(cell.a1), tuple(cell.a2), float(nu))


def homogenize(field: DensityField, mat: MaterialPair, p_simp: float = 3.0) -> HomogenizedTensor:
    return model_for(field, mat.nu).homogenize(field.rho, mat, p_simp)


def energy_and_gradient(result: HomogenizedTensor, loads: LoadSet):
    """Complementary energy of ``loads`` and its derivative w.r.t. each element density."""
    S = result.compliance_xi
    s = loads.xi
    w = loads.weights
    strain_xi = s @ S  # rows S s_j (S symmetric)
    energy = 0.5 * float(np.einsum("j,ja,ja->", w, s, strain_xi))
    strain_voigt = strain_xi @ XI_TO_VOIGT.T
    quad = np.einsum("ja,eab,jb->ej", strain_voigt, result.element_energies, strain_voigt)
    grad = -0.5 * result.modulus_derivative * (quad @ w) / result.cell_area
    return energy, grad


def objective_and_sensitivities(field: DensityField, loads: LoadSet, mat: MaterialPair,
                                p_simp: float = 3.0):
    """Weighted complementary energy of the homogenized cell and its per-element gradient."""
    result = homogenize(field, mat, p_simp)
    energy, grad = energy_and_gradient(result, loads)
    return energy, grad
