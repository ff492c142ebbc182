"""Minimization of the laminate complementary energy over the feasible moment set.

The feasible set is the set of moments (m1, m2, m3, m4) for which the Hermitian
Toeplitz matrix of (1, m1 + i m2, m3 + i m4) is positive semidefinite; its
determinant is the third moment constraint with denominators cleared. The
solver is a log-barrier method on ``-log det T - log(1 - m1^2 - m2^2)`` with
damped Newton inner iterations and exact first and second derivatives of the
energy.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .laminate import (
    MOMENT_MATRIX_DERIVATIVES,
    LoadSet,
    MaterialPair,
    MomentVector,
    complementary_energy,
    laminate_inner_base,
    moment_matrix,
    toeplitz_determinant,
)

log = logging.getLogger(__name__)

_BARRIER_NU = 4.0  # 3 for log det of a 3x3 Hermitian matrix, 1 for the disc term

# d T / d m_k for T = toeplitz(1, c1, c2), c1 = m1 + i m2, c2 = m3 + i m4
_T_DERIV = np.zeros((4, 3, 3), dtype=complex)
for _k, (_pos, _val) in enumerate([((1,), 1.0), ((1,), 1j), ((2,), 1.0), ((2,), 1j)]):
    _lag = _pos[0]
    for _r in range(3 - _lag):
        _T_DERIV[_k, _r, _r + _lag] = _val
        _T_DERIV[_k, _r + _lag, _r] = np.conj(_val)


@dataclass
class MomentSolverOptions:
    mu_factor: float = 0.2
    outer_iterations: int = 20
    inner_tol: float = 1e-10
    max_iter: int = 2000
    tol: float = 1e-8


@dataclass
class MomentSolution:
    m: MomentVector
    energy: float
    iterations: int = 0
    converged: bool = True
    kkt_residual: float = 0.0
    history: list = field(default_factory=list, repr=False)


class _EnergyModel:
    """Energy, gradient and Hessian of the laminate energy as functions of m."""

    def __init__(self, loads: LoadSet, mat: MaterialPair):
        self.mat = mat
        self.w = loads.weights
        self.s = loads.xi
        self.base = laminate_inner_base(mat)
        self.cplus_energy = 0.5 * float(np.einsum("j,ja,ab,jb->", self.w, self.s,
                                                  mat.compliance_plus, self.s))
        self.fe = mat.f * mat.e_plus

    def _solve(self, m):
        inner = self.base + self.fe * moment_matrix(m)
        x = np.linalg.inv(inner)
        v = self.s @ x  # rows v_j = X s_j (X symmetric)
        return x, v

    def value(self, m) -> float:
        _, v = self._solve(m)
        return self.cplus_energy + 0.5 * (1 - self.mat.f) * float(np.einsum("j,ja,ja->", self.w, self.s, v))

    def derivatives(self, m):
        x, v = self._solve(m)
        c = 1 - self.mat.f
        val = self.cplus_energy + 0.5 * c * float(np.einsum("j,ja,ja->", self.w, self.s, v))
        # dC/dm_k = -1/2 (1-f) fE sum_j w_j v_j^T M_k v_j
        mv = np.einsum("kab,jb->kja", MOMENT_MATRIX_DERIVATIVES, v)
        grad = -0.5 * c * self.fe * np.einsum("j,ja,kja->k", self.w, v, mv)
        # H_kl = (1-f) (fE)^2 sum_j w_j (M_k v_j)^T X (M_l v_j)
        xmv = np.einsum("ab,ljb->lja", x, mv)
        hess = c * self.fe ** 2 * np.einsum("j,kja,lja->kl", self.w, mv, xmv)
        return val, grad, 0.5 * (hess + hess.T)


def _barrier(m):
    """Value, gradient, Hessian of the barrier; None when m is not strictly feasible."""
    m1, m2, m3, m4 = m
    disc = 1.0 - m1 * m1 - m2 * m2
    if disc <= 0:
        return None
    c1, c2 = m1 + 1j * m2, m3 + 1j * m4
    T = np.array([[1, c1, c2], [np.conj(c1), 1, c1], [np.conj(c2), np.conj(c1), 1]])
    try:
        L = np.linalg.cholesky(T)
    except np.linalg.LinAlgError:
        return None
    logdet = 2.0 * float(np.sum(np.log(np.real(np.diag(L)))))
    Tinv = np.linalg.inv(T)
    A = np.einsum("ab,kbc->kac", Tinv, _T_DERIV)
    grad = -np.real(np.einsum("kaa->k", A))
    hess = np.real(np.einsum("kab,lba->kl", A, A))
    gd = np.array([2 * m1, 2 * m2, 0.0, 0.0]) / disc
    hd = np.zeros((4, 4))
    hd[:2, :2] = 2 * np.eye(2) / disc + np.outer(gd[:2], gd[:2])
    return -logdet - np.log(disc), grad + gd, hess + hd


def optimize_moments(loads: LoadSet, mat: MaterialPair,
                     opts: MomentSolverOptions | None = None) -> MomentSolution:
    """Optimal moments of the rank-3 energy bound for ``loads`` at fraction ``mat.f``."""
    opts = opts or MomentSolverOptions()
    if not 0.0 < mat.f < 1.0:
        raise ValueError(f"moment optimization needs f in (0, 1), got {mat.f}")
    if np.allclose(loads.stresses, 0.0):
        return MomentSolution(MomentVector(0.0, 0.0, 0.0, 0.0), 0.0, 0, True, 0.0)

    model = _EnergyModel(loads, mat)
    m = np.zeros(4)
    scale = max(model.value(m), 1e-300)
    mu = scale
    iterations = 0
    converged = True
    history = []

    def merit(point, mu_):
        b = _barrier(point)
        if b is None:
            return np.inf
        return model.value(point) + mu_ * b[0]

    for outer in range(opts.outer_iterations):
        inner_ok = False
        for _ in range(200):
            if iterations >= opts.max_iter:
                break
            iterations += 1
            val, g, H = model.derivatives(m)
            bval, bg, bH = _barrier(m)
            grad = g + mu * bg
            hess = H + mu * bH
            try:
                step = -np.linalg.solve(hess, grad)
            except np.linalg.LinAlgError:
                step = -grad
            decrement = float(-grad @ step)
            if decrement < 0:
                step, decrement = -grad, float(grad @ grad)
            if 0.5 * decrement <= opts.inner_tol * scale:
                inner_ok = True
                break
            current = val + mu * bval
            t = 1.0
            while t > 1e-20:
                trial = m + t * step
                new = merit(trial, mu)
                if new <= current - 0.25 * t * decrement:
                    break
                t *= 0.5
            else:
                inner_ok = True  # no further progress is representable
                break
            m = trial
            if current - new <= 1e-15 * max(abs(current), scale):
                inner_ok = True
                break
        history.append((mu, model.value(m)))
        if not inner_ok:
            converged = False
            break
        mu *= opts.mu_factor

    gap = _BARRIER_NU * mu / opts.mu_factor  # gap bound of the last completed centering
    energy = complementary_energy(m, loads, mat)
    kkt = gap / scale
    if kkt > opts.tol:
        converged = False
    if not converged:
        log.warning("moment optimization stopped early (relative gap %.3g)", kkt)
    return MomentSolution(MomentVector.from_array(m), energy, iterations, converged, kkt, history)


def optimal_energy(loads: LoadSet, mat: MaterialPair) -> float:
    return optimize_moments(loads, mat).energy


# ---------------------------------------------------------------------------
# brute-force lattice oracle

_COARSEST_STEP = 0.05


@lru_cache(maxsize=16)
def _feasible_lattice(step: float) -> np.ndarray:
    n = int(round(1.0 / step))
    axis = np.arange(-n, n + 1) * step
    axis = axis[np.abs(axis) <= 1.0 + 1e-12]
    m1, m2, m3 = np.meshgrid(axis, axis, axis, indexing="ij")
    keep = m1 ** 2 + m2 ** 2 <= 1.0 + 1e-12
    pts3 = np.stack([m1[keep], m2[keep], m3[keep]], axis=1)
    out = []
    for m4 in axis:
        pts = np.column_stack([pts3, np.full(len(pts3), m4)])
        out.append(pts[toeplitz_determinant(pts) >= -1e-12])
    pts = np.concatenate(out)
    pts.setflags(write=False)
    return pts


def lattice_energies(points: np.ndarray, loads: LoadSet, mat: MaterialPair,
                     chunk: int = 200_000) -> np.ndarray:
    """Laminate energy evaluated independently at each row of ``points``."""
    base = laminate_inner_base(mat)
    w, s = loads.weights, loads.xi
    cplus = 0.5 * float(np.einsum("j,ja,ab,jb->", w, s, mat.compliance_plus, s))
    out = np.empty(len(points))
    fe = mat.f * mat.e_plus
    for lo in range(0, len(points), chunk):
        pts = points[lo:lo + chunk]
        A = base[None] + fe * moment_matrix(pts)
        rhs = np.broadcast_to(s.T, (len(pts), 3, len(w)))
        y = np.linalg.solve(A, rhs)
        out[lo:lo + chunk] = cplus + 0.5 * (1 - mat.f) * np.einsum("j,aj,naj->n", w, s.T, y)
    return out


def grid_search_oracle(loads: LoadSet, mat: MaterialPair, resolution: float) -> MomentSolution:
    """Best feasible point of the moment lattice with spacing ``resolution``.

    Lattices of spacing ``resolution * 2**k`` coarser than 0.05 are not used;
    the coarsest admissible lattice is searched exhaustively and each finer
    one in a moving window around the incumbent until the incumbent stops
    moving. Every finer lattice contains the coarser ones, so halving the
    resolution can only lower the result.
    """
    if resolution < 1e-3:
        raise ValueError("resolution below 1e-3 is too expensive")
    steps = [resolution]
    while steps[-1] * 2 <= _COARSEST_STEP + 1e-12:
        steps.append(steps[-1] * 2)
    steps.reverse()

    pts = _feasible_lattice(round(steps[0], 12))
    energies = lattice_energies(pts, loads, mat)
    best = int(np.argmin(energies))
    best_m, best_e = pts[best].copy(), float(energies[best])
    evaluations = len(pts)

    half = 8
    offsets = np.arange(-half, half + 1)
    grid = np.stack(np.meshgrid(offsets, offsets, offsets, offsets, indexing="ij"), -1).reshape(-1, 4)
    for step in steps[1:]:
        for _ in range(50):
            idx = np.round(best_m / step)
            cand = (idx + grid) * step
            cand = cand[np.all(np.abs(cand) <= 1 + 1e-12, axis=1)]
            cand = cand[(cand[:, 0] ** 2 + cand[:, 1] ** 2 <= 1 + 1e-12)
                        & (toeplitz_determinant(cand) >= -1e-12)]
            e = lattice_energies(cand, loads, mat)
            evaluations += len(cand)
            k = int(np.argmin(e))
            moved = e[k] < best_e
            if moved:
                best_m, best_e = cand[k].copy(), float(e[k])
            if not moved or np.max(np.abs(np.round(best_m / step) - idx)) < half - 1:
                break
    return MomentSolution(MomentVector.from_array(best_m), best_e, evaluations, True, 0.0)
