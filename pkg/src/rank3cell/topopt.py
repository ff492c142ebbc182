"""Inverse homogenization of a periodic unit cell.

Design variables are filtered with a periodic cone filter, projected with a
smoothed Heaviside step and interpolated with SIMP. The weighted
complementary energy of the homogenized cell is minimized with MMA under a
volume constraint on the projected field, with continuation on the
projection sharpness.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from itertools import product

import numpy as np

from .homogenize import PeriodicMesh, energy_and_gradient, model_for
from .laminate import LoadSet, MaterialPair
from .mma import MMAState, mma_update
from .reconstruct import Rank3Laminate
from .unitcell import DensityField, ParallelogramCell, map_laminate

log = logging.getLogger(__name__)

STARTING_GUESSES = ("mapped", "random", "homogeneous")


@dataclass
class TopOptConfig:
    f: float = 0.5
    R: float = 0.025
    nx: int = 100
    ny: int = 100
    p_simp: float = 3.0
    beta0: float = 1.0
    beta_factor: float = 2.0
    beta_interval: int = 50
    beta_cap: float = 64.0
    cap_iterations: int = 50
    max_iter: int = 500
    move_limit: float = 0.2
    conv_tol: float = 0.01
    seed: int = 0
    supersample: int = 3
    reset_asymptotes: bool = True

    def __post_init__(self):
        if not 0.0 < self.f < 1.0:
            raise ValueError(f"f must lie in (0, 1), got {self.f}")
        if self.max_iter < 1:
            raise ValueError("max_iter must be at least 1")
        if self.nx < 2 or self.ny < 2:
            raise ValueError("mesh must be at least 2x2")
        if self.R <= 1.0 / min(self.nx, self.ny):
            raise ValueError(f"filter radius {self.R} does not exceed the element size")


@dataclass
class IterationRecord:
    iteration: int
    beta: float
    objective: float
    volume: float
    change: float
    fallback: bool = False


@dataclass
class DesignState:
    """Design variables with their filtered and projected fields, all shaped (ny, nx)."""

    rho: np.ndarray
    rho_bar: np.ndarray
    rho_hat: np.ndarray
    cell: ParallelogramCell
    beta: float = 1.0
    iteration: int = 0
    objective: float = np.nan
    history: list = field(default_factory=list)

    @property
    def physical(self) -> DensityField:
        return DensityField(np.clip(self.rho_hat, 0.0, 1.0), self.cell)

    @property
    def volume(self) -> float:
        return float(np.mean(self.rho_hat))


class PeriodicFilter:
    """Cone-weighted average over elements within R, distances taken to the nearest periodic image.

    The weights depend only on the element offset, so the filter is a circular
    convolution: symmetric, and preserving the mean exactly up to rounding.
    """

    def __init__(self, mesh: PeriodicMesh, R: float):
        self.shape = (mesh.ny, mesh.nx)
        di = np.arange(mesh.nx)
        dj = np.arange(mesh.ny)
        I, J = np.meshgrid(di, dj, indexing="xy")
        d = I[..., None] * mesh.h1 + J[..., None] * mesh.h2
        a1, a2 = mesh.cell.a1, mesh.cell.a2
        dist = np.full(I.shape, np.inf)
        for k1, k2 in product(range(-2, 2), repeat=2):
            dist = np.minimum(dist, np.linalg.norm(d + k1 * a1 + k2 * a2, axis=-1))
        kernel = np.maximum(0.0, R - dist)
        kernel /= kernel.sum()
        self.kernel = kernel
        self._kernel_hat = np.fft.rfft2(kernel)

    def __call__(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float).reshape(self.shape)
        return np.fft.irfft2(np.fft.rfft2(x) * self._kernel_hat, s=self.shape)

    def transpose(self, g: np.ndarray) -> np.ndarray:
        g = np.asarray(g, dtype=float).reshape(self.shape)
        return np.fft.irfft2(np.fft.rfft2(g) * np.conj(self._kernel_hat), s=self.shape)


def periodic_density_filter(rho: np.ndarray, R: float, mesh: PeriodicMesh) -> np.ndarray:
    return PeriodicFilter(mesh, R)(rho)


def heaviside_projection(rho_bar, beta: float):
    """Smoothed Heaviside step and its derivative; the identity at beta = 0."""
    if beta < 0:
        raise ValueError("beta must be non-negative")
    rho_bar = np.asarray(rho_bar, dtype=float)
    e = np.exp(-beta * rho_bar)
    eb = np.exp(-beta)
    return 1.0 - e + rho_bar * eb, beta * e + eb


def _state(rho, filt: PeriodicFilter, cell, beta) -> DesignState:
    rho_bar = filt(rho)
    rho_hat, _ = heaviside_projection(rho_bar, beta)
    return DesignState(rho, rho_bar, rho_hat, cell, beta)


def starting_guess(kind: str, config: TopOptConfig, laminate: Rank3Laminate | None = None) -> DesignState:
    """Initial design on the unit square (random, homogeneous) or on the laminate's cell (mapped)."""
    if kind == "mapped":
        if laminate is None:
            raise ValueError("the mapped starting guess needs a laminate")
        cell, _, _, fld = map_laminate(laminate, config.nx, config.ny, config.supersample)
        rho = fld.rho
    elif kind == "random":
        cell = ParallelogramCell.unit_square()
        mesh = PeriodicMesh(config.nx, config.ny, cell)
        rng = np.random.default_rng(config.seed)
        raw = rng.uniform(0.0, min(1.0, 2 * config.f), size=(config.ny, config.nx))
        rho = np.clip(PeriodicFilter(mesh, config.R)(raw), 0.0, 1.0)
    elif kind == "homogeneous":
        cell = ParallelogramCell.unit_square()
        mesh = PeriodicMesh(config.nx, config.ny, cell)
        centre = 0.5 * (cell.a1 + cell.a2)
        dist = np.linalg.norm(mesh.centroids() - centre, axis=1).reshape(config.ny, config.nx)
        rho = np.where(dist <= config.R, 0.0, config.f)
    else:
        raise ValueError(f"unknown starting guess {kind!r}; choose from {STARTING_GUESSES}")
    mesh = PeriodicMesh(config.nx, config.ny, cell)
    return _state(np.asarray(rho, dtype=float), PeriodicFilter(mesh, config.R), cell, config.beta0)


class DesignProblem:
    """Objective and volume constraint as functions of the raw design variables."""

    def __init__(self, cell: ParallelogramCell, loads: LoadSet, mat: MaterialPair, config: TopOptConfig):
        self.mesh = PeriodicMesh(config.nx, config.ny, cell)
        self.filter = PeriodicFilter(self.mesh, config.R)
        self.loads = loads
        self.mat = mat
        self.config = config
        self.model = model_for(DensityField(np.zeros((config.ny, config.nx)), cell), mat.nu)

    def volume(self, rho: np.ndarray, beta: float) -> float:
        return float(np.mean(heaviside_projection(self.filter(rho), beta)[0]))

    def evaluate(self, rho: np.ndarray, beta: float):
        """(objective, gradient, volume, volume gradient, rho_bar, rho_hat), gradients w.r.t. rho."""
        rho_bar = self.filter(rho)
        rho_hat, dhat = heaviside_projection(rho_bar, beta)
        result = self.model.homogenize(np.clip(rho_hat, 0.0, 1.0), self.mat, self.config.p_simp)
        obj, grad_hat = energy_and_gradient(result, self.loads)
        grad = self.filter.transpose(dhat * grad_hat.reshape(rho.shape))
        vol = float(np.mean(rho_hat))
        dvol = self.filter.transpose(dhat / rho.size)
        return obj, grad, vol, dvol, rho_bar, rho_hat


def optimize(start: DesignState, loads: LoadSet, mat: MaterialPair, config: TopOptConfig) -> DesignState:
    """Run the MMA loop with projection continuation from ``start``.

    Sharpness is multiplied every ``beta_interval`` iterations, or earlier when
    the design change drops below ``conv_tol``, up to ``beta_cap``. The run
    stops once the cap has been held for ``cap_iterations`` iterations and the
    design change is below ``conv_tol``, or after ``max_iter`` designs.
    The returned state holds the last evaluated design.
    """
    mat = mat.with_fraction(config.f) if mat.f != config.f else mat
    problem = DesignProblem(start.cell, loads, mat, config)
    mma = MMAState(start.rho.size)
    # the wider asymptote clamp of the later reference code damps oscillation on large designs
    mma.options = replace(mma.options, move=config.move_limit, asymin=0.01)
    rho = start.rho.copy()
    beta = start.beta
    history: list[IterationRecord] = []
    since_beta = 0
    at_cap = 0
    change = np.inf
    scale = None
    fallback = False
    state = start
    for it in range(1, config.max_iter + 1):
        obj, grad, vol, dvol, rho_bar, rho_hat = problem.evaluate(rho, beta)
        history.append(IterationRecord(it, beta, obj, vol, change, fallback))
        state = DesignState(rho.copy(), rho_bar, rho_hat, start.cell, beta, it, obj, history)
        log.debug("it %d beta %g obj %.6g vol %.4f change %.3g", it, beta, obj, vol, change)

        if beta >= config.beta_cap:
            at_cap += 1
            if at_cap >= config.cap_iterations and change < config.conv_tol:
                break
        elif since_beta >= config.beta_interval or change < config.conv_tol:
            beta = min(beta * config.beta_factor, config.beta_cap)
            since_beta = 0
            change = np.inf
            if config.reset_asymptotes:
                mma.iteration = 0
            # re-evaluate at the new sharpness before taking a step
            obj, grad, vol, dvol, rho_bar, rho_hat = problem.evaluate(rho, beta)
        if it == config.max_iter:
            break

        if scale is None:
            scale = abs(obj) if obj != 0 else 1.0
        step = mma_update(mma, rho.ravel(), obj / scale, grad.ravel() / scale,
                          [vol / config.f - 1.0], dvol.reshape(1, -1) / config.f,
                          constraints=lambda xr, b=beta: [problem.volume(xr, b) / config.f - 1.0])
        new = step.x.reshape(rho.shape)
        change = float(np.max(np.abs(new - rho)))
        fallback = step.fallback
        rho = new
        since_beta += 1
    return state
