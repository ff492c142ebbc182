"""Sweeps over the load-mix parameter chi: bound, mapped laminate and optimized cells.

Each sweep point computes the rank-3 energy bound, reconstructs and maps the
optimal laminate onto a single-scale cell, and optimizes from each requested
starting guess. Results go to ``results.csv`` and per-run artifacts under
``<out>/<example>/<chi>/<sg>/``.
"""
from __future__ import annotations

import csv
import json
import logging
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from . import export
from .homogenize import energy_and_gradient, homogenize
from .laminate import LoadSet, MaterialPair
from .moments import optimize_moments
from .reconstruct import Rank3Laminate, reconstruct
from .unitcell import DensityField
from .topopt import STARTING_GUESSES, TopOptConfig, optimize, starting_guess

log = logging.getLogger(__name__)

SG_COLUMNS = {"mapped": "mapped_sg", "random": "random_sg", "homogeneous": "homog_sg"}
ENERGY_COLUMNS = ["bound", "mapped_rank3", "mapped_sg", "random_sg", "homog_sg"]
CSV_COLUMNS = ["chi"] + ENERGY_COLUMNS + [c + "_norm" for c in ENERGY_COLUMNS[1:]] + ["failed"]

EXAMPLE_DEFAULTS = {
    1: {"f": 0.5, "chi": [round(0.1 * k, 10) for k in range(11)]},
    2: {"f": 0.7, "chi": [round(0.1 * k, 10) for k in range(11)]},
    3: {"f": 0.2, "chi": [round(0.1 * k, 10) for k in range(11)]},
    4: {"f": 0.5, "chi": [5.0 * k for k in range(13)]},
}


class ConfigError(ValueError):
    pass


def build_loadset_examples123(chi: float) -> LoadSet:
    """Deviatoric + shear pair weighted chi/2 each, uniaxial pair weighted (1 - chi)/2 each."""
    if not 0.0 <= chi <= 1.0:
        raise ValueError(f"chi must lie in [0, 1], got {chi}")
    tensors = [np.diag([-1.0, 1.0]), np.array([[0.0, 1.0], [1.0, 0.0]]),
               np.diag([1.0, 0.0]), np.diag([0.0, 1.0])]
    weights = [chi / 2, chi / 2, (1 - chi) / 2, (1 - chi) / 2]
    keep = [k for k, w in enumerate(weights) if w > 0]
    return LoadSet.from_tensors([tensors[k] for k in keep], [weights[k] for k in keep])


def uniaxial(phi: float) -> np.ndarray:
    n = np.array([np.cos(phi), np.sin(phi)])
    return np.outer(n, n)


def build_loadset_example4(chi_degrees: float) -> LoadSet:
    """Unit uniaxial stresses at 0, chi and 2 chi degrees with equal weights."""
    if not 0.0 <= chi_degrees <= 60.0:
        raise ValueError(f"chi must lie in [0, 60] degrees, got {chi_degrees}")
    chi = np.radians(chi_degrees)
    return LoadSet.from_tensors([uniaxial(k * chi) for k in range(3)], [1 / 3] * 3)


def build_loadset(example: int, chi: float) -> LoadSet:
    return build_loadset_example4(chi) if example == 4 else build_loadset_examples123(chi)


@dataclass
class ExperimentConfig:
    """Sweep settings; ``lengthscale`` is the filter diameter 2R."""

    example: int = 1
    chi: list = field(default_factory=lambda: list(EXAMPLE_DEFAULTS[1]["chi"]))
    f: float = 0.5
    lengthscale: float = 0.05
    nx: int = 100
    ny: int = 100
    supersample: int = 3
    starting_guesses: list = field(default_factory=lambda: list(STARTING_GUESSES))
    seed: int = 0
    out: str = "runs"
    workers: int = 1
    max_iter: int = 300
    e_plus: float = 1.0
    nu: float = 0.3
    optimize_designs: bool = True
    invert: bool = False

    @classmethod
    def for_example(cls, example: int, **overrides) -> "ExperimentConfig":
        if example not in EXAMPLE_DEFAULTS:
            raise ConfigError(f"unknown example {example}; choose 1-4")
        base = dict(example=example, f=EXAMPLE_DEFAULTS[example]["f"], chi=list(EXAMPLE_DEFAULTS[example]["chi"]))
        base.update(overrides)
        return cls(**base)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        if "example" in data:
            return cls.for_example(int(data["example"]), **{k: v for k, v in data.items() if k != "example"})
        return cls(**data)

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            data = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from exc
        if not isinstance(data, dict):
            raise ConfigError("config must be a JSON object")
        return cls.from_dict(data)

    def validate(self) -> "ExperimentConfig":
        if self.example not in EXAMPLE_DEFAULTS:
            raise ConfigError(f"unknown example {self.example}")
        hi = 60.0 if self.example == 4 else 1.0
        chi = sorted(set(float(c) for c in self.chi))
        if any(c < 0 or c > hi for c in chi):
            raise ConfigError(f"chi values must lie in [0, {hi:g}]")
        self.chi = chi
        if not 0 < self.f < 1:
            raise ConfigError("f must lie in (0, 1)")
        if self.lengthscale <= 0 or self.nx < 2 or self.ny < 2 or self.workers < 1:
            raise ConfigError("lengthscale, mesh and workers must be positive")
        bad = [sg for sg in self.starting_guesses if sg not in STARTING_GUESSES]
        if bad:
            raise ConfigError(f"unknown starting guesses {bad}")
        try:
            self.topopt()
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc
        return self

    @property
    def material(self) -> MaterialPair:
        return MaterialPair(e_plus=self.e_plus, nu=self.nu, f=self.f)

    def topopt(self) -> TopOptConfig:
        return TopOptConfig(f=self.f, R=self.lengthscale / 2, nx=self.nx, ny=self.ny,
                            max_iter=self.max_iter, seed=self.seed, supersample=self.supersample)


@dataclass
class PointResult:
    chi: float
    bound: float = np.nan
    mapped_rank3: float = np.nan
    sg: dict = field(default_factory=dict)
    volumes: dict = field(default_factory=dict)
    errors: list = field(default_factory=list)

    def row(self) -> dict:
        vals = {"chi": self.chi, "bound": self.bound, "mapped_rank3": self.mapped_rank3}
        for sg, col in SG_COLUMNS.items():
            vals[col] = self.sg.get(sg, np.nan)
        for col in ENERGY_COLUMNS[1:]:
            vals[col + "_norm"] = vals[col] / self.bound if np.isfinite(self.bound) and self.bound > 0 else np.nan
        vals["failed"] = ";".join(self.errors)
        return vals


def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    return "" if not np.isfinite(value) else repr(float(value))


def chi_label(chi: float) -> str:
    return f"{chi:g}"


def _write_run(path: Path, state, laminate: Rank3Laminate | None, invert: bool = False) -> None:
    path.mkdir(parents=True, exist_ok=True)
    fld = state.physical
    export.write_field_pgm(path / "field.pgm", fld, invert)
    export.write_tiled_pgm(path / "field_tiled.pgm", fld, invert=invert)
    export.write_field_csv(path / "field.csv", fld)
    export.write_log_csv(path / "log.csv", state.history)
    if laminate is not None:
        write_laminate_json(path / "laminate.json", laminate)


def write_laminate_json(path, laminate: Rank3Laminate) -> None:
    data = laminate.to_dict()
    data["moments"] = laminate.moments.as_array().tolist()
    Path(path).write_text(json.dumps(data, indent=2))


def laminate_for(loads: LoadSet, mat: MaterialPair):
    sol = optimize_moments(loads, mat)
    return sol, reconstruct(sol.m, mat.f)


def run_point(config: ExperimentConfig, chi: float, sgs=None) -> PointResult:
    """Bound, mapped laminate energy and optimized energies for one chi."""
    sgs = config.starting_guesses if sgs is None else sgs
    out = Path(config.out) / f"example{config.example}" / chi_label(chi)
    res = PointResult(chi)
    mat = config.material
    loads = build_loadset(config.example, chi)
    tcfg = config.topopt()
    laminate = None
    try:
        sol, laminate = laminate_for(loads, mat)
        res.bound = sol.energy
        if not sol.converged:
            res.errors.append("bound:not-converged")
        out.mkdir(parents=True, exist_ok=True)
        write_laminate_json(out / "laminate.json", laminate)
        mapped = starting_guess("mapped", tcfg, laminate)
        mapped_field = DensityField(mapped.rho, mapped.cell)
        res.mapped_rank3, _ = energy_and_gradient(homogenize(mapped_field, mat, tcfg.p_simp), loads)
        res.volumes["mapped_rank3"] = float(np.mean(mapped.rho))
    except Exception as exc:  # recorded and reported, the sweep continues
        log.exception("chi=%g: bound/mapping failed", chi)
        res.errors.append(f"mapping:{type(exc).__name__}")
    if not config.optimize_designs:
        return res
    for sg in sgs:
        try:
            if sg == "mapped" and laminate is None:
                raise RuntimeError("no laminate to map")
            start = starting_guess(sg, tcfg, laminate)
            final = optimize(start, loads, mat, tcfg)
            res.sg[sg] = final.objective
            res.volumes[sg] = final.volume
            _write_run(out / sg, final, laminate, config.invert)
        except Exception as exc:
            log.exception("chi=%g sg=%s failed", chi, sg)
            res.errors.append(f"{sg}:{type(exc).__name__}")
    return res


def _run_task(args):
    config, chi, sg = args
    return chi, run_point(config, chi, [sg] if sg else [])


def write_results(path, results) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in results:
            row = r.row()
            writer.writerow([_fmt(row[c]) for c in CSV_COLUMNS])


def read_results(path) -> list[dict]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    for row in rows:
        for k in CSV_COLUMNS[:-1]:
            row[k] = float(row[k]) if row[k] != "" else np.nan
    return rows


def run_sweep(config: ExperimentConfig) -> list[PointResult]:
    """Run every (chi, starting guess) pair and write ``results.csv``.

    With more than one worker the pairs run in separate processes; each pair
    recomputes its (cheap) bound and mapping so runs share nothing.
    """
    config.validate()
    root = Path(config.out) / f"example{config.example}"
    root.mkdir(parents=True, exist_ok=True)
    sgs = config.starting_guesses if config.optimize_designs else []
    if config.workers <= 1:
        results = [run_point(config, chi) for chi in config.chi]
    else:
        tasks = [(config, chi, sg) for chi in config.chi for sg in (sgs or [None])]
        merged = {chi: None for chi in config.chi}
        with ProcessPoolExecutor(max_workers=min(config.workers, len(tasks) or 1)) as pool:
            for chi, part in pool.map(_run_task, tasks):
                if merged[chi] is None:
                    merged[chi] = part
                else:
                    merged[chi].sg.update(part.sg)
                    merged[chi].volumes.update(part.volumes)
                    merged[chi].errors.extend(e for e in part.errors if e not in merged[chi].errors)
        results = [merged[chi] for chi in config.chi]
    write_results(root / "results.csv", results)
    (root / "config.json").write_text(json.dumps(asdict(config), indent=2))
    return results


def default_workers() -> int:
    return max(1, min(4, os.cpu_count() or 1))
