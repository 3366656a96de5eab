# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
import math
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
import pandas as pd

from PySubstructuring.create_experiment import (
    ExperimentConfig,
    build_preset_configs,
    preset_name,
    with_overrides,
)
from PySubstructuring.decomposition import Decomposition, build_decomposition
from PySubstructuring.diffusion_operator import (
    DiffusionOperator,
    assemble_diffusion,
    energy_norm,
)
from PySubstructuring.exceptions import (
    ContractError,
    DecompositionError,
    InvalidArgumentError,
)
from PySubstructuring.grid import Grid, GridFunction, build_grid, sample
from PySubstructuring.hyperbolic import integrate as integrate_hyperbolic
from PySubstructuring.hyperbolic import threshold as hyperbolic_threshold
from PySubstructuring.parabolic import SchemeConfig, integrate
from PySubstructuring.schemes import series_columns, study_columns, study_modes
from PySubstructuring.stability import (
    EnergyFunctional,
    evaluate_energy,
    level_bound,
    monitored_energy,
)

logger = logging.getLogger(__name__)

CSV_FLOAT_FORMAT = "%.17g"


def exact_solution(x1, x2, t, n1: int, n2: int, l1: float = 1.0, l2: float = 1.0):
    """
    Separable heat-equation solution
    exp(-pi^2 (n1^2 / l1^2 + n2^2 / l2^2) t) sin(n1 pi x1 / l1) sin(n2 pi x2 / l2).

    On the unit square this is exp(-pi^2 (n1^2 + n2^2) t) sin(n1 pi x1) sin(n2 pi x2).
    Accepts scalars or numpy arrays.
    """
    decay = np.exp(-(math.pi**2) * ((n1 / l1) ** 2 + (n2 / l2) ** 2) * t)
    return decay * np.sin(n1 * math.pi * x1 / l1) * np.sin(n2 * math.pi * x2 / l2)


@dataclass(frozen=True, eq=False)
class Problem:
    """Grid, operator, decomposition and scheme built from an ExperimentConfig."""

    config: ExperimentConfig
    grid: Grid
    A: DiffusionOperator
    decomposition: Optional[Decomposition]
    scheme: Optional[SchemeConfig]

    def exact(self, t: float) -> GridFunction:
        cfg = self.config
        return cfg.amplitude * sample(
            lambda x1, x2: exact_solution(x1, x2, t, cfg.n1, cfg.n2, cfg.l1, cfg.l2),
            self.grid,
        )


def build_problem(cfg: ExperimentConfig) -> Problem:
    """
    Check every precondition of a run before any time stepping (k = 1, f = 0).

    Raises:
        InvalidArgumentError: Including alignment and overlap errors of the
            decomposition.
    """
    grid = build_grid(cfg.l1, cfg.l2, cfg.N1, cfg.N2)
    A = assemble_diffusion(grid, lambda x1, x2: 1.0, 1.0)
    dec = None
    if cfg.needs_decomposition:
        dec = build_decomposition(grid, cfg.hhat, cfg.splitting, cfg.overlap_halfwidth)
    scheme = None
    if cfg.problem == "parabolic":
        scheme = SchemeConfig(
            cfg.scheme, cfg.sigma, cfg.tau, cfg.rhs_sampling, dec, cfg.staged, cfg.rel_tol
        )
    return Problem(cfg, grid, A, dec, scheme)


def _series_frame(rows) -> pd.DataFrame:
    frame = pd.DataFrame(rows, columns=series_columns)
    frame["n"] = frame["n"].astype(int)
    return frame


def _monitored(fn: EnergyFunctional, state, stable: bool) -> float:
    """
    Monitored energy of a level. Below the stability threshold the functional
    may be indefinite; such levels report NaN instead of failing the run.
    """
    try:
        return evaluate_energy(fn, state)
    except ContractError as exc:
        if stable:
            raise
        logger.debug("Energy at level %d is undefined: %s", state.n, exc)
        return math.nan


def _run_parabolic(problem: Problem) -> pd.DataFrame:
    cfg, A, scheme = problem.config, problem.A, problem.scheme
    fn = monitored_energy(scheme, A)
    rows, bound = [], math.nan
    for state in integrate(problem.exact(0.0), A, scheme, cfg.Nsteps):
        error = state.y - problem.exact(state.t)
        energy = _monitored(fn, state, not scheme.below_threshold)
        if not scheme.below_threshold:
            # f = 0, so the level bound never grows past the initial energy
            bound = energy if state.n == 0 else level_bound(fn, bound, 0.0)
        rows.append((state.n, state.t, error.norm(), energy_norm(A, error), energy, bound))
    return _series_frame(rows)


def _run_hyperbolic(problem: Problem) -> pd.DataFrame:
    cfg, A = problem.config, problem.A
    kind = cfg.scheme
    energy_kind = "s_hyperbolic_weighted" if kind == "weighted" else "s_hyperbolic_regularized"
    fn = EnergyFunctional(
        energy_kind, A, cfg.sigma, cfg.tau, problem.decomposition, rel_tol=cfg.rel_tol
    )
    stable = cfg.sigma >= hyperbolic_threshold(kind, problem.decomposition)
    rows = [(0, 0.0, math.nan, math.nan, math.nan, math.nan)]
    bound = math.nan
    for state in integrate_hyperbolic(
        problem.exact(0.0),
        GridFunction.zeros(problem.grid),
        A,
        kind,
        cfg.sigma,
        cfg.tau,
        cfg.Nsteps,
        decomposition=problem.decomposition,
        rel_tol=cfg.rel_tol,
    ):
        energy = _monitored(fn, state, stable)
        if stable:
            bound = energy if state.n == 1 else level_bound(fn, bound, 0.0)
        rows.append((state.n, state.t, math.nan, math.nan, energy, bound))
    return _series_frame(rows)


def run_experiment(cfg: ExperimentConfig) -> pd.DataFrame:
    """
    Run one experiment and return its ErrorSeries.

    The series has Nsteps + 1 rows with columns n, t, error_l2, error_A,
    energy, bound. Hyperbolic runs report energies only; their error columns
    and the level-0 energy are NaN. ``bound`` is NaN below the stability
    threshold, where ``energy`` is NaN at levels whose functional is indefinite.

    Raises:
        InvalidArgumentError: If the configuration cannot be set up.
        NumericalFailure: If a step fails; the step index is attached.
    """
    logger.info(
        "Running %s %s sigma=%g tau=%g N=%dx%d hhat=%g",
        cfg.problem,
        cfg.scheme,
        cfg.sigma,
        cfg.tau,
        cfg.N1,
        cfg.N2,
        cfg.hhat,
    )
    problem = build_problem(cfg)
    if cfg.problem == "parabolic":
        series = _run_parabolic(problem)
    else:
        series = _run_hyperbolic(problem)
    logger.info("Finished %s, final error_l2=%.6e", cfg.scheme, series["error_l2"].iloc[-1])
    return series


def write_frame(frame: pd.DataFrame, path: str):
    """Write a result table as CSV with 17 significant digits."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    frame.to_csv(path, index=False, float_format=CSV_FLOAT_FORMAT)
    logger.info("Wrote %s", path)


def frame_to_csv(frame: pd.DataFrame) -> str:
    return frame.to_csv(index=False, float_format=CSV_FLOAT_FORMAT)


def refine(cfg: ExperimentConfig, mode: str, level: int) -> ExperimentConfig:
    """Config of a study level: tau, h, both or hhat halved ``level`` times."""
    if mode not in study_modes:
        raise InvalidArgumentError(f"Unknown study mode {mode!r}, expected one of {study_modes}")
    factor = 2**level
    changes = {}
    if mode in ("time", "both"):
        changes["Nsteps"] = cfg.Nsteps * factor
    if mode in ("space", "both"):
        changes.update(N1=cfg.N1 * factor, N2=cfg.N2 * factor)
    if mode == "subdomains":
        changes["hhat"] = cfg.hhat / factor
    return with_overrides(cfg, **changes)


def convergence_study(cfg: ExperimentConfig, refinements: int, mode: str) -> pd.DataFrame:
    """
    Error at T over ``refinements`` levels (the base config is level 0).

    observed_order = log2(error_(k-1) / error_k). Levels whose decomposition
    cannot be built are reported through ``status`` with NaN errors.
    """
    if isinstance(refinements, bool) or int(refinements) != refinements or refinements < 2:
        raise InvalidArgumentError(f"refinements must be an integer >= 2, got {refinements}")
    rows = []
    previous = math.nan
    for level in range(int(refinements)):
        level_cfg = refine(cfg, mode, level)
        try:
            error = float(run_experiment(level_cfg)["error_l2"].iloc[-1])
            status = "ok"
        except DecompositionError as exc:
            error, status = math.nan, f"{type(exc).__name__}: {exc}"
            logger.warning("Study level %d skipped: %s", level, status)
        order = math.nan
        if level > 0 and previous > 0.0 and error > 0.0:
            order = math.log2(previous / error)
        logger.debug("Study %s level %d: error %.6e order %.4f", mode, level, error, order)
        rows.append((level, error, order, status))
        previous = error
    return pd.DataFrame(rows, columns=study_columns)


def preset_scenarios(
    preset: str,
    file_path: Optional[str] = None,
    overrides: Optional[dict] = None,
    output_dir: Optional[str] = None,
) -> pd.DataFrame:
    """
    Run every entry of a scenario preset and summarize the final-time errors.

    Aliases resolve to their preset ("sigma_orders" runs fig5). When
    ``output_dir`` is given each series is written to
    ``<output_dir>/<preset>_<label>.csv`` and the summary to
    ``<output_dir>/<preset>_summary.csv``, with the canonical preset name.
    """
    name = preset_name(preset)
    rows = []
    for cfg in build_preset_configs(preset, file_path, overrides):
        series = run_experiment(cfg)
        if output_dir is not None:
            write_frame(series, os.path.join(output_dir, f"{name}_{cfg.label}.csv"))
        rows.append(
            {
                "label": cfg.label,
                "scheme": cfg.scheme,
                "sigma": cfg.sigma,
                "N1": cfg.N1,
                "Nsteps": cfg.Nsteps,
                "hhat": cfg.hhat,
                "error_at_T": float(series["error_l2"].iloc[-1]),
            }
        )
    summary = pd.DataFrame(rows)
    if output_dir is not None:
        write_frame(summary, os.path.join(output_dir, f"{name}_summary.csv"))
    return summary


def refinement_signature(cfg: ExperimentConfig, sigma: float = 0.5) -> pd.DataFrame:
    """
    Final-time errors of the weighted and factorized schemes at h and h/2,
    with tau and hhat fixed.

    The improvement of a scheme is error(h) / error(h/2), reported on the
    refined row together with ``improvement_ratio`` = weighted improvement /
    factorized improvement. At tau = 0.01 the weighted sigma = 1/2 error is
    dominated by its tau^2 term and barely moves, while the factorized error
    grows under space refinement at fixed tau and hhat, so the ratio exceeds 2.
    """
    rows = []
    for level in (0, 1):
        level_cfg = refine(cfg, "space", level)
        errors = {}
        for scheme in ("weighted", "factorized"):
            run_cfg = with_overrides(level_cfg, scheme=scheme, sigma=sigma)
            errors[scheme] = float(run_experiment(run_cfg)["error_l2"].iloc[-1])
        rows.append(
            {
                "N1": level_cfg.N1,
                "h": level_cfg.l1 / level_cfg.N1,
                "weighted_error": errors["weighted"],
                "factorized_error": errors["factorized"],
            }
        )
    frame = pd.DataFrame(rows)
    for scheme in ("weighted", "factorized"):
        errors = frame[f"{scheme}_error"]
        frame[f"{scheme}_improvement"] = [math.nan, errors.iloc[0] / errors.iloc[1]]
    frame["improvement_ratio"] = frame["weighted_improvement"] / frame["factorized_improvement"]
    return frame
