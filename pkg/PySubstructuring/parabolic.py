# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
import math
from dataclasses import dataclass
from typing import Callable, Iterator, Optional

import numpy as np

from PySubstructuring.decomposition import Decomposition
from PySubstructuring.diffusion_operator import (
    DEFAULT_REL_TOL,
    DiffusionOperator,
    apply,
    masked_expression,
    shifted_expression,
    solve_spd,
)
from PySubstructuring.exceptions import (
    InvalidArgumentError,
    NumericalError,
    NumericalFailure,
    UnsupportedDecompositionError,
)
from PySubstructuring.grid import Grid, GridFunction, evaluate_pointwise
from PySubstructuring.schemes import (
    default_rhs_sampling,
    half_threshold_schemes,
    parabolic_schemes,
    rhs_sampling_rules,
)

logger = logging.getLogger(__name__)

SourceFunction = Callable[[np.ndarray, np.ndarray, float], np.ndarray]


@dataclass(frozen=True)
class ParabolicState:
    y: GridFunction
    t: float
    n: int


@dataclass(frozen=True)
class SchemeConfig:
    """
    Time-stepping scheme selection.

    Args:
        kind (str): One of ``schemes.parabolic_schemes``.
        sigma (float): Scheme weight.
        tau (float): Time step, non-negative.
        rhs_sampling (str): Rule for the source time level, defaults per kind.
        decomposition (Decomposition): Required for every kind except weighted.
        staged (bool): Componentwise only, use the increment form whose
            right-hand side is (E + sigma tau chi A) chi phi.
        rel_tol (float): Relative residual target of the inner solves.
    """

    kind: str
    sigma: float
    tau: float
    rhs_sampling: Optional[str] = None
    decomposition: Optional[Decomposition] = None
    staged: bool = False
    rel_tol: float = DEFAULT_REL_TOL

    def __post_init__(self):
        if self.kind not in parabolic_schemes:
            raise InvalidArgumentError(
                f"Unknown scheme {self.kind!r}, expected one of {parabolic_schemes}"
            )
        if not math.isfinite(self.sigma):
            raise InvalidArgumentError(f"sigma must be finite, got {self.sigma}")
        if not (math.isfinite(self.tau) and self.tau >= 0.0):
            raise InvalidArgumentError(f"tau must be >= 0, got {self.tau}")
        if self.rhs_sampling is None:
            object.__setattr__(self, "rhs_sampling", default_rhs_sampling[self.kind])
        if self.rhs_sampling not in rhs_sampling_rules:
            raise InvalidArgumentError(
                f"Unknown rhs sampling {self.rhs_sampling!r}, "
                f"expected one of {rhs_sampling_rules}"
            )
        if self.kind != "weighted" and self.decomposition is None:
            raise InvalidArgumentError(f"Scheme {self.kind!r} needs a decomposition")
        if self.below_threshold:
            logger.warning(
                "Scheme %s with sigma=%g is below its stability threshold %g",
                self.kind,
                self.sigma,
                self.threshold,
            )

    @property
    def threshold(self) -> float:
        """sigma >= 1/2, or p/2 for the regularized scheme."""
        if self.kind in half_threshold_schemes:
            return 0.5
        return self.decomposition.p / 2.0

    @property
    def below_threshold(self) -> bool:
        return self.sigma < self.threshold

    def with_tau(self, tau: float) -> "SchemeConfig":
        return SchemeConfig(
            self.kind,
            self.sigma,
            tau,
            self.rhs_sampling,
            self.decomposition,
            self.staged,
            self.rel_tol,
        )


def source_time(cfg: SchemeConfig, t: float) -> float:
    """Time level at which the source is sampled for the step starting at t."""
    rule = cfg.rhs_sampling
    if rule == "start":
        return t
    if rule == "mid":
        return t + 0.5 * cfg.tau
    if rule == "end":
        return t + cfg.tau
    return t + cfg.sigma * cfg.tau


def sample_source(f: Optional[SourceFunction], grid: Grid, t: float) -> GridFunction:
    """phi = f(., ., t) on the interior nodes; ``None`` means f = 0."""
    if f is None:
        return GridFunction.zeros(grid)
    x1, x2 = grid.coordinates()
    return GridFunction(evaluate_pointwise(lambda a, b: f(a, b, t), x1, x2), grid)


def resolve(
    A: DiffusionOperator,
    coeff: float,
    mask: Optional[np.ndarray],
    rhs: GridFunction,
    rel_tol: float = DEFAULT_REL_TOL,
) -> GridFunction:
    """Solve (E + coeff chi A) x = rhs; chi = E when mask is None."""
    if coeff == 0.0:
        return rhs
    return solve_spd(shifted_expression(A, coeff, mask), rhs, rel_tol)


def _masked_apply(A: DiffusionOperator, mask: np.ndarray, y: GridFunction) -> GridFunction:
    return apply(masked_expression(A, mask), y)


def _advance(state: ParabolicState, y: GridFunction, tau: float) -> ParabolicState:
    return ParabolicState(y, state.t + tau, state.n + 1)


def _phi(state: ParabolicState, cfg: SchemeConfig, f) -> GridFunction:
    return sample_source(f, state.y.grid, source_time(cfg, state.t))


def step_weighted(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """(E + sigma tau A) y1 = (E - (1 - sigma) tau A) y + tau phi."""
    sigma, tau = cfg.sigma, cfg.tau
    y = state.y
    rhs = y - ((1.0 - sigma) * tau) * apply(A, y) + tau * _phi(state, cfg, f)
    return _advance(state, resolve(A, sigma * tau, None, rhs, cfg.rel_tol), tau)


def _check_factorizable(dec: Decomposition):
    if dec.p != 2 or not dec.is_crisp:
        raise UnsupportedDecompositionError(
            "The factorized scheme needs a crisp two-component decomposition, "
            f"got p={dec.p} ({dec.splitting})"
        )


def step_factorized(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """
    Factorized regionally-additive step B1 B2 (y1 - y) / tau + A y = phi,
    with B_alpha = E + sigma tau chi_alpha A.

    The first factor solve leaves the rows off its mask explicit, so with the
    two-component split it is an explicit predictor on the interface followed
    by implicit subdomain solves with interface values frozen. The second
    solve is the implicit interface correction. ``factorized_commuted``
    swaps the factor order and with it the stage roles.
    """
    if cfg.kind not in ("factorized", "factorized_commuted"):
        raise InvalidArgumentError(f"step_factorized cannot run scheme {cfg.kind!r}")
    dec = cfg.decomposition
    _check_factorizable(dec)
    sigma, tau = cfg.sigma, cfg.tau
    y = state.y
    g = tau * (_phi(state, cfg, f) - apply(A, y))
    first, second = (1, 2) if cfg.kind == "factorized" else (2, 1)
    zeta = resolve(A, sigma * tau, dec.mask(first), g, cfg.rel_tol)
    logger.debug("Factorized step %d: first factor (chi_%d) solved", state.n, first)
    delta = resolve(A, sigma * tau, dec.mask(second), zeta, cfg.rel_tol)
    logger.debug("Factorized step %d: second factor (chi_%d) solved", state.n, second)
    return _advance(state, y + delta, tau)


def step_componentwise(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """
    Sequential substeps alpha = 1..p, each advancing the latest iterate:
    y <- y - tau (E + sigma tau chi A)^-1 chi A y + tau chi phi.
    """
    dec = cfg.decomposition
    sigma, tau = cfg.sigma, cfg.tau
    phi = _phi(state, cfg, f)
    y = state.y
    for alpha in range(1, dec.p + 1):
        chi = dec.mask(alpha)
        chi_phi = GridFunction(chi * phi.values, y.grid)
        if cfg.staged:
            rhs = -tau * _masked_apply(A, chi, y) + tau * (
                chi_phi + (sigma * tau) * _masked_apply(A, chi, chi_phi)
            )
            y = y + resolve(A, sigma * tau, chi, rhs, cfg.rel_tol)
        else:
            z = resolve(A, sigma * tau, chi, _masked_apply(A, chi, y), cfg.rel_tol)
            y = y - tau * z + tau * chi_phi
    return _advance(state, y, tau)


def step_componentwise_symmetrized(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """
    Forward sweep alpha = 1..p then reverse sweep alpha = p..1, each substep
    (E + sigma (tau/2) chi A) y_new = (E - (1 - sigma) (tau/2) chi A) y
    + (tau/2) chi phi.
    """
    dec = cfg.decomposition
    half = 0.5 * cfg.tau
    phi = _phi(state, cfg, f)
    y = state.y
    order = list(range(1, dec.p + 1))
    for alpha in order + order[::-1]:
        chi = dec.mask(alpha)
        rhs = -half * _masked_apply(A, chi, y) + half * GridFunction(
            chi * phi.values, y.grid
        )
        y = y + resolve(A, cfg.sigma * half, chi, rhs, cfg.rel_tol)
    return _advance(state, y, cfg.tau)


def step_regularized(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """y1 = y - tau sum_alpha (E + sigma tau chi_alpha A)^-1 chi_alpha A y + tau phi."""
    dec = cfg.decomposition
    sigma, tau = cfg.sigma, cfg.tau
    y = state.y
    correction = GridFunction.zeros(y.grid)
    for alpha in range(1, dec.p + 1):
        chi = dec.mask(alpha)
        correction = correction + resolve(
            A, sigma * tau, chi, _masked_apply(A, chi, y), cfg.rel_tol
        )
    return _advance(state, y - tau * correction + tau * _phi(state, cfg, f), tau)


_steppers = {
    "weighted": step_weighted,
    "factorized": step_factorized,
    "factorized_commuted": step_factorized,
    "componentwise": step_componentwise,
    "componentwise_symmetrized": step_componentwise_symmetrized,
    "regularized": step_regularized,
}


def step(
    state: ParabolicState, A: DiffusionOperator, cfg: SchemeConfig, f=None
) -> ParabolicState:
    """Advance one step with the scheme selected by ``cfg.kind``."""
    if state.y.grid != A.grid:
        raise InvalidArgumentError("State and operator live on different grids")
    return _steppers[cfg.kind](state, A, cfg, f)


def integrate(
    y0: GridFunction,
    A: DiffusionOperator,
    cfg: SchemeConfig,
    steps: int,
    f: Optional[SourceFunction] = None,
) -> Iterator[ParabolicState]:
    """
    Yield the states at levels 0..steps.

    Raises:
        NumericalFailure: If a step fails or produces non-finite values; the
            failing step index is attached.
    """
    if cfg.kind != "weighted":
        if cfg.decomposition.grid != A.grid:
            raise InvalidArgumentError("Decomposition and operator grids differ")
        if cfg.kind in ("factorized", "factorized_commuted"):
            _check_factorizable(cfg.decomposition)
    state = ParabolicState(y0, 0.0, 0)
    yield state
    for n in range(1, steps + 1):
        try:
            state = step(state, A, cfg, f)
        except NumericalError as exc:
            raise NumericalFailure(f"Step {n} failed: {exc}", step=n) from exc
        # t = n tau without accumulated round-off
        state = ParabolicState(state.y, n * cfg.tau, n)
        if not np.all(np.isfinite(state.y.values)):
            raise NumericalFailure(f"Non-finite values at step {n}", step=n)
        yield state
