# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from PySubstructuring.decomposition import Decomposition
from PySubstructuring.diffusion_operator import (
    DEFAULT_REL_TOL,
    DiffusionOperator,
    apply,
    masked_expression,
)
from PySubstructuring.exceptions import (
    InvalidArgumentError,
    NumericalError,
    NumericalFailure,
)
from PySubstructuring.grid import GridFunction
from PySubstructuring.parabolic import SourceFunction, resolve, sample_source
from PySubstructuring.schemes import hyperbolic_schemes

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HyperbolicState:
    """Two consecutive levels y^n (``y_curr``) and y^(n-1) (``y_prev``)."""

    y_curr: GridFunction
    y_prev: GridFunction
    t: float
    n: int

    def __post_init__(self):
        if self.y_curr.grid != self.y_prev.grid:
            raise InvalidArgumentError("Both levels must share one grid")
        if self.n < 1:
            raise InvalidArgumentError(f"Three-level state needs n >= 1, got {self.n}")

    @property
    def grid(self):
        return self.y_curr.grid

    def eta(self, tau: float) -> GridFunction:
        """(y^n - y^(n-1)) / tau."""
        if not tau > 0.0:
            raise InvalidArgumentError(f"eta needs tau > 0, got {tau}")
        return (1.0 / tau) * (self.y_curr - self.y_prev)

    @property
    def zeta(self) -> GridFunction:
        """(y^n + y^(n-1)) / 2."""
        return 0.5 * (self.y_curr + self.y_prev)


def init_second_level(
    u0: GridFunction,
    v0: GridFunction,
    A: DiffusionOperator,
    tau: float,
    phi0: GridFunction,
) -> HyperbolicState:
    """
    Start the three-level recursion: y0 = u0,
    y1 = u0 + tau v0 + tau^2 / 2 (phi0 - A u0).

    Raises:
        InvalidArgumentError: If the inputs live on different grids.
    """
    if not (u0.grid == v0.grid == phi0.grid == A.grid):
        raise InvalidArgumentError("Initial data and operator grids differ")
    if not (math.isfinite(tau) and tau >= 0.0):
        raise InvalidArgumentError(f"tau must be >= 0, got {tau}")
    y1 = u0 + tau * v0 + (0.5 * tau * tau) * (phi0 - apply(A, u0))
    return HyperbolicState(y1, u0, tau, 1)


def _advance(state: HyperbolicState, y_next: GridFunction, tau: float):
    return HyperbolicState(y_next, state.y_curr, state.t + tau, state.n + 1)


def step_threelevel_weighted(
    state: HyperbolicState,
    A: DiffusionOperator,
    sigma: float,
    tau: float,
    phi: GridFunction,
    rel_tol: float = DEFAULT_REL_TOL,
) -> HyperbolicState:
    """
    (E + sigma tau^2 A) y^(n+1) = (2E - (1 - 2 sigma) tau^2 A) y^n
    - (E + sigma tau^2 A) y^(n-1) + tau^2 phi.
    """
    tau2 = tau * tau
    y, y_prev = state.y_curr, state.y_prev
    rhs = (
        2.0 * y
        - ((1.0 - 2.0 * sigma) * tau2) * apply(A, y)
        - (y_prev + (sigma * tau2) * apply(A, y_prev))
        + tau2 * phi
    )
    return _advance(state, resolve(A, sigma * tau2, None, rhs, rel_tol), tau)


def step_regularized_hyperbolic(
    state: HyperbolicState,
    A: DiffusionOperator,
    dec: Decomposition,
    sigma: float,
    tau: float,
    phi: GridFunction,
    rel_tol: float = DEFAULT_REL_TOL,
) -> HyperbolicState:
    """
    y^(n+1) = 2 y^n - y^(n-1)
    - tau^2 sum_alpha (E + sigma tau^2 chi_alpha A)^-1 chi_alpha A y^n + tau^2 phi.
    """
    tau2 = tau * tau
    y = state.y_curr
    correction = GridFunction.zeros(y.grid)
    for alpha in range(1, dec.p + 1):
        chi = dec.mask(alpha)
        correction = correction + resolve(
            A, sigma * tau2, chi, apply(masked_expression(A, chi), y), rel_tol
        )
    return _advance(state, 2.0 * y - state.y_prev - tau2 * correction + tau2 * phi, tau)


def threshold(kind: str, dec: Optional[Decomposition] = None) -> float:
    """sigma >= 1/4 for the weighted scheme, p/4 for the regularized one."""
    return 0.25 if kind == "weighted" else dec.p / 4.0


def integrate(
    u0: GridFunction,
    v0: GridFunction,
    A: DiffusionOperator,
    kind: str,
    sigma: float,
    tau: float,
    steps: int,
    f: Optional[SourceFunction] = None,
    decomposition: Optional[Decomposition] = None,
    rel_tol: float = DEFAULT_REL_TOL,
) -> Iterator[HyperbolicState]:
    """
    Yield the states at levels 1..steps with phi^n = f(t^n).

    Raises:
        NumericalFailure: If a step fails or produces non-finite values.
    """
    if kind not in hyperbolic_schemes:
        raise InvalidArgumentError(
            f"Unknown hyperbolic scheme {kind!r}, expected one of {hyperbolic_schemes}"
        )
    if kind == "regularized" and decomposition is None:
        raise InvalidArgumentError("The regularized scheme needs a decomposition")
    if sigma < threshold(kind, decomposition):
        logger.warning(
            "Hyperbolic %s scheme with sigma=%g is below its stability threshold %g",
            kind,
            sigma,
            threshold(kind, decomposition),
        )
    grid = u0.grid
    state = init_second_level(u0, v0, A, tau, sample_source(f, grid, 0.0))
    yield state
    for n in range(2, steps + 1):
        phi = sample_source(f, grid, state.t)
        try:
            if kind == "weighted":
                state = step_threelevel_weighted(state, A, sigma, tau, phi, rel_tol)
            else:
                state = step_regularized_hyperbolic(
                    state, A, decomposition, sigma, tau, phi, rel_tol
                )
        except NumericalError as exc:
            raise NumericalFailure(f"Step {n} failed: {exc}", step=n) from exc
        state = HyperbolicState(state.y_curr, state.y_prev, n * tau, n)
        if not np.all(np.isfinite(state.y_curr.values)):
            raise NumericalFailure(f"Non-finite values at step {n}", step=n)
        yield state
