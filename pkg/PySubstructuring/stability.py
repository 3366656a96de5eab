# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
"""
Dense verification engine for small grids.

Transition operators are formed in the symmetrized variables w = T y of the
stability proofs, where the norm bound ||S|| <= 1 certifies unconditional
stability. A^(1/2) exists only here.
"""
import logging
import math
from dataclasses import asdict, dataclass, field
from typing import List, Optional, Tuple, Union

import numpy as np
import pandas as pd
import scipy.linalg

from PySubstructuring.decomposition import Decomposition
from PySubstructuring.diffusion_operator import (
    DiffusionOperator,
    OperatorExpression,
    apply,
    diffusion_expression,
    energy_norm,
    masked_expression,
    shifted_expression,
)
from PySubstructuring.exceptions import (
    ContractError,
    InvalidArgumentError,
    SizeError,
    UnsupportedDecompositionError,
)
from PySubstructuring.grid import Grid, GridFunction, inner_product
from PySubstructuring.hyperbolic import HyperbolicState
from PySubstructuring.hyperbolic import integrate as integrate_hyperbolic
from PySubstructuring.parabolic import (
    ParabolicState,
    SchemeConfig,
    integrate,
    resolve,
)
from PySubstructuring.schemes import DENSE_NODE_CAP, energy_kinds

logger = logging.getLogger(__name__)

NORM_SLACK = 1e-10
ENERGY_REL_SLACK = 1e-10
ENERGY_ABS_SLACK = 1e-14
NEGATIVE_CLAMP = 1e-13
ENERGY_REL_TOL = 1e-13

factor_modes = ["parabolic", "regularized", "componentwise", "symmetrized", "hyperbolic"]


def _check_size(n: int):
    if n > DENSE_NODE_CAP:
        raise SizeError(f"Dense operators are limited to {DENSE_NODE_CAP} nodes, got {n}")


@dataclass(frozen=True, eq=False)
class DenseOperator:
    matrix: np.ndarray
    grid: Grid = field(repr=False)

    def __post_init__(self):
        n = self.grid.n_interior
        _check_size(n)
        matrix = np.asarray(self.matrix, dtype=np.float64)
        if matrix.shape != (n, n):
            raise InvalidArgumentError(
                f"Dense operator of shape {matrix.shape} on {n} interior nodes"
            )
        object.__setattr__(self, "matrix", matrix)

    def norm(self) -> float:
        """Spectral norm from the eigenvalues of M^T M."""
        gram = self.matrix.T @ self.matrix
        top = scipy.linalg.eigvalsh(0.5 * (gram + gram.T))[-1]
        return math.sqrt(max(top, 0.0))

    def min_eigenvalue(self) -> float:
        """Smallest eigenvalue of the symmetric part."""
        return float(scipy.linalg.eigvalsh(0.5 * (self.matrix + self.matrix.T))[0])

    def asymmetry(self) -> float:
        return float(np.max(np.abs(self.matrix - self.matrix.T)))


def dense_matrix(
    op: Union[OperatorExpression, DiffusionOperator], grid: Optional[Grid] = None
) -> DenseOperator:
    """
    Explicit matrix of an operator, column j being the image of basis vector j.

    Raises:
        SizeError: If the grid has more than 4096 interior nodes.
    """
    grid = grid if grid is not None else op.grid
    if grid != op.grid:
        raise InvalidArgumentError("Operator and grid differ")
    _check_size(grid.n_interior)
    if isinstance(op, DiffusionOperator):
        return DenseOperator(op.matrix.toarray(), grid)
    return DenseOperator(op.apply_array(np.eye(grid.n_interior)), grid)


def _dense_a(A: DiffusionOperator) -> np.ndarray:
    _check_size(A.n)
    return A.matrix.toarray()


def _square_root(A: DiffusionOperator) -> Tuple[np.ndarray, np.ndarray]:
    """(A^(1/2), A^(-1/2)) by symmetric eigendecomposition."""
    eigenvalues, vectors = scipy.linalg.eigh(_dense_a(A))
    if eigenvalues[0] <= 0.0:
        raise ContractError(
            f"Operator is not positive definite, smallest eigenvalue {eigenvalues[0]:.3e}"
        )
    root = np.sqrt(eigenvalues)
    return (vectors * root) @ vectors.T, (vectors / root) @ vectors.T


def _resolvent_factor(c: float, c_prime: float, C: np.ndarray) -> np.ndarray:
    """(E + c C)^-1 (E - c' C)."""
    eye = np.eye(C.shape[0])
    return np.linalg.solve(eye + c * C, eye - c_prime * C)


@dataclass(frozen=True, eq=False)
class SymmetrizedOperators:
    """C_alpha = A^(1/2) chi_alpha A^(1/2) and the per-component factors."""

    sqrt_a: np.ndarray = field(repr=False)
    components: List[DenseOperator]
    factors: List[DenseOperator]
    mode: str


def symmetrized_operators(
    A: DiffusionOperator,
    dec: Decomposition,
    sigma: float,
    tau: float,
    mode: str = "parabolic",
) -> SymmetrizedOperators:
    """
    Symmetrized components and their contraction factors.

    Factors by mode, c = sigma tau:
        parabolic: (E + c C)^-1 (E - c C)
        regularized: (E + c C)^-1 (E - (p - sigma) tau C)
        componentwise: (E + c C)^-1 (E - (1 - sigma) tau C)
        symmetrized: (E + c/2 C)^-1 (E - (1 - sigma) tau/2 C)
        hyperbolic: E - (p tau^2 / 4) (E + sigma tau^2 C)^-1 C

    Raises:
        ContractError: If A is not positive definite.
    """
    if mode not in factor_modes:
        raise InvalidArgumentError(f"Unknown mode {mode!r}, expected one of {factor_modes}")
    if dec.grid != A.grid:
        raise InvalidArgumentError("Decomposition and operator grids differ")
    sqrt_a, _ = _square_root(A)
    grid, p = A.grid, dec.p
    eye = np.eye(A.n)
    components, factors = [], []
    for mask in dec.masks:
        C = (sqrt_a * mask[None, :]) @ sqrt_a
        C = 0.5 * (C + C.T)
        components.append(DenseOperator(C, grid))
        if mode == "parabolic":
            S = _resolvent_factor(sigma * tau, sigma * tau, C)
        elif mode == "regularized":
            S = _resolvent_factor(sigma * tau, (p - sigma) * tau, C)
        elif mode == "componentwise":
            S = _resolvent_factor(sigma * tau, (1.0 - sigma) * tau, C)
        elif mode == "symmetrized":
            S = _resolvent_factor(0.5 * sigma * tau, 0.5 * (1.0 - sigma) * tau, C)
        else:
            R = np.linalg.solve(eye + sigma * tau * tau * C, C)
            S = eye - 0.25 * p * tau * tau * R
        factors.append(DenseOperator(S, grid))
    return SymmetrizedOperators(sqrt_a, components, factors, mode)


@dataclass(frozen=True, eq=False)
class Transition:
    """
    One-step map S in the variables w = T y. ``state_map()`` returns the
    map on y itself, T^-1 S T.
    """

    kind: str
    operator: DenseOperator
    change: np.ndarray = field(repr=False)
    factors: List[DenseOperator] = field(default_factory=list)

    def norm(self) -> float:
        return self.operator.norm()

    def factor_norms(self) -> List[float]:
        return [factor.norm() for factor in self.factors]

    def state_map(self) -> np.ndarray:
        return np.linalg.solve(self.change, self.operator.matrix @ self.change)


def transition_operator(
    cfg: SchemeConfig, A: DiffusionOperator, dec: Optional[Decomposition] = None
) -> Transition:
    """
    Dense symmetrized transition operator of a scheme.

    Args:
        cfg (SchemeConfig): The scheme.
        A (DiffusionOperator): The diffusion operator.
        dec (Decomposition): Overrides ``cfg.decomposition`` when given.

    Returns:
        Transition: S, the change of variables T and the component factors.

    Raises:
        SizeError: If the grid exceeds the dense cap.
        UnsupportedDecompositionError: For factorized kinds on a decomposition
            other than a crisp two-component one.
    """
    dec = dec if dec is not None else cfg.decomposition
    sigma, tau, grid = cfg.sigma, cfg.tau, A.grid
    A_d = _dense_a(A)
    eye = np.eye(A.n)

    if cfg.kind == "weighted":
        sqrt_a, _ = _square_root(A)
        S = np.linalg.solve(eye + sigma * tau * A_d, eye - (1.0 - sigma) * tau * A_d)
        return Transition(cfg.kind, DenseOperator(S, grid), sqrt_a)

    if cfg.kind in ("factorized", "factorized_commuted"):
        if dec.p != 2 or not dec.is_crisp:
            raise UnsupportedDecompositionError(
                "The factorized scheme needs a crisp two-component decomposition"
            )
        ops = symmetrized_operators(A, dec, sigma, tau, "parabolic")
        first, second = (0, 1) if cfg.kind == "factorized" else (1, 0)
        B_first = eye + sigma * tau * ops.components[first].matrix
        B_second = eye + sigma * tau * ops.components[second].matrix
        right = np.linalg.solve(B_second, A_d).T
        S = eye - tau * np.linalg.solve(B_first, right)
        B_outer = eye + sigma * tau * dec.masks[second][:, None] * A_d
        return Transition(
            cfg.kind, DenseOperator(S, grid), ops.sqrt_a @ B_outer, ops.factors
        )

    if cfg.kind == "regularized":
        ops = symmetrized_operators(A, dec, sigma, tau, "regularized")
        S = eye.copy()
        for C in ops.components:
            S -= tau * np.linalg.solve(eye + sigma * tau * C.matrix, C.matrix)
        return Transition(cfg.kind, DenseOperator(S, grid), ops.sqrt_a, ops.factors)

    if cfg.kind == "componentwise":
        ops = symmetrized_operators(A, dec, sigma, tau, "componentwise")
        S = eye.copy()
        for factor in ops.factors:
            S = factor.matrix @ S
        return Transition(cfg.kind, DenseOperator(S, grid), ops.sqrt_a, ops.factors)

    ops = symmetrized_operators(A, dec, sigma, tau, "symmetrized")
    forward = eye.copy()
    for factor in ops.factors:
        forward = factor.matrix @ forward
    backward = eye.copy()
    for factor in reversed(ops.factors):
        backward = factor.matrix @ backward
    # S_1 ... S_p S_p ... S_1
    S = backward @ forward
    return Transition(cfg.kind, DenseOperator(S, grid), ops.sqrt_a, ops.factors)


def dense_a_tilde(
    A: DiffusionOperator, dec: Decomposition, sigma: float, tau: float
) -> DenseOperator:
    """A~ = sum_alpha (E + sigma tau^2 chi_alpha A)^-1 chi_alpha A in the y variables."""
    A_d = _dense_a(A)
    eye = np.eye(A.n)
    total = np.zeros_like(A_d)
    for mask in dec.masks:
        chi_a = mask[:, None] * A_d
        total += np.linalg.solve(eye + sigma * tau * tau * chi_a, chi_a)
    return DenseOperator(total, A.grid)


def d_tilde_positivity(
    A: DiffusionOperator, dec: Decomposition, sigma: float, tau: float
) -> float:
    """
    Smallest eigenvalue of D~ = E - (tau^2 / 4) sum_alpha (E + sigma tau^2 C_alpha)^-1 C_alpha,
    the mean of the per-component factors D~_alpha.
    """
    ops = symmetrized_operators(A, dec, sigma, tau, "hyperbolic")
    D = sum(factor.matrix for factor in ops.factors) / dec.p
    return float(scipy.linalg.eigvalsh(0.5 * (D + D.T))[0])


@dataclass(frozen=True, eq=False)
class EnergyFunctional:
    """
    Monitored functional of a scheme.

    Kinds: ``d_parabolic`` ||y||_D with D = A + (sigma - 1/2) tau A^2,
    ``b2_a`` ||B y||_A with B = E + sigma tau chi_component A,
    ``s_hyperbolic_weighted`` and ``s_hyperbolic_regularized`` the
    three-level functionals S^n, ``a_norm`` ||y||_A.
    """

    kind: str
    A: DiffusionOperator = field(repr=False)
    sigma: float = 0.5
    tau: float = 0.0
    decomposition: Optional[Decomposition] = field(default=None, repr=False)
    component: int = 2
    rel_tol: float = ENERGY_REL_TOL

    def __post_init__(self):
        if self.kind not in energy_kinds:
            raise InvalidArgumentError(
                f"Unknown energy kind {self.kind!r}, expected one of {energy_kinds}"
            )
        if self.kind in ("b2_a", "s_hyperbolic_regularized") and self.decomposition is None:
            raise InvalidArgumentError(f"Energy {self.kind!r} needs a decomposition")
        if self.sigma < self.threshold:
            logger.warning(
                "Energy %s used with sigma=%g below its threshold %g",
                self.kind,
                self.sigma,
                self.threshold,
            )

    @property
    def threshold(self) -> float:
        if self.kind in ("d_parabolic", "b2_a"):
            return 0.5
        if self.kind == "s_hyperbolic_weighted":
            return 0.25
        if self.kind == "s_hyperbolic_regularized":
            return self.decomposition.p / 4.0
        return -math.inf

    @property
    def levels(self) -> int:
        return 2 if self.kind.startswith("s_hyperbolic") else 1

    def a_tilde(self, v: GridFunction) -> GridFunction:
        total = GridFunction.zeros(v.grid)
        coeff = self.sigma * self.tau * self.tau
        for mask in self.decomposition.masks:
            chi_a_v = apply(masked_expression(self.A, mask), v)
            total = total + resolve(self.A, coeff, mask, chi_a_v, self.rel_tol)
        return total


def _single_level(state) -> GridFunction:
    if isinstance(state, ParabolicState):
        return state.y
    if isinstance(state, GridFunction):
        return state
    raise InvalidArgumentError("Expected a GridFunction or a ParabolicState")


def _clamped(value: float, scale: float) -> float:
    if value < 0.0:
        if value > -NEGATIVE_CLAMP * scale:
            return 0.0
        raise ContractError(f"Energy functional is negative: {value:.6e}")
    return value


def evaluate_energy(fn: EnergyFunctional, state) -> float:
    """
    Value of the functional on one level (parabolic kinds) or on a
    HyperbolicState (hyperbolic kinds). Norm kinds return the norm, the
    hyperbolic kinds return S^n itself.

    Below the validity threshold the value is still returned when the form is
    numerically nonnegative; the functional warned once when it was built.
    """
    A = fn.A
    A_expr = diffusion_expression(A)
    if fn.kind == "a_norm":
        return energy_norm(A_expr, _single_level(state))
    if fn.kind == "d_parabolic":
        D = A_expr + ((fn.sigma - 0.5) * fn.tau) * (A_expr @ A_expr)
        return energy_norm(D, _single_level(state))
    if fn.kind == "b2_a":
        B = shifted_expression(
            A, fn.sigma * fn.tau, fn.decomposition.mask(fn.component)
        )
        return energy_norm(A_expr, apply(B, _single_level(state)))

    if not isinstance(state, HyperbolicState):
        raise InvalidArgumentError(f"Energy {fn.kind!r} needs a HyperbolicState")
    eta, zeta = state.eta(fn.tau), state.zeta
    a_eta, a_zeta = apply(A, eta), apply(A, zeta)
    if fn.kind == "s_hyperbolic_weighted":
        value = inner_product(a_eta, eta) + (
            (fn.sigma - 0.25) * fn.tau**2
        ) * inner_product(a_eta, a_eta) + inner_product(a_zeta, a_zeta)
        scale = inner_product(a_eta, eta) + inner_product(a_zeta, a_zeta)
    else:
        value = (
            inner_product(a_eta, eta)
            - 0.25 * fn.tau**2 * inner_product(fn.a_tilde(eta), a_eta)
            + inner_product(fn.a_tilde(zeta), a_zeta)
        )
        scale = inner_product(a_eta, eta) + inner_product(a_zeta, zeta)
    return _clamped(value, scale)


def source_term(fn: EnergyFunctional, phi: GridFunction) -> float:
    """
    Source contribution entering the level bound of ``fn``: ||phi||,
    ||B_first^-1 phi||_A, ||phi||_A, or for the three-level kinds the squared
    norms ||phi||_A^2 and (A D^-1 A phi, phi) (dense).
    """
    A = fn.A
    if fn.kind == "d_parabolic":
        return phi.norm()
    if fn.kind == "a_norm":
        return energy_norm(A, phi)
    if fn.kind == "b2_a":
        first = 1 if fn.component == 2 else 2
        solved = resolve(
            A, fn.sigma * fn.tau, fn.decomposition.mask(first), phi, fn.rel_tol
        )
        return energy_norm(A, solved)
    if fn.kind == "s_hyperbolic_weighted":
        return energy_norm(A, phi) ** 2
    A_d = _dense_a(A)
    a_tilde = dense_a_tilde(A, fn.decomposition, fn.sigma, fn.tau).matrix
    D = A_d - 0.25 * fn.tau**2 * (A_d @ a_tilde)
    a_phi = A_d @ phi.values
    return float(a_phi @ np.linalg.solve(0.5 * (D + D.T), a_phi) * A.grid.cell_area)


def level_bound(fn: EnergyFunctional, energy: float, source: float) -> float:
    """
    Upper bound for the next level's functional given the current value and
    ``source_term(fn, phi)``.
    """
    tau = fn.tau
    if fn.kind == "d_parabolic":
        return math.sqrt(energy**2 + 0.5 * tau * source**2)
    if fn.kind in ("b2_a", "a_norm"):
        return energy + tau * source
    return hyperbolic_level_bound(energy, tau, source)


def hyperbolic_level_bound(energy: float, tau: float, source_sq: float) -> float:
    """S^(n+1) <= exp(tau) S^n + tau^2/2 exp(tau) / (exp(tau/2) - 1) ||phi||^2."""
    if tau == 0.0 or source_sq == 0.0:
        return math.exp(tau) * energy
    growth = math.exp(tau)
    return growth * energy + 0.5 * tau * tau * growth / math.expm1(0.5 * tau) * source_sq


def monitored_energy(cfg: SchemeConfig, A: DiffusionOperator) -> EnergyFunctional:
    """The functional whose decay certifies the parabolic scheme ``cfg``."""
    if cfg.kind == "weighted":
        return EnergyFunctional("d_parabolic", A, cfg.sigma, cfg.tau)
    if cfg.kind in ("factorized", "factorized_commuted"):
        component = 2 if cfg.kind == "factorized" else 1
        return EnergyFunctional(
            "b2_a", A, cfg.sigma, cfg.tau, cfg.decomposition, component=component
        )
    return EnergyFunctional("a_norm", A, cfg.sigma, cfg.tau, cfg.decomposition)


@dataclass(frozen=True)
class CertificationReport:
    kind: str
    sigma: float
    tau: float
    threshold: float
    transition_norm: float
    factor_norms: Tuple[float, ...]
    energy_monotone: bool
    max_energy_ratio: float
    passed: Optional[bool]

    @property
    def above_threshold(self) -> bool:
        return self.sigma >= self.threshold

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            [
                {
                    "kind": self.kind,
                    "sigma": self.sigma,
                    "tau": self.tau,
                    "threshold": self.threshold,
                    "transition_norm": self.transition_norm,
                    "max_factor_norm": max(self.factor_norms, default=float("nan")),
                    "energy_monotone": self.energy_monotone,
                    "max_energy_ratio": self.max_energy_ratio,
                    "passed": self.passed,
                }
            ]
        )


def _monotone(values: List[float]) -> Tuple[bool, float]:
    ratio, ok = 0.0, True
    for before, after in zip(values, values[1:]):
        if after > before * (1.0 + ENERGY_REL_SLACK) + ENERGY_ABS_SLACK:
            ok = False
        if before > 0.0:
            ratio = max(ratio, after / before)
    return ok, ratio


def certify(
    cfg: SchemeConfig,
    A: DiffusionOperator,
    dec: Optional[Decomposition] = None,
    steps: int = 10,
    trajectories: int = 3,
    seed: int = 0,
) -> CertificationReport:
    """
    Certify a parabolic scheme: transition norm, factor norms and energy
    decay along random f = 0 trajectories.

    ``passed`` is only set when sigma is at or above the scheme's threshold;
    below it the numbers are reported without a verdict.
    """
    if dec is not None and dec is not cfg.decomposition:
        cfg = SchemeConfig(
            cfg.kind, cfg.sigma, cfg.tau, cfg.rhs_sampling, dec, cfg.staged, cfg.rel_tol
        )
    transition = transition_operator(cfg, A)
    fn = monitored_energy(cfg, A)
    rng = np.random.default_rng(seed)
    monotone, worst = True, 0.0
    for _ in range(trajectories):
        y0 = GridFunction(rng.standard_normal(A.n), A.grid)
        energies = [evaluate_energy(fn, state) for state in integrate(y0, A, cfg, steps)]
        ok, ratio = _monotone(energies)
        monotone, worst = monotone and ok, max(worst, ratio)
    norm = transition.norm()
    passed = None
    if not cfg.below_threshold:
        passed = norm <= 1.0 + NORM_SLACK and monotone
    logger.info(
        "Certified %s sigma=%g tau=%g: ||S||=%.12g, monotone=%s, passed=%s",
        cfg.kind,
        cfg.sigma,
        cfg.tau,
        norm,
        monotone,
        passed,
    )
    return CertificationReport(
        cfg.kind,
        cfg.sigma,
        cfg.tau,
        cfg.threshold,
        norm,
        tuple(transition.factor_norms()),
        monotone,
        worst,
        passed,
    )


@dataclass(frozen=True)
class HyperbolicCertificationReport:
    kind: str
    sigma: float
    tau: float
    threshold: float
    d_tilde_min_eigenvalue: float
    max_energy_drift: float
    passed: Optional[bool]

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame([asdict(self)])


def certify_hyperbolic(
    kind: str,
    A: DiffusionOperator,
    sigma: float,
    tau: float,
    dec: Optional[Decomposition] = None,
    steps: int = 50,
    seed: int = 0,
    conservation_tol: float = 1e-9,
) -> HyperbolicCertificationReport:
    """
    Certify a three-level scheme by energy conservation with f = 0 and, for
    the regularized scheme, positivity of D~.
    """
    energy_kind = "s_hyperbolic_weighted" if kind == "weighted" else "s_hyperbolic_regularized"
    fn = EnergyFunctional(energy_kind, A, sigma, tau, dec)
    rng = np.random.default_rng(seed)
    u0 = GridFunction(rng.standard_normal(A.n), A.grid)
    v0 = GridFunction(rng.standard_normal(A.n), A.grid)
    energies = [
        evaluate_energy(fn, state)
        for state in integrate_hyperbolic(
            u0, v0, A, kind, sigma, tau, steps, decomposition=dec, rel_tol=ENERGY_REL_TOL
        )
    ]
    drift = max(abs(value - energies[0]) for value in energies) / energies[0]
    positivity = (
        d_tilde_positivity(A, dec, sigma, tau) if kind == "regularized" else float("nan")
    )
    passed = None
    if sigma >= fn.threshold:
        passed = drift <= conservation_tol and (kind == "weighted" or positivity > 0.0)
    logger.info(
        "Certified hyperbolic %s sigma=%g tau=%g: drift=%.3e, passed=%s",
        kind,
        sigma,
        tau,
        drift,
        passed,
    )
    return HyperbolicCertificationReport(
        kind, sigma, tau, fn.threshold, positivity, drift, passed
    )
