# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Tuple

import numpy as np
import scipy.linalg
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from PySubstructuring.exceptions import (
    CoefficientError,
    ContractError,
    InvalidArgumentError,
    NoConvergenceError,
    SizeError,
)
from PySubstructuring.grid import Grid, GridFunction, evaluate_pointwise, inner_product
from PySubstructuring.schemes import DENSE_NODE_CAP

logger = logging.getLogger(__name__)

DEFAULT_REL_TOL = 1e-10
NEGATIVE_CLAMP = 1e-13
SPECTRAL_SLACK = 1e-9


@dataclass(frozen=True, eq=False)
class DiffusionOperator:
    """
    Sparse symmetric 5-point diffusion operator over the interior nodes.

    Every off-diagonal entry is written once from its face coefficient and
    mirrored, so the matrix is symmetric bit for bit.
    """

    matrix: sp.csr_matrix
    kappa: float
    grid: Grid = field(repr=False)

    @property
    def n(self) -> int:
        return self.grid.n_interior

    def diagonal(self) -> np.ndarray:
        return self.matrix.diagonal()


@dataclass(frozen=True, eq=False)
class Factor:
    """One factor shift * E + coeff * chi * A; ``mask`` None stands for chi = E."""

    shift: float
    coeff: float
    mask: Optional[np.ndarray] = None

    @property
    def is_symmetric(self) -> bool:
        return self.mask is None or self.coeff == 0.0

    @property
    def is_spd(self) -> bool:
        return (
            self.is_symmetric
            and self.shift >= 0.0
            and self.coeff >= 0.0
            and (self.shift > 0.0 or self.coeff > 0.0)
        )

    @property
    def is_masked_resolvent(self) -> bool:
        return (
            self.mask is not None
            and self.shift > 0.0
            and self.coeff >= 0.0
            and bool(np.all(self.mask >= 0.0))
        )

    def apply_array(self, matrix: sp.csr_matrix, values: np.ndarray) -> np.ndarray:
        result = self.shift * values if self.shift != 0.0 else np.zeros_like(values)
        if self.coeff != 0.0:
            applied = matrix @ values
            if self.mask is not None:
                applied = _scale_rows(self.mask, applied)
            result = result + self.coeff * applied
        return result

    def diagonal(self, matrix_diagonal: np.ndarray) -> np.ndarray:
        mask = 1.0 if self.mask is None else self.mask
        return self.shift + self.coeff * mask * matrix_diagonal


@dataclass(frozen=True, eq=False)
class OperatorExpression:
    """
    A sum of scaled products (at most two factors each) over one
    DiffusionOperator. Products are applied right to left.
    """

    operator: DiffusionOperator
    terms: Tuple[Tuple[float, Tuple[Factor, ...]], ...]

    @property
    def grid(self) -> Grid:
        return self.operator.grid

    @property
    def is_symmetric(self) -> bool:
        # unmasked factors are polynomials in A and therefore commute
        return all(
            all(factor.is_symmetric for factor in factors) for _, factors in self.terms
        )

    @property
    def is_spd(self) -> bool:
        return bool(self.terms) and all(
            scale > 0.0 and all(factor.is_spd for factor in factors)
            for scale, factors in self.terms
        )

    @property
    def resolvent(self) -> Optional[Tuple[float, Factor]]:
        """(scale, factor) when the expression is a single masked resolvent factor."""
        if len(self.terms) == 1:
            scale, factors = self.terms[0]
            if scale > 0.0 and len(factors) == 1 and factors[0].is_masked_resolvent:
                return scale, factors[0]
        return None

    def apply_array(self, values: np.ndarray) -> np.ndarray:
        result = np.zeros_like(values, dtype=np.float64)
        for scale, factors in self.terms:
            partial = values
            for factor in reversed(factors):
                partial = factor.apply_array(self.operator.matrix, partial)
            result = result + scale * partial
        return result

    def diagonal_estimate(self) -> np.ndarray:
        """Positive diagonal used as the CG preconditioner."""
        matrix_diagonal = self.operator.diagonal()
        estimate = np.zeros(self.operator.n)
        for scale, factors in self.terms:
            partial = np.ones(self.operator.n)
            for factor in factors:
                partial = partial * factor.diagonal(matrix_diagonal)
            estimate = estimate + scale * partial
        return estimate

    def _check_operand(self, other: "OperatorExpression"):
        if other.operator is not self.operator:
            raise InvalidArgumentError(
                "Operator expressions refer to different diffusion operators"
            )

    def __add__(self, other: "OperatorExpression") -> "OperatorExpression":
        self._check_operand(other)
        return OperatorExpression(self.operator, self.terms + other.terms)

    def __sub__(self, other: "OperatorExpression") -> "OperatorExpression":
        return self + (-1.0) * other

    def __mul__(self, scalar: float) -> "OperatorExpression":
        return OperatorExpression(
            self.operator,
            tuple((float(scalar) * scale, factors) for scale, factors in self.terms),
        )

    __rmul__ = __mul__

    def __matmul__(self, other: "OperatorExpression") -> "OperatorExpression":
        self._check_operand(other)
        terms = []
        for left_scale, left in self.terms:
            for right_scale, right in other.terms:
                if len(left) + len(right) > 2:
                    raise InvalidArgumentError(
                        "Operator expressions support products of at most two factors"
                    )
                terms.append((left_scale * right_scale, left + right))
        return OperatorExpression(self.operator, tuple(terms))


def _scale_rows(mask: np.ndarray, values: np.ndarray) -> np.ndarray:
    if values.ndim == 1:
        return mask * values
    return mask[:, None] * values


def _expression(
    A: DiffusionOperator, shift: float, coeff: float, mask: Optional[np.ndarray]
) -> OperatorExpression:
    if mask is not None:
        mask = np.asarray(mask, dtype=np.float64)
        if mask.shape != (A.n,):
            raise InvalidArgumentError(
                f"Mask of shape {mask.shape} does not match {A.n} interior nodes"
            )
    return OperatorExpression(A, ((1.0, (Factor(float(shift), float(coeff), mask),)),))


def identity_expression(A: DiffusionOperator) -> OperatorExpression:
    """E."""
    return _expression(A, 1.0, 0.0, None)


def diffusion_expression(A: DiffusionOperator) -> OperatorExpression:
    """A."""
    return _expression(A, 0.0, 1.0, None)


def masked_expression(A: DiffusionOperator, mask: np.ndarray) -> OperatorExpression:
    """chi A, i.e. A followed by a row scaling with the mask."""
    return _expression(A, 0.0, 1.0, mask)


def shifted_expression(
    A: DiffusionOperator, coeff: float, mask: Optional[np.ndarray] = None
) -> OperatorExpression:
    """E + coeff * chi A (chi = E when mask is None)."""
    return _expression(A, 1.0, coeff, mask)


def assemble_diffusion(
    grid: Grid, k: Callable[[np.ndarray, np.ndarray], np.ndarray], kappa: float
) -> DiffusionOperator:
    """
    Assemble the 5-point diffusion operator with k sampled at face midpoints.

    Args:
        grid (Grid): The computational grid.
        k (Callable): Pointwise coefficient function k(x1, x2).
        kappa (float): Lower bound of k, must be positive.

    Returns:
        DiffusionOperator: The assembled operator in CSR layout.

    Raises:
        InvalidArgumentError: If kappa is not positive.
        CoefficientError: If k < kappa at one of the sampled faces.
    """
    if not kappa > 0.0:
        raise InvalidArgumentError(f"kappa must be positive, got {kappa}")
    n1, n2 = grid.N1 - 1, grid.N2 - 1
    h1, h2 = grid.h1, grid.h2

    # x1-faces (i1 + 1/2, i2): i1 = 0..N1-1, i2 = 1..N2-1
    fx2, fx1 = np.meshgrid(np.arange(1, grid.N2), np.arange(grid.N1), indexing="ij")
    kx = evaluate_pointwise(k, (fx1 + 0.5) * h1, fx2 * h2)
    # x2-faces (i1, i2 + 1/2): i1 = 1..N1-1, i2 = 0..N2-1
    fy2, fy1 = np.meshgrid(np.arange(grid.N2), np.arange(1, grid.N1), indexing="ij")
    ky = evaluate_pointwise(k, fy1 * h1, (fy2 + 0.5) * h2)

    for values, c1, c2 in ((kx, fx1 + 0.5, fx2), (ky, fy1, fy2 + 0.5)):
        below = ~(values >= kappa)
        if np.any(below):
            j = np.flatnonzero(below.ravel())[0]
            x1, x2 = c1.ravel()[j] * h1, c2.ravel()[j] * h2
            raise CoefficientError(
                f"k({x1:.6g}, {x2:.6g}) = {values.ravel()[j]:.6g} "
                f"is below kappa = {kappa:.6g} at this face"
            )

    wx = kx / h1**2
    wy = ky / h2**2
    diagonal = (wx[:, :-1] + wx[:, 1:]) + (wy[:-1, :] + wy[1:, :])

    index = np.arange(n1 * n2).reshape(n2, n1)
    rows = [index.ravel()]
    cols = [index.ravel()]
    data = [diagonal.ravel()]
    # shared face coefficients written to (r, c) and (c, r)
    left, right, off_x = index[:, :-1].ravel(), index[:, 1:].ravel(), wx[:, 1:-1].ravel()
    below_, above, off_y = index[:-1, :].ravel(), index[1:, :].ravel(), wy[1:-1, :].ravel()
    rows += [left, right, below_, above]
    cols += [right, left, above, below_]
    data += [-off_x, -off_x, -off_y, -off_y]

    matrix = sp.csr_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n1 * n2, n1 * n2),
    )
    matrix.sort_indices()
    logger.debug(
        "Assembled diffusion operator on %dx%d interior nodes, nnz=%d",
        n1,
        n2,
        matrix.nnz,
    )
    return DiffusionOperator(matrix, float(kappa), grid)


def _check_grid(op: OperatorExpression, u: GridFunction):
    if u.grid != op.grid:
        raise InvalidArgumentError("Operator and grid function live on different grids")


def apply(op: OperatorExpression, u: GridFunction) -> GridFunction:
    """Action of the operator expression on u."""
    if isinstance(op, DiffusionOperator):
        op = diffusion_expression(op)
    _check_grid(op, u)
    return GridFunction(op.apply_array(u.values), u.grid)


def _pcg(
    matvec: Callable[[np.ndarray], np.ndarray],
    diagonal: np.ndarray,
    rhs: np.ndarray,
    rel_tol: float,
) -> np.ndarray:
    n = rhs.size
    if n == 0 or not np.any(rhs):
        return np.zeros_like(rhs)
    operator = spla.LinearOperator((n, n), matvec=matvec, dtype=np.float64)
    preconditioner = spla.LinearOperator(
        (n, n), matvec=lambda r: r / diagonal, dtype=np.float64
    )
    iterations = [0]

    def count(_):
        iterations[0] += 1

    solution, info = spla.cg(
        operator,
        rhs,
        rtol=rel_tol,
        atol=0.0,
        maxiter=10 * n,
        M=preconditioner,
        callback=count,
    )
    residual = np.linalg.norm(matvec(solution) - rhs) / np.linalg.norm(rhs)
    if info != 0 or not np.all(np.isfinite(solution)):
        raise NoConvergenceError(
            f"CG did not converge in {iterations[0]} iterations "
            f"(relative residual {residual:.3e}, target {rel_tol:.1e})",
            residual=float(residual),
            iterations=iterations[0],
        )
    logger.debug("CG converged in %d iterations, residual %.3e", iterations[0], residual)
    return solution


def _solve_masked_resolvent(
    op: OperatorExpression, scale: float, factor: Factor, rhs: np.ndarray, rel_tol: float
) -> np.ndarray:
    """
    Solve scale * (shift E + coeff chi A) x = rhs.

    Off the mask support x = rhs / (scale * shift). On the support S the rows
    are divided by chi, which leaves the SPD system
    (shift / chi_S + coeff A_SS) x_S = rhs_S / (scale chi_S) - coeff A_SN x_N.
    """
    b = rhs / scale
    mask = factor.mask
    support = np.flatnonzero(mask > 0.0)
    outside = np.flatnonzero(mask == 0.0)
    solution = np.empty_like(b)
    solution[outside] = b[outside] / factor.shift
    if support.size == 0:
        return solution
    matrix = op.operator.matrix
    chi = mask[support]
    reduced = matrix[support][:, support]
    coupling = matrix[support][:, outside]
    reduced_rhs = b[support] / chi - factor.coeff * (coupling @ solution[outside])
    reduced_shift = factor.shift / chi
    solution[support] = _pcg(
        lambda v: reduced_shift * v + factor.coeff * (reduced @ v),
        reduced_shift + factor.coeff * reduced.diagonal(),
        reduced_rhs,
        rel_tol,
    )
    return solution


def solve_spd(
    op: OperatorExpression, rhs: GridFunction, rel_tol: float = DEFAULT_REL_TOL
) -> GridFunction:
    """
    Solve op x = rhs by diagonally preconditioned conjugate gradients.

    A single masked factor E + c chi A is not symmetric; it is reduced to an
    SPD system on the support of chi before iterating.

    Args:
        op (OperatorExpression): SPD expression or single masked resolvent.
        rhs (GridFunction): Right-hand side.
        rel_tol (float): Relative residual target, positive.

    Returns:
        GridFunction: The solution.

    Raises:
        ContractError: If the expression is neither SPD nor a masked resolvent.
        NoConvergenceError: If 10 * n iterations do not reach rel_tol.
    """
    if isinstance(op, DiffusionOperator):
        op = diffusion_expression(op)
    _check_grid(op, rhs)
    if not rel_tol > 0.0:
        raise InvalidArgumentError(f"rel_tol must be positive, got {rel_tol}")
    resolvent = op.resolvent
    if op.is_spd:
        values = _pcg(op.apply_array, op.diagonal_estimate(), rhs.values, rel_tol)
    elif resolvent is not None:
        values = _solve_masked_resolvent(op, *resolvent, rhs.values, rel_tol)
    else:
        raise ContractError("solve_spd requires an SPD expression or a masked resolvent")
    return GridFunction(values, rhs.grid)


def energy_norm(op: OperatorExpression, u: GridFunction) -> float:
    """
    Energy norm (op u, u)^(1/2) of a symmetric positive (semi)definite op.

    Round-off negatives above -1e-13 * ||u||^2 are clamped to zero.

    Raises:
        ContractError: If op is not symmetric or the form is materially negative.
    """
    if isinstance(op, DiffusionOperator):
        op = diffusion_expression(op)
    _check_grid(op, u)
    if not op.is_symmetric:
        raise ContractError("energy_norm requires a symmetric operator expression")
    quadratic = inner_product(apply(op, u), u)
    if quadratic < 0.0:
        if quadratic > -NEGATIVE_CLAMP * inner_product(u, u):
            return 0.0
        raise ContractError(f"Quadratic form is negative: {quadratic:.6e}")
    return math.sqrt(quadratic)


def spectral_lower_bound(A: DiffusionOperator) -> float:
    """kappa * (delta1 + delta2) with delta_a = 4/h_a^2 sin^2(pi h_a / (2 l_a))."""
    grid = A.grid
    delta1 = 4.0 / grid.h1**2 * math.sin(math.pi * grid.h1 / (2.0 * grid.l1)) ** 2
    delta2 = 4.0 / grid.h2**2 * math.sin(math.pi * grid.h2 / (2.0 * grid.l2)) ** 2
    return A.kappa * (delta1 + delta2)


def spectral_bound_check(A: DiffusionOperator) -> Tuple[float, float]:
    """
    Compare the smallest eigenvalue of A with kappa * (delta1 + delta2).

    Returns:
        tuple: (lambda_min, bound).

    Raises:
        SizeError: If the grid has more than 4096 interior nodes.
        ContractError: If lambda_min < bound - 1e-9.
    """
    if A.n > DENSE_NODE_CAP:
        raise SizeError(
            f"Dense eigendecomposition limited to {DENSE_NODE_CAP} nodes, got {A.n}"
        )
    lambda_min = float(
        scipy.linalg.eigvalsh(A.matrix.toarray(), subset_by_index=[0, 0])[0]
    )
    bound = spectral_lower_bound(A)
    if lambda_min < bound - SPECTRAL_SLACK:
        raise ContractError(
            f"Smallest eigenvalue {lambda_min:.12g} is below the bound {bound:.12g}"
        )
    return lambda_min, bound
