# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
from dataclasses import dataclass, field
from typing import Dict, Optional, Sequence, Tuple

import numpy as np

from PySubstructuring.diffusion_operator import (
    DiffusionOperator,
    OperatorExpression,
    masked_expression,
)
from PySubstructuring.exceptions import (
    AlignmentError,
    DegenerateDecompositionError,
    InvalidArgumentError,
    OverlapCollisionError,
)
from PySubstructuring.grid import Grid
from PySubstructuring.schemes import splittings

logger = logging.getLogger(__name__)

ALIGNMENT_TOL = 1e-9


def _frozen(values: np.ndarray, dtype) -> np.ndarray:
    values = np.array(values, dtype=dtype).reshape(-1)
    values.setflags(write=False)
    return values


@dataclass(frozen=True, eq=False)
class Decomposition:
    """
    Partition of unity over the interior nodes of a grid.

    ``masks[alpha - 1]`` holds the diagonal weights chi_alpha. Node classes
    are boolean arrays in grid order: ``interface`` is the coarse-line set,
    ``crossing`` its cross (or cross-band) part and ``segment`` the rest.
    """

    grid: Grid = field(repr=False)
    masks: Tuple[np.ndarray, ...] = field(repr=False)
    coarse_step: Optional[float]
    interface: np.ndarray = field(repr=False)
    crossing: np.ndarray = field(repr=False)
    splitting: str = "custom"
    overlap_halfwidth: int = 0

    def __post_init__(self):
        object.__setattr__(
            self, "masks", tuple(_frozen(mask, np.float64) for mask in self.masks)
        )
        object.__setattr__(self, "interface", _frozen(self.interface, bool))
        object.__setattr__(self, "crossing", _frozen(self.crossing, bool))

    @property
    def p(self) -> int:
        return len(self.masks)

    @property
    def segment(self) -> np.ndarray:
        return self.interface & ~self.crossing

    @property
    def is_crisp(self) -> bool:
        return all(bool(np.all((mask == 0.0) | (mask == 1.0))) for mask in self.masks)

    def mask(self, alpha: int) -> np.ndarray:
        """chi_alpha for 1 <= alpha <= p."""
        if isinstance(alpha, bool) or not 1 <= int(alpha) <= self.p:
            raise InvalidArgumentError(
                f"Component index {alpha} out of range 1..{self.p}"
            )
        return self.masks[int(alpha) - 1]

    def class_counts(self) -> Dict[str, int]:
        return {
            "subdomain_interior": int(np.count_nonzero(~self.interface)),
            "interface": int(np.count_nonzero(self.interface)),
            "interface_segment": int(np.count_nonzero(self.segment)),
            "interface_cross": int(np.count_nonzero(self.crossing)),
        }


@dataclass(frozen=True)
class PartitionReport:
    max_deviation: float
    min_weight: float
    counts: Dict[str, int]
    band_weight_range: Tuple[float, float]

    @property
    def passed(self) -> bool:
        return self.max_deviation == 0.0 and self.min_weight >= 0.0


def _steps_per_coarse_cell(grid: Grid, hhat: float) -> Tuple[int, int]:
    if not hhat > 0.0:
        raise AlignmentError(f"Coarse step must be positive, got {hhat}")
    steps = []
    for axis, (length, h, count) in enumerate(
        ((grid.l1, grid.h1, grid.N1), (grid.l2, grid.h2, grid.N2)), start=1
    ):
        ratio = hhat / h
        m = int(round(ratio))
        if m < 1 or abs(ratio - m) > ALIGNMENT_TOL * max(1.0, ratio):
            raise AlignmentError(
                f"Coarse step {hhat} is not a multiple of h{axis} = {h}"
            )
        if count % m != 0:
            raise AlignmentError(
                f"Coarse step {hhat} does not divide l{axis} = {length}"
            )
        steps.append(m)
    return steps[0], steps[1]


def _coarse_lines(grid: Grid, hhat: float):
    m1, m2 = _steps_per_coarse_cell(grid, hhat)
    lines1 = grid.N1 // m1 - 1
    lines2 = grid.N2 // m2 - 1
    if lines1 + lines2 == 0:
        raise DegenerateDecompositionError(
            f"Coarse step {hhat} leaves no interior coarse line"
        )
    i1, i2 = grid.index_arrays()
    on1 = i1 % m1 == 0
    on2 = i2 % m2 == 0
    return m1, m2, lines1, lines2, i1, i2, on1, on2


def build_two_component(grid: Grid, hhat: float) -> Decomposition:
    """
    Two-component substructuring: chi_2 marks the coarse lines, chi_1 the rest.

    Args:
        grid (Grid): The computational grid.
        hhat (float): Coarse step, a multiple of h1 and h2 dividing l1 and l2.

    Returns:
        Decomposition: The crisp two-component decomposition.

    Raises:
        AlignmentError: If hhat is not aligned with the grid.
        DegenerateDecompositionError: If no interior coarse line exists.
    """
    *_, on1, on2 = _coarse_lines(grid, hhat)
    interface = on1 | on2
    chi2 = interface.astype(np.float64)
    logger.debug(
        "Two-component decomposition, hhat=%g, %d interface nodes",
        hhat,
        np.count_nonzero(interface),
    )
    return Decomposition(
        grid,
        (1.0 - chi2, chi2),
        float(hhat),
        interface,
        on1 & on2,
        splitting="two",
    )


def build_three_component(
    grid: Grid, hhat: float, overlap_halfwidth: int = 0
) -> Decomposition:
    """
    Three-component substructuring: subdomains, interface segments, crosses.

    With ``overlap_halfwidth`` w > 0 the cross set grows along the arms to the
    nodes within w steps of a cross. On that band chi_2 ramps linearly,
    d / (w + 1) at distance d, and chi_3 = 1 - chi_2.

    Raises:
        AlignmentError: If hhat is not aligned with the grid.
        DegenerateDecompositionError: If no interior coarse line exists.
        OverlapCollisionError: If bands reach the boundary or each other.
    """
    if isinstance(overlap_halfwidth, bool) or int(overlap_halfwidth) != overlap_halfwidth:
        raise InvalidArgumentError(
            f"overlap_halfwidth must be an integer, got {overlap_halfwidth}"
        )
    w = int(overlap_halfwidth)
    if w < 0:
        raise InvalidArgumentError(f"overlap_halfwidth must be >= 0, got {w}")
    m1, m2, lines1, lines2, i1, i2, on1, on2 = _coarse_lines(grid, hhat)
    for axis, m, lines in ((1, m1, lines1), (2, m2, lines2)):
        if w and (w >= m or (2 * w >= m and lines > 1)):
            raise OverlapCollisionError(
                f"Overlap half-width {w} is too wide for {m} steps per coarse "
                f"cell along x{axis}"
            )

    interface = on1 | on2
    # distance along the arm to the nearest interior coarse line
    d1 = np.abs(i1 - m1 * np.clip(np.rint(i1 / m1), 1, max(lines1, 1)).astype(int))
    d2 = np.abs(i2 - m2 * np.clip(np.rint(i2 / m2), 1, max(lines2, 1)).astype(int))
    if lines1 == 0 or lines2 == 0:
        band = np.zeros_like(interface)
        distance = np.zeros(i1.shape, dtype=np.int64)
    else:
        distance = np.where(on1 & on2, 0, np.where(on2, d1, d2))
        band = interface & (distance <= w)
    if not np.any(band):
        logger.warning("Three-component decomposition with hhat=%g has no crosses", hhat)

    chi2 = np.where(interface, 1.0, 0.0)
    chi2 = np.where(band, distance / (w + 1.0), chi2)
    chi3 = np.where(band, 1.0 - chi2, 0.0)
    chi1 = 1.0 - (chi2 + chi3)
    logger.debug(
        "Three-component decomposition, hhat=%g, w=%d, %d band nodes",
        hhat,
        w,
        np.count_nonzero(band),
    )
    return Decomposition(
        grid,
        (chi1, chi2, chi3),
        float(hhat),
        interface,
        band,
        splitting="three-overlap" if w else "three",
        overlap_halfwidth=w,
    )


def build_decomposition(
    grid: Grid, hhat: float, splitting: str = "two", overlap_halfwidth: int = 0
) -> Decomposition:
    """Build a decomposition by splitting name (``two``, ``three``, ``three-overlap``)."""
    if splitting not in splittings:
        raise InvalidArgumentError(
            f"Unknown splitting {splitting!r}, expected one of {splittings}"
        )
    if splitting == "two":
        return build_two_component(grid, hhat)
    if splitting == "three":
        return build_three_component(grid, hhat, 0)
    if not overlap_halfwidth:
        raise InvalidArgumentError("three-overlap needs overlap_halfwidth >= 1")
    return build_three_component(grid, hhat, overlap_halfwidth)


def from_masks(
    grid: Grid, masks: Sequence[np.ndarray], coarse_step: Optional[float] = None
) -> Decomposition:
    """
    Wrap hand-made weights as a Decomposition (e.g. chi_2 = 0 or p = 1).

    Nodes where chi_1 < 1 count as interface nodes; for p = 3 the support of
    chi_3 is the cross class.
    """
    arrays = [np.asarray(mask, dtype=np.float64).reshape(-1) for mask in masks]
    if not arrays:
        raise InvalidArgumentError("At least one mask is required")
    for alpha, mask in enumerate(arrays, start=1):
        if mask.size != grid.n_interior:
            raise InvalidArgumentError(
                f"Mask {alpha} has {mask.size} values for {grid.n_interior} nodes"
            )
    interface = arrays[0] < 1.0 if len(arrays) > 1 else np.zeros(grid.n_interior, bool)
    crossing = arrays[2] > 0.0 if len(arrays) > 2 else np.zeros(grid.n_interior, bool)
    return Decomposition(grid, tuple(arrays), coarse_step, interface, crossing & interface)


def masked_operator(
    A: DiffusionOperator, dec: Decomposition, alpha: int
) -> OperatorExpression:
    """A_alpha = chi_alpha A."""
    if dec.grid != A.grid:
        raise InvalidArgumentError("Decomposition and operator live on different grids")
    return masked_expression(A, dec.mask(alpha))


def verify_partition(dec: Decomposition) -> PartitionReport:
    """Diagnostic report on the partition of unity; never raises."""
    total = np.zeros(dec.grid.n_interior)
    for mask in dec.masks:
        total = total + mask
    band_segment = dec.crossing & ~_cross_nodes(dec)
    if dec.p >= 2 and np.any(band_segment):
        weights = dec.masks[1][band_segment]
        band_range = (float(weights.min()), float(weights.max()))
    else:
        band_range = (float("nan"), float("nan"))
    report = PartitionReport(
        max_deviation=float(np.max(np.abs(total - 1.0))) if total.size else 0.0,
        min_weight=float(min(mask.min() for mask in dec.masks)) if total.size else 0.0,
        counts=dec.class_counts(),
        band_weight_range=band_range,
    )
    if not report.passed:
        logger.warning(
            "Partition of unity violated: deviation %.3e, min weight %.3e",
            report.max_deviation,
            report.min_weight,
        )
    return report


def _cross_nodes(dec: Decomposition) -> np.ndarray:
    """Coarse-line crossings proper, i.e. the w = 0 cross class."""
    if dec.coarse_step is None:
        return dec.crossing
    m1, m2 = _steps_per_coarse_cell(dec.grid, dec.coarse_step)
    i1, i2 = dec.grid.index_arrays()
    return (i1 % m1 == 0) & (i2 % m2 == 0)
