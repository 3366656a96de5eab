# This file adheres to the "black" code formatting style.
# More information about black: https://github.com/psf/black
import logging
from dataclasses import dataclass, field
from typing import Callable, Tuple, Union

import numpy as np

from PySubstructuring.exceptions import InvalidArgumentError

logger = logging.getLogger(__name__)

PointFunction = Callable[[np.ndarray, np.ndarray], Union[np.ndarray, float]]


@dataclass(frozen=True)
class Grid:
    """
    Uniform rectangular grid on (0, l1) x (0, l2) with N1 x N2 cells.

    Only interior nodes carry unknowns. They are ordered row-major by i2
    then i1, so the flat index of node (i1, i2) is (i2 - 1) * (N1 - 1) + i1 - 1.
    """

    l1: float
    l2: float
    N1: int
    N2: int

    @property
    def h1(self) -> float:
        return self.l1 / self.N1

    @property
    def h2(self) -> float:
        return self.l2 / self.N2

    @property
    def shape(self) -> Tuple[int, int]:
        """Interior node array shape as (rows along x2, columns along x1)."""
        return (self.N2 - 1, self.N1 - 1)

    @property
    def n_interior(self) -> int:
        return (self.N1 - 1) * (self.N2 - 1)

    @property
    def cell_area(self) -> float:
        return self.h1 * self.h2

    def index_arrays(self) -> Tuple[np.ndarray, np.ndarray]:
        """Flat arrays of the integer indices (i1, i2) of every interior node."""
        i2, i1 = np.meshgrid(
            np.arange(1, self.N2), np.arange(1, self.N1), indexing="ij"
        )
        return i1.ravel(), i2.ravel()

    def coordinates(self) -> Tuple[np.ndarray, np.ndarray]:
        i1, i2 = self.index_arrays()
        return i1 * self.h1, i2 * self.h2

    def flat_index(self, i1: int, i2: int) -> int:
        if not (1 <= i1 <= self.N1 - 1 and 1 <= i2 <= self.N2 - 1):
            raise InvalidArgumentError(f"({i1}, {i2}) is not an interior node")
        return (i2 - 1) * (self.N1 - 1) + (i1 - 1)


@dataclass(frozen=True, eq=False)
class GridFunction:
    """
    Values of a grid function on the interior nodes of a grid.

    Boundary nodes are never stored; they read as zero (homogeneous
    Dirichlet data).
    """

    values: np.ndarray
    grid: Grid = field(repr=False)

    # numpy scalars on the left defer to __rmul__
    __array_ufunc__ = None

    def __post_init__(self):
        values = np.array(self.values, dtype=np.float64).reshape(-1)
        if values.size != self.grid.n_interior:
            raise InvalidArgumentError(
                f"{values.size} values given for {self.grid.n_interior} interior nodes"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def zeros(cls, grid: Grid) -> "GridFunction":
        return cls(np.zeros(grid.n_interior), grid)

    def at(self, i1: int, i2: int) -> float:
        """Value at node (i1, i2); boundary nodes read as 0."""
        if i1 in (0, self.grid.N1) or i2 in (0, self.grid.N2):
            return 0.0
        return float(self.values[self.grid.flat_index(i1, i2)])

    def as_array(self) -> np.ndarray:
        """Interior values reshaped to ``grid.shape``."""
        return self.values.reshape(self.grid.shape)

    def norm(self) -> float:
        return float(np.sqrt(inner_product(self, self)))

    def _check(self, other: "GridFunction"):
        if not isinstance(other, GridFunction):
            raise InvalidArgumentError("Expected a GridFunction operand")
        if other.grid != self.grid:
            raise InvalidArgumentError("Grid functions live on different grids")

    def __add__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values + other.values, self.grid)

    def __sub__(self, other: "GridFunction") -> "GridFunction":
        self._check(other)
        return GridFunction(self.values - other.values, self.grid)

    def __mul__(self, scalar: float) -> "GridFunction":
        return GridFunction(float(scalar) * self.values, self.grid)

    __rmul__ = __mul__

    def __neg__(self) -> "GridFunction":
        return GridFunction(-self.values, self.grid)


def build_grid(l1: float, l2: float, N1: int, N2: int) -> Grid:
    """
    Build the uniform grid with h_alpha = l_alpha / N_alpha.

    Args:
        l1 (float): Domain length along x1.
        l2 (float): Domain length along x2.
        N1 (int): Cell count along x1, at least 2.
        N2 (int): Cell count along x2, at least 2.

    Returns:
        Grid: The grid.

    Raises:
        InvalidArgumentError: If a length is not positive or a count is below 2.
    """
    if not (np.isfinite(l1) and np.isfinite(l2)) or l1 <= 0 or l2 <= 0:
        raise InvalidArgumentError(f"Domain lengths must be positive, got {l1}, {l2}")
    for name, count in (("N1", N1), ("N2", N2)):
        if isinstance(count, bool) or int(count) != count or count < 2:
            raise InvalidArgumentError(f"{name} must be an integer >= 2, got {count}")
    return Grid(float(l1), float(l2), int(N1), int(N2))


def inner_product(u: GridFunction, w: GridFunction) -> float:
    """
    Discrete inner product (u, w) = sum of u * w * h1 * h2 over interior nodes.

    Raises:
        InvalidArgumentError: If u and w live on different grids.
    """
    u._check(w)
    return float(np.dot(u.values, w.values) * u.grid.cell_area)


def evaluate_pointwise(f: PointFunction, x1: np.ndarray, x2: np.ndarray) -> np.ndarray:
    """
    Evaluate f at the points (x1, x2).

    f is first called with whole arrays; functions written for scalars only
    are evaluated point by point instead.
    """
    try:
        values = np.asarray(f(x1, x2), dtype=np.float64)
        return np.broadcast_to(values, x1.shape).astype(np.float64)
    except (TypeError, ValueError):
        return np.vectorize(lambda a, b: float(f(a, b)), otypes=[np.float64])(x1, x2)


def sample(f: PointFunction, grid: Grid) -> GridFunction:
    """Grid function with values f(i1 * h1, i2 * h2) at the interior nodes."""
    x1, x2 = grid.coordinates()
    return GridFunction(evaluate_pointwise(f, x1, x2), grid)
