"""Tensor-product grids on axis-aligned boxes and the fields living on them.

Fields are immutable: the value arrays are read-only and every "update"
builds a new field, which re-runs the boundary checks.
"""

from __future__ import annotations

import csv
import enum
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from fracvar.frac1d import Samples1D, TimeGrid


class BoundaryClass(str, enum.Enum):
    NONE = "none"
    #: zero on the spatial boundary at every time
    SPACE_ZERO = "space_zero"
    #: additionally zero on the first and last time slice
    SPACETIME_ZERO = "spacetime_zero"


class Rule(str, enum.Enum):
    TRAPEZOID = "trapezoid"
    LEFT_RECTANGLE = "left_rectangle"


@dataclass(frozen=True, eq=False)
class BoxDomain:
    """Box ``[lo_1, hi_1] x ... x [lo_d, hi_d]`` with ``n_i`` intervals per axis."""

    lo: tuple[float, ...]
    hi: tuple[float, ...]
    n: tuple[int, ...]

    def __post_init__(self) -> None:
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        n = tuple(int(v) for v in np.atleast_1d(self.n))
        if not (len(lo) == len(hi) == len(n)) or not lo:
            raise ValueError("lo, hi and n must have the same positive length")
        for i, (a, b, m) in enumerate(zip(lo, hi, n)):
            if not (np.isfinite(a) and np.isfinite(b) and a < b):
                raise ValueError(f"axis {i}: expected lo < hi, got {a}, {b}")
            if m < 3:
                raise ValueError(f"axis {i}: need at least 3 intervals, got {m}")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "n", n)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, BoxDomain):
            return NotImplemented
        return (self.lo, self.hi, self.n) == (other.lo, other.hi, other.n)

    def __hash__(self) -> int:
        return hash((self.lo, self.hi, self.n))

    @property
    def dim(self) -> int:
        return len(self.n)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(m + 1 for m in self.n)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / m for a, b, m in zip(self.lo, self.hi, self.n))

    def axis_grid(self, axis: int) -> TimeGrid:
        """Grid line along ``axis`` as a 1D grid; a box makes it base-independent."""
        self._check_axis(axis)
        return TimeGrid(self.lo[axis], self.hi[axis], self.n[axis])

    def axis_nodes(self, axis: int) -> np.ndarray:
        return self.axis_grid(axis).nodes

    def mesh(self) -> tuple[np.ndarray, ...]:
        return tuple(np.meshgrid(*[self.axis_nodes(i) for i in range(self.dim)],
                                 indexing="ij"))

    def boundary_mask(self) -> np.ndarray:
        mask = np.zeros(self.shape, dtype=bool)
        for axis in range(self.dim):
            index = [slice(None)] * self.dim
            index[axis] = 0
            mask[tuple(index)] = True
            index[axis] = -1
            mask[tuple(index)] = True
        return mask

    def interior_mask(self) -> np.ndarray:
        return ~self.boundary_mask()

    def _check_axis(self, axis: int) -> None:
        if not 0 <= axis < self.dim:
            raise IndexError(f"axis {axis} out of range for dimension {self.dim}")


@dataclass(frozen=True, eq=False)
class SpatialField:
    domain: BoxDomain
    values: np.ndarray
    dirichlet_zero: bool = False

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != self.domain.shape:
            raise ValueError(
                f"field shape {values.shape} does not match grid {self.domain.shape}")
        if self.dirichlet_zero and np.any(values[self.domain.boundary_mask()] != 0.0):
            raise ValueError("dirichlet_zero field has non-zero boundary values")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, domain: BoxDomain, fn: Callable[..., np.ndarray],
                      dirichlet_zero: bool = False) -> SpatialField:
        values = np.broadcast_to(
            np.asarray(fn(*domain.mesh()), dtype=np.float64), domain.shape).copy()
        if dirichlet_zero:
            values[domain.boundary_mask()] = 0.0
        return cls(domain, values, dirichlet_zero)

    @classmethod
    def zeros(cls, domain: BoxDomain, dirichlet_zero: bool = True) -> SpatialField:
        return cls(domain, np.zeros(domain.shape), dirichlet_zero)


@dataclass(frozen=True, eq=False)
class SpaceTimeField:
    """Scalar field on ``tgrid x domain``; ``values[j]`` is the slice at ``t_j``."""

    tgrid: TimeGrid
    domain: BoxDomain
    values: np.ndarray
    boundary_class: BoundaryClass = BoundaryClass.NONE

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        shape = (self.tgrid.n + 1, *self.domain.shape)
        if values.shape != shape:
            raise ValueError(f"field shape {values.shape} does not match grid {shape}")
        bc = BoundaryClass(self.boundary_class)
        if bc != BoundaryClass.NONE:
            if np.any(values[:, self.domain.boundary_mask()] != 0.0):
                raise ValueError(f"{bc.value} field has non-zero spatial boundary values")
        if bc == BoundaryClass.SPACETIME_ZERO:
            if np.any(values[0] != 0.0) or np.any(values[-1] != 0.0):
                raise ValueError("spacetime_zero field must vanish at t = a and t = b")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "boundary_class", bc)

    @property
    def shape(self) -> tuple[int, ...]:
        return self.values.shape

    @classmethod
    def from_function(cls, tgrid: TimeGrid, domain: BoxDomain,
                      fn: Callable[..., np.ndarray],
                      boundary_class: BoundaryClass | str = BoundaryClass.NONE
                      ) -> SpaceTimeField:
        t, *x = space_time_mesh(tgrid, domain)
        values = np.broadcast_to(np.asarray(fn(t, *x), dtype=np.float64),
                                 (tgrid.n + 1, *domain.shape)).copy()
        return cls(tgrid, domain, masked(values, domain, boundary_class),
                   boundary_class)

    @classmethod
    def zeros(cls, tgrid: TimeGrid, domain: BoxDomain,
              boundary_class: BoundaryClass | str = BoundaryClass.SPACETIME_ZERO
              ) -> SpaceTimeField:
        return cls(tgrid, domain, np.zeros((tgrid.n + 1, *domain.shape)),
                   boundary_class)

    def with_values(self, values: np.ndarray,
                    boundary_class: BoundaryClass | str | None = None) -> SpaceTimeField:
        bc = self.boundary_class if boundary_class is None else boundary_class
        return SpaceTimeField(self.tgrid, self.domain, values, bc)

    def same_grid(self, other: SpaceTimeField) -> bool:
        return self.tgrid == other.tgrid and self.domain == other.domain


def space_time_mesh(tgrid: TimeGrid, domain: BoxDomain) -> tuple[np.ndarray, ...]:
    return tuple(np.meshgrid(tgrid.nodes,
                             *[domain.axis_nodes(i) for i in range(domain.dim)],
                             indexing="ij"))


def masked(values: np.ndarray, domain: BoxDomain,
           boundary_class: BoundaryClass | str) -> np.ndarray:
    """Zero the entries that ``boundary_class`` requires to vanish."""
    bc = BoundaryClass(boundary_class)
    values = np.array(values, dtype=np.float64)
    if bc != BoundaryClass.NONE:
        values[:, domain.boundary_mask()] = 0.0
    if bc == BoundaryClass.SPACETIME_ZERO:
        values[0] = 0.0
        values[-1] = 0.0
    return values


# {{{ line access

def _line_index(domain: BoxDomain, axis: int, base: Sequence[int]) -> tuple:
    domain._check_axis(axis)
    base = tuple(int(i) for i in base)
    if len(base) == domain.dim:
        base = base[:axis] + base[axis + 1:]
    if len(base) != domain.dim - 1:
        raise IndexError(f"expected {domain.dim - 1} off-axis indices, got {len(base)}")
    off_axes = [i for i in range(domain.dim) if i != axis]
    for i, k in zip(off_axes, base):
        if not 0 <= k <= domain.n[i]:
            raise IndexError(f"index {k} out of range on axis {i}")
    index: list = list(base)
    index.insert(axis, slice(None))
    return tuple(index)


def line_extract(field: SpatialField, axis: int, base: Sequence[int]) -> Samples1D:
    """Samples of ``field`` along the full grid line through ``base`` parallel
    to ``axis``. ``base`` lists the off-axis indices (a full multi-index is
    also accepted; its ``axis`` entry is ignored)."""
    index = _line_index(field.domain, axis, base)
    return Samples1D(field.domain.axis_grid(axis), field.values[index])


def line_insert(field: SpatialField, axis: int, base: Sequence[int],
                line: Samples1D) -> SpatialField:
    """New field equal to ``field`` with one grid line replaced."""
    index = _line_index(field.domain, axis, base)
    if line.values.shape != (field.domain.n[axis] + 1,):
        raise ValueError("line length does not match the grid along axis")
    values = np.array(field.values)
    values[index] = line.values
    return SpatialField(field.domain, values, field.dirichlet_zero)


def apply_along_axis(mat: np.ndarray, values: np.ndarray, axis: int) -> np.ndarray:
    """Apply a 1D operator matrix to every grid line of ``values`` along ``axis``."""
    return np.moveaxis(np.tensordot(mat, values, axes=([1], [axis])), 0, axis)


# }}}


# {{{ quadrature

def quadrature_weights_1d(n: int, h: float, rule: Rule | str) -> np.ndarray:
    w = np.full(n + 1, h)
    if Rule(rule) == Rule.TRAPEZOID:
        w[0] *= 0.5
        w[-1] *= 0.5
    else:
        w[-1] = 0.0
    return w


def spatial_weights(domain: BoxDomain, rule: Rule | str) -> np.ndarray:
    w = np.ones(())
    for i in range(domain.dim):
        wi = quadrature_weights_1d(domain.n[i], domain.spacing[i], rule)
        w = np.multiply.outer(w, wi)
    return w


def spacetime_weights(tgrid: TimeGrid, domain: BoxDomain,
                      time_rule: Rule | str,
                      space_rule: Rule | str = Rule.TRAPEZOID) -> np.ndarray:
    wt = quadrature_weights_1d(tgrid.n, tgrid.h, time_rule)
    return np.multiply.outer(wt, spatial_weights(domain, space_rule))


def integrate(field: SpaceTimeField | SpatialField,
              rule: Rule | str = Rule.TRAPEZOID,
              space_rule: Rule | str = Rule.TRAPEZOID) -> float:
    """Tensor-product quadrature; ``rule`` applies in time for space-time
    fields and to every axis for spatial fields."""
    if not np.all(np.isfinite(field.values)):
        raise ValueError("cannot integrate a field with non-finite values")
    if isinstance(field, SpaceTimeField):
        w = spacetime_weights(field.tgrid, field.domain, rule, space_rule)
    else:
        w = spatial_weights(field.domain, rule)
    return float(np.sum(w * field.values))


# }}}


# {{{ csv i/o

def _float_text(value: float) -> str:
    # 17 significant digits round-trip every double
    return format(float(value), ".17g")


def field_to_csv(field: SpaceTimeField) -> str:
    """Rows ``t,x1,...,xd,value`` ordered by time, then lexicographic index."""
    d = field.domain.dim
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(["t", *[f"x{i + 1}" for i in range(d)], "value"])
    coords = [field.domain.axis_nodes(i) for i in range(d)]
    t_nodes = field.tgrid.nodes
    for j in range(field.tgrid.n + 1):
        for idx in np.ndindex(*field.domain.shape):
            writer.writerow([_float_text(t_nodes[j]),
                             *[_float_text(coords[i][k]) for i, k in enumerate(idx)],
                             _float_text(field.values[(j, *idx)])])
    return out.getvalue()


def write_field_csv(field: SpaceTimeField, path: str | Path) -> None:
    Path(path).write_text(field_to_csv(field), encoding="utf-8", newline="")


def _grid_from_nodes(nodes: np.ndarray, what: str) -> tuple[float, float, int]:
    nodes = np.unique(nodes)
    if nodes.size < 2:
        raise ValueError(f"{what}: need at least two distinct coordinates")
    a, b, n = float(nodes[0]), float(nodes[-1]), nodes.size - 1
    expected = a + (b - a) / n * np.arange(n + 1)
    if not np.allclose(nodes, expected, rtol=0.0, atol=1e-9 * max(1.0, b - a)):
        raise ValueError(f"{what}: coordinates are not a uniform grid")
    return a, b, n


def read_field_csv(path: str | Path,
                   boundary_class: BoundaryClass | str = BoundaryClass.NONE
                   ) -> SpaceTimeField:
    text = Path(path).read_text(encoding="utf-8")
    reader = csv.reader(io.StringIO(text))
    header = next(reader)
    d = len(header) - 2
    if d < 1 or header[0] != "t" or header[-1] != "value" or \
            header[1:-1] != [f"x{i + 1}" for i in range(d)]:
        raise ValueError(f"{path}: unexpected header {header}")
    rows = np.array([[float(v) for v in row] for row in reader if row])
    if rows.ndim != 2 or rows.shape[1] != d + 2:
        raise ValueError(f"{path}: malformed rows")

    ta, tb, tn = _grid_from_nodes(rows[:, 0], "t")
    axes = [_grid_from_nodes(rows[:, 1 + i], f"x{i + 1}") for i in range(d)]
    tgrid = TimeGrid(ta, tb, tn)
    domain = BoxDomain([a for a, _, _ in axes], [b for _, b, _ in axes],
                       [n for _, _, n in axes])
    shape = (tn + 1, *domain.shape)
    if rows.shape[0] != int(np.prod(shape)):
        raise ValueError(f"{path}: expected {int(np.prod(shape))} rows, got {rows.shape[0]}")
    expected = np.stack([c.ravel() for c in space_time_mesh(tgrid, domain)], axis=1)
    if not np.allclose(rows[:, :-1], expected, rtol=0.0, atol=1e-9):
        raise ValueError(f"{path}: rows are not in time-major lexicographic order")
    return SpaceTimeField(tgrid, domain, rows[:, -1].reshape(shape), boundary_class)


# }}}
