r"""One-dimensional fractional integrals and derivatives on uniform grids.

All operators act on :class:`Samples1D` and are linear maps of the sample
values, so each one is realised as a dense matrix (cached per grid size and
order) applied to the value vector. Two discretisations are provided:

* ``L1``: the function is replaced by its piecewise-linear interpolant and
  the weakly singular kernel :math:`(t - \tau)^{-\alpha}` is integrated
  exactly on every cell. Accuracy is :math:`O(h^{2 - \alpha})` for smooth data.
* ``GL``: Grünwald-Letnikov convolution with the binomial weights of
  :math:`(1 - z)^\alpha`. First order, but the weight sequences compose
  exactly, :math:`(1 - z)^\alpha (1 - z)^\beta = (1 - z)^{\alpha + \beta}`.

Backward (right-sided) operators are obtained from forward ones by the time
reflection :math:`t \mapsto a + b - t`, which is exact at the matrix level.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.linalg import toeplitz

from fracvar.report import TREND_FACTOR, CheckReport, trend


class Direction(str, enum.Enum):
    """Side of a fractional operator: integrate from ``a`` or towards ``b``."""

    FORWARD = "forward"
    BACKWARD = "backward"


class Scheme(str, enum.Enum):
    L1 = "L1"
    GL = "GL"
    #: Riemann-Liouville derivative as L1 Caputo plus the boundary term.
    L1_PLUS_BOUNDARY = "L1plusBoundary"


# {{{ types

@dataclass(frozen=True)
class FracOrder:
    """Fractional order restricted to the open interval (0, 1)."""

    alpha: float

    def __post_init__(self) -> None:
        alpha = float(self.alpha)
        if not (0.0 < alpha < 1.0) or not math.isfinite(alpha):
            raise ValueError(f"fractional order must lie in (0, 1), got {alpha}")
        object.__setattr__(self, "alpha", alpha)

    def __float__(self) -> float:
        return self.alpha


def as_order(alpha: float | FracOrder) -> float:
    if isinstance(alpha, FracOrder):
        return alpha.alpha
    return FracOrder(alpha).alpha


@dataclass(frozen=True)
class TimeGrid:
    """Uniform grid ``t_j = a + j h`` with ``h = (b - a) / n``, ``j = 0..n``."""

    a: float
    b: float
    n: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.a) and math.isfinite(self.b)):
            raise ValueError("grid endpoints must be finite")
        if not self.a < self.b:
            raise ValueError(f"expected a < b, got a={self.a}, b={self.b}")
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"expected at least 2 intervals, got {self.n}")
        object.__setattr__(self, "a", float(self.a))
        object.__setattr__(self, "b", float(self.b))
        object.__setattr__(self, "n", int(self.n))

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        return self.a + self.h * np.arange(self.n + 1)

    def __len__(self) -> int:
        return self.n + 1


@dataclass(frozen=True, eq=False)
class Samples1D:
    """Values of a scalar function at the nodes of a :class:`TimeGrid`."""

    grid: TimeGrid
    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=np.float64)
        if values.shape != (self.grid.n + 1,):
            raise ValueError(
                f"expected {self.grid.n + 1} samples, got shape {values.shape}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @classmethod
    def from_function(cls, grid: TimeGrid,
                      fn: Callable[[np.ndarray], np.ndarray]) -> Samples1D:
        values = np.asarray(fn(grid.nodes), dtype=np.float64)
        if values.ndim == 0:
            values = np.full(grid.n + 1, float(values))
        if not np.all(np.isfinite(values)):
            raise ValueError("sampled function is not finite on the grid")
        return cls(grid, values)

    def with_values(self, values: np.ndarray) -> Samples1D:
        """Samples on the same grid; non-finite values are allowed here
        because operator outputs may carry flagged singular nodes."""
        return Samples1D(self.grid, values)

    @property
    def flagged(self) -> np.ndarray:
        return ~np.isfinite(self.values)


@dataclass(frozen=True, eq=False)
class GLWeights:
    alpha: float
    w: np.ndarray


# }}}


# {{{ gamma function

# Lanczos approximation with g = 7 and 9 coefficients
_LANCZOS_G = 7.0
_LANCZOS_COEFFS = (
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
)


def gamma_fn(x: float) -> float:
    """Gamma function for positive arguments (Lanczos approximation)."""
    x = float(x)
    if not x > 0.0 or not math.isfinite(x):
        raise ValueError(f"gamma_fn is defined for positive finite x, got {x}")

    if x < 0.5:
        # reflection keeps the series in its accurate range
        return math.pi / (math.sin(math.pi * x) * gamma_fn(1.0 - x))

    z = x - 1.0
    acc = _LANCZOS_COEFFS[0]
    for k, c in enumerate(_LANCZOS_COEFFS[1:], start=1):
        acc += c / (z + k)
    t = z + _LANCZOS_G + 0.5
    return math.sqrt(2.0 * math.pi) * t ** (z + 0.5) * math.exp(-t) * acc


# }}}


# {{{ weights and matrices

def gl_weights(alpha: float | FracOrder, n: int) -> GLWeights:
    """Grünwald-Letnikov weights ``w_0..w_n`` of ``(1 - z)^alpha``."""
    alpha = as_order(alpha)
    if n < 0:
        raise ValueError(f"n must be non-negative, got {n}")
    return GLWeights(alpha, _gl_sequence(alpha, int(n)))


def _gl_sequence(alpha: float, n: int) -> np.ndarray:
    # same recurrence for any real exponent; used with alpha + beta = 1 in tests
    w = np.empty(n + 1)
    w[0] = 1.0
    for k in range(1, n + 1):
        w[k] = w[k - 1] * (k - 1 - alpha) / k
    return w


def _lower_toeplitz(column: np.ndarray) -> np.ndarray:
    return np.tril(toeplitz(column))


@lru_cache(maxsize=64)
def _rl_integral_unit(n: int, beta: float) -> np.ndarray:
    # product-trapezoid weights for the kernel (t - tau)^(beta - 1), h = 1
    m = np.arange(n + 1, dtype=np.float64)
    p = m ** (beta + 1.0)
    mat = np.zeros((n + 1, n + 1))
    # interior coefficients depend only on j - k
    d = np.zeros(n + 1)
    d[0] = 1.0
    d[1:n] = p[2:n + 1] - 2.0 * p[1:n] + p[0:n - 1]
    mat[:, :] = _lower_toeplitz(d)
    # first column holds the left-endpoint weight
    j = m[1:]
    mat[1:, 0] = (j - 1.0) ** (beta + 1.0) - (j - 1.0 - beta) * j ** beta
    mat[0, :] = 0.0
    mat /= gamma_fn(beta + 2.0)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def _caputo_l1_unit(n: int, alpha: float) -> np.ndarray:
    m = np.arange(n + 1, dtype=np.float64)
    b = (m + 1.0) ** (1.0 - alpha) - m ** (1.0 - alpha)
    d = np.empty(n + 1)
    d[0] = b[0]
    d[1:] = b[1:] - b[:-1]
    mat = _lower_toeplitz(d)
    mat[1:, 0] = -b[: n]
    mat[0, :] = 0.0
    mat /= gamma_fn(2.0 - alpha)
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def _gl_unit(n: int, alpha: float) -> np.ndarray:
    mat = _lower_toeplitz(_gl_sequence(alpha, n))
    mat.setflags(write=False)
    return mat


@lru_cache(maxsize=64)
def _caputo_gl_unit(n: int, alpha: float) -> np.ndarray:
    # G (f - f(a)): subtract the row sums from the first column
    mat = np.array(_gl_unit(n, alpha))
    mat[:, 0] -= mat.sum(axis=1)
    mat[0, 0] = 0.0
    mat.setflags(write=False)
    return mat


def _reflect(mat: np.ndarray) -> np.ndarray:
    return mat[::-1, ::-1]


def caputo_matrix(n: int, h: float, alpha: float | FracOrder,
                  direction: Direction | str = Direction.FORWARD,
                  scheme: Scheme | str = Scheme.L1) -> np.ndarray:
    """Matrix of the discrete Caputo derivative on ``n + 1`` uniform nodes.

    Both schemes annihilate constants, so the matrix acts on raw samples and
    the operator is linear (not affine) in the data.
    """
    alpha = as_order(alpha)
    direction = Direction(direction)
    scheme = Scheme(scheme)
    if scheme == Scheme.L1:
        unit = _caputo_l1_unit(int(n), alpha)
    elif scheme == Scheme.GL:
        unit = _caputo_gl_unit(int(n), alpha)
    else:
        raise ValueError(f"no Caputo matrix for scheme {scheme.value!r}")
    if direction == Direction.BACKWARD:
        unit = _reflect(unit)
    return h ** (-alpha) * unit


def gl_matrix(n: int, h: float, alpha: float | FracOrder,
              direction: Direction | str = Direction.FORWARD) -> np.ndarray:
    """Plain Grünwald-Letnikov convolution ``h^-alpha sum_k w_k f(t - k h)``."""
    unit = _gl_unit(int(n), as_order(alpha))
    if Direction(direction) == Direction.BACKWARD:
        unit = _reflect(unit)
    return h ** (-as_order(alpha)) * unit


def rl_integral_matrix(n: int, h: float, beta: float,
                       direction: Direction | str = Direction.FORWARD) -> np.ndarray:
    if not beta > 0.0:
        raise ValueError(f"integration order must be positive, got {beta}")
    unit = _rl_integral_unit(int(n), float(beta))
    if Direction(direction) == Direction.BACKWARD:
        unit = _reflect(unit)
    return h ** beta * unit


# }}}


# {{{ operators

def _check_finite(f: Samples1D) -> None:
    if not np.all(np.isfinite(f.values)):
        raise ValueError("input samples must be finite")


def _boundary_is_zero(values: np.ndarray, index: int) -> bool:
    scale = max(1.0, float(np.max(np.abs(values))))
    return abs(values[index]) <= 1.0e-13 * scale


def rl_integral(f: Samples1D, beta: float,
                direction: Direction | str = Direction.FORWARD) -> Samples1D:
    """Riemann-Liouville fractional integral of order ``beta > 0``."""
    _check_finite(f)
    mat = rl_integral_matrix(f.grid.n, f.grid.h, beta, direction)
    return f.with_values(mat @ f.values)


def caputo_deriv(f: Samples1D, alpha: float | FracOrder,
                 direction: Direction | str = Direction.FORWARD,
                 scheme: Scheme | str = Scheme.L1) -> Samples1D:
    """Caputo derivative of order ``0 < alpha < 1``.

    The value at the originating endpoint is 0 for both schemes.
    """
    _check_finite(f)
    mat = caputo_matrix(f.grid.n, f.grid.h, alpha, direction, scheme)
    return f.with_values(mat @ f.values)


def rl_boundary_term(grid: TimeGrid, alpha: float | FracOrder,
                     direction: Direction | str, boundary_value: float) -> np.ndarray:
    """``(t - a)^-alpha / Gamma(1 - alpha) f(a)`` (or its mirror image);
    infinite at the originating node."""
    alpha = as_order(alpha)
    dist = grid.h * np.arange(grid.n + 1, dtype=np.float64)
    if Direction(direction) == Direction.BACKWARD:
        dist = dist[::-1]
    with np.errstate(divide="ignore", invalid="ignore"):
        kernel = dist ** (-alpha) / gamma_fn(1.0 - alpha)
        return kernel * boundary_value


def rl_deriv(f: Samples1D, alpha: float | FracOrder,
             direction: Direction | str = Direction.FORWARD,
             scheme: Scheme | str = Scheme.L1_PLUS_BOUNDARY) -> Samples1D:
    """Riemann-Liouville derivative of order ``0 < alpha < 1``.

    When ``f`` does not vanish at the originating endpoint the derivative is
    singular there; that node carries a signed infinity.
    """
    _check_finite(f)
    alpha = as_order(alpha)
    direction = Direction(direction)
    scheme = Scheme(scheme)
    origin = 0 if direction == Direction.FORWARD else f.grid.n
    boundary_value = float(f.values[origin])

    if scheme in (Scheme.L1_PLUS_BOUNDARY, Scheme.L1):
        values = caputo_deriv(f, alpha, direction, Scheme.L1).values.copy()
        term = rl_boundary_term(f.grid, alpha, direction, boundary_value)
        regular = np.arange(f.grid.n + 1) != origin
        values[regular] += term[regular]
    elif scheme == Scheme.GL:
        values = gl_matrix(f.grid.n, f.grid.h, alpha, direction) @ f.values
    else:
        raise ValueError(f"unknown scheme {scheme!r}")

    if _boundary_is_zero(f.values, origin):
        values[origin] = 0.0
    else:
        values[origin] = math.copysign(math.inf, boundary_value)
    return f.with_values(values)


def power_rule_oracle(mu: float, alpha: float | FracOrder, t: float,
                      a: float = 0.0) -> float:
    """Exact fractional derivative of ``(t - a)^mu`` at ``t > a``."""
    alpha = as_order(alpha)
    if not t > a:
        raise ValueError(f"oracle requires t > a, got t={t}, a={a}")
    arg = mu + 1.0 - alpha
    if arg <= 0.0 and float(arg).is_integer():
        raise ValueError(f"Gamma pole at mu + 1 - alpha = {arg}")
    if mu < 0.0:
        raise ValueError(f"mu must be non-negative, got {mu}")
    return gamma_fn(mu + 1.0) / gamma_fn(arg) * (t - a) ** (mu - alpha)


# }}}


# {{{ lemma checks

def central_derivative(f: Samples1D) -> np.ndarray:
    """Second-order first derivative at interior nodes (ends are NaN)."""
    out = np.full_like(f.values, np.nan)
    out[1:-1] = (f.values[2:] - f.values[:-2]) / (2.0 * f.grid.h)
    return out


def check_composition(f: Samples1D, variant: str = "caputo_caputo") -> CheckReport:
    """Compare a composition of two half derivatives with ``f'``.

    ``caputo_caputo`` and ``rl_caputo`` are the two identities that hold for
    smooth ``f``; ``riewe_mixed`` composes a backward RL half derivative with a
    forward Caputo one and is expected to fail.
    """
    if f.grid.n < 8:
        raise ValueError("composition check needs at least 8 intervals")
    half = 0.5
    inner = caputo_deriv(f, half, Direction.FORWARD, Scheme.L1)
    if variant == "caputo_caputo":
        outer = caputo_deriv(inner, half, Direction.FORWARD, Scheme.L1)
    elif variant == "rl_caputo":
        outer = rl_deriv(inner, half, Direction.FORWARD, Scheme.L1_PLUS_BOUNDARY)
    elif variant == "riewe_mixed":
        outer = rl_deriv(inner, half, Direction.BACKWARD, Scheme.L1_PLUS_BOUNDARY)
    else:
        raise ValueError(f"unknown composition variant {variant!r}")

    diff = np.abs(outer.values - central_derivative(f))[1:-1]
    sup = float(np.max(diff)) if diff.size else 0.0
    nodes = f.grid.nodes[1:-1]
    mid = int(np.argmin(np.abs(nodes - 0.5 * (f.grid.a + f.grid.b))))
    return CheckReport(
        name=f"composition/{variant}",
        grid_sizes=[f.grid.n],
        norms={"sup": sup, "midpoint": float(diff[mid]),
               "argmax": float(nodes[int(np.argmax(diff))])},
        passed=True,
    )


def _trapezoid(values: np.ndarray, h: float) -> float:
    return float(h * (values.sum() - 0.5 * (values[0] + values[-1])))


def check_ibp(f: Samples1D, g: Samples1D, alpha: float | FracOrder = 0.5,
              variant: str = "caputo_caputo", tol: float = 1.0e-3) -> CheckReport:
    """Fractional integration by parts with a test function vanishing at both
    ends: ``int (D_+ f) g = int f (cD_- g)``."""
    if f.grid != g.grid:
        raise ValueError("f and g must share a grid")
    _check_finite(f)
    _check_finite(g)
    if not (_boundary_is_zero(g.values, 0) and _boundary_is_zero(g.values, -1)):
        raise ValueError("g must vanish at both endpoints")

    if variant == "caputo_caputo":
        left = caputo_deriv(f, alpha, Direction.FORWARD, Scheme.L1).values
    elif variant == "rl_caputo":
        left = rl_deriv(f, alpha, Direction.FORWARD, Scheme.L1_PLUS_BOUNDARY).values
    else:
        raise ValueError(f"unknown integration-by-parts variant {variant!r}")
    right = caputo_deriv(g, alpha, Direction.BACKWARD, Scheme.L1).values

    # g(a) = 0 kills the flagged node; drop it instead of multiplying inf * 0
    lhs_integrand = np.where(np.isfinite(left), left, 0.0) * g.values
    lhs = _trapezoid(lhs_integrand, f.grid.h)
    rhs = _trapezoid(f.values * right, f.grid.h)
    gap = abs(lhs - rhs)
    return CheckReport(
        name=f"ibp/{variant}",
        grid_sizes=[f.grid.n],
        norms={"lhs": lhs, "rhs": rhs, "abs_diff": gap},
        passed=gap <= tol,
        details={"excluded_measure": float(0.5 * f.grid.h * np.sum(~np.isfinite(left)))},
    )


def refinement_study(fn: Callable[[np.ndarray], np.ndarray], levels: list[int],
                     check: Callable[[Samples1D], CheckReport], norm: str,
                     name: str, a: float = 0.0, b: float = 1.0,
                     factor: float = TREND_FACTOR) -> CheckReport:
    """Run ``check`` on successive grids and apply the refinement-trend rule."""
    errors = []
    for n in levels:
        report = check(Samples1D.from_function(TimeGrid(a, b, n), fn))
        errors.append(report.norms[norm])
    verdict = trend(errors, factor)
    return CheckReport(
        name=name, grid_sizes=list(levels), norms={norm: errors},
        passed=verdict["passed"], details=verdict)


# }}}
