"""Catalogue of convection-diffusion test cases with known solutions."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from fracvar.cdsolve import CDCoefficients
from fracvar.domain import BoundaryClass, BoxDomain, SpaceTimeField
from fracvar.frac1d import TimeGrid

PI = np.pi


@dataclass(frozen=True, eq=False)
class Case:
    id: str
    coefficients: CDCoefficients
    exact: Callable[..., np.ndarray] | None
    description: str = ""
    T: float = 1.0
    t0: float = 0.0
    lo: tuple[float, ...] | None = None
    hi: tuple[float, ...] | None = None

    @property
    def dim(self) -> int:
        return self.coefficients.dim

    def grids(self, n: int) -> tuple[TimeGrid, BoxDomain]:
        """``n`` time steps on ``[t0, T]`` and ``n`` cells per axis of the box
        (the unit box by default), so that the time step tracks the mesh
        width."""
        lo = (0.0,) * self.dim if self.lo is None else self.lo
        hi = (1.0,) * self.dim if self.hi is None else self.hi
        return TimeGrid(self.t0, self.T, n), BoxDomain(lo, hi, (n,) * self.dim)

    def exact_field(self, tgrid: TimeGrid, domain: BoxDomain) -> SpaceTimeField:
        if self.exact is None:
            raise ValueError(f"case {self.id!r} has no exact solution")
        return SpaceTimeField.from_function(tgrid, domain, self.exact, BoundaryClass.SPACE_ZERO)


def _zero() -> Case:
    c = CDCoefficients(gamma=[1.0], K=[[0.1]], beta=0.5)
    return Case("zero", c, lambda t, x: 0.0 * t * x, "zero data, zero solution")


def _sep_sine() -> Case:
    k = 0.1
    c = CDCoefficients(gamma=[0.0], K=[[k]], beta=0.0, u0=lambda x: np.sin(PI * x))
    return Case("sep-sine", c, lambda t, x: np.exp(-k * PI ** 2 * t) * np.sin(PI * x),
                "pure diffusion of a sine mode")


def _manu_cd_1d() -> Case:
    g, k, b = 1.0, 0.1, 0.5

    def exact(t, x):
        return np.exp(-t) * np.sin(PI * x)

    def source(t, x):
        return ((-1.0 + k * PI ** 2 + b) * np.exp(-t) * np.sin(PI * x)
                + g * PI * np.exp(-t) * np.cos(PI * x))

    c = CDCoefficients(gamma=[g], K=[[k]], beta=b, source=source,
                       u0=lambda x: np.sin(PI * x))
    return Case("manu-cd-1d", c, exact, "manufactured convection-diffusion-reaction, d=1")


def _pure_time() -> Case:
    b = 0.5

    def exact(t, x):
        inside = (x > 0.0) & (x < 1.0)
        return np.where(inside, 0.4 * np.cos(t) + 0.8 * np.sin(t) + 0.6 * np.exp(-b * t), 0.0)

    c = CDCoefficients(gamma=[0.0], K=[[0.0]], beta=b,
                       source=lambda t, x: np.cos(t) + 0.0 * x, u0=lambda x: np.ones_like(x))
    return Case("pure-time", c, exact, "u' + u/2 = cos t at every interior node")


def _affine_exact() -> Case:
    b = 0.5

    def exact(t, x):
        return (1.0 + 2.0 * t) * np.sin(PI * x)

    c = CDCoefficients(gamma=[0.0], K=[[0.0]], beta=b,
                       source=lambda t, x: (2.0 + b * (1.0 + 2.0 * t)) * np.sin(PI * x),
                       u0=lambda x: np.sin(PI * x))
    return Case("affine-exact", c, exact, "solution affine in time, reproduced exactly")


def _manu_cd_2d() -> Case:
    g = np.array([1.0, 0.5])
    K = np.array([[0.1, 0.02], [0.02, 0.05]])
    b = 0.5

    def exact(t, x, y):
        return np.exp(-t) * np.sin(PI * x) * np.sin(PI * y)

    def source(t, x, y):
        e = np.exp(-t)
        ss = np.sin(PI * x) * np.sin(PI * y)
        return ((b - 1.0) * e * ss
                + PI * e * (g[0] * np.cos(PI * x) * np.sin(PI * y)
                            + g[1] * np.sin(PI * x) * np.cos(PI * y))
                + e * PI ** 2 * ((K[0, 0] + K[1, 1]) * ss
                                 - 2.0 * K[0, 1] * np.cos(PI * x) * np.cos(PI * y)))

    c = CDCoefficients(gamma=g, K=K, beta=b, source=source,
                       u0=lambda x, y: np.sin(PI * x) * np.sin(PI * y))
    return Case("manu-cd-2d", c, exact, "manufactured anisotropic problem, d=2")


_BUILDERS = {
    "zero": _zero,
    "sep-sine": _sep_sine,
    "manu-cd-1d": _manu_cd_1d,
    "pure-time": _pure_time,
    "affine-exact": _affine_exact,
    "manu-cd-2d": _manu_cd_2d,
}

CASE_IDS = tuple(_BUILDERS)


def get_case(case_id: str) -> Case:
    try:
        return _BUILDERS[case_id]()
    except KeyError:
        raise KeyError(f"unknown case {case_id!r}; known: {', '.join(CASE_IDS)}") from None
