"""Uniform periodic grids on the unit torus and field samples on them."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class GridSpec:
    n: int
    nodes: int

    def __post_init__(self):
        if self.n < 1 or self.nodes < 3:
            raise ValueError("need n >= 1 and at least 3 nodes per dimension")

    @property
    def h(self) -> float:
        return 1.0 / self.nodes

    @property
    def shape(self) -> tuple:
        return (self.nodes,) * self.n

    @property
    def weight(self) -> float:
        return self.h ** self.n

    def axes(self) -> list:
        """Node coordinates, one broadcastable array per dimension."""
        x = np.arange(self.nodes) * self.h
        return list(np.meshgrid(*([x] * self.n), indexing="ij"))

    def diff(self, f: np.ndarray, axis: int) -> np.ndarray:
        """Second-order periodic central difference."""
        return (np.roll(f, -1, axis=axis) - np.roll(f, 1, axis=axis)) / (2 * self.h)

    def integrate(self, f) -> float:
        """Periodic trapezoid rule; pairwise (numpy) summation."""
        f = np.broadcast_to(np.asarray(f, dtype=float), self.shape)
        return float(np.sum(f) * self.weight)

    def total_weight(self) -> float:
        return self.integrate(np.ones(self.shape))


@dataclass
class FieldState:
    """Values of fields and momenta at the grid nodes at time ``t``.

    ``values`` maps chart coordinate names (fields ``u...``, momenta
    ``pt...``, ``px1...``) to arrays of the grid shape.
    """

    grid: GridSpec
    t: float
    values: dict = field(default_factory=dict)

    def __post_init__(self):
        vals = {}
        for k, v in self.values.items():
            a = np.broadcast_to(np.asarray(v, dtype=float), self.grid.shape).copy()
            vals[k] = a
        self.values = vals

    def __getitem__(self, name: str) -> np.ndarray:
        return self.values[name]

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(v)) for v in self.values.values())

    def norm(self) -> float:
        return max((float(np.max(np.abs(v))) for v in self.values.values()), default=0.0)

    def copy(self) -> "FieldState":
        return FieldState(self.grid, self.t, {k: v.copy() for k, v in self.values.items()})

    def point(self, base: tuple) -> dict:
        """Evaluation point: base coordinates (time first) plus all stored arrays."""
        pt = {base[0]: self.t}
        for name, ax in zip(base[1:], self.grid.axes()):
            pt[name] = ax
        pt.update(self.values)
        return pt
