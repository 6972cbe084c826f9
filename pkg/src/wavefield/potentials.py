"""Potential-energy catalog sampled on a grid."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import PotentialError
from .grid import Grid, _frozen

KINDS = ("free", "harmonic", "box", "barrier", "linear", "tabulated")

_REQUIRED = {
    "free": (),
    "box": (),
    "harmonic": ("omega",),
    "barrier": ("height", "left", "right"),
    "linear": ("slope",),
    "tabulated": ("samples",),
}


@dataclass(frozen=True)
class PotentialSpec:
    kind: str = "free"
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise PotentialError(f"unknown potential kind {self.kind!r}; expected one of {KINDS}")
        missing = [p for p in _REQUIRED[self.kind] if p not in self.params]
        if missing:
            raise PotentialError(f"{self.kind} potential needs parameter(s) {missing}")
        extra = set(self.params) - set(_REQUIRED[self.kind])
        if extra:
            raise PotentialError(f"{self.kind} potential does not take {sorted(extra)}")
        if self.kind == "barrier" and not self.params["left"] < self.params["right"]:
            raise PotentialError(
                f"barrier edges must be ordered, got left={self.params['left']}, right={self.params['right']}"
            )
        if self.kind == "harmonic" and not self.params["omega"] > 0:
            raise PotentialError(f"harmonic omega must be positive, got {self.params['omega']}")

    @classmethod
    def free(cls):
        return cls("free")

    @classmethod
    def box(cls):
        return cls("box")

    @classmethod
    def harmonic(cls, omega):
        return cls("harmonic", {"omega": float(omega)})

    @classmethod
    def barrier(cls, height, left, right):
        return cls("barrier", {"height": float(height), "left": float(left), "right": float(right)})

    @classmethod
    def linear(cls, slope):
        return cls("linear", {"slope": float(slope)})

    @classmethod
    def tabulated(cls, samples):
        return cls("tabulated", {"samples": tuple(float(s) for s in samples)})

    @property
    def requires_dirichlet(self) -> bool:
        return self.kind == "box"


@dataclass(frozen=True)
class PotentialField:
    """V and dV/dx on the grid.

    ``edge_mask`` flags points next to a discontinuity of V, where ``v_x``
    is a one-sided difference and identity residuals are not meaningful.
    """

    kind: str
    v: np.ndarray
    v_x: np.ndarray
    edge_mask: np.ndarray

    def __post_init__(self):
        for name in ("v", "v_x", "edge_mask"):
            object.__setattr__(self, name, _frozen(getattr(self, name)))


def eval_potential(spec: PotentialSpec, grid: Grid) -> PotentialField:
    x = grid.x
    p = spec.params
    edges = np.zeros(grid.n_points, dtype=bool)
    if spec.kind in ("free", "box"):
        v = np.zeros_like(x)
        v_x = np.zeros_like(x)
    elif spec.kind == "harmonic":
        k = grid.mass * p["omega"] ** 2
        v = 0.5 * k * x**2
        v_x = k * x
    elif spec.kind == "linear":
        v = p["slope"] * x
        v_x = np.full_like(x, p["slope"])
    elif spec.kind == "barrier":
        inside = (x >= p["left"]) & (x <= p["right"])
        v = np.where(inside, p["height"], 0.0)
        v_x = np.zeros_like(x)
        # the jump is carried by one one-sided difference on each side so that
        # sum(v_x) * dx reproduces the delta-function force
        jumps = np.flatnonzero(np.diff(v))
        for i in jumps:
            if v[i + 1] > v[i]:
                v_x[i + 1] = (v[i + 1] - v[i]) / grid.dx
            else:
                v_x[i] = (v[i + 1] - v[i]) / grid.dx
            edges[max(i - 1, 0) : i + 3] = True
    else:  # tabulated
        v = np.asarray(p["samples"], dtype=float)
        if v.shape != (grid.n_points,):
            raise PotentialError(
                f"tabulated potential has {v.size} samples but the grid has {grid.n_points} points"
            )
        v_x = np.gradient(v, grid.dx, edge_order=2)
    if not (np.all(np.isfinite(v)) and np.all(np.isfinite(v_x))):
        raise PotentialError("potential has non-finite samples")
    return PotentialField(spec.kind, v, v_x, edges)
