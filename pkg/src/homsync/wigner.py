"""Wigner quasi-probability functions of one- and two-mode states.

Same units as the quadrature layer: hbar = 1, vacuum variance 1/2, so the
vacuum Wigner function is exp(-(x^2+p^2))/pi and integrates to 1 over the
(x, p) plane.  Marginals reproduce the homodyne densities.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.special import eval_genlaguerre

from .fock import SingleModeState, TwoModeState

AXIS_NAMES = ("x1", "p1", "x2", "p2")


def wigner_element(m: int, n: int, x, p):
    """Wigner function of the operator |m><n|.

    Closed form via associated Laguerre polynomials; complex for m != n.
    """
    x = np.asarray(x, dtype=float)
    p = np.asarray(p, dtype=float)
    nu, delta = min(m, n), abs(m - n)
    chi = (x - 1j * p) if m > n else (x + 1j * p)
    r2 = x * x + p * p
    pref = ((-1.0) ** nu / math.pi) * math.sqrt(
        math.factorial(nu) / math.factorial(nu + delta)
    ) * math.sqrt(2.0) ** delta
    return pref * chi ** delta * np.exp(-r2) * eval_genlaguerre(nu, delta, 2.0 * r2)


def _mode_elements(n_max: int, x, p) -> np.ndarray:
    """E[k, m, n] = W_{|m><n|}(x_k, p_k) for flat coordinate arrays."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    p = np.atleast_1d(np.asarray(p, dtype=float))
    d = n_max + 1
    E = np.empty((x.size, d, d), dtype=complex)
    for m in range(d):
        for n in range(d):
            E[:, m, n] = wigner_element(m, n, x, p)
    return E


def wigner_single(state: SingleModeState, x, p):
    """W(x, p) at paired points; broadcasts x against p."""
    x, p = np.broadcast_arrays(np.asarray(x, float), np.asarray(p, float))
    E = _mode_elements(state.cutoff.n_max, x.ravel(), p.ravel())
    vals = np.einsum("kmn,mn->k", E, state.rho).real
    return vals.reshape(x.shape) if x.shape else float(vals[0])


def wigner_single_grid(state: SingleModeState, x, p) -> np.ndarray:
    """W on the product grid x (rows) by p (cols)."""
    X, P = np.meshgrid(np.asarray(x, float), np.asarray(p, float), indexing="ij")
    return wigner_single(state, X, P)


def wigner_two_mode(state: TwoModeState, x1, p1, x2, p2):
    """Two-mode W at paired phase-space points (all inputs broadcast)."""
    x1, p1, x2, p2 = np.broadcast_arrays(
        *(np.asarray(a, float) for a in (x1, p1, x2, p2))
    )
    shape = x1.shape
    d = state.cutoff.dim
    E1 = _mode_elements(d - 1, x1.ravel(), p1.ravel())
    E2 = _mode_elements(d - 1, x2.ravel(), p2.ravel())
    rho4 = state.rho.reshape(d, d, d, d)
    vals = np.einsum("kab,kcd,acbd->k", E1, E2, rho4).real
    return vals.reshape(shape) if shape else float(vals[0])


def default_slice_grid() -> np.ndarray:
    return -3.0 + 0.05 * np.arange(121)


@dataclass
class WignerSlice:
    """Two-axis slice through the four-dimensional two-mode Wigner function."""

    axis_names: tuple
    axis1: np.ndarray
    axis2: np.ndarray
    fixed: dict
    values: np.ndarray

    def min_location(self):
        """(value, axis1 coordinate, axis2 coordinate) of the grid minimum."""
        i, j = np.unravel_index(int(np.argmin(self.values)), self.values.shape)
        return float(self.values[i, j]), float(self.axis1[i]), float(self.axis2[j])

    def to_files(self, csv_path, json_path) -> None:
        """Values matrix as CSV (rows follow axis1), metadata as JSON."""
        with open(csv_path, "w", newline="") as fh:
            for row in self.values:
                fh.write(",".join(repr(float(v)) for v in row) + "\n")
        meta = {
            "axis_names": list(self.axis_names),
            "axis1": [float(v) for v in self.axis1],
            "axis2": [float(v) for v in self.axis2],
            "fixed": {k: float(v) for k, v in sorted(self.fixed.items())},
        }
        with open(json_path, "w") as fh:
            json.dump(meta, fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_files(cls, csv_path, json_path) -> "WignerSlice":
        with open(json_path) as fh:
            meta = json.load(fh)
        with open(csv_path, newline="") as fh:
            rows = [[float(v) for v in row] for row in csv.reader(fh) if row]
        return cls(
            axis_names=tuple(meta["axis_names"]),
            axis1=np.asarray(meta["axis1"], dtype=float),
            axis2=np.asarray(meta["axis2"], dtype=float),
            fixed={k: float(v) for k, v in meta["fixed"].items()},
            values=np.asarray(rows, dtype=float),
        )


def wigner_slice(
    state: TwoModeState,
    axis_names=("x1", "x2"),
    fixed=None,
    *,
    grid1=None,
    grid2=None,
) -> WignerSlice:
    """Evaluate W on a plane: two named axes vary, the other two are fixed.

    Axis names come from ("x1", "p1", "x2", "p2"); unspecified fixed
    coordinates default to 0.
    """
    a1, a2 = axis_names
    if a1 not in AXIS_NAMES or a2 not in AXIS_NAMES or a1 == a2:
        raise ValueError(f"axis_names must be two distinct of {AXIS_NAMES}")
    fixed = dict(fixed or {})
    for name in fixed:
        if name not in AXIS_NAMES:
            raise ValueError(f"unknown fixed coordinate {name!r}")
        if name in (a1, a2):
            raise ValueError(f"coordinate {name!r} cannot be both axis and fixed")
    for name in AXIS_NAMES:
        if name not in (a1, a2):
            fixed.setdefault(name, 0.0)
    g1 = default_slice_grid() if grid1 is None else np.asarray(grid1, float)
    g2 = default_slice_grid() if grid2 is None else np.asarray(grid2, float)
    G1, G2 = np.meshgrid(g1, g2, indexing="ij")
    coords = {a1: G1, a2: G2}
    args = [coords.get(name, fixed.get(name)) for name in AXIS_NAMES]
    values = wigner_two_mode(state, *args)
    return WignerSlice(
        axis_names=(a1, a2), axis1=g1, axis2=g2, fixed=fixed, values=values
    )


def minimum_wigner_value(state: SingleModeState, grid=None) -> float:
    """Grid minimum of a one-mode Wigner function (default grid +/-3)."""
    g = default_slice_grid() if grid is None else np.asarray(grid, float)
    return float(np.min(wigner_single_grid(state, g, g)))
