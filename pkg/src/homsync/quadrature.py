"""Homodyne quadrature densities and an exact lattice sampler.

Units: hbar = 1, vacuum quadrature variance 1/2.  The number-basis
wavefunctions are psi_0(x) = pi^{-1/4} exp(-x^2/2) and the usual
oscillator recurrence above it.  A quadrature measured at local-oscillator
phase theta projects onto u_n(x) = exp(-i n theta) psi_n(x), so rotating
the measurement phase by phi is equivalent to shifting the state's phase
by +phi on every mode first.

Low-level functions take phases in radians; the record/sampling layer and
the on-disk formats use degrees, matching how measurement settings are
configured.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NormalizationError
from .fock import SingleModeState, TwoModeState
from .rng import substream

RECORD_FIELDS = ("theta1_deg", "theta2_deg", "x1", "x2", "tau1_ns", "tau2_ns")


def wavefunctions(n_max: int, x) -> np.ndarray:
    """psi_n(x) for n = 0..n_max; shape (len(x), n_max + 1)."""
    x = np.atleast_1d(np.asarray(x, dtype=float))
    out = np.empty((x.size, n_max + 1))
    out[:, 0] = math.pi ** -0.25 * np.exp(-x * x / 2.0)
    if n_max >= 1:
        out[:, 1] = math.sqrt(2.0) * x * out[:, 0]
    for k in range(1, n_max):
        out[:, k + 1] = (
            math.sqrt(2.0 / (k + 1)) * x * out[:, k]
            - math.sqrt(k / (k + 1.0)) * out[:, k - 1]
        )
    return out


def quadrature_basis(n_max: int, x, theta: float) -> np.ndarray:
    """u_n(x) = exp(-i n theta) psi_n(x); shape (len(x), n_max + 1)."""
    psi = wavefunctions(n_max, x)
    phases = np.exp(-1j * theta * np.arange(n_max + 1))
    return psi * phases


def density_kernel(u: np.ndarray) -> np.ndarray:
    """Map a basis table u[i, n] to B[i, m*d + n] = conj(u[i,m]) u[i,n].

    Row i of B contracts a double-indexed density matrix to the measured
    density at lattice point i.
    """
    npts, d = u.shape
    return (u.conj()[:, :, None] * u[:, None, :]).reshape(npts, d * d)


def rho_double_index(rho: np.ndarray, d: int) -> np.ndarray:
    """Reorder rho[(m1,m2),(n1,n2)] to R[(m1,n1),(m2,n2)].

    In this layout the two-mode density factorizes into a matrix product
    over the two single-mode kernels.
    """
    return rho.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)


def single_density(state: SingleModeState, theta: float, x) -> np.ndarray:
    """Quadrature density of a one-mode state at phase theta (radians)."""
    u = quadrature_basis(state.cutoff.n_max, theta=theta, x=x)
    return np.einsum("im,mn,in->i", u.conj(), state.rho, u).real


def joint_density_grid(
    state: TwoModeState, theta1: float, theta2: float, x1, x2
) -> np.ndarray:
    """Joint density on the product grid x1 (x) x2; shape (len(x1), len(x2)).

    Phases in radians.
    """
    d = state.cutoff.dim
    b1 = density_kernel(quadrature_basis(d - 1, x1, theta1))
    b2 = density_kernel(quadrature_basis(d - 1, x2, theta2))
    R = rho_double_index(state.rho, d)
    return np.real(b1 @ R @ b2.T)


def joint_density(
    state: TwoModeState, theta1: float, theta2: float, x1, x2
):
    """Joint density at paired points (x1[i], x2[i]); phases in radians."""
    x1 = np.atleast_1d(np.asarray(x1, dtype=float))
    x2 = np.atleast_1d(np.asarray(x2, dtype=float))
    if x1.shape != x2.shape:
        raise ValueError("x1 and x2 must have matching shapes")
    d = state.cutoff.dim
    u1 = quadrature_basis(d - 1, x1, theta1)
    u2 = quadrature_basis(d - 1, x2, theta2)
    v = (u1[:, :, None] * u2[:, None, :]).reshape(x1.size, d * d)
    dens = np.einsum("ia,ab,ib->i", v.conj(), state.rho, v).real
    return dens if dens.size > 1 else float(dens[0])


def phase_pairs(phases_deg) -> list:
    """All ordered measurement-phase combinations, as (theta1, theta2)."""
    vals = [float(p) for p in phases_deg]
    return [(p1, p2) for p1 in vals for p2 in vals]


DEFAULT_PHASES_DEG = (0.0, 30.0, 60.0, 90.0, 120.0, 150.0)


@dataclass(frozen=True)
class QuadratureRecord:
    """One heralded dual-homodyne event."""

    theta1_deg: float
    theta2_deg: float
    x1: float
    x2: float
    tau1_ns: float = 0.0
    tau2_ns: float = 0.0


class RecordArray:
    """Column-wise store of quadrature records.

    Columns follow RECORD_FIELDS; all are float64 of equal length.
    """

    def __init__(self, theta1_deg, theta2_deg, x1, x2, tau1_ns=None, tau2_ns=None):
        n = len(x1)
        if tau1_ns is None:
            tau1_ns = np.zeros(n)
        if tau2_ns is None:
            tau2_ns = np.zeros(n)
        cols = [theta1_deg, theta2_deg, x1, x2, tau1_ns, tau2_ns]
        arrays = [np.asarray(c, dtype=float) for c in cols]
        if any(a.shape != (n,) for a in arrays):
            raise ValueError("all record columns must share one length")
        (self.theta1_deg, self.theta2_deg, self.x1, self.x2,
         self.tau1_ns, self.tau2_ns) = arrays

    def __len__(self) -> int:
        return self.x1.size

    def __getitem__(self, i: int) -> QuadratureRecord:
        return QuadratureRecord(*(getattr(self, f)[i] for f in RECORD_FIELDS))

    def column(self, name: str) -> np.ndarray:
        if name not in RECORD_FIELDS:
            raise KeyError(name)
        return getattr(self, name)

    @classmethod
    def empty(cls) -> "RecordArray":
        z = np.zeros(0)
        return cls(z, z, z, z, z, z)

    @classmethod
    def concat(cls, parts) -> "RecordArray":
        parts = list(parts)
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                     for f in RECORD_FIELDS))

    def take(self, idx) -> "RecordArray":
        return RecordArray(*(getattr(self, f)[idx] for f in RECORD_FIELDS))

    # --- serialization: repr() floats, so round trips are bit exact ---

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write(",".join(RECORD_FIELDS) + "\n")
            cols = [getattr(self, f) for f in RECORD_FIELDS]
            for row in zip(*cols):
                fh.write(",".join(repr(float(v)) for v in row) + "\n")

    @classmethod
    def from_csv(cls, path) -> "RecordArray":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if tuple(header) != RECORD_FIELDS:
                raise ValueError(f"unexpected record header {header!r}")
            rows = [tuple(float(v) for v in row) for row in reader if row]
        if not rows:
            return cls.empty()
        cols = list(zip(*rows))
        return cls(*(np.asarray(c) for c in cols))

    def to_jsonl(self, path) -> None:
        with open(path, "w") as fh:
            for i in range(len(self)):
                rec = {f: float(getattr(self, f)[i]) for f in RECORD_FIELDS}
                fh.write(json.dumps(rec) + "\n")

    @classmethod
    def from_jsonl(cls, path) -> "RecordArray":
        cols = {f: [] for f in RECORD_FIELDS}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                rec = json.loads(line)
                for f in RECORD_FIELDS:
                    cols[f].append(float(rec[f]))
        return cls(*(np.asarray(cols[f]) for f in RECORD_FIELDS))


@dataclass(frozen=True)
class SamplerOptions:
    """Lattice and tolerance settings for the exact quadrature sampler."""

    x_min: float = -6.0
    x_max: float = 6.0
    x_step: float = 0.01
    normalization_tol: float = 1e-3

    def lattice(self) -> np.ndarray:
        n = int(round((self.x_max - self.x_min) / self.x_step))
        return self.x_min + self.x_step * np.arange(n + 1)


def _cell_cumsum(row_vals: np.ndarray, h: float) -> np.ndarray:
    """Cumulative trapezoid cell masses along the last axis."""
    cells = 0.5 * h * (row_vals[..., :-1] + row_vals[..., 1:])
    return np.cumsum(cells, axis=-1)


def _invert_linear_cdf(a, b, h, resid):
    """Solve for t in [0,1]: h * (a t + (b - a) t^2 / 2) = resid.

    a, b are the nonnegative density values at the cell edges.  Stable for
    a -> 0 and b -> a; zero-mass cells return 0.
    """
    q = 0.5 * (b - a)
    m = resid / h
    disc = np.maximum(a * a + 4.0 * q * m, 0.0)
    denom = a + np.sqrt(disc)
    t = np.where(denom > 0.0, 2.0 * m / np.where(denom > 0.0, denom, 1.0), 0.0)
    return np.clip(t, 0.0, 1.0)


def _sample_from_grid(D: np.ndarray, x: np.ndarray, n: int, rng, tol: float):
    """Draw n points exactly from the bilinear interpolant of D on x (x) x.

    D[i, j] is the joint density at (x[i], x[j]).  The first coordinate is
    drawn from the piecewise-linear marginal by analytic CDF inversion; the
    second from the interpolant's exact conditional, a blend of the two
    bracketing lattice rows.
    """
    h = float(x[1] - x[0])
    D = np.maximum(D, 0.0)  # clip float-noise negatives

    row_mass = _cell_cumsum(D, h)   # (npts, ncells) per-row cumulative
    gvals = row_mass[:, -1]         # trapezoid marginal of x1 at the nodes
    marg_cum = _cell_cumsum(gvals, h)
    total = float(marg_cum[-1])
    if abs(total - 1.0) > tol:
        raise NormalizationError(
            f"grid density integrates to {total!r}, outside 1 +/- {tol}"
        )

    u = rng.random((2, n))
    # coordinate 1: global piecewise-linear marginal
    r1 = u[0] * total
    i1 = np.searchsorted(marg_cum, r1, side="left")
    i1 = np.minimum(i1, marg_cum.size - 1)
    prev1 = np.where(i1 > 0, marg_cum[np.maximum(i1 - 1, 0)], 0.0)
    t1 = _invert_linear_cdf(gvals[i1], gvals[i1 + 1], h, r1 - prev1)
    x1 = x[i1] + h * t1

    # coordinate 2: conditional row = (1-t1) * row[i1] + t1 * row[i1+1]
    w0, w1 = 1.0 - t1, t1
    cum_last = w0 * row_mass[i1, -1] + w1 * row_mass[i1 + 1, -1]
    r2 = u[1] * cum_last
    ncells = row_mass.shape[1]
    lo = np.zeros(n, dtype=np.int64)
    hi = np.full(n, ncells - 1, dtype=np.int64)
    while np.any(lo < hi):
        mid = (lo + hi) // 2
        cm = w0 * row_mass[i1, mid] + w1 * row_mass[i1 + 1, mid]
        go_right = cm < r2
        lo = np.where(go_right, mid + 1, lo)
        hi = np.where(go_right, hi, mid)
    j = lo
    prev2 = np.where(
        j > 0,
        w0 * row_mass[i1, np.maximum(j - 1, 0)]
        + w1 * row_mass[i1 + 1, np.maximum(j - 1, 0)],
        0.0,
    )
    a2 = w0 * D[i1, j] + w1 * D[i1 + 1, j]
    b2 = w0 * D[i1, j + 1] + w1 * D[i1 + 1, j + 1]
    t2 = _invert_linear_cdf(a2, b2, h, r2 - prev2)
    x2 = x[j] + h * t2
    return x1, x2


def _sample_marginal(g: np.ndarray, x: np.ndarray, n: int, rng, tol: float):
    """Draw n points from the piecewise-linear density with node values g."""
    h = float(x[1] - x[0])
    g = np.maximum(g, 0.0)
    cum = _cell_cumsum(g, h)
    total = float(cum[-1])
    if abs(total - 1.0) > tol:
        raise NormalizationError(
            f"density integrates to {total!r}, outside 1 +/- {tol}"
        )
    r = rng.random(n) * total
    i = np.minimum(np.searchsorted(cum, r, side="left"), cum.size - 1)
    prev = np.where(i > 0, cum[np.maximum(i - 1, 0)], 0.0)
    t = _invert_linear_cdf(g[i], g[i + 1], h, r - prev)
    return x[i] + h * t


def sample_single_quadratures(
    state: SingleModeState,
    n_events: int,
    seed: int,
    *,
    phases_deg=DEFAULT_PHASES_DEG,
    options: SamplerOptions | None = None,
    stage: str = "sampler1",
):
    """One-mode homodyne records: (theta_deg, x) arrays of length n_events."""
    opts = options or SamplerOptions()
    x = opts.lattice()
    vals = [float(p) for p in phases_deg]
    pick = substream(seed, f"{stage}:phases").integers(0, len(vals), size=n_events)
    th = np.empty(n_events)
    xs = np.empty(n_events)
    for k, p in enumerate(vals):
        idx = np.nonzero(pick == k)[0]
        th[idx] = p
        if idx.size == 0:
            continue
        g = single_density(state, math.radians(p), x)
        rng = substream(seed, f"{stage}:x:{p:g}")
        xs[idx] = _sample_marginal(g, x, idx.size, rng, opts.normalization_tol)
    return th, xs


def sample_quadratures(
    state: TwoModeState,
    n_events: int,
    seed: int,
    *,
    phases_deg=DEFAULT_PHASES_DEG,
    options: SamplerOptions | None = None,
    stage: str = "sampler",
) -> RecordArray:
    """Simulate n_events dual-homodyne records of a two-mode state.

    Each event draws a measurement-phase pair uniformly from the grid, then
    an (x1, x2) sample from that pair's joint density.  Every phase pair
    uses its own seed-derived substream, so record i is reproducible from
    (seed, stage) alone, in the original event order.
    """
    opts = options or SamplerOptions()
    x = opts.lattice()
    pairs = phase_pairs(phases_deg)
    pick = substream(seed, f"{stage}:pairs").integers(0, len(pairs), size=n_events)

    th1 = np.empty(n_events)
    th2 = np.empty(n_events)
    x1 = np.empty(n_events)
    x2 = np.empty(n_events)
    for k, (p1, p2) in enumerate(pairs):
        idx = np.nonzero(pick == k)[0]
        th1[idx], th2[idx] = p1, p2
        if idx.size == 0:
            continue
        D = joint_density_grid(state, math.radians(p1), math.radians(p2), x, x)
        rng = substream(seed, f"{stage}:xy:{p1:g}:{p2:g}")
        s1, s2 = _sample_from_grid(D, x, idx.size, rng, opts.normalization_tol)
        x1[idx], x2[idx] = s1, s2
    return RecordArray(th1, th2, x1, x2)
