"""Iterative maximum-likelihood reconstruction from homodyne records.

Records are binned on a fixed quadrature lattice (width 0.1 by default,
centers at (k + 1/2) * width) and grouped by measurement-phase pair.  Bin
probabilities use the midpoint rule, p_j = width^2 * density(center_j);
for the smooth truncated-Fock densities here the midpoint sums converge
superexponentially, which is what makes the true state a fixed point of
the iteration when the counts match their expectations.

The update is the standard expectation-maximization-like map
rho <- N[R_d rho R_d] with R = sum_j (c_j / p_j) Pi_j and an optional
dilution R_d = (1 - d) Tr(R rho) I + d R.  Likelihood is tracked every
iteration; the best iterate is returned if the budget runs out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ZeroProbabilityBinError
from .fock import FockCutoff, SingleModeState, TwoModeState
from .quadrature import RecordArray, density_kernel, quadrature_basis, rho_double_index

DEFAULT_BIN_WIDTH = 0.1


def bin_centers_for(x: np.ndarray, bin_width: float):
    """Bin index and center for each sample: center = (floor(x/w) + 1/2) w."""
    k = np.floor(np.asarray(x, dtype=float) / bin_width).astype(np.int64)
    return k, (k + 0.5) * bin_width


@dataclass(frozen=True)
class BinnedData:
    """Dual-homodyne counts on a shared bin-center grid, one slab per pair."""

    bin_width: float
    pairs_deg: tuple
    centers: np.ndarray
    counts: np.ndarray  # (n_pairs, n_centers, n_centers), float

    @property
    def n_events(self) -> float:
        return float(self.counts.sum())

    def occupied_fraction(self) -> float:
        return float(np.count_nonzero(self.counts)) / self.counts.size


def bin_records(records: RecordArray, bin_width: float = DEFAULT_BIN_WIDTH) -> BinnedData:
    """Group records by phase pair and histogram them on the bin lattice."""
    if len(records) == 0:
        raise ValueError("cannot bin an empty record set")
    k1, _ = bin_centers_for(records.x1, bin_width)
    k2, _ = bin_centers_for(records.x2, bin_width)
    k_min = int(min(k1.min(), k2.min()))
    k_max = int(max(k1.max(), k2.max()))
    centers = (np.arange(k_min, k_max + 1) + 0.5) * bin_width
    nc = centers.size

    pairs = sorted(set(zip(records.theta1_deg.tolist(), records.theta2_deg.tolist())))
    counts = np.zeros((len(pairs), nc, nc))
    index = {p: i for i, p in enumerate(pairs)}
    pair_of = np.fromiter(
        (index[(t1, t2)] for t1, t2 in zip(records.theta1_deg, records.theta2_deg)),
        dtype=np.int64,
        count=len(records),
    )
    np.add.at(counts, (pair_of, k1 - k_min, k2 - k_min), 1.0)
    return BinnedData(bin_width, tuple(pairs), centers, counts)


@dataclass(frozen=True)
class BinnedSingleData:
    """One-mode homodyne counts: counts[k, i] for phase k, center i."""

    bin_width: float
    phases_deg: tuple
    centers: np.ndarray
    counts: np.ndarray

    @property
    def n_events(self) -> float:
        return float(self.counts.sum())


def bin_single_records(
    theta_deg, x, bin_width: float = DEFAULT_BIN_WIDTH
) -> BinnedSingleData:
    theta_deg = np.asarray(theta_deg, dtype=float)
    x = np.asarray(x, dtype=float)
    if theta_deg.size == 0:
        raise ValueError("cannot bin an empty record set")
    k, _ = bin_centers_for(x, bin_width)
    k_min, k_max = int(k.min()), int(k.max())
    centers = (np.arange(k_min, k_max + 1) + 0.5) * bin_width
    phases = sorted(set(theta_deg.tolist()))
    index = {p: i for i, p in enumerate(phases)}
    counts = np.zeros((len(phases), centers.size))
    rows = np.fromiter((index[t] for t in theta_deg), dtype=np.int64, count=x.size)
    np.add.at(counts, (rows, k - k_min), 1.0)
    return BinnedSingleData(bin_width, tuple(phases), centers, counts)


@dataclass(frozen=True)
class MleOptions:
    max_iterations: int = 2000
    ll_tol: float = 1e-9          # stop when |delta logL| / N drops below
    dilution: float = 1.0         # 1 = plain R rho R update
    monotonicity_slack: float = 1e-12  # tolerated per-count likelihood drop


@dataclass(frozen=True)
class MleResult:
    state: object
    converged: bool
    iterations: int
    log_likelihoods: np.ndarray = field(repr=False)
    best_iteration: int = 0

    @property
    def log_likelihood(self) -> float:
        return float(self.log_likelihoods[self.best_iteration])


def _mle_iterate(counts, rho, dim, options, project):
    """Shared likelihood-maximization loop over `project(rho) -> (P, R)`."""
    n_total = max(float(sum(c.sum() for c in counts)), 1.0)
    lls = []
    best_ll, best_rho = -math.inf, rho
    converged = False
    for _ in range(options.max_iterations):
        P_groups, R = project(rho)
        ll = 0.0
        for C, P in zip(counts, P_groups):
            occ = C > 0
            if np.any(P[occ] <= 0.0):
                raise ZeroProbabilityBinError(
                    "counts observed in a bin the model gives zero probability; "
                    "increase the cutoff"
                )
            ll += float(np.sum(C[occ] * np.log(P[occ])))
        lls.append(ll)
        if ll > best_ll:
            best_ll, best_rho = ll, rho
        if len(lls) >= 2:
            delta = lls[-1] - lls[-2]
            if delta < -options.monotonicity_slack * n_total:
                break  # numerical breakdown: hand back the best iterate
            if abs(delta) / n_total < options.ll_tol:
                converged = True
                break
        R = 0.5 * (R + R.conj().T)
        if options.dilution != 1.0:
            tr_r = float(np.real(np.trace(R @ rho)))
            R = (1.0 - options.dilution) * tr_r * np.eye(dim) + options.dilution * R
        rho = R @ rho @ R
        rho = 0.5 * (rho + rho.conj().T)
        rho /= rho.trace().real
    final_rho = rho if converged else best_rho
    lls = np.asarray(lls)
    return final_rho, converged, len(lls), lls, int(np.argmax(lls))


def mle_reconstruct(
    data: BinnedData,
    cutoff: FockCutoff,
    *,
    options: MleOptions | None = None,
    initial: TwoModeState | None = None,
) -> MleResult:
    """Two-mode reconstruction; starts from the maximally mixed state."""
    opts = options or MleOptions()
    d = cutoff.dim
    w2 = data.bin_width ** 2
    b1 = {}
    b2 = {}
    for t1, t2 in data.pairs_deg:
        if t1 not in b1:
            b1[t1] = density_kernel(
                quadrature_basis(cutoff.n_max, data.centers, math.radians(t1))
            )
        if t2 not in b2:
            b2[t2] = density_kernel(
                quadrature_basis(cutoff.n_max, data.centers, math.radians(t2))
            )

    counts = [data.counts[k] for k in range(len(data.pairs_deg))]

    def project(rho):
        R2 = rho_double_index(rho, d)
        P_groups = []
        Racc = np.zeros((d * d, d * d), dtype=complex)
        for k, (t1, t2) in enumerate(data.pairs_deg):
            D = np.real(b1[t1] @ R2 @ b2[t2].T)
            P = w2 * D
            P_groups.append(P)
            C = counts[k]
            occ = C > 0
            if not np.any(occ):
                continue
            Psafe = np.where(P > 0, P, 1.0)
            Q = np.where(occ, C / Psafe, 0.0)
            # projector entries are the conjugates of the kernel rows
            Racc += w2 * (b1[t1].conj().T @ Q @ b2[t2].conj())
        Rstd = Racc.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
        return P_groups, Rstd

    rho0 = initial.rho.copy() if initial is not None else np.eye(d * d, dtype=complex) / (d * d)
    rho, converged, iterations, lls, best = _mle_iterate(counts, rho0, d * d, opts, project)
    state = TwoModeState(cutoff, rho, trace_slack=1e-9)
    return MleResult(state, converged, iterations, lls, best)


def mle_reconstruct_single(
    data: BinnedSingleData,
    cutoff: FockCutoff,
    *,
    options: MleOptions | None = None,
    initial: SingleModeState | None = None,
) -> MleResult:
    """One-mode reconstruction from phase-resolved homodyne counts."""
    opts = options or MleOptions()
    d = cutoff.dim
    w = data.bin_width
    bases = [
        quadrature_basis(cutoff.n_max, data.centers, math.radians(t))
        for t in data.phases_deg
    ]
    counts = [data.counts[k] for k in range(len(data.phases_deg))]

    def project(rho):
        P_groups = []
        Racc = np.zeros((d, d), dtype=complex)
        for u, C in zip(bases, counts):
            P = w * np.einsum("im,mn,in->i", u.conj(), rho, u).real
            P_groups.append(P)
            occ = C > 0
            if not np.any(occ):
                continue
            Psafe = np.where(P > 0, P, 1.0)
            Q = np.where(occ, C / Psafe, 0.0)
            Racc += w * np.einsum("i,im,in->mn", Q, u, u.conj())
        return P_groups, Racc

    rho0 = initial.rho.copy() if initial is not None else np.eye(d, dtype=complex) / d
    rho, converged, iterations, lls, best = _mle_iterate(counts, rho0, d, opts, project)
    state = SingleModeState(cutoff, rho, trace_slack=1e-9)
    return MleResult(state, converged, iterations, lls, best)


def mle_update_step(data: BinnedData, state: TwoModeState) -> TwoModeState:
    """One iteration of the reconstruction map applied to `state`.

    Exposes the fixed-point property directly: when the counts equal their
    expectations under `state`, the update returns `state` to machine
    precision.
    """
    d = state.cutoff.dim
    w2 = data.bin_width ** 2
    R2 = rho_double_index(state.rho, d)
    Racc = np.zeros((d * d, d * d), dtype=complex)
    for k, (t1, t2) in enumerate(data.pairs_deg):
        b1 = density_kernel(
            quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t1))
        )
        b2 = density_kernel(
            quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t2))
        )
        P = w2 * np.real(b1 @ R2 @ b2.T)
        C = data.counts[k]
        occ = C > 0
        if np.any(P[occ] <= 0.0):
            raise ZeroProbabilityBinError("zero model probability at occupied bin")
        Psafe = np.where(P > 0, P, 1.0)
        Q = np.where(occ, C / Psafe, 0.0)
        Racc += w2 * (b1.conj().T @ Q @ b2.conj())
    R = Racc.reshape(d, d, d, d).transpose(0, 2, 1, 3).reshape(d * d, d * d)
    R = 0.5 * (R + R.conj().T)
    rho = R @ state.rho @ R
    rho = 0.5 * (rho + rho.conj().T)
    rho /= rho.trace().real
    return TwoModeState(state.cutoff, rho, trace_slack=1e-9)


def log_likelihood(data: BinnedData, state: TwoModeState) -> float:
    """Sum of count-weighted log bin probabilities under `state`."""
    d = state.cutoff.dim
    w2 = data.bin_width ** 2
    R2 = rho_double_index(state.rho, d)
    ll = 0.0
    for k, (t1, t2) in enumerate(data.pairs_deg):
        u1 = quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t1))
        u2 = quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t2))
        P = w2 * np.real(density_kernel(u1) @ R2 @ density_kernel(u2).T)
        C = data.counts[k]
        occ = C > 0
        if np.any(P[occ] <= 0.0):
            raise ZeroProbabilityBinError("zero model probability at occupied bin")
        ll += float(np.sum(C[occ] * np.log(P[occ])))
    return ll


def expected_counts(state: TwoModeState, data: BinnedData) -> BinnedData:
    """Replace observed counts with their model expectations (same totals)."""
    d = state.cutoff.dim
    w2 = data.bin_width ** 2
    R2 = rho_double_index(state.rho, d)
    out = np.empty_like(data.counts)
    for k, (t1, t2) in enumerate(data.pairs_deg):
        u1 = quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t1))
        u2 = quadrature_basis(state.cutoff.n_max, data.centers, math.radians(t2))
        P = w2 * np.real(density_kernel(u1) @ R2 @ density_kernel(u2).T)
        out[k] = data.counts[k].sum() * np.maximum(P, 0.0)
    return BinnedData(data.bin_width, data.pairs_deg, data.centers, out)
