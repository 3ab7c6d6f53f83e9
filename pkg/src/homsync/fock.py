"""Truncated Fock-space states and passive linear-optics operations.

Conventions used throughout the package:

  * each mode is truncated at n_max photons (n_max >= 2, default 5); the
    joint basis index of |n1, n2> is n1 * (n_max + 1) + n2,
  * the balanced beam splitter maps |1,1> to (|2,0> - |0,2>)/sqrt(2); the
    generator is theta * (a1^dag a2 - a1 a2^dag) with cos(theta)^2 equal to
    the transmittance,
  * operations never renormalize.  Probability pushed past the cutoff is
    accounted for explicitly and raises TruncationLeakError above the
    configured tolerance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import TruncationLeakError

HERMITICITY_ATOL = 1e-12
TRACE_ATOL = 1e-10
EIGENVALUE_FLOOR = -1e-10
DEFAULT_LEAK_TOL = 1e-6
DEFAULT_N_MAX = 5


@dataclass(frozen=True)
class FockCutoff:
    """Per-mode photon-number truncation (occupations 0..n_max)."""

    n_max: int = DEFAULT_N_MAX

    def __post_init__(self) -> None:
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise ValueError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return self.n_max + 1

    def index(self, n1: int, n2: int) -> int:
        """Joint-basis row of |n1, n2>."""
        if not (0 <= n1 <= self.n_max and 0 <= n2 <= self.n_max):
            raise ValueError(f"occupation ({n1},{n2}) outside cutoff {self.n_max}")
        return n1 * self.dim + n2


def _as_density_matrix(rho: np.ndarray, dim: int, trace_slack: float) -> np.ndarray:
    rho = np.array(rho, dtype=complex)
    if rho.shape != (dim, dim):
        raise ValueError(f"density matrix must be {dim}x{dim}, got {rho.shape}")
    herm = np.max(np.abs(rho - rho.conj().T)) if rho.size else 0.0
    if herm > HERMITICITY_ATOL:
        raise ValueError(f"density matrix not Hermitian (max asymmetry {herm:.3e})")
    tr = rho.trace().real
    if abs(tr - 1.0) > TRACE_ATOL + trace_slack:
        raise ValueError(f"trace {tr!r} differs from 1 beyond tolerance")
    evals = np.linalg.eigvalsh(rho)
    if evals[0] < EIGENVALUE_FLOOR:
        raise ValueError(f"density matrix not PSD (min eigenvalue {evals[0]:.3e})")
    rho.setflags(write=False)
    return rho


@dataclass(frozen=True)
class SingleModeState:
    """One-mode density matrix, validated on construction."""

    cutoff: FockCutoff
    rho: np.ndarray
    trace_slack: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self, "rho", _as_density_matrix(self.rho, self.cutoff.dim, self.trace_slack)
        )

    @classmethod
    def from_fock(cls, cutoff: FockCutoff, n: int) -> "SingleModeState":
        rho = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
        if not 0 <= n <= cutoff.n_max:
            raise ValueError(f"occupation {n} outside cutoff {cutoff.n_max}")
        rho[n, n] = 1.0
        return cls(cutoff, rho)

    @classmethod
    def vacuum(cls, cutoff: FockCutoff) -> "SingleModeState":
        return cls.from_fock(cutoff, 0)

    @classmethod
    def from_number_probabilities(
        cls, cutoff: FockCutoff, probabilities
    ) -> "SingleModeState":
        p = np.asarray(probabilities, dtype=float)
        if p.ndim != 1 or len(p) > cutoff.dim:
            raise ValueError("probability vector longer than the cutoff dimension")
        rho = np.zeros((cutoff.dim, cutoff.dim), dtype=complex)
        rho[: len(p), : len(p)] = np.diag(p)
        return cls(cutoff, rho)

    def trace(self) -> float:
        return self.rho.trace().real

    def purity(self) -> float:
        return np.vdot(self.rho, self.rho).real

    def number_distribution(self) -> np.ndarray:
        return self.rho.diagonal().real.copy()

    def is_number_diagonal(self, atol: float = 1e-12) -> bool:
        off = self.rho - np.diag(self.rho.diagonal())
        return bool(np.max(np.abs(off)) <= atol) if off.size else True


@dataclass(frozen=True)
class TwoModeState:
    """Two-mode density matrix on the joint truncated basis."""

    cutoff: FockCutoff
    rho: np.ndarray
    trace_slack: float = field(default=0.0, repr=False, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(
            self,
            "rho",
            _as_density_matrix(self.rho, self.cutoff.dim ** 2, self.trace_slack),
        )

    @classmethod
    def from_ket(cls, cutoff: FockCutoff, ket) -> "TwoModeState":
        v = np.asarray(ket, dtype=complex).ravel()
        if v.shape != (cutoff.dim ** 2,):
            raise ValueError("ket length must equal dim^2")
        norm = np.linalg.norm(v)
        if abs(norm - 1.0) > 1e-10:
            raise ValueError(f"ket norm {norm!r} differs from 1")
        return cls(cutoff, np.outer(v, v.conj()))

    @classmethod
    def from_fock(cls, cutoff: FockCutoff, n1: int, n2: int) -> "TwoModeState":
        v = np.zeros(cutoff.dim ** 2, dtype=complex)
        v[cutoff.index(n1, n2)] = 1.0
        return cls.from_ket(cutoff, v)

    @classmethod
    def vacuum(cls, cutoff: FockCutoff) -> "TwoModeState":
        return cls.from_fock(cutoff, 0, 0)

    @classmethod
    def product(
        cls, state1: SingleModeState, state2: SingleModeState
    ) -> "TwoModeState":
        if state1.cutoff != state2.cutoff:
            raise ValueError("product factors must share a cutoff")
        return cls(state1.cutoff, np.kron(state1.rho, state2.rho))

    def trace(self) -> float:
        return self.rho.trace().real

    def purity(self) -> float:
        return np.vdot(self.rho, self.rho).real

    def number_distribution(self) -> np.ndarray:
        """Joint photon-number probabilities, shape (dim, dim)."""
        d = self.cutoff.dim
        return self.rho.diagonal().real.reshape(d, d).copy()

    def element(self, bra: tuple, ket: tuple) -> complex:
        """<bra| rho |ket> for occupation tuples (n1, n2)."""
        return complex(self.rho[self.cutoff.index(*bra), self.cutoff.index(*ket)])


def hom_ket(cutoff: FockCutoff, theta: float = 0.0) -> np.ndarray:
    """Ket of (|2,0> - e^{2 i theta} |0,2>)/sqrt(2), theta in radians."""
    v = np.zeros(cutoff.dim ** 2, dtype=complex)
    v[cutoff.index(2, 0)] = 1.0 / math.sqrt(2.0)
    v[cutoff.index(0, 2)] = -np.exp(2j * theta) / math.sqrt(2.0)
    return v


def hom_state(cutoff: FockCutoff, theta: float = 0.0) -> TwoModeState:
    """Ideal bunched output of the balanced splitter fed with |1,1>."""
    return TwoModeState.from_ket(cutoff, hom_ket(cutoff, theta))


def ket_fidelity(state: TwoModeState, ket) -> float:
    """<ket| rho |ket> for a pure reference."""
    v = np.asarray(ket, dtype=complex).ravel()
    return float(np.real(v.conj() @ state.rho @ v))


def coincidence_probability(state: TwoModeState) -> float:
    """<1,1| rho |1,1>."""
    i = state.cutoff.index(1, 1)
    return float(state.rho[i, i].real)


@dataclass(frozen=True)
class SourceModel:
    """Number-diagonal photon source: vacuum / single / double occupancy."""

    p0: float
    p1: float
    p2: float = 0.0

    def __post_init__(self) -> None:
        probs = (self.p0, self.p1, self.p2)
        if min(probs) < 0.0:
            raise ValueError(f"negative probability in {probs}")
        if abs(sum(probs) - 1.0) > 1e-9:
            raise ValueError(f"probabilities {probs} do not sum to 1")

    def state(self, cutoff: FockCutoff) -> SingleModeState:
        return SingleModeState.from_number_probabilities(
            cutoff, [self.p0, self.p1, self.p2]
        )


# ----- Beam splitter -----

@lru_cache(maxsize=64)
def _beam_splitter_matrix(n_max: int, transmittance: float) -> np.ndarray:
    """Fock matrix of exp(theta (a1^dag a2 - a1 a2^dag)), cos(theta)^2 = t.

    Built from the closed-form expansion of
    (c a1^dag - s a2^dag)^{n1} (s a1^dag + c a2^dag)^{n2} |0,0>
    with c = sqrt(t), s = sqrt(1-t).  At t = 0.5 the |1,1> -> |1,1>
    amplitude is c*c - s*s and cancels exactly in floating point.
    """
    d = n_max + 1
    c = math.sqrt(transmittance)
    s = math.sqrt(1.0 - transmittance)
    sqrt_fact = [math.sqrt(math.factorial(n)) for n in range(2 * n_max + 1)]
    B = np.zeros((d * d, d * d))
    for n1 in range(d):
        for n2 in range(d):
            col = n1 * d + n2
            denom = sqrt_fact[n1] * sqrt_fact[n2]
            for k in range(n1 + 1):
                for l in range(n2 + 1):
                    m1 = k + l
                    m2 = n1 + n2 - m1
                    if m1 > n_max or m2 > n_max:
                        continue
                    amp = (
                        math.comb(n1, k)
                        * math.comb(n2, l)
                        * c ** k
                        * (-s) ** (n1 - k)
                        * s ** l
                        * c ** (n2 - l)
                    )
                    B[m1 * d + m2, col] += amp * sqrt_fact[m1] * sqrt_fact[m2] / denom
    B.setflags(write=False)
    return B


def _embed(rho: np.ndarray, n_small: int, n_big: int) -> np.ndarray:
    ds, db = n_small + 1, n_big + 1
    r4 = rho.reshape(ds, ds, ds, ds)
    out = np.zeros((db, db, db, db), dtype=complex)
    out[:ds, :ds, :ds, :ds] = r4
    return out.reshape(db * db, db * db)


def _project(rho_big: np.ndarray, n_big: int, n_small: int) -> tuple:
    ds, db = n_small + 1, n_big + 1
    r4 = rho_big.reshape(db, db, db, db)
    kept = r4[:ds, :ds, :ds, :ds].reshape(ds * ds, ds * ds).copy()
    leak = rho_big.trace().real - kept.trace().real
    return kept, leak


def beam_splitter_apply(
    state: TwoModeState,
    transmittance: float,
    *,
    inverse: bool = False,
    leak_tol: float = DEFAULT_LEAK_TOL,
) -> TwoModeState:
    """Apply the two-mode beam splitter of the given transmittance.

    The unitary conserves total photon number, so it is applied at an
    enlarged cutoff (2 n_max) where it is exact for every representable
    input, then projected back.  The projected-out probability is the
    truncation leak; above `leak_tol` it raises instead of renormalizing.
    Set `inverse` for the inverse splitter (transpose of the real matrix).
    """
    if not 0.0 <= transmittance <= 1.0:
        raise ValueError(f"transmittance must lie in [0, 1], got {transmittance}")
    n_max = state.cutoff.n_max
    big = 2 * n_max
    B = _beam_splitter_matrix(big, float(transmittance))
    if inverse:
        B = B.T
    rho_big = _embed(state.rho, n_max, big)
    out_big = B @ rho_big @ B.T
    rho_out, leak = _project(out_big, big, n_max)
    if leak > leak_tol:
        raise TruncationLeakError(leak, leak_tol, "beam_splitter_apply")
    return TwoModeState(state.cutoff, rho_out, trace_slack=max(leak, 0.0))


def phase_shift_apply(state: TwoModeState, mode: int, theta: float) -> TwoModeState:
    """Conjugate by exp(i theta n_mode); theta in radians, mode 1 or 2."""
    d = state.cutoff.dim
    ph = np.exp(1j * theta * np.arange(d))
    if mode == 1:
        u = np.kron(ph, np.ones(d))
    elif mode == 2:
        u = np.kron(np.ones(d), ph)
    else:
        raise ValueError(f"mode must be 1 or 2, got {mode}")
    rho = state.rho * np.outer(u, u.conj())
    return TwoModeState(state.cutoff, rho, trace_slack=state.trace_slack)


def loss_channel(state: SingleModeState, eta: float) -> SingleModeState:
    """Pure-loss (attenuation) channel of transmissivity eta.

    Photon-subtraction decomposition: Kraus operators
    K_k = sum_n sqrt(binom(n,k) eta^{n-k} (1-eta)^k) |n-k><n|.
    Exactly trace preserving; never raises photon number, so no leak.
    """
    if not 0.0 <= eta <= 1.0:
        raise ValueError(f"eta must lie in [0, 1], got {eta}")
    d = state.cutoff.dim
    out = np.zeros((d, d), dtype=complex)
    for k in range(d):
        K = np.zeros((d, d))
        for n in range(k, d):
            K[n - k, n] = math.sqrt(math.comb(n, k) * eta ** (n - k) * (1.0 - eta) ** k)
        out += K @ state.rho @ K.T
    return SingleModeState(state.cutoff, out, trace_slack=state.trace_slack)


def partial_trace(state: TwoModeState, keep: int) -> SingleModeState:
    """Trace out one mode; keep = 1 or 2."""
    d = state.cutoff.dim
    r4 = state.rho.reshape(d, d, d, d)
    if keep == 1:
        red = np.einsum("ikjk->ij", r4)
    elif keep == 2:
        red = np.einsum("kikj->ij", r4)
    else:
        raise ValueError(f"keep must be 1 or 2, got {keep}")
    return SingleModeState(state.cutoff, red, trace_slack=state.trace_slack)


# ----- Interference of partially overlapping wavepackets -----

def _apply_creation(vec: np.ndarray, mode: int, coeff: complex) -> np.ndarray:
    """Add coeff * a_mode^dag |vec| for a 4-mode array state."""
    d = vec.shape[0]
    out = np.zeros_like(vec)
    src = [slice(None)] * 4
    dst = [slice(None)] * 4
    src[mode] = slice(0, d - 1)
    dst[mode] = slice(1, d)
    shape = [1, 1, 1, 1]
    shape[mode] = d - 1
    weights = np.sqrt(np.arange(1, d, dtype=float)).reshape(shape)
    out[tuple(dst)] = coeff * weights * vec[tuple(src)]
    return out


@lru_cache(maxsize=256)
def _hom_pure_pair(m: int, n: int, alpha: float, beta: float, n_max: int) -> tuple:
    """Two-mode output for Fock inputs |m> (port 1) and |n> (port 2).

    Port 2's photons occupy alpha * (port-1 temporal mode) + beta * (an
    orthogonal mode).  The balanced splitter acts mode-wise on the four-mode
    pure state; each output port is then relabeled by its total photon
    number and the orthogonal-mode occupation is traced out.  Returns the
    (dim^2, dim^2) matrix and the probability leaked past the cutoff.
    """
    total = m + n
    d4 = total + 1
    inv_sqrt2 = 1.0 / math.sqrt(2.0)
    psi = np.zeros((d4,) * 4, dtype=complex)
    psi[0, 0, 0, 0] = 1.0
    # modes: (a1, a2, b1, b2); a = matched temporal mode, b = orthogonal
    for _ in range(m):
        psi = inv_sqrt2 * (
            _apply_creation(psi, 0, 1.0) - _apply_creation(psi, 1, 1.0)
        )
    for _ in range(n):
        psi = inv_sqrt2 * (
            alpha * (_apply_creation(psi, 0, 1.0) + _apply_creation(psi, 1, 1.0))
            + beta * (_apply_creation(psi, 2, 1.0) + _apply_creation(psi, 3, 1.0))
        )
    psi /= math.sqrt(math.factorial(m) * math.factorial(n))

    dim = n_max + 1
    rho = np.zeros((dim * dim, dim * dim), dtype=complex)
    leak = 0.0
    for k1 in range(d4):
        for k2 in range(d4):
            sub = psi[:, :, k1, k2]
            if not np.any(sub):
                continue
            # port totals t = (a occupation) + (b occupation)
            v = np.zeros((2 * total + 1, 2 * total + 1), dtype=complex)
            v[k1 : k1 + d4, k2 : k2 + d4] = sub
            vin = v[:dim, :dim]
            mass = float(np.sum(np.abs(v) ** 2))
            mass_in = float(np.sum(np.abs(vin) ** 2))
            leak += mass - mass_in
            flat = np.zeros(dim * dim, dtype=complex)
            flat.reshape(dim, dim)[: vin.shape[0], : vin.shape[1]] = vin
            rho += np.outer(flat, flat.conj())
    rho.setflags(write=False)
    return rho, leak


def hom_with_overlap(
    rho1: SingleModeState,
    rho2: SingleModeState,
    overlap: float,
    *,
    leak_tol: float = DEFAULT_LEAK_TOL,
) -> TwoModeState:
    """Balanced-splitter output for partially overlapping wavepackets.

    `overlap` is the squared amplitude overlap C = |<f1, f2>|^2 of the two
    temporal modes.  Inputs must be number-diagonal (photon statistics only;
    no inter-port optical coherence).  Pure Fock inputs |1>,|1> give
    coincidence probability (1 - C)/2.
    """
    if not 0.0 <= overlap <= 1.0:
        raise ValueError(f"overlap must lie in [0, 1], got {overlap}")
    if rho1.cutoff != rho2.cutoff:
        raise ValueError("inputs must share a cutoff")
    if not (rho1.is_number_diagonal() and rho2.is_number_diagonal()):
        raise ValueError("hom_with_overlap requires number-diagonal inputs")
    alpha = math.sqrt(overlap)
    beta = math.sqrt(1.0 - overlap)
    n_max = rho1.cutoff.n_max
    p = rho1.number_distribution()
    q = rho2.number_distribution()
    dim = n_max + 1
    acc = np.zeros((dim * dim, dim * dim), dtype=complex)
    leak = 0.0
    for m in range(dim):
        if p[m] <= 0.0:
            continue
        for n in range(dim):
            if q[n] <= 0.0:
                continue
            rho_mn, lk = _hom_pure_pair(m, n, alpha, beta, n_max)
            acc += (p[m] * q[n]) * rho_mn
            leak += p[m] * q[n] * lk
    if leak > leak_tol:
        raise TruncationLeakError(leak, leak_tol, "hom_with_overlap")
    slack = max(leak, 0.0) + rho1.trace_slack + rho2.trace_slack
    return TwoModeState(rho1.cutoff, acc, trace_slack=slack)
