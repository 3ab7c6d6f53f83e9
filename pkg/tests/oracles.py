"""Slow, independent reference implementations used only by tests.

Everything here deliberately avoids the code paths of the package under
test: matrix exponentials instead of closed-form combinatorics, dict-based
amplitude bookkeeping instead of ndarray slicing, raw quadrature instead of
recurrences.
"""

import math
from collections import defaultdict

import numpy as np
import scipy.linalg
from scipy.special import eval_hermite, factorial


def annihilation(dim):
    return np.diag(np.sqrt(np.arange(1.0, dim)), 1)


def bs_unitary_expm(n_max, transmittance):
    """exp(theta (a1^dag a2 - a1 a2^dag)) by dense matrix exponential.

    Exact (up to expm accuracy) on total-photon blocks N <= n_max; callers
    must restrict comparisons accordingly.
    """
    d = n_max + 1
    a = annihilation(d)
    A1 = np.kron(a, np.eye(d))
    A2 = np.kron(np.eye(d), a)
    theta = math.acos(math.sqrt(transmittance))
    G = theta * (A1.T @ A2 - A1 @ A2.T)
    return scipy.linalg.expm(G)


def loss_by_dilation(rho, eta):
    """Attenuation channel via a beam splitter onto a vacuum ancilla."""
    d = rho.shape[0]
    U = bs_unitary_expm(d - 1, eta)
    vac = np.zeros((d, d), dtype=complex)
    vac[0, 0] = 1.0
    big = U @ np.kron(rho, vac) @ U.conj().T
    r4 = big.reshape(d, d, d, d)
    return np.einsum("ikjk->ij", r4)


def _create(ket, mode, coeff):
    out = defaultdict(complex)
    for occ, amp in ket.items():
        n = occ[mode]
        new = list(occ)
        new[mode] = n + 1
        out[tuple(new)] += coeff * math.sqrt(n + 1) * amp
    return out


def hom_overlap_dict(p1, p2, overlap, n_max):
    """Balanced-splitter output for partially overlapping wavepackets.

    Pure-python four-mode amplitude bookkeeping: modes (a1, a2, b1, b2)
    where `a` is the matched temporal mode and `b` the orthogonal one.
    Returns (dense matrix on the two-mode truncated basis, leaked weight).
    """
    alpha = math.sqrt(overlap)
    beta = math.sqrt(1.0 - overlap)
    inv = 1.0 / math.sqrt(2.0)
    dim = n_max + 1
    rho = np.zeros((dim * dim, dim * dim), dtype=complex)
    leak = 0.0
    for m, pm in enumerate(p1):
        if pm == 0.0:
            continue
        for n, qn in enumerate(p2):
            if qn == 0.0:
                continue
            ket = {(0, 0, 0, 0): 1.0 + 0.0j}
            for _ in range(m):
                step = defaultdict(complex)
                for occ, amp in _create(ket, 0, inv).items():
                    step[occ] += amp
                for occ, amp in _create(ket, 1, -inv).items():
                    step[occ] += amp
                ket = step
            for _ in range(n):
                step = defaultdict(complex)
                for mode, coeff in ((0, alpha * inv), (1, alpha * inv),
                                    (2, beta * inv), (3, beta * inv)):
                    for occ, amp in _create(ket, mode, coeff).items():
                        step[occ] += amp
                ket = step
            norm = math.sqrt(math.factorial(m) * math.factorial(n))
            groups = defaultdict(dict)
            for (na1, na2, nb1, nb2), amp in ket.items():
                groups[(nb1, nb2)][(na1 + nb1, na2 + nb2)] = amp / norm
            for vec in groups.values():
                kept = {}
                for (t1, t2), amp in vec.items():
                    if t1 <= n_max and t2 <= n_max:
                        kept[t1 * dim + t2] = amp
                    else:
                        leak += pm * qn * abs(amp) ** 2
                for i, a in kept.items():
                    for j, b in kept.items():
                        rho[i, j] += pm * qn * a * np.conj(b)
    return rho, leak


def hermite_wavefunction(n, x):
    """Harmonic-oscillator eigenfunction via scipy's physicists' Hermite.

    Same convention as the package (vacuum variance 1/2): psi_n(x) =
    H_n(x) exp(-x^2/2) / sqrt(2^n n! sqrt(pi)).
    """
    x = np.asarray(x, dtype=float)
    norm = 1.0 / np.sqrt(2.0 ** n * factorial(n) * math.sqrt(math.pi))
    return norm * eval_hermite(n, x) * np.exp(-x * x / 2.0)


def wigner_element_integral(m, n, x, p, y_half=20.0, n_y=4001):
    """W of |m><n| from the defining integral, trapezoid in y.

    (1/2pi) * int e^{i p y} psi_m(x - y/2) conj(psi_n(x + y/2)) dy.
    """
    y = np.linspace(-y_half, y_half, n_y)
    f = (np.exp(1j * p * y)
         * hermite_wavefunction(m, x - y / 2.0)
         * np.conj(hermite_wavefunction(n, x + y / 2.0)))
    return np.trapezoid(f, y) / (2.0 * math.pi)
