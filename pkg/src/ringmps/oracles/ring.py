"""Exact (untruncated) evaluations of the periodic MPS.

Two independent routes:

* dense transfer-matrix powers on the D^2 x D^2 level -- same network as
  the production code but with exact matrix powers instead of a spectral
  approximation;
* a literal state vector in the d^N Hilbert space, sharing no contraction
  code with anything else.

Both are gated to small systems and exist to pin down every convention
of the fast path.
"""

from __future__ import annotations

import numpy as np

from ..models import TwoSiteHamiltonian
from ..tensor import MpsTensor
from ..transfer import (
    dense_h_block,
    dense_operator_transfer,
    dense_transfer,
)

RING_MAX_D = 8
RING_MAX_N = 64


def _gate(A: np.ndarray, N: int) -> None:
    D = A.shape[1]
    if D > RING_MAX_D or N > RING_MAX_N:
        raise ValueError(
            f"exact ring contraction gated to D <= {RING_MAX_D}, N <= {RING_MAX_N}"
        )


def _tensor(A: MpsTensor | np.ndarray) -> np.ndarray:
    return np.asarray(A, dtype=float)


def _tpowers(T: np.ndarray, smax: int) -> list[np.ndarray]:
    """[T^0, T^1, ..., T^smax] by repeated multiplication."""
    powers = [np.eye(T.shape[0])]
    for _ in range(smax):
        powers.append(powers[-1] @ T)
    return powers


def exact_ring_energy(
    A: MpsTensor | np.ndarray, model: TwoSiteHamiltonian, N: int
) -> tuple[float, float]:
    """(energy density, norm <psi|psi>) from exact transfer powers."""
    a = _tensor(A)
    _gate(a, N)
    T = dense_transfer(a)
    H = dense_h_block(a, model.h4)
    powers = _tpowers(T, N)
    norm = float(np.trace(powers[N]))
    e_num = float(np.trace(H @ powers[N - 2]))
    return e_num / norm, norm


def _slot_contract(A: np.ndarray, C: np.ndarray) -> np.ndarray:
    """Contract the chain matrix C (D^2 x D^2, running from the vacant
    site's right pair around to its left pair) with the bra tensor left
    in the slot: out[i, a, b] = sum_{x, y} A_i[x, y] C[(b, y), (a, x)]."""
    D = A.shape[1]
    C4 = C.reshape(D, D, D, D)
    return np.einsum("ixy,byax->iab", A, C4)


def exact_ring_gradient_terms(
    A: MpsTensor | np.ndarray, model: TwoSiteHamiltonian, N: int
) -> dict[str, np.ndarray | float]:
    """Every ingredient of the energy gradient, from exact powers.

    Returns a dict with norm <I>, density rho_E, the single-vacancy norm
    tensor ("norm_slot", (d, D, D)), the easy/hard splits of the
    effective-Hamiltonian sum, and their total ("heff_sum"), matching the
    conventions of gradient.energy_gradient term by term.
    """
    a = _tensor(A)
    _gate(a, N)
    d, D, _ = a.shape
    T = dense_transfer(a)
    H = dense_h_block(a, model.h4)
    powers = _tpowers(T, N)
    norm = float(np.trace(powers[N]))
    rho = float(np.trace(H @ powers[N - 2])) / norm

    norm_slot = _slot_contract(a, powers[N - 1])

    # vacancy inside the H block (two "easy" placements)
    h4 = model.h4
    AA = np.einsum("iab,jbc->ijac", a, a)
    C4 = powers[N - 2].reshape(D, D, D, D)
    easy_left = np.einsum("ijpq,qbg,ijxh,ghax->pab", h4, a, AA, C4, optimize=True)
    easy_right = np.einsum("ijpq,pab,ijxh,chax->qbc", h4, a, AA, C4, optimize=True)
    # vacancy outside the block: sum over all N-2 placements
    F = np.zeros_like(T)
    for s in range(N - 2):
        F += powers[N - 3 - s] @ H @ powers[s]
    hard = _slot_contract(a, F)

    heff_sum = easy_left + easy_right + hard
    return {
        "norm": norm,
        "rho": rho,
        "norm_slot": norm_slot,
        "easy": easy_left + easy_right,
        "hard": hard,
        "heff_sum": heff_sum,
    }


def exact_ring_correlation(
    A: MpsTensor | np.ndarray,
    O1: np.ndarray,
    O2: np.ndarray,
    N: int,
    dr: int,
) -> tuple[float, float, float]:
    """(<O1_0 O2_dr>, <O1>, <O2>) for the ring state, exact powers,
    all normalized by <psi|psi>."""
    a = _tensor(A)
    _gate(a, N)
    if not 1 <= dr <= N - 1:
        raise ValueError(f"need 1 <= dr <= N-1, got {dr}")
    T = dense_transfer(a)
    T1 = dense_operator_transfer(a, O1)
    T2 = dense_operator_transfer(a, O2)
    powers = _tpowers(T, N)
    norm = np.trace(powers[N])
    pair = np.trace(T1 @ powers[dr - 1] @ T2 @ powers[N - dr - 1]) / norm
    one = np.trace(T1 @ powers[N - 1]) / norm
    two = np.trace(T2 @ powers[N - 1]) / norm
    return float(pair), float(one), float(two)


# ---------------------------------------------------------------------------
# state-vector route


def statevector(A: MpsTensor | np.ndarray, N: int) -> np.ndarray:
    """The literal d^N amplitude vector psi[i1...iN] = Tr(A_i1 ... A_iN).

    Memory gated to d^N * D^2 <= ~2^26 floats.
    """
    a = _tensor(A)
    d, D, _ = a.shape
    if d**N * D * D > 1 << 24:
        raise ValueError("statevector too large")
    # P[c] = A_{i1} ... A_{ik} for configuration prefix c
    P = a.copy()  # (d, D, D)
    for _ in range(N - 1):
        P = np.einsum("cab,ibg->ciag", P, a).reshape(-1, D, D)
    return np.einsum("caa->c", P)


def statevector_energy(
    A: MpsTensor | np.ndarray, model: TwoSiteHamiltonian, N: int
) -> float:
    """Energy density <psi|H|psi> / (N <psi|psi>) via the state vector."""
    psi = statevector(A, N)
    d = model.d
    h = model.h
    acc = np.zeros_like(psi)
    for s in range(N):
        acc += _apply_bond(psi, h, d, N, s)
    return float(psi @ acc / (psi @ psi) / N)


def _apply_bond(psi: np.ndarray, h: np.ndarray, d: int, N: int, s: int) -> np.ndarray:
    """h acting on sites (s, s+1 mod N) of a d^N state vector."""
    if s < N - 1:
        v = psi.reshape(d**s, d * d, d ** (N - s - 2))
        out = np.einsum("pq,aqb->apb", h, v)
        return out.reshape(-1)
    # wrap bond (N-1, 0): first factor of h lives on site N-1
    v = psi.reshape(d, d ** (N - 2), d)
    h4 = h.reshape(d, d, d, d)
    out = np.einsum("ijpq,qmp->jmi", h4, v)
    return out.reshape(-1)
