"""Transfer operators and contraction building blocks.

Index conventions used throughout the package. A D^2 vector v is viewed
as a D x D matrix V = v.reshape(D, D) whose row indexes the ket-layer
bond and whose column indexes the bra-layer bond; the plain transfer
matrix is then

    T = sum_i A_i (x) A_i,          T v  <->  sum_i A_i V A_i^T.

Operator-dressed variants insert a single-site operator (T_O) or a
two-site gate (the H block, a D^2 x D^2 matrix in the same pairing).
"Slot" variants leave one ket-layer tensor out; contracting a slot
operator with boundary vectors yields a (d, D, D) tensor, the basic
object of the gradient engine.

All applications are matrix-free, O(d D^3) per vector; `dense()`
materializations are a test path gated to small D.
"""

from __future__ import annotations

import numpy as np

from .tensor import MpsTensor

DENSE_GATE = 4096  # largest D^2 a dense materialization may have


def _as_batch(vecs: np.ndarray, D: int) -> tuple[np.ndarray, bool]:
    """Accept (D, D), (D*D,), (k, D, D) or (k, D*D); return (k, D, D)."""
    v = np.asarray(vecs, dtype=float)
    single = v.ndim == 1 or v.shape == (D, D)
    v = v.reshape(-1, D, D)
    return v, single


def apply_transfer(A: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """T applied to a batch of vectors: out[k] = sum_i A_i V_k A_i^T."""
    D = A.shape[1]
    v, single = _as_batch(vecs, D)
    # sum_i A[i] @ V @ A[i].T via two BLAS contractions
    w = np.tensordot(A, v, axes=([2], [1]))  # (i, a, k, c)
    out = np.tensordot(w, A, axes=([0, 3], [0, 2]))  # (a, k, b)
    out = out.transpose(1, 0, 2)
    return out[0] if single else out


def apply_operator_transfer(A: np.ndarray, O: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """T_O applied to vectors: out = sum_{ij} O[i, j] A_j V A_i^T.

    O[i, j] = <i|O|j> with i the bra-layer physical index.
    """
    D = A.shape[1]
    v, single = _as_batch(vecs, D)
    OA = np.tensordot(O, A, axes=([1], [0]))  # ket-layer matrices, (i, a, b)
    w = np.tensordot(OA, v, axes=([2], [1]))  # (i, a, k, c)
    out = np.tensordot(w, A, axes=([0, 3], [0, 2])).transpose(1, 0, 2)
    return out[0] if single else out


def precompute_pair_products(A: np.ndarray) -> np.ndarray:
    """AA[i, j] = A_i @ A_j for all level pairs, shape (d, d, D, D)."""
    return np.einsum("iab,jbc->ijac", A, A)


def precompute_gate_products(h4: np.ndarray, AA: np.ndarray) -> np.ndarray:
    """hAA[i, j] = sum_{pq} <ij|h|pq> A_p @ A_q, shape (d, d, D, D)."""
    return np.tensordot(h4, AA, axes=([2, 3], [0, 1]))


def apply_h_block(AA: np.ndarray, hAA: np.ndarray, vecs: np.ndarray) -> np.ndarray:
    """Two-site gate block applied to vectors:

        out = sum_{ij} hAA[i, j] V AA[i, j]^T.

    Requires the precomputed products from `precompute_pair_products` /
    `precompute_gate_products`.
    """
    D = AA.shape[2]
    v, single = _as_batch(vecs, D)
    w = np.tensordot(hAA.reshape(-1, D, D), v, axes=([2], [1]))  # (ij, a, k, c)
    out = np.tensordot(w, AA.reshape(-1, D, D), axes=([0, 3], [0, 2]))
    out = out.transpose(1, 0, 2)
    return out[0] if single else out


def slot_sandwich(A: np.ndarray, left: np.ndarray, right: np.ndarray) -> np.ndarray:
    """<z| T_A |w> for batches of boundary vectors.

    T_A is the transfer operator with the ket-layer tensor removed; the
    result carries the vacant tensor's indices:

        out[k, i, a, b] = (Z_k A_i W_k^T)_{ab}.

    left/right may be (D, D) or (k, D, D); they are paired elementwise.
    """
    D = A.shape[1]
    z, single_l = _as_batch(left, D)
    w, single_r = _as_batch(right, D)
    if z.shape[0] != w.shape[0]:
        raise ValueError("left/right batches must pair up")
    out = np.einsum("nax,ixy,nby->niab", z, A, w, optimize=True)
    return out[0] if (single_l and single_r) else out


def dense_transfer(A: np.ndarray) -> np.ndarray:
    """T as a D^2 x D^2 matrix (test path)."""
    d, D, _ = A.shape
    if D * D > DENSE_GATE:
        raise ValueError(f"dense transfer gated to D^2 <= {DENSE_GATE}")
    return np.einsum("iab,icd->acbd", A, A).reshape(D * D, D * D)


def dense_operator_transfer(A: np.ndarray, O: np.ndarray) -> np.ndarray:
    """T_O as a D^2 x D^2 matrix (test path)."""
    d, D, _ = A.shape
    if D * D > DENSE_GATE:
        raise ValueError(f"dense transfer gated to D^2 <= {DENSE_GATE}")
    OA = np.tensordot(O, A, axes=([1], [0]))
    return np.einsum("iab,icd->acbd", OA, A).reshape(D * D, D * D)


def dense_h_block(A: np.ndarray, h4: np.ndarray) -> np.ndarray:
    """The two-site gate block as a D^2 x D^2 matrix (test path)."""
    d, D, _ = A.shape
    if D * D > DENSE_GATE:
        raise ValueError(f"dense block gated to D^2 <= {DENSE_GATE}")
    AA = precompute_pair_products(A)
    hAA = precompute_gate_products(h4, AA)
    return np.einsum("xab,xcd->acbd", hAA.reshape(-1, D, D), AA.reshape(-1, D, D)).reshape(
        D * D, D * D
    )


def dense_slot(A: np.ndarray) -> np.ndarray:
    """T_A with its open (i, alpha, beta) slot, shape (d, D, D, D^2, D^2).

    out[i, a, b, (a_k a_b), (b_k b_b)] = delta(a, a_k) delta(b, b_k) A_i[a_b, b_b].
    """
    d, D, _ = A.shape
    if D * D > DENSE_GATE:
        raise ValueError(f"dense slot gated to D^2 <= {DENSE_GATE}")
    eye = np.eye(D)
    out = np.einsum("ak,ixy,bl->iabkxly", eye, A, eye)  # i,a,b,a_k,a_b,b_k,b_b
    return out.reshape(d, D, D, D * D, D * D)


class TransferOperator:
    """Uniform wrapper around the four operator kinds.

    kind "T": plain transfer; "T_O": single-site operator inserted
    (pass `operator`); "H": two-site gate block (pass `gate`, a
    (d,d,d,d) or (d^2,d^2) array); "T_slot": ket-layer tensor removed.

    Closed kinds expose `apply(vecs)`; the slot kind exposes
    `sandwich(left, right)`. All expose `dense()` for small D.
    """

    def __init__(
        self,
        A: MpsTensor | np.ndarray,
        kind: str = "T",
        operator: np.ndarray | None = None,
        gate: np.ndarray | None = None,
    ):
        a = np.asarray(A, dtype=float)
        self.A = a
        self.d, self.D, _ = a.shape
        self.dim = self.D * self.D
        self.kind = kind
        self.operator = None if operator is None else np.asarray(operator, dtype=float)
        if kind == "T":
            pass
        elif kind == "T_O":
            if self.operator is None or self.operator.shape != (self.d, self.d):
                raise ValueError("kind T_O needs a d x d operator")
        elif kind == "H":
            if gate is None:
                raise ValueError("kind H needs a two-site gate")
            g = np.asarray(gate, dtype=float).reshape(self.d, self.d, self.d, self.d)
            self.h4 = g
            self.AA = precompute_pair_products(a)
            self.hAA = precompute_gate_products(g, self.AA)
        elif kind == "T_slot":
            pass
        else:
            raise ValueError(f"unknown transfer kind {kind!r}")

    def apply(self, vecs: np.ndarray) -> np.ndarray:
        if self.kind == "T":
            return apply_transfer(self.A, vecs)
        if self.kind == "T_O":
            return apply_operator_transfer(self.A, self.operator, vecs)
        if self.kind == "H":
            return apply_h_block(self.AA, self.hAA, vecs)
        raise ValueError("slot operators have no closed application; use sandwich()")

    def sandwich(self, left: np.ndarray, right: np.ndarray) -> np.ndarray:
        if self.kind != "T_slot":
            raise ValueError("sandwich() is only defined for kind T_slot")
        return slot_sandwich(self.A, left, right)

    def dense(self) -> np.ndarray:
        if self.kind == "T":
            return dense_transfer(self.A)
        if self.kind == "T_O":
            return dense_operator_transfer(self.A, self.operator)
        if self.kind == "H":
            return dense_h_block(self.A, self.h4)
        return dense_slot(self.A)


def build_transfer(
    A: MpsTensor | np.ndarray,
    kind: str = "T",
    operator: np.ndarray | None = None,
    gate: np.ndarray | None = None,
) -> TransferOperator:
    """Factory for `TransferOperator`; see the class docstring."""
    return TransferOperator(A, kind=kind, operator=operator, gate=gate)
