import numpy as np
import pytest

from ringmps.models import ising
from ringmps.tensor import random_symmetric
from ringmps.transfer import (
    TransferOperator,
    apply_h_block,
    apply_operator_transfer,
    apply_transfer,
    build_transfer,
    dense_h_block,
    dense_operator_transfer,
    dense_slot,
    dense_transfer,
    precompute_gate_products,
    precompute_pair_products,
    slot_sandwich,
)


def brute_transfer(A):
    """T[(a,c),(b,d)] = sum_i A_i[a,b] A_i[c,d] by explicit loops."""
    d, D, _ = A.shape
    T = np.zeros((D * D, D * D))
    for a in range(D):
        for c in range(D):
            for b in range(D):
                for dd in range(D):
                    T[a * D + c, b * D + dd] = sum(
                        A[i, a, b] * A[i, c, dd] for i in range(d)
                    )
    return T


def test_dense_transfer_matches_brute_loops():
    rng = np.random.default_rng(0)
    for d, D in [(2, 2), (3, 3)]:
        A = np.asarray(random_symmetric(d, D, rng))
        assert np.allclose(dense_transfer(A), brute_transfer(A), atol=1e-14)


def test_apply_transfer_matches_dense():
    rng = np.random.default_rng(1)
    A = np.asarray(random_symmetric(2, 4, rng))
    T = dense_transfer(A)
    v = rng.standard_normal((4, 4))
    out = apply_transfer(A, v)
    assert np.allclose(out.reshape(-1), T @ v.reshape(-1), atol=1e-13)
    # batched form
    batch = rng.standard_normal((3, 4, 4))
    out = apply_transfer(A, batch)
    for k in range(3):
        assert np.allclose(out[k].reshape(-1), T @ batch[k].reshape(-1), atol=1e-13)


def test_operator_transfer_identity_reduces_to_transfer():
    rng = np.random.default_rng(2)
    A = np.asarray(random_symmetric(2, 3, rng))
    assert np.allclose(dense_operator_transfer(A, np.eye(2)), dense_transfer(A), atol=1e-14)
    v = rng.standard_normal((3, 3))
    assert np.allclose(
        apply_operator_transfer(A, np.eye(2), v), apply_transfer(A, v), atol=1e-14
    )


def test_operator_transfer_matches_dense():
    rng = np.random.default_rng(3)
    A = np.asarray(random_symmetric(2, 3, rng))
    O = rng.standard_normal((2, 2))
    TO = dense_operator_transfer(A, O)
    v = rng.standard_normal((3, 3))
    out = apply_operator_transfer(A, O, v)
    assert np.allclose(out.reshape(-1), TO @ v.reshape(-1), atol=1e-13)
    # explicit element check: TO[(a,c),(b,e)] = sum_{ij} O[i,j] A_j[a,b] A_i[c,e]
    D = 3
    for a in range(D):
        for c in range(D):
            for b in range(D):
                for e in range(D):
                    ref = sum(
                        O[i, j] * A[j, a, b] * A[i, c, e]
                        for i in range(2)
                        for j in range(2)
                    )
                    assert abs(TO[a * D + c, b * D + e] - ref) < 1e-13


def test_h_block_matches_dense_and_brute():
    rng = np.random.default_rng(4)
    model = ising(0.8)
    A = np.asarray(random_symmetric(2, 3, rng))
    AA = precompute_pair_products(A)
    hAA = precompute_gate_products(model.h4, AA)
    H = dense_h_block(A, model.h4)
    v = rng.standard_normal((3, 3))
    out = apply_h_block(AA, hAA, v)
    assert np.allclose(out.reshape(-1), H @ v.reshape(-1), atol=1e-13)
    # H equals transfer-squared contracted with the gate:
    # H[(a,c),(b,e)] = sum_{ijpq} h4[i,j,p,q] (A_p A_q)[a,b] (A_i A_j)[c,e]
    D = 3
    for a in range(D):
        for b in range(D):
            for c in range(D):
                for e in range(D):
                    ref = 0.0
                    for i in range(2):
                        for j in range(2):
                            for p in range(2):
                                for q in range(2):
                                    ref += (
                                        model.h4[i, j, p, q]
                                        * (A[p] @ A[q])[a, b]
                                        * (A[i] @ A[j])[c, e]
                                    )
                    assert abs(H[a * D + c, b * D + e] - ref) < 1e-12


def test_pair_products():
    rng = np.random.default_rng(5)
    A = np.asarray(random_symmetric(3, 2, rng))
    AA = precompute_pair_products(A)
    for i in range(3):
        for j in range(3):
            assert np.allclose(AA[i, j], A[i] @ A[j], atol=1e-15)


def test_slot_sandwich_matches_dense_slot():
    rng = np.random.default_rng(6)
    A = np.asarray(random_symmetric(2, 3, rng))
    W = rng.standard_normal((4, 3, 3))
    Z = rng.standard_normal((4, 3, 3))
    out = slot_sandwich(A, W, Z)
    # reference: out[k, i] = W_k A_i Z_k^T
    for k in range(4):
        for i in range(2):
            assert np.allclose(out[k, i], W[k] @ A[i] @ Z[k].T, atol=1e-13)
    # single (D, D) boundaries collapse the batch axis
    single = slot_sandwich(A, W[0], Z[0])
    assert single.shape == (2, 3, 3)
    assert np.allclose(single, out[0], atol=1e-15)


def test_dense_slot_open_vacancy():
    # contracting the open slot network with a tensor and two boundary
    # vectors reproduces v^T T w with the site filled back in
    rng = np.random.default_rng(8)
    A = np.asarray(random_symmetric(2, 3, rng))
    S = dense_slot(A)  # (d, D, D, D^2, D^2)
    v = rng.standard_normal(9)
    w = rng.standard_normal(9)
    T = dense_transfer(A)
    filled = np.einsum("iabkl,iab,k,l->", S, A, v, w, optimize=True)
    assert abs(filled - v @ T @ w) < 1e-12


def test_transfer_operator_dispatch():
    rng = np.random.default_rng(7)
    A = np.asarray(random_symmetric(2, 3, rng))
    model = ising(1.0)
    T = build_transfer(A, kind="T")
    assert isinstance(T, TransferOperator)
    v = rng.standard_normal((3, 3))
    assert np.allclose(T.apply(v), apply_transfer(A, v), atol=1e-15)
    assert np.allclose(T.dense(), dense_transfer(A), atol=1e-15)
    TO = build_transfer(A, kind="T_O", operator=np.eye(2))
    assert np.allclose(TO.dense(), dense_transfer(A), atol=1e-15)
    TH = build_transfer(A, kind="H", gate=model.h4)
    assert np.allclose(TH.dense(), dense_h_block(A, model.h4), atol=1e-13)
    with pytest.raises(ValueError):
        build_transfer(A, kind="T_O")  # missing operator
    with pytest.raises(ValueError):
        build_transfer(A, kind="nope")
