"""Dominant eigenpairs of the transfer matrix and stable spectral sums.

With the symmetric ansatz the transfer matrix T is a real symmetric
D^2 x D^2 matrix, so its eigendecomposition is orthogonal and powers of T
can be approximated by the n eigenvalues largest in magnitude:

    T^s ~= sum_{a<=n} lam_a^s |v_a><v_a|.

Negative eigenvalues are kept with their sign; powers are evaluated in
log space to avoid under/overflow at chain lengths in the thousands.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .transfer import TransferOperator, apply_transfer, dense_transfer

DENSE_EIG_LIMIT = 1024  # largest D^2 handled by the dense eigensolver path


class EigensolverError(RuntimeError):
    """Iterative eigensolver failed to converge; carries best residuals."""

    def __init__(self, message: str, residuals: np.ndarray | None = None):
        super().__init__(message)
        self.residuals = residuals


@dataclass(frozen=True)
class SpectralApproximation:
    """Top-n eigenpairs of a transfer matrix, magnitude sorted.

    Attributes:
        lams: (n,) eigenvalues, |lams| non-increasing.
        vectors: (n, D, D) eigenvectors reshaped to bond matrices,
            orthonormal as D^2 vectors.
        residuals: (n,) |T v - lam v|_2 achieved by the solver.
    """

    lams: np.ndarray
    vectors: np.ndarray
    residuals: np.ndarray

    @property
    def n(self) -> int:
        return self.lams.shape[0]

    @property
    def D(self) -> int:
        return self.vectors.shape[1]

    @property
    def flat(self) -> np.ndarray:
        """Vectors as rows of an (n, D^2) matrix."""
        return self.vectors.reshape(self.n, -1)


def _magnitude_order(lams: np.ndarray) -> np.ndarray:
    """Sort by |lam| descending; ties broken by lam descending so the
    ordering is deterministic."""
    return np.lexsort((-lams, -np.abs(lams)))


def dominant_eigs(
    op: TransferOperator | np.ndarray,
    n: int,
    tol: float = 1e-12,
    seed: int = 0,
    method: str = "auto",
) -> SpectralApproximation:
    """Compute the n eigenpairs of T largest in magnitude.

    op is a TransferOperator of kind "T" (or a raw (d, D, D) tensor).
    method "auto" uses a dense symmetric solve when D^2 <= 1024 or when n
    is too close to D^2 for ARPACK, a seeded Lanczos otherwise; "dense" /
    "krylov" force the choice. Residuals above tol raise EigensolverError.
    """
    if isinstance(op, TransferOperator):
        if op.kind != "T":
            raise ValueError("dominant_eigs expects the plain transfer operator")
        A = op.A
    else:
        A = np.asarray(op, dtype=float)
    D = A.shape[1]
    dim = D * D
    if not 1 <= n <= dim:
        raise ValueError(f"need 1 <= n <= D^2 = {dim}, got n = {n}")
    if method == "auto":
        method = "dense" if (dim <= DENSE_EIG_LIMIT or n >= dim - 1) else "krylov"
    if method == "dense":
        if n >= dim - 1 and dim > 4 * DENSE_EIG_LIMIT:
            raise ValueError(f"dense solve of dimension {dim} refused")
        T = dense_transfer(A)
        w, V = np.linalg.eigh(T)
        order = _magnitude_order(w)[:n]
        lams = w[order]
        vecs = V[:, order].T.reshape(n, D, D)
    elif method == "krylov":
        if n >= dim - 1:
            raise ValueError("Lanczos needs n < D^2 - 1; use the dense path")
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(dim)
        lin = LinearOperator(
            (dim, dim),
            matvec=lambda v: apply_transfer(A, v).reshape(-1),
            dtype=float,
        )
        try:
            w, V = eigsh(lin, k=n, which="LM", v0=v0, tol=0)
        except ArpackNoConvergence as exc:
            got = exc.eigenvalues
            res = None
            if got is not None and len(got):
                Vp = exc.eigenvectors
                res = np.linalg.norm(
                    apply_transfer(A, Vp.T).reshape(len(got), -1) - got[:, None] * Vp.T,
                    axis=1,
                )
            raise EigensolverError(
                f"Lanczos did not converge for {n} eigenpairs of dim {dim}",
                residuals=res,
            ) from exc
        order = _magnitude_order(w)
        lams = w[order]
        vecs = V[:, order].T.reshape(n, D, D)
    else:
        raise ValueError(f"unknown method {method!r}")

    flat = vecs.reshape(n, -1)
    residuals = np.linalg.norm(
        apply_transfer(A, vecs).reshape(n, -1) - lams[:, None] * flat, axis=1
    )
    scale = max(np.abs(lams[0]), 1.0) if n else 1.0
    if np.any(residuals > tol * scale):
        raise EigensolverError(
            f"eigenpair residuals up to {residuals.max():.3e} exceed tol {tol:.3e}",
            residuals=residuals,
        )
    return SpectralApproximation(lams=lams, vectors=vecs, residuals=residuals)


def stable_powers(lams: np.ndarray, s: int | np.ndarray) -> np.ndarray:
    """lam^s evaluated as sign(lam)^s exp(s ln|lam|).

    Underflow is flushed to zero, s = 0 gives 1 for every lam (including
    lam = 0). Supports broadcasting of a vector of exponents against a
    vector of eigenvalues; the result has shape np.broadcast(lams, s).
    """
    lams = np.asarray(lams, dtype=float)
    s = np.asarray(s)
    if not np.issubdtype(s.dtype, np.integer):
        raise ValueError("exponents must be integers")
    mag = np.abs(lams)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logmag = np.where(mag > 0, np.log(np.where(mag > 0, mag, 1.0)), -np.inf)
        out = np.exp(s * logmag)
    out = np.where(np.isnan(out) | (s == 0), 1.0, out)  # 0^0 = 1
    out = np.where((mag == 0) & (s != 0), 0.0, out)
    sign = np.where((lams < 0) & (s % 2 == 1), -1.0, 1.0)
    return sign * out


def geometric_pair_sum(lams: np.ndarray, K: int, degeneracy_rtol: float = 1e-10) -> np.ndarray:
    """G[a, b] = sum_{j=0}^{K-1} lam_a^j lam_b^{K-1-j} for every pair.

    Closed form (lam_b^K - lam_a^K) / (lam_b - lam_a) away from
    degeneracies; pairs with |lam_a - lam_b| <= rtol * max|lam| use the
    limit K * lam_mid^{K-1} at the midpoint. K <= 0 gives a zero matrix.
    """
    lams = np.asarray(lams, dtype=float)
    n = lams.shape[0]
    if K <= 0:
        return np.zeros((n, n))
    if K == 1:
        return np.ones((n, n))
    la = lams[:, None]
    lb = lams[None, :]
    diff = lb - la
    scale = np.max(np.abs(lams)) if n else 0.0
    degenerate = np.abs(diff) <= degeneracy_rtol * scale
    powK = stable_powers(lams, K)
    with np.errstate(divide="ignore", invalid="ignore"):
        G = (powK[None, :] - powK[:, None]) / np.where(degenerate, 1.0, diff)
    mid = 0.5 * (la + lb)
    limit = K * stable_powers(mid.reshape(-1), K - 1).reshape(n, n)
    return np.where(degenerate, limit, G)


def spectral_trace(spec: SpectralApproximation, s: int) -> float:
    """Tr T^s within the top-n approximation: sum_a lam_a^s."""
    return float(np.sum(stable_powers(spec.lams, s)))
