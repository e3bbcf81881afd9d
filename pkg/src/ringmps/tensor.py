"""The translation invariant MPS tensor and its packed parameterization.

The variational state on an N-site ring is

    |psi(A)> = sum_{i1..iN} Tr(A_{i1} ... A_{iN}) |i1 ... iN>

with one real D x D matrix A_i per physical level i, the *same* at every
site. Each A_i is kept exactly symmetric: the independent parameters are
the upper triangles, packed into a flat vector of length d*D*(D+1)/2.
Symmetry is structural (both off-diagonal entries are the same float),
never an approximate property.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

FORMAT_VERSION = 1


def mirror_upper(M: np.ndarray) -> np.ndarray:
    """Copy of M with the strict lower triangle replaced by the upper one,
    making the result bit-exactly symmetric."""
    out = np.triu(M)
    out = out + np.triu(M, 1).T
    return out


@dataclass(frozen=True)
class MpsTensor:
    """Stack of d symmetric D x D matrices, entries[i] = A_i.

    Instances are immutable; construct new ones through `unpack`,
    `gauge_transform`, etc. The constructor rejects non-symmetric input
    rather than silently symmetrizing.
    """

    entries: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 3 or a.shape[1] != a.shape[2]:
            raise ValueError(f"entries must be (d, D, D), got {a.shape}")
        if not np.array_equal(a, a.transpose(0, 2, 1)):
            raise ValueError("A_i must be exactly symmetric matrices")
        a = a.copy()
        a.setflags(write=False)
        object.__setattr__(self, "entries", a)

    @property
    def d(self) -> int:
        return self.entries.shape[0]

    @property
    def D(self) -> int:
        return self.entries.shape[1]

    @property
    def n_params(self) -> int:
        return self.d * self.D * (self.D + 1) // 2

    def __array__(self, dtype=None, copy=None) -> np.ndarray:
        return np.asarray(self.entries, dtype=dtype)


def _triu_indices(D: int) -> tuple[np.ndarray, np.ndarray]:
    return np.triu_indices(D)


def pack(A: MpsTensor) -> np.ndarray:
    """Flatten A to its free parameters: per level i, the upper triangle
    of A_i in row-major order. Length d*D*(D+1)/2."""
    rows, cols = _triu_indices(A.D)
    return A.entries[:, rows, cols].reshape(-1).copy()


def unpack(values: np.ndarray, d: int, D: int) -> MpsTensor:
    """Inverse of `pack`. Bit-exact round trip: unpack(pack(A)) == A."""
    values = np.asarray(values, dtype=float)
    per = D * (D + 1) // 2
    if values.shape != (d * per,):
        raise ValueError(f"expected {d * per} parameters, got {values.shape}")
    rows, cols = _triu_indices(D)
    a = np.zeros((d, D, D))
    tri = values.reshape(d, per)
    a[:, rows, cols] = tri
    a[:, cols, rows] = tri
    return MpsTensor(entries=a)


def pack_gradient(grad_raw: np.ndarray) -> np.ndarray:
    """Chain rule from an unconstrained (d, D, D) gradient to the packed
    coordinates: off-diagonal slots receive g[i,a,b] + g[i,b,a], diagonal
    slots g[i,a,a]."""
    g = np.asarray(grad_raw, dtype=float)
    d, D, _ = g.shape
    sym = g + g.transpose(0, 2, 1)
    rows, cols = _triu_indices(D)
    out = sym[:, rows, cols]
    diag = rows == cols
    out[:, diag] = g[:, rows[diag], cols[diag]]  # diagonal counted once
    return out.reshape(-1)


def random_symmetric(d: int, D: int, rng: np.random.Generator, scale: float = 1.0) -> MpsTensor:
    """Random tensor with i.i.d. upper-triangle entries ~ N(0, scale^2)."""
    return unpack(scale * rng.standard_normal(d * D * (D + 1) // 2), d, D)


def gauge_transform(A: MpsTensor, X: np.ndarray) -> MpsTensor:
    """Apply the invertible gauge A_i -> X A_i X^{-1}.

    Only orthogonal X preserves the symmetric ansatz, in which case
    X A X^{-1} = X A X^T; the result is re-mirrored so symmetry stays
    bit-exact under round-off.
    """
    X = np.asarray(X, dtype=float)
    D = A.D
    if X.shape != (D, D):
        raise ValueError(f"gauge matrix must be {D} x {D}")
    if not np.allclose(X @ X.T, np.eye(D), atol=1e-12):
        raise ValueError("gauge matrix must be orthogonal to keep A_i symmetric")
    out = np.empty_like(A.entries)
    for i in range(A.d):
        out[i] = mirror_upper(X @ A.entries[i] @ X.T)
    return MpsTensor(entries=out)


def normalize(A: MpsTensor, lam1: float) -> MpsTensor:
    """Rescale A by 1/sqrt(|lam1|) so the dominant transfer eigenvalue has
    unit magnitude; lam1 is the caller-supplied dominant eigenvalue."""
    if not np.isfinite(lam1) or lam1 == 0.0:
        raise ValueError(f"invalid dominant eigenvalue {lam1}")
    return MpsTensor(entries=A.entries / np.sqrt(abs(lam1)))


def save_tensor(A: MpsTensor, stem: str | Path, metadata: dict | None = None) -> tuple[Path, Path]:
    """Write A to <stem>.npy (row-major float64 entries) plus a JSON
    metadata sidecar <stem>.json. Returns both paths."""
    stem = Path(stem)
    npy_path = stem.with_suffix(".npy")
    json_path = stem.with_suffix(".json")
    np.save(npy_path, np.asarray(A.entries))
    meta = {
        "format_version": FORMAT_VERSION,
        "kind": "ringmps-tensor",
        "d": A.d,
        "D": A.D,
        "dtype": "float64",
        "layout": "(d, D, D) row-major, A[i] symmetric",
    }
    if metadata:
        meta.update(metadata)
    json_path.write_text(json.dumps(meta, indent=2, sort_keys=True) + "\n")
    return npy_path, json_path


def load_tensor(stem: str | Path) -> tuple[MpsTensor, dict]:
    """Read a tensor written by `save_tensor`. Accepts the stem or either
    file path. Validates shape and symmetry."""
    stem = Path(stem)
    if stem.suffix in (".npy", ".json"):
        stem = stem.with_suffix("")
    npy_path = stem.with_suffix(".npy")
    json_path = stem.with_suffix(".json")
    meta = json.loads(json_path.read_text()) if json_path.exists() else {}
    entries = np.load(npy_path)
    if meta:
        if entries.shape != (meta["d"], meta["D"], meta["D"]):
            raise ValueError(
                f"tensor file shape {entries.shape} does not match metadata "
                f"(d={meta['d']}, D={meta['D']})"
            )
    A = MpsTensor(entries=entries)  # symmetry validated here
    return A, meta
