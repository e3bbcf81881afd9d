"""Two-site Hamiltonian terms for periodic spin chains.

Every model is expressed through a single real symmetric two-site term
``h`` acting on neighbouring sites of a ring of ``N`` sites,

    H = sum_{s=1..N} h_{s,s+1}   (site N+1 = site 1).

Antiferromagnets are shipped in a rotated frame (pi rotation about the
y axis on every second site) that makes the ground state representable
by a one-site translation invariant MPS with real entries; the rotation
matrix is stored so observables can be mapped back to the original frame.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

# Pauli matrices; Y is kept in the real representative iY so that every
# matrix in this module is real.
PAULI_X = np.array([[0.0, 1.0], [1.0, 0.0]])
PAULI_Z = np.array([[1.0, 0.0], [0.0, -1.0]])
PAULI_IY = np.array([[0.0, 1.0], [-1.0, 0.0]])  # iY, real orthogonal
ID2 = np.eye(2)


def spin_matrices(spin: float) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (Sx, iSy, Sz) for the given spin as real matrices.

    Sy itself is purely imaginary; its real representative iSy is returned
    so callers can stay in real arithmetic (Sy (x) Sy = -(iSy) (x) (iSy)).
    """
    dim = int(round(2 * spin + 1))
    m = spin - np.arange(dim)  # m = s, s-1, ..., -s
    # <s,m±1| S± |s,m> = sqrt(s(s+1) - m(m±1))
    raise_elems = np.sqrt(spin * (spin + 1) - m[1:] * (m[1:] + 1))
    sp = np.zeros((dim, dim))
    sp[np.arange(dim - 1), np.arange(1, dim)] = raise_elems
    sx = 0.5 * (sp + sp.T)
    isy = 0.5 * (sp - sp.T)  # iSy = (S+ - S-)/2
    sz = np.diag(m)
    return sx, isy, sz


@dataclass(frozen=True)
class TwoSiteHamiltonian:
    """A nearest-neighbour term on a ring, plus frame metadata.

    Attributes:
        name: canonical model string ("ising:B=1.0", "heisenberg-half", ...).
        d: physical dimension per site.
        h: real symmetric (d^2, d^2) matrix, basis |i> (x) |j> row-major.
        rotation: real d x d matrix U applied on every second site of the
            original model to obtain this term, or None if no rotation was
            applied. U is the real representative of the physical rotation
            (a global phase is dropped), so original-frame operators map as
            O -> U O U^T on the rotated sublattice.
    """

    name: str
    d: int
    h: np.ndarray = field(repr=False)
    rotation: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        h = np.asarray(self.h, dtype=float)
        if h.shape != (self.d**2, self.d**2):
            raise ValueError(f"h must be {self.d**2} x {self.d**2}, got {h.shape}")
        if not np.array_equal(h, h.T):
            raise ValueError("h must be exactly symmetric")
        # reflection symmetry: SWAP h SWAP = h, required by the mirror
        # trick in the gradient engine
        h4 = h.reshape(self.d, self.d, self.d, self.d)
        if not np.array_equal(h4, h4.transpose(1, 0, 3, 2)):
            raise ValueError("h must be symmetric under site reflection")
        object.__setattr__(self, "h", h)

    @property
    def h4(self) -> np.ndarray:
        """h reshaped to (bra_i, bra_j, ket_i, ket_j)."""
        return self.h.reshape(self.d, self.d, self.d, self.d)

    def dense_ring(self, N: int) -> np.ndarray:
        """Total Hamiltonian of the N-site ring as a dense d^N x d^N matrix.

        Test-path helper, gated to small N.
        """
        if self.d**N > 4096:
            raise ValueError("dense_ring is a test path, d^N must be <= 4096")
        dim = self.d**N
        H = np.zeros((dim, dim))
        for s in range(N):
            left = np.eye(self.d**s)
            right = np.eye(self.d ** (N - s - 2)) if s < N - 1 else None
            if s < N - 1:
                H += np.kron(np.kron(left, self.h), right)
            else:
                # wrap bond (N-1, 0): permute site 0 next to site N-1
                Hb = np.kron(np.eye(self.d ** (N - 2)), self.h)
                perm = _cycle_permutation(self.d, N)
                H += Hb[np.ix_(perm, perm)]
        return H


def _cycle_permutation(d: int, N: int) -> np.ndarray:
    """Index permutation sending basis state (i0,...,i_{N-1}) to
    (i1,...,i_{N-1},i0), used to rotate the wrap bond into place."""
    idx = np.arange(d**N)
    first = idx // d ** (N - 1)
    rest = idx % d ** (N - 1)
    return rest * d + first


def ising(B: float) -> TwoSiteHamiltonian:
    """Transverse-field Ising ring, H = -sum Z_i Z_{i+1} - B sum X_i.

    The field is split evenly between the two bonds containing each site:
    h = -Z(x)Z - (B/2)(X(x)1 + 1(x)X). Critical at B = 1.
    """
    h = -np.kron(PAULI_Z, PAULI_Z)
    h -= (B / 2.0) * (np.kron(PAULI_X, ID2) + np.kron(ID2, PAULI_X))
    return TwoSiteHamiltonian(name=f"ising:B={float(B)}", d=2, h=h)


def heisenberg_half_rotated() -> TwoSiteHamiltonian:
    """Spin-1/2 Heisenberg antiferromagnet, rotated frame.

    Original bond term S.S with S = sigma/2; the sublattice rotation
    Y . Y^dag flips the sign of Sx and Sz, giving the real term
    h = (-XX + YY - ZZ)/4 with eigenvalues {-3/4, 1/4, 1/4, 1/4}.
    """
    h = 0.25 * (
        -np.kron(PAULI_X, PAULI_X)
        - np.kron(PAULI_IY, PAULI_IY)  # Y(x)Y = -(iY)(x)(iY)
        - np.kron(PAULI_Z, PAULI_Z)
    )
    return TwoSiteHamiltonian(
        name="heisenberg-half", d=2, h=h, rotation=PAULI_IY.copy()
    )


def heisenberg_one_rotated() -> TwoSiteHamiltonian:
    """Spin-1 Heisenberg antiferromagnet, rotated frame.

    Original bond term S.S with spin-1 operators; the sublattice rotation
    M = exp(i pi Sy) is real orthogonal and flips Sx, Sz. The rotated term
    h = sum_a S_a (x) (M S_a M^T) stays real: the Sy(x)Sy piece equals
    -(iSy) (x) (M (iSy) M^T).
    """
    sx, isy, sz = spin_matrices(1.0)
    # exp(i pi Sy) in the Sz basis (m = 1, 0, -1), exact integer entries
    M = np.array([[0.0, 0.0, 1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]])
    h = (
        np.kron(sx, M @ sx @ M.T)
        - np.kron(isy, M @ isy @ M.T)
        + np.kron(sz, M @ sz @ M.T)
    )
    return TwoSiteHamiltonian(name="heisenberg-one", d=3, h=h, rotation=M)


def from_string(label: str) -> TwoSiteHamiltonian:
    """Parse a model string: "ising:B=<float>", "heisenberg-half",
    "heisenberg-one"."""
    label = label.strip()
    if label.startswith("ising"):
        if ":" not in label:
            raise ValueError("ising needs a field, e.g. ising:B=1.0")
        _, _, arg = label.partition(":")
        key, _, val = arg.partition("=")
        if key.strip() != "B":
            raise ValueError(f"unknown ising parameter {key!r}")
        return ising(float(val))
    if label == "heisenberg-half":
        return heisenberg_half_rotated()
    if label == "heisenberg-one":
        return heisenberg_one_rotated()
    raise ValueError(f"unknown model {label!r}")


def unrotate_observable(
    model: TwoSiteHamiltonian, O: np.ndarray, site_parity: int
) -> np.ndarray:
    """Map a single-site observable of the original model into the frame
    the MPS is optimized in.

    site_parity 0 refers to unrotated sites, 1 to rotated ones. For models
    without a rotation the operator is returned unchanged.
    """
    O = np.asarray(O, dtype=float)
    if O.shape != (model.d, model.d):
        raise ValueError(f"operator must be {model.d} x {model.d}")
    if model.rotation is None or site_parity % 2 == 0:
        return O
    U = model.rotation
    return U @ O @ U.T
