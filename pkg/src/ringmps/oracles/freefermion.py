"""Closed-form solution of the transverse-field Ising ring.

H = -sum Z_j Z_{j+1} - B sum X_j maps under the Jordan-Wigner
transformation (X_j = 1 - 2 n_j) onto free fermions with a
boundary condition set by the fermion parity sector: antiperiodic in the
even sector, periodic in the odd one. Each sector is the quadratic form

    H_p = sum A_ij c+_i c_j + 1/2 sum (B_ij c+_i c+_j + h.c.) - B N

with A symmetric, B antisymmetric, solved by an SVD of (A + B); the
single-particle energies reproduce the dispersion
eps(k) = 2 sqrt(1 + B^2 - 2 B cos k) on the sector's momentum grid.

A sector's vacuum does not always lie in that sector: its parity is
sign(det(A + B)), and when it is wrong the cheapest quasiparticle is
added. The physical ground energy is the minimum over both sectors.
Correlators are evaluated by Wick's theorem from G_ij = <B_i A_j>
(Majorana pairings), with Z-Z strings reducing to r x r determinants.

The parity bookkeeping is deliberately validated against exact
diagonalization in the test suite rather than assumed correct.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def dispersion(k: np.ndarray | float, B: float) -> np.ndarray:
    """Single-particle energy eps(k) = 2 sqrt(1 + B^2 - 2 B cos k)."""
    return 2.0 * np.sqrt(1.0 + B * B - 2.0 * B * np.cos(k))


def _sector_form(N: int, B: float, parity: int) -> tuple[np.ndarray, np.ndarray]:
    """(A, B) matrices of the quadratic form in the given parity sector
    (+1 even, -1 odd). Bond coefficients t_j = 1 in the bulk; the wrap
    bond carries t = -parity."""
    Amat = np.zeros((N, N))
    Bmat = np.zeros((N, N))
    np.fill_diagonal(Amat, 2.0 * B)
    for j in range(N - 1):
        Amat[j, j + 1] = Amat[j + 1, j] = -1.0
        Bmat[j, j + 1] = -1.0
        Bmat[j + 1, j] = 1.0
    t_wrap = -float(parity)
    Amat[N - 1, 0] = Amat[0, N - 1] = -t_wrap
    Bmat[N - 1, 0] = -t_wrap
    Bmat[0, N - 1] = t_wrap
    return Amat, Bmat


@dataclass(frozen=True)
class _Sector:
    parity: int
    lams: np.ndarray
    phi: np.ndarray  # rows phi_k
    psi: np.ndarray  # rows psi_k
    vacuum_parity: int
    energy: float  # lowest energy within the sector's parity


@dataclass(frozen=True)
class FreeFermionSolution:
    """Ground state data of the Ising ring at transverse field B.

    energy is the total ground energy; sector the fermion boundary
    condition of the winning sector; sector_energies has both. Correlator
    methods refer to the winning sector's state.
    """

    N: int
    B: float
    energy: float
    sector: str
    sector_energies: dict = field(repr=False)
    lams: np.ndarray = field(repr=False)
    _G: np.ndarray = field(repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def density(self) -> float:
        return self.energy / self.N

    def x_expectation(self) -> float:
        """<X_j>, site independent."""
        return float(-self._G[0, 0])

    def zz_correlation(self, dr: int) -> float:
        """Connected <Z_0 Z_dr> (equal to the full correlator, <Z> = 0)."""
        if not 1 <= dr <= self.N - 1:
            raise ValueError(f"need 1 <= dr <= N-1, got {dr}")
        key = ("zz", dr)
        if key not in self._cache:
            M = self._G[np.ix_(range(dr), range(1, dr + 1))]
            self._cache[key] = float(np.linalg.det(M))
        return self._cache[key]

    def xx_correlation(self, dr: int) -> float:
        """Connected <X_0 X_dr> - <X>^2 = -G_{0,dr} G_{dr,0}."""
        if not 1 <= dr <= self.N - 1:
            raise ValueError(f"need 1 <= dr <= N-1, got {dr}")
        return float(-self._G[0, dr] * self._G[dr, 0])


def _solve_sector(N: int, B: float, parity: int) -> _Sector:
    Amat, Bmat = _sector_form(N, B, parity)
    # (A - B)(A + B) = (A+B)^T (A+B): an SVD of A + B solves the sector
    psiT, lams, phiT = np.linalg.svd(Amat + Bmat)
    vac_parity = 1 if np.linalg.det(Amat + Bmat) >= 0 else -1
    e_vac = -0.5 * float(np.sum(lams))
    energy = e_vac if vac_parity == parity else e_vac + float(lams.min())
    return _Sector(
        parity=parity,
        lams=lams,
        phi=phiT,  # rows are phi_k
        psi=psiT.T,  # rows are psi_k
        vacuum_parity=vac_parity,
        energy=energy,
    )


def ising_free_fermion(N: int, B: float) -> FreeFermionSolution:
    """Solve the Ising ring exactly; even N only.

    The returned energy is min over both parity sectors, each sector's
    energy respecting its parity constraint. Correlators are those of the
    winning sector's state and are only available when that state is a
    Bogoliubov vacuum (always the case for the even sector at B >= 0).
    """
    if N % 2 or N < 4:
        raise ValueError("free-fermion oracle requires even N >= 4")
    if B < 0:
        raise ValueError("B must be >= 0")
    even = _solve_sector(N, B, +1)
    odd = _solve_sector(N, B, -1)
    sector_energies = {"antiperiodic": even.energy, "periodic": odd.energy}
    best = even if even.energy <= odd.energy else odd
    if best.vacuum_parity != best.parity:
        raise NotImplementedError(
            "winning sector's state is not a Bogoliubov vacuum; "
            "correlators not implemented for this regime"
        )
    # Majorana pairings of the winning vacuum:
    # G_ij = <B_i A_j> = -sum_k psi_{ki} phi_{kj}
    G = -(best.psi.T @ best.phi)
    return FreeFermionSolution(
        N=N,
        B=B,
        energy=best.energy,
        sector="antiperiodic" if best.parity == 1 else "periodic",
        sector_energies=sector_energies,
        lams=best.lams,
        _G=G,
    )
