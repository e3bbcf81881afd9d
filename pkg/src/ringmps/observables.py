"""Expectation values and two-point correlators of the optimized state.

Single-site operators enter through the dressed transfer matrix
T_O = sum O[i,i'] A_{i'} (x) A_i; ring expectation values and
correlators are traces of T_O against transfer powers, evaluated with
the same top-n spectral approximation as the energy. Short separations
contract the short arc exactly (threshold m), long separations resolve
both arcs spectrally.

For models optimized in a rotated frame the physical (original-frame)
operator is transformed per sublattice before insertion.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .models import TwoSiteHamiltonian, unrotate_observable
from .spectral import SpectralApproximation, dominant_eigs, stable_powers
from .tensor import MpsTensor
from .transfer import apply_operator_transfer, apply_transfer


@dataclass(frozen=True)
class CorrelationProfile:
    """Connected two-point function of one operator over a ring.

    gamma[k] is the connected correlator at separation dr = k+1 in the
    original (unrotated) frame; label names the operator.
    """

    label: str
    N: int
    dr: np.ndarray
    gamma: np.ndarray
    mean_even: float
    mean_odd: float

    def csv_rows(self) -> list[tuple[int, float, float]]:
        return [
            (int(r), float(g), float(abs(g)))
            for r, g in zip(self.dr, self.gamma)
        ]


def _spectrum(A: np.ndarray, n: int, seed: int) -> tuple[SpectralApproximation, float]:
    """Normalized spectrum plus the rescale factor sqrt(|lam1|)."""
    spec = dominant_eigs(A, n, seed=seed)
    lam1 = abs(spec.lams[0])
    if lam1 == 0:
        raise ValueError("zero transfer spectrum")
    normed = SpectralApproximation(
        lams=spec.lams / lam1, vectors=spec.vectors, residuals=spec.residuals / lam1
    )
    return normed, float(np.sqrt(lam1))


def _sandwich_all(A: np.ndarray, O: np.ndarray, spec: SpectralApproximation) -> np.ndarray:
    """M[a, b] = <v_a| T_O |v_b>."""
    TOv = apply_operator_transfer(A, O, spec.vectors)
    return spec.flat @ TOv.reshape(spec.n, -1).T


def local_expectation(
    A: MpsTensor | np.ndarray,
    model: TwoSiteHamiltonian,
    O: np.ndarray,
    N: int,
    n: int,
    seed: int = 0,
) -> float | tuple[float, float]:
    """<O_r> in the ring state.

    For unrotated models a single site-independent float; for rotated
    models the (even-site, odd-site) pair of original-frame values.
    """
    a = np.asarray(A, dtype=float)
    spec, scale = _spectrum(a, n, seed)
    a = a / scale
    wN1 = stable_powers(spec.lams, N - 1)
    norm = float(np.sum(stable_powers(spec.lams, N)))
    O_even = unrotate_observable(model, O, 0)
    val_even = float(wN1 @ np.diag(_sandwich_all(a, O_even, spec))) / norm
    if model.rotation is None:
        return val_even
    O_odd = unrotate_observable(model, O, 1)
    val_odd = float(wN1 @ np.diag(_sandwich_all(a, O_odd, spec))) / norm
    return val_even, val_odd


class _CorrContext:
    """Shared contractions for correlators of one operator on one state.

    Separations are reduced to the shorter arc r = min(dr, N - dr), so
    gamma(dr) and gamma(N - dr) are the same computation; arcs of length
    r <= m are contracted exactly, longer ones spectrally on both sides.
    """

    def __init__(self, A, model: TwoSiteHamiltonian, O, N: int, n: int, m: int, seed: int):
        a0 = np.asarray(A, dtype=float)
        self.spec, scale = _spectrum(a0, n, seed)
        self.a = a0 / scale
        self.N = int(N)
        self.m = int(m)
        if not 1 <= self.m <= max(1, self.N // 2):
            raise ValueError(f"need 1 <= m <= N/2, got m={self.m}")
        self.rotated = model.rotation is not None
        if self.rotated and self.N % 2:
            raise ValueError("sublattice-rotated models need even N")
        self.norm = float(np.sum(stable_powers(self.spec.lams, self.N)))
        O_even = unrotate_observable(model, O, 0)
        self.M = {0: _sandwich_all(self.a, O_even, self.spec)}
        wN1 = stable_powers(self.spec.lams, self.N - 1)
        self.mean = {0: float(wN1 @ np.diag(self.M[0])) / self.norm}
        if self.rotated:
            O_odd = unrotate_observable(model, O, 1)
            self.M[1] = _sandwich_all(self.a, O_odd, self.spec)
            self.mean[1] = float(wN1 @ np.diag(self.M[1])) / self.norm
        # short-arc state: arcs[p] = T^{steps} T_{O_p} |v_a>, advanced
        # lazily; short[(p, r)] = diag of <v_a| T_{O_even} T^{r-1} T_{O_p}|v_a>
        self.arcs = {0: apply_operator_transfer(self.a, O_even, self.spec.vectors)}
        if self.rotated:
            self.arcs[1] = apply_operator_transfer(self.a, O_odd, self.spec.vectors)
        self.O_even = O_even
        self.steps = 0
        self.short: dict[tuple[int, int], np.ndarray] = {}

    def _parity(self, dr: int) -> int:
        return dr % 2 if self.rotated else 0

    def _short_diag(self, r: int, p: int) -> np.ndarray:
        while self.steps < r - 1:
            self.arcs = {q: apply_transfer(self.a, z) for q, z in self.arcs.items()}
            self.steps += 1
        key = (p, r)
        if key not in self.short:
            w1 = apply_operator_transfer(self.a, self.O_even, self.arcs[p])
            self.short[key] = np.einsum(
                "nx,nx->n", self.spec.flat, w1.reshape(self.spec.n, -1)
            )
        return self.short[key]

    def pair(self, dr: int) -> float:
        """<O_0 O_dr> (not connected), canonical shorter arc."""
        N = self.N
        if not 1 <= dr <= N - 1:
            raise ValueError(f"need 1 <= dr <= N-1, got {dr}")
        p = self._parity(dr)
        r = min(dr, N - dr)
        if r <= self.m:
            diag = self._short_diag(r, p)
            return float(stable_powers(self.spec.lams, N - r - 1) @ diag) / self.norm
        wa = stable_powers(self.spec.lams, r - 1)
        wb = stable_powers(self.spec.lams, N - r - 1)
        return float(np.einsum("a,b,ab,ba->", wb, wa, self.M[0], self.M[p])) / self.norm

    def gamma(self, dr: int) -> float:
        """Connected correlator at separation dr."""
        p = self._parity(dr)
        return self.pair(dr) - self.mean[0] * self.mean[p]


def correlation_function(
    A: MpsTensor | np.ndarray,
    model: TwoSiteHamiltonian,
    O: np.ndarray,
    N: int,
    n: int,
    m: int = 1,
    label: str = "O",
    seed: int = 0,
) -> CorrelationProfile:
    """Connected <O_0 O_dr> - <O_0><O_dr> for dr = 1 .. N//2.

    O is the original-frame single-site operator; the reference site is
    taken on the even (unrotated) sublattice. Arcs up to m transfer
    steps are contracted exactly, larger separations use the spectral
    resolution on both arcs.
    """
    ctx = _CorrContext(A, model, O, N, n, m, seed)
    drs = np.arange(1, ctx.N // 2 + 1)
    gamma = np.array([ctx.gamma(int(dr)) for dr in drs])
    return CorrelationProfile(
        label=label,
        N=ctx.N,
        dr=drs,
        gamma=gamma,
        mean_even=ctx.mean[0],
        mean_odd=ctx.mean[1] if ctx.rotated else ctx.mean[0],
    )


def correlation_pair(
    A: MpsTensor | np.ndarray,
    model: TwoSiteHamiltonian,
    O: np.ndarray,
    N: int,
    dr: int,
    n: int,
    m: int = 1,
    seed: int = 0,
) -> float:
    """Connected correlator at a single separation dr in [1, N-1].

    Evaluated on the shorter arc, so dr and N - dr give identical
    values by construction.
    """
    return _CorrContext(A, model, O, N, n, m, seed).gamma(int(dr))


def half_chain_correlation(profile: CorrelationProfile) -> float:
    """Gamma at the maximal separation N//2."""
    return float(profile.gamma[-1])


@dataclass(frozen=True)
class PowerLawFit:
    """Least-squares fit of log10(y) = intercept - exponent * log10(x)."""

    exponent: float
    intercept: float
    x: np.ndarray = field(repr=False)
    y: np.ndarray = field(repr=False)
    residual: float = 0.0
    n_dropped: int = 0


def fit_power_law(x: np.ndarray, y: np.ndarray) -> PowerLawFit:
    """Fit y ~ C x^{-exponent} through the positive points.

    Non-positive y values are dropped (counted in n_dropped); at least
    three surviving points are required.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    keep = (y > 0) & (x > 0) & np.isfinite(y) & np.isfinite(x)
    dropped = int(np.sum(~keep))
    x, y = x[keep], y[keep]
    if x.shape[0] < 3:
        raise ValueError("power-law fit needs at least 3 positive points")
    lx, ly = np.log10(x), np.log10(y)
    coef, res, *_ = np.polyfit(lx, ly, 1, full=True)
    slope, intercept = coef
    residual = float(res[0]) if len(res) else 0.0
    return PowerLawFit(
        exponent=float(-slope),
        intercept=float(intercept),
        x=x,
        y=y,
        residual=residual,
        n_dropped=dropped,
    )
