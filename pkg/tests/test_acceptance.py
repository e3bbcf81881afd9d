"""End-to-end acceptance gate.

Eight checks, run in order, each printing one [PASS]/[FAIL] line with
the measured numbers (visible with `pytest -s` or on failure). The
expensive optimized states — the transverse-field bond-dimension chain
at N=100 and the spin-1 scan — are built once per session and shared.

Expected total runtime is roughly two hours on a single core,
dominated by checks 5-7.
"""

import time

import numpy as np
import pytest

from ringmps.gradient import (
    energy_gradient,
    heff_easy,
    heff_extremal,
    heff_medium,
    make_workspace,
    norm_and_neff,
)
from ringmps.models import PAULI_X, PAULI_Z, from_string, unrotate_observable
from ringmps.observables import (
    correlation_function,
    correlation_pair,
    fit_power_law,
    local_expectation,
)
from ringmps.optimize import OptimizeConfig, ScanConfig, initialize, minimize, scan_mn
from ringmps.oracles import (
    ed_correlation,
    ed_local_expectation,
    exact_diagonalize,
    exact_ring_correlation,
    exact_ring_energy,
    exact_ring_gradient_terms,
)
from ringmps.oracles.freefermion import ising_free_fermion
from ringmps.tensor import pack, random_symmetric, unpack

X = PAULI_X.astype(float)
Z = PAULI_Z.astype(float)

# -- shared heavy-state configuration ---------------------------------------

CHAIN_MODEL = "ising:B=1.0"
CHAIN_N = 100
CHAIN_M = 49  # both gradient arcs exact at N = 100
CHAIN_BUDGET = {4: 2000, 8: 6000, 12: 8000, 16: 10000, 20: 12000, 24: 5000}
CHAIN_EIGS = {4: 16, 8: 16, 12: 20, 16: 24, 20: 28, 24: 28}
CHAIN_KICK = 1e-2  # continuation noise, large enough to leave the saddle
CHAIN_CFG = dict(wolfe_c2=0.01, energy_tolerance=1e-14)

SPIN1_TARGET = -1.401484039
SPIN1_CFG = OptimizeConfig(max_iterations=6000)


def _report(ok: bool, line: str) -> None:
    print(f"[{'PASS' if ok else 'FAIL'}] {line}")
    assert ok, line


# -- fixtures ----------------------------------------------------------------


@pytest.fixture(scope="session")
def ff100():
    return ising_free_fermion(CHAIN_N, 1.0)


@pytest.fixture(scope="session")
def ising_chain(ff100):
    """Optimized transverse-field states, D = 4 .. 24, warm started by
    embedding each optimum into the next bond dimension."""
    model = from_string(CHAIN_MODEL)
    ref = ff100.density
    states, prev = {}, None
    for D in (4, 8, 12, 16, 20, 24):
        if prev is None:
            A0 = initialize(model, CHAIN_N, D, "perturbed-product", seed=0)
        else:
            A0 = initialize(
                model, CHAIN_N, D, "continuation", seed=D, base=prev,
                noise=CHAIN_KICK,
            )
        cfg = OptimizeConfig(max_iterations=CHAIN_BUDGET[D], **CHAIN_CFG)
        res = minimize(A0, model, CHAIN_N, CHAIN_M, CHAIN_EIGS[D], cfg)
        prev = res.tensor
        states[D] = {
            "tensor": res.tensor,
            "energy": res.energy,
            "rel": abs(res.energy - ref) / abs(ref),
        }
    return states


@pytest.fixture(scope="session")
def ed_states():
    """Optimized states with exact-diagonalization references."""
    out = {}
    for label, N, D in (("ising:B=1.0", 12, 8), ("heisenberg-half", 12, 12)):
        model = from_string(label)
        ed = exact_diagonalize(model, N)
        A0 = initialize(model, N, D, "perturbed-product", seed=0)
        cfg = OptimizeConfig(max_iterations=3500, wolfe_c2=0.01)
        res = minimize(A0, model, N, (N - 2) // 2, D * D, cfg)
        out[label] = {"N": N, "D": D, "result": res, "ed": ed}
    return out


@pytest.fixture(scope="session")
def spin1_scan():
    model = from_string("heisenberg-one")
    A0 = initialize(model, 100, 16, "perturbed-product", seed=0)
    scan = scan_mn(
        A0, model, 100,
        ScanConfig(m_fixed=1, plateau_tolerance=1e-9, n_max=16),
        SPIN1_CFG,
    )
    doubled = minimize(scan.tensor, model, 100, 1, 2 * scan.n, SPIN1_CFG)
    return {"scan": scan, "doubled": doubled}


# -- 1/8: analytic gradient against finite differences -----------------------


def _fd_gradient(A, model, N, m, n, step=1e-5):
    v0 = pack(A)
    g = np.zeros_like(v0)
    for i in range(v0.shape[0]):
        vp, vm = v0.copy(), v0.copy()
        vp[i] += step
        vm[i] -= step
        fp = make_workspace(unpack(vp, model.d, A.D), model, N, m, n).rho
        fm = make_workspace(unpack(vm, model.d, A.D), model, N, m, n).rho
        g[i] = (fp - fm) / (2 * step)
    return g


def test_1_gradient_matches_finite_differences():
    N, D, m = 10, 3, 4
    t0 = time.perf_counter()
    worst = 0.0
    for label in ("ising:B=1.0", "heisenberg-half", "heisenberg-one"):
        model = from_string(label)
        n = D * D
        for seed in range(20):
            A = random_symmetric(model.d, D, np.random.default_rng(seed))
            ws = make_workspace(A, model, N, m, n)
            g = energy_gradient(ws).gradient
            g_fd = _fd_gradient(A, model, N, m, n)
            mask = np.abs(g) > 1e-8
            assert mask.any()
            rel = float((np.abs(g - g_fd)[mask] / np.abs(g)[mask]).max())
            worst = max(worst, rel)
    wall = time.perf_counter() - t0
    ok = worst < 1e-5 and wall < 10.0
    _report(ok, f"1/8 gradient vs finite differences: 60 tensors, "
                f"worst rel {worst:.2e} (< 1e-5), {wall:.1f}s (< 10s)")


# -- 2/8: spectral contraction equals the exact ring oracle ------------------


def test_2_spectral_path_equals_exact_ring():
    Sz3 = np.diag([1.0, 0.0, -1.0])
    Sx3 = np.array([[0, 1, 0], [1, 0, 1], [0, 1, 0]]) / np.sqrt(2.0)
    combos = [
        ("ising:B=1.0", 4, 14, Z, X),
        ("heisenberg-half", 3, 12, Z, X),
        ("heisenberg-one", 2, 8, Sz3, Sx3),
    ]
    worst = 0.0

    def track(a, b):
        nonlocal worst
        err = np.max(np.abs(np.asarray(a) - np.asarray(b)))
        ref = float(np.max(np.abs(np.asarray(b))))
        worst = max(worst, err / max(ref, 1e-30))

    for label, D, N, O1, O2 in combos:
        model = from_string(label)
        A = random_symmetric(model.d, D, np.random.default_rng(2))
        n = D * D
        for m in (1, 3, 5):
            if m > (N - 2) // 2:
                continue
            ws = make_workspace(A, model, N, m, n)
            ref = exact_ring_gradient_terms(ws.A, model, N)
            rho_exact, _ = exact_ring_energy(A, model, N)
            track(ws.rho, rho_exact)
            norm, neff = norm_and_neff(ws)
            track(norm, ref["norm"])
            sym_slot = ref["norm_slot"] + np.transpose(ref["norm_slot"], (0, 2, 1))
            track(neff, N * sym_slot)
            track(heff_easy(ws), ref["easy"])
            track(heff_extremal(ws) + heff_medium(ws), ref["hard"])
            for O in (O1, O2):
                # in the rotated frames the partner operator at odd
                # separations carries the sublattice transformation
                O_odd = (
                    unrotate_observable(model, O, 1)
                    if model.rotation is not None
                    else O
                )
                for dr in range(1, N // 2 + 1):
                    O2_eff = O_odd if dr % 2 else O
                    pair, one, two = exact_ring_correlation(A, O, O2_eff, N, dr)
                    g = correlation_pair(A, model, O, N, dr, n=n, m=m)
                    err = abs(g - (pair - one * two))
                    worst = max(worst, err / max(abs(pair - one * two), 1e-12))
    ok = worst < 1e-10
    _report(ok, f"2/8 spectral path vs exact ring (energy, norm, gradient "
                f"bands, correlators): worst rel {worst:.2e} (< 1e-10)")


# -- 3/8: optimized energies against exact diagonalization -------------------


def test_3_optimized_energy_matches_ed(ed_states):
    tols = {"ising:B=1.0": 1e-6, "heisenberg-half": 1e-5}
    lines, ok = [], True
    for label, entry in ed_states.items():
        rel = abs(entry["result"].energy - entry["ed"].density) / abs(
            entry["ed"].density
        )
        ok = ok and rel < tols[label]
        lines.append(f"{label} N={entry['N']} D={entry['D']}: "
                     f"rel {rel:.2e} (< {tols[label]:g})")
    _report(ok, "3/8 optimized energy vs exact diagonalization: "
                + "; ".join(lines))


# -- 4/8: the two reference solvers agree ------------------------------------


def test_4_reference_solvers_cross_validate():
    worst_e = 0.0
    for N in (4, 6, 8, 10, 12):
        for B in (0.5, 1.0, 1.5):
            sol = ising_free_fermion(N, B)
            ed = exact_diagonalize(from_string(f"ising:B={B}"), N)
            worst_e = max(worst_e, abs(sol.density - ed.density) / abs(ed.density))
    worst_g = 0.0
    N = 12
    for B in (0.5, 1.0, 1.5):
        sol = ising_free_fermion(N, B)
        ed = exact_diagonalize(from_string(f"ising:B={B}"), N)
        x = ed_local_expectation(ed, X)
        for dr in range(1, N):
            zz = ed_correlation(ed, Z, Z, dr)
            xx = ed_correlation(ed, X, X, dr) - x * x
            worst_g = max(worst_g, abs(sol.zz_correlation(dr) - zz))
            worst_g = max(worst_g, abs(sol.xx_correlation(dr) - xx))
    ok = worst_e < 1e-10 and worst_g < 1e-8
    _report(ok, f"4/8 free-fermion vs exact diagonalization: energy rel "
                f"{worst_e:.2e} (< 1e-10), correlators abs {worst_g:.2e} (< 1e-8)")


# -- 5/8: energy error against bond dimension --------------------------------


def test_5_error_scaling_with_bond_dimension(ising_chain):
    fit_D = [8, 12, 16, 20]
    rels = {D: ising_chain[D]["rel"] for D in (4, 8, 12, 16, 20)}
    monotone = all(rels[a] > rels[b] for a, b in zip((4, 8, 12, 16), (8, 12, 16, 20)))
    fit = fit_power_law(
        np.array(fit_D, float), np.array([rels[D] for D in fit_D])
    )
    mu = fit.exponent
    ok = monotone and rels[16] <= 1e-6 and 6.0 <= mu <= 9.5
    detail = ", ".join(f"D={D}: {rels[D]:.2e}" for D in (4, 8, 12, 16, 20))
    _report(ok, f"5/8 error vs bond dimension ({detail}); monotone={monotone}, "
                f"error(D=16) <= 1e-6, exponent {mu:.2f} in [6.0, 9.5]")


# -- 6/8: spin-1 chain plateau ------------------------------------------------


def test_6_spin1_plateau(spin1_scan):
    scan = spin1_scan["scan"]
    doubled = spin1_scan["doubled"]
    err = abs(scan.energy - SPIN1_TARGET)
    delta2 = abs(doubled.energy - scan.energy)
    ok = (
        scan.status == "plateau"
        and scan.n <= 8
        and err <= 1e-4
        and delta2 < 1e-9
    )
    _report(ok, f"6/8 spin-1 N=100 D=16: plateau at n={scan.n} (<= 8), "
                f"energy {scan.energy:.9f} within {err:.2e} of {SPIN1_TARGET} "
                f"(<= 1e-4), doubling n shifts energy {delta2:.1e} (< 1e-9)")


# -- 7/8: correlator properties ----------------------------------------------


def test_7_correlator_properties(ising_chain, ed_states, ff100):
    worst_sym, worst_id = 0.0, 0.0
    checked = 0

    def inspect(A, model, N, n, m):
        nonlocal worst_sym, worst_id, checked
        O = Z if model.d == 2 else np.diag([1.0, 0.0, -1.0])
        for dr in (1, 2, N // 3, N // 2):
            g = correlation_pair(A, model, O, N, dr, n=n, m=m)
            g_mirror = correlation_pair(A, model, O, N, N - dr, n=n, m=m)
            worst_sym = max(worst_sym, abs(g - g_mirror))
        prof_i = correlation_function(A, model, np.eye(model.d), N, n=n, m=m)
        worst_id = max(worst_id, float(np.max(np.abs(prof_i.gamma))))
        checked += 1

    for label, entry in ed_states.items():
        model = from_string(label)
        inspect(entry["result"].tensor, model, entry["N"], entry["D"] ** 2, 3)
    model = from_string(CHAIN_MODEL)
    for D in (4, 8, 12, 16, 20):
        inspect(ising_chain[D]["tensor"], model, CHAIN_N,
                min(D * D, 24), 10)

    # exact-ring cross-check of the folded correlator on a small state
    entry = ed_states["ising:B=1.0"]
    A12 = entry["result"].tensor
    worst_ring = 0.0
    for dr in range(1, 12):
        pair, one, two = exact_ring_correlation(A12, Z, Z, 12, dr)
        g = correlation_pair(A12, from_string("ising:B=1.0"), Z, 12, dr,
                             n=64, m=3)
        worst_ring = max(worst_ring, abs(g - (pair - one * two)))

    # large separation decay against the free-fermion reference at D = 24
    A24 = ising_chain[24]["tensor"]
    worst_ff = 0.0
    for dr in range(1, 26):
        g = correlation_pair(A24, model, Z, CHAIN_N, dr, n=40, m=25)
        ref = ff100.zz_correlation(dr)
        worst_ff = max(worst_ff, abs(g - ref) / abs(ref))

    ok = (
        worst_sym <= 1e-12
        and worst_id <= 1e-12
        and worst_ring <= 1e-10
        and worst_ff <= 0.02
    )
    _report(ok, f"7/8 correlators on {checked} optimized states: ring symmetry "
                f"{worst_sym:.1e} (<= 1e-12), identity {worst_id:.1e} "
                f"(<= 1e-12), vs exact ring {worst_ring:.1e} (<= 1e-10), "
                f"ZZ at D=24 within {100 * worst_ff:.2f}% of free fermions "
                f"(<= 2%) for separations <= 25")


# -- 8/8: invariances ---------------------------------------------------------


def test_8_invariances(ising_chain):
    model = from_string(CHAIN_MODEL)
    A = ising_chain[8]["tensor"]
    ws = make_workspace(A, model, CHAIN_N, CHAIN_M, 16)
    e0 = ws.rho

    rng = np.random.default_rng(123)
    Q, _ = np.linalg.qr(rng.standard_normal((A.D, A.D)))
    gauged = np.einsum("ab,ibc,dc->iad", Q, np.asarray(A.entries), Q)
    e_gauge = make_workspace(gauged, model, CHAIN_N, CHAIN_M, 16).rho
    gauge_err = abs(e_gauge - e0) / abs(e0)

    e_scaled = make_workspace(
        2.0 * np.asarray(A.entries), model, CHAIN_N, CHAIN_M, 16
    ).rho
    scale_err = abs(e_scaled - e0) / abs(e0)

    small = from_string("ising:B=1.0")
    A0 = initialize(small, 12, 3, "perturbed-product", seed=0)
    cfg = OptimizeConfig(max_iterations=200)
    r1 = minimize(A0, small, 12, 2, 6, cfg)
    r2 = minimize(A0, small, 12, 2, 6, cfg)
    deterministic = r1.energy == r2.energy

    ok = gauge_err <= 1e-10 and scale_err <= 1e-11 and deterministic
    _report(ok, f"8/8 invariances: orthogonal gauge {gauge_err:.1e} (<= 1e-10), "
                f"rescaling 2A {scale_err:.1e} (<= 1e-11), repeated run "
                f"bit-identical={deterministic}")
