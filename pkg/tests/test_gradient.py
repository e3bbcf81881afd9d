"""Energy and analytic-gradient engine checks.

The spectral path at full rank (n = D^2) must reproduce the exact ring
contraction term by term and agree with finite differences of the energy;
the symmetry invariances (gauge, rescaling) hold at any rank.
"""

import numpy as np
import pytest

from ringmps.gradient import (
    NonPhysicalStateError,
    energy_gradient,
    energy_value,
    heff_easy,
    heff_extremal,
    heff_medium,
    make_workspace,
    norm_and_neff,
)
from ringmps.models import from_string, ising
from ringmps.oracles import exact_ring_energy, exact_ring_gradient_terms
from ringmps.tensor import (
    gauge_transform,
    pack,
    pack_gradient,
    random_symmetric,
    unpack,
)


def _tensor(d=2, D=3, seed=0, scale=1.0):
    return random_symmetric(d, D, np.random.default_rng(seed), scale=scale)


def _fd_gradient(A, model, N, m, n, step=1e-5):
    """Central finite differences of the packed energy density."""
    v0 = pack(A)
    g = np.zeros_like(v0)
    for i in range(v0.shape[0]):
        vp = v0.copy()
        vp[i] += step
        vm = v0.copy()
        vm[i] -= step
        ep = make_workspace(unpack(vp, A.d, A.D), model, N, m, n).rho
        em = make_workspace(unpack(vm, A.d, A.D), model, N, m, n).rho
        g[i] = (ep - em) / (2 * step)
    return g


# ---------------------------------------------------------------------------
# value agreement


@pytest.mark.parametrize("model_name,d", [
    ("ising:B=1.0", 2),
    ("heisenberg-half", 2),
    ("heisenberg-one", 3),
])
@pytest.mark.parametrize("N,m", [(10, 1), (10, 4), (11, 3)])
def test_energy_matches_exact_ring_at_full_rank(model_name, d, N, m):
    model = from_string(model_name)
    A = _tensor(d=d, D=3, seed=5)
    ws = make_workspace(A, model, N, m, n=9)
    rho_exact, _ = exact_ring_energy(A, model, N)
    assert np.isclose(ws.rho, rho_exact, rtol=1e-11)
    assert np.isclose(energy_value(ws), ws.rho, rtol=0, atol=0)


def test_truncated_energy_converges_with_n():
    model = ising(1.0)
    A = _tensor(d=2, D=4, seed=2)
    rho_exact, _ = exact_ring_energy(A, model, 12)
    errs = []
    for n in (2, 6, 12, 16):
        ws = make_workspace(A, model, 12, m=3, n=n)
        errs.append(abs(ws.rho - rho_exact))
    assert errs[-1] < 1e-12
    assert errs[0] >= errs[-1]


# ---------------------------------------------------------------------------
# gradient agreement, term by term and against finite differences


@pytest.mark.parametrize("m", [1, 3, 5])
def test_heff_terms_match_exact_ring(m):
    model = ising(1.0)
    A = _tensor(d=2, D=3, seed=9)
    N = 12
    ws = make_workspace(A, model, N, m, n=9)
    ref = exact_ring_gradient_terms(ws.A, model, N)
    # same normalized tensor: scale by sqrt(lam1) was applied inside
    easy = heff_easy(ws)
    hard = heff_extremal(ws) + heff_medium(ws)
    assert np.allclose(easy, ref["easy"], rtol=1e-11, atol=1e-13)
    assert np.allclose(hard, ref["hard"], rtol=1e-11, atol=1e-13)
    norm, neff = norm_and_neff(ws)
    assert np.isclose(norm, ref["norm"], rtol=1e-11)
    sym_slot = ref["norm_slot"] + np.transpose(ref["norm_slot"], (0, 2, 1))
    assert np.allclose(neff, N * sym_slot, rtol=1e-11, atol=1e-13)


def test_gradient_matches_finite_differences():
    # spot check at the acceptance-test operating point (D=3, n=D^2, m=4)
    model = ising(1.0)
    N, m, n = 10, 4, 9
    for seed in (0, 1):
        A = _tensor(d=2, D=3, seed=seed)
        ws = make_workspace(A, model, N, m, n)
        g = energy_gradient(ws).gradient
        g_fd = _fd_gradient(A, model, N, m, n)
        mask = np.abs(g) > 1e-8
        assert mask.any()
        rel = np.abs(g - g_fd)[mask] / np.abs(g)[mask]
        assert rel.max() < 1e-5


def test_gradient_matches_finite_differences_spin1():
    model = from_string("heisenberg-one")
    A = _tensor(d=3, D=2, seed=4)
    N, m, n = 10, 4, 4
    ws = make_workspace(A, model, N, m, n)
    g = energy_gradient(ws).gradient
    g_fd = _fd_gradient(A, model, N, m, n)
    mask = np.abs(g) > 1e-8
    rel = np.abs(g - g_fd)[mask] / np.abs(g)[mask]
    assert rel.max() < 1e-5


def test_gradient_m0_band_split():
    # m = 0: no extremal band, medium band covers all N-2 slots
    model = ising(0.7)
    A = _tensor(d=2, D=3, seed=11)
    N = 10
    ws = make_workspace(A, model, N, m=0, n=9)
    assert np.array_equal(heff_extremal(ws), np.zeros_like(A.entries))
    ref = exact_ring_gradient_terms(ws.A, model, N)
    assert np.allclose(heff_medium(ws), ref["hard"], rtol=1e-11, atol=1e-13)


def test_gradient_total_is_n_times_density():
    model = ising(1.0)
    A = _tensor(d=2, D=3, seed=3)
    ws = make_workspace(A, model, 12, m=2, n=9)
    res_site = energy_gradient(ws, per_site=True)
    res_tot = energy_gradient(ws, per_site=False)
    assert np.isclose(res_tot.total, res_site.total, rtol=1e-15)
    assert np.allclose(res_tot.gradient, 12 * res_site.gradient, rtol=1e-13)
    assert res_site.diagnostics["term_norms"]["easy"] > 0


# ---------------------------------------------------------------------------
# invariances


def test_energy_gauge_invariance():
    model = ising(1.0)
    A = _tensor(d=2, D=4, seed=6)
    rng = np.random.default_rng(13)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    Ag = gauge_transform(A, Q)
    e1 = make_workspace(A, model, 12, 3, 16).rho
    e2 = make_workspace(Ag, model, 12, 3, 16).rho
    assert abs(e1 - e2) / abs(e1) < 1e-10


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_energy_rescale_invariance(c):
    model = ising(1.0)
    A = _tensor(d=2, D=3, seed=8)
    ws1 = make_workspace(A, model, 12, 3, 9)
    ws2 = make_workspace(c * A.entries, model, 12, 3, 9)
    assert abs(ws1.rho - ws2.rho) / abs(ws1.rho) < 1e-11


@pytest.mark.parametrize("c", [0.5, 2.0])
def test_gradient_rescale_covariance(c):
    # E(cA) = E(A) pointwise, so grad E(cA) = grad E(A) / c
    model = ising(1.0)
    A = _tensor(d=2, D=3, seed=8)
    g1 = energy_gradient(make_workspace(A, model, 12, 3, 9)).gradient
    g2 = energy_gradient(make_workspace(c * A.entries, model, 12, 3, 9)).gradient
    assert np.allclose(g2, g1 / c, rtol=1e-9, atol=1e-14)


def test_gradient_orthogonal_gauge_covariance():
    # the packed gradient transforms like the packed tensor under the
    # gauge group, so its norm is invariant
    model = ising(1.0)
    A = _tensor(d=2, D=4, seed=6)
    rng = np.random.default_rng(23)
    Q, _ = np.linalg.qr(rng.standard_normal((4, 4)))
    ws1 = make_workspace(A, model, 12, 3, 16)
    ws2 = make_workspace(gauge_transform(A, Q), model, 12, 3, 16)
    r1 = energy_gradient(ws1)
    r2 = energy_gradient(ws2)
    # compare as full symmetric matrices: g2 = Q g1 Q^T
    def unpack_sym(g):
        d, D = 2, 4
        iu = np.triu_indices(D)
        per = iu[0].shape[0]
        out = np.zeros((d, D, D))
        for i in range(d):
            M = np.zeros((D, D))
            M[iu] = g[i * per:(i + 1) * per]
            out[i] = (M + M.T) / 2  # off-diag sensitivity splits evenly
        return out

    G1 = unpack_sym(r1.gradient)
    G2 = unpack_sym(r2.gradient)
    G1_rot = np.einsum("ux,ixy,wy->iuw", Q, G1, Q)
    assert np.allclose(G2, G1_rot, rtol=1e-8, atol=1e-11)


# ---------------------------------------------------------------------------
# validation and failure modes


def test_workspace_validation():
    model = ising(1.0)
    A = _tensor(d=2, D=3)
    with pytest.raises(ValueError):
        make_workspace(A, from_string("heisenberg-one"), 10, 1, 4)  # d mismatch
    with pytest.raises(ValueError):
        make_workspace(A, model, 3, 1, 4)  # N too small
    with pytest.raises(ValueError):
        make_workspace(A, model, 10, 5, 4)  # m > (N-2)/2
    with pytest.raises(ValueError):
        make_workspace(A, model, 10, -1, 4)


def test_zero_tensor_rejected():
    model = ising(1.0)
    with pytest.raises(NonPhysicalStateError):
        make_workspace(np.zeros((2, 3, 3)), model, 10, 1, 4)


def test_nan_tensor_rejected():
    model = ising(1.0)
    A = np.full((2, 3, 3), np.nan)
    with pytest.raises((NonPhysicalStateError, Exception)):
        make_workspace(A, model, 10, 1, 4)


def test_workspace_normalizes_dominant_eigenvalue():
    model = ising(1.0)
    A = _tensor(d=2, D=3, seed=1, scale=3.0)
    ws = make_workspace(A, model, 12, 2, 9)
    assert np.isclose(abs(ws.spec.lams[0]), 1.0, rtol=1e-13)
    # the stored tensor is the input divided by sqrt(|lam1|)
    assert np.allclose(ws.A * ws.scale, np.asarray(A), rtol=1e-14)


def test_packed_gradient_chain_rule():
    # pack_gradient doubles off-diagonal sensitivities: check against a
    # finite difference of a quadratic functional of the packed vector
    rng = np.random.default_rng(5)
    C = rng.standard_normal((2, 3, 3))
    A = _tensor(d=2, D=3, seed=0)

    def f(v):
        return float(np.sum(C * np.asarray(unpack(v, 2, 3))))

    v0 = pack(A)
    g = pack_gradient(C)
    fd = np.zeros_like(v0)
    for i in range(v0.shape[0]):
        vp, vm = v0.copy(), v0.copy()
        vp[i] += 1e-6
        vm[i] -= 1e-6
        fd[i] = (f(vp) - f(vm)) / 2e-6
    assert np.allclose(g, fd, rtol=1e-8, atol=1e-9)
