"""Conjugate-gradient energy minimization and the (m, n) accuracy scan.

The packed upper-triangle parameters are minimized with Polak-Ribiere
(plus) nonlinear CG under a strong Wolfe line search. The spectral
approximation orders (m, n) are scanned along the line n = k*m until the
energy stops improving within a plateau tolerance, warm starting each
point from the previous optimum.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import line_search as _wolfe_line_search

from .gradient import NonPhysicalStateError, energy_gradient, make_workspace
from .models import TwoSiteHamiltonian
from .spectral import EigensolverError
from .tensor import (
    MpsTensor,
    load_tensor,
    mirror_upper,
    pack,
    random_symmetric,
    save_tensor,
    unpack,
)


@dataclass(frozen=True)
class OptimizeConfig:
    """Knobs of the CG driver.

    restart_period 0 means automatic (min(#parameters, 100)); the energy
    convergence test compares values across one full restart cycle.

    rescue_m controls the gradient-fidelity fallback: the energy value
    does not depend on m, only the gradient's split between exact and
    spectral arcs does, so when the line search finds no descent along
    the configured-m gradient the driver retries with the exact-arc band
    widened to rescue_m (and keeps it for the rest of the run). -1 picks
    min((N-2)/2, max(32, 2m)) automatically; 0 disables the fallback.
    """

    max_iterations: int = 2000
    gradient_tolerance: float = 1e-9
    energy_tolerance: float = 1e-13
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.1
    restart_period: int = 0
    max_bisections: int = 30
    rescue_m: int = -1
    eig_seed: int = 0
    checkpoint_every: int = 0
    checkpoint_dir: str | None = None


@dataclass(frozen=True)
class ScanConfig:
    """Walk of the accuracy parameters.

    k is the slope n ~ k*m of the scan line; m advances in steps of
    round(1/k) (so n advances by 1) until m_max = (N-2)//2, then n alone
    keeps growing. m_fixed pins m and walks n = 1, 2, 3, ... instead.
    plateau_tolerance is the relative energy change under which two
    consecutive scan steps count as converged.
    """

    k: float = 0.2
    plateau_tolerance: float = 1e-12
    m_max: int | None = None
    n_max: int | None = None
    m_fixed: int | None = None
    max_points: int = 200


@dataclass
class RunResult:
    """Outcome of a minimization or scan.

    energy is the per-site density at (m, n); trace holds one dict per
    scan point (single-point runs have one entry). flags collects
    anomalies ("n-cap", "line-search-failed", ...).
    """

    tensor: MpsTensor
    energy: float
    grad_norm: float
    m: int
    n: int
    N: int
    model: str
    converged: bool
    status: str
    iterations: int
    n_value_evals: int
    n_grad_evals: int
    wall_time: float
    trace: list = field(default_factory=list)
    flags: list = field(default_factory=list)

    def to_dict(self) -> dict:
        """JSON-ready summary; timing lives under its own key so
        reproducibility checks can strip it."""
        return {
            "model": self.model,
            "N": self.N,
            "D": self.tensor.D,
            "m": self.m,
            "n": self.n,
            "energy": self.energy,
            "grad_norm": self.grad_norm,
            "converged": self.converged,
            "status": self.status,
            "iterations": self.iterations,
            "n_value_evals": self.n_value_evals,
            "n_grad_evals": self.n_grad_evals,
            "trace": self.trace,
            "flags": self.flags,
            "timing": {"wall_time": self.wall_time},
        }


class _Objective:
    """Packed-parameter objective with a two-slot evaluation memo."""

    def __init__(self, model, N, m, n, eig_seed):
        self.model = model
        self.N = N
        self.m = m
        self.n = n
        self.eig_seed = eig_seed
        self.d = model.d
        self.n_value = 0
        self.n_grad = 0
        self._val_memo: tuple[bytes, float] | None = None
        self._grad_memo: tuple[bytes, float, np.ndarray] | None = None

    def widen_exact_band(self, m: int) -> None:
        """Recompute future gradients with exact arcs up to the new m.

        The energy value is unchanged (it never depends on m); only the
        gradient memo must be dropped.
        """
        self.m = m
        self._grad_memo = None

    def _D_of(self, v: np.ndarray) -> int:
        per = v.shape[0] // self.d
        D = int((np.sqrt(8 * per + 1) - 1) / 2)
        return D

    def value(self, v: np.ndarray) -> float:
        key = v.tobytes()
        if self._grad_memo is not None and self._grad_memo[0] == key:
            return self._grad_memo[1]
        if self._val_memo is not None and self._val_memo[0] == key:
            return self._val_memo[1]
        self.n_value += 1
        try:
            ws = make_workspace(
                unpack(v, self.d, self._D_of(v)), self.model, self.N, self.m, self.n,
                eig_seed=self.eig_seed,
            )
            val = ws.rho
        except (NonPhysicalStateError, EigensolverError):
            val = float("inf")
        self._val_memo = (key, val)
        return val

    def value_and_grad(self, v: np.ndarray) -> tuple[float, np.ndarray]:
        key = v.tobytes()
        if self._grad_memo is not None and self._grad_memo[0] == key:
            return self._grad_memo[1], self._grad_memo[2]
        self.n_grad += 1
        try:
            ws = make_workspace(
                unpack(v, self.d, self._D_of(v)), self.model, self.N, self.m, self.n,
                eig_seed=self.eig_seed,
            )
            res = energy_gradient(ws)
            val, grad = res.value, res.gradient
        except (NonPhysicalStateError, EigensolverError):
            val, grad = float("inf"), np.zeros_like(v)
        self._grad_memo = (key, val, grad)
        return val, grad

    def grad(self, v: np.ndarray) -> np.ndarray:
        return self.value_and_grad(v)[1]


def _backtrack(obj: _Objective, v, d, f0, slope, c1, max_bisections):
    """Armijo backtracking fallback; returns alpha or None."""
    alpha = 1.0
    for _ in range(max_bisections):
        if obj.value(v + alpha * d) <= f0 + c1 * alpha * slope:
            return alpha
        alpha *= 0.5
    return None


def _search(obj: _Objective, v, d, f, g, f_prev, config) -> float | None:
    """Strong Wolfe line search with an Armijo backtracking fallback."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        alpha, *_ = _wolfe_line_search(
            obj.value,
            obj.grad,
            v,
            d,
            gfk=g,
            old_fval=f,
            old_old_fval=f_prev,
            c1=config.wolfe_c1,
            c2=config.wolfe_c2,
            maxiter=15,
        )
    if alpha is not None:
        return float(alpha)
    slope = float(g @ d)
    if slope >= 0:
        return None
    return _backtrack(obj, v, d, f, slope, config.wolfe_c1, config.max_bisections)


def minimize(
    A0: MpsTensor | np.ndarray,
    model: TwoSiteHamiltonian,
    N: int,
    m: int,
    n: int,
    config: OptimizeConfig = OptimizeConfig(),
) -> RunResult:
    """Minimize the energy density at fixed spectral orders (m, n).

    Deterministic for fixed inputs. Accepted iterates have non-increasing
    energy (Wolfe/Armijo contract); returns the best point seen when the
    line search gives out, flagged non-converged.
    """
    t0 = time.perf_counter()
    A0 = A0 if isinstance(A0, MpsTensor) else MpsTensor(entries=np.asarray(A0))
    obj = _Objective(model, N, m, n, config.eig_seed)
    v = pack(A0)
    period = config.restart_period or min(v.shape[0], 100)
    m_cap = (N - 2) // 2
    if config.rescue_m < 0:
        m_rescue = min(m_cap, max(32, 2 * m))
    else:
        m_rescue = min(m_cap, config.rescue_m)

    f, g = obj.value_and_grad(v)
    if not np.isfinite(f):
        raise NonPhysicalStateError("initial tensor is not evaluable")
    d = -g
    f_cycle = f
    f_prev = f + abs(f) + 1.0  # for scipy's initial step heuristic
    status, converged = "max-iterations", False
    flags: list[str] = []
    it = 0
    while it < config.max_iterations:
        gnorm = float(np.max(np.abs(g))) if g.size else 0.0
        if gnorm <= config.gradient_tolerance:
            status, converged = "gradient-converged", True
            break
        slope = float(g @ d)
        if slope >= 0:  # not a descent direction: steepest restart
            d = -g
        alpha = _search(obj, v, d, f, g, f_prev, config)
        if alpha is None and np.any(d != -g):
            # the mixed CG direction failed: retry along steepest descent
            d = -g
            alpha = _search(obj, v, d, f, g, f_prev, config)
        if alpha is None and obj.m < m_rescue:
            # No descent along the configured-m gradient. Its spectral
            # short arcs can point far from the true gradient away from
            # the optimum, so widen the exact-arc band (the objective
            # value is m-independent) and retry from the same point.
            obj.widen_exact_band(m_rescue)
            f, g = obj.value_and_grad(v)
            d = -g
            if "gradient-escalated" not in flags:
                flags.append("gradient-escalated")
            alpha = _search(obj, v, d, f, g, f_prev, config)
        if alpha is None:
            status, converged = "line-search-failed", False
            flags.append("line-search-failed")
            break
        v_new = v + alpha * d
        f_prev = f
        f_new, g_new = obj.value_and_grad(v_new)
        it += 1
        # Polak-Ribiere+ with periodic restart
        if it % period == 0:
            beta = 0.0
            rel = abs(f_cycle - f_new) / max(abs(f_new), 1e-300)
            if rel <= config.energy_tolerance:
                v, f, g = v_new, f_new, g_new
                status, converged = "energy-converged", True
                break
            f_cycle = f_new
        else:
            denom = float(g @ g)
            beta = max(0.0, float(g_new @ (g_new - g)) / denom) if denom > 0 else 0.0
        d = -g_new + beta * d
        v, f, g = v_new, f_new, g_new
        if (
            config.checkpoint_every
            and config.checkpoint_dir
            and it % config.checkpoint_every == 0
        ):
            _write_checkpoint(config.checkpoint_dir, v, obj, f, g, it, model, N, m, n)

    gnorm = float(np.max(np.abs(g))) if g.size else 0.0
    A_opt = unpack(v, model.d, A0.D)
    wall = time.perf_counter() - t0
    entry = {
        "m": m,
        "n": n,
        "energy": f,
        "grad_norm": gnorm,
        "iterations": it,
        "converged": converged,
        "status": status,
    }
    return RunResult(
        tensor=A_opt,
        energy=f,
        grad_norm=gnorm,
        m=m,
        n=n,
        N=N,
        model=model.name,
        converged=converged,
        status=status,
        iterations=it,
        n_value_evals=obj.n_value,
        n_grad_evals=obj.n_grad,
        wall_time=wall,
        trace=[entry],
        flags=flags,
    )


def _write_checkpoint(ckpt_dir, v, obj, f, g, it, model, N, m, n) -> None:
    import json
    from pathlib import Path

    path = Path(ckpt_dir)
    path.mkdir(parents=True, exist_ok=True)
    A = unpack(v, obj.d, obj._D_of(v))
    save_tensor(A, path / "checkpoint-tensor", metadata={"model": model.name})
    state = {
        "iteration": it,
        "energy": f,
        "grad_norm": float(np.max(np.abs(g))),
        "model": model.name,
        "N": N,
        "m": m,
        "n": n,
    }
    (path / "checkpoint.json").write_text(json.dumps(state, indent=2) + "\n")


def scan_mn(
    A0: MpsTensor | np.ndarray,
    model: TwoSiteHamiltonian,
    N: int,
    scan: ScanConfig = ScanConfig(),
    config: OptimizeConfig = OptimizeConfig(),
) -> RunResult:
    """Scan (m, n) along n = k*m with warm starts until the energy
    plateaus (two consecutive relative changes below plateau_tolerance).

    Returns the result at the first plateau point with the full trace
    attached; if n reaches its cap (D^2 or n_max) without a plateau the
    last point is returned flagged "n-cap" / non-converged.
    """
    A0 = A0 if isinstance(A0, MpsTensor) else MpsTensor(entries=np.asarray(A0))
    D = A0.D
    m_cap = scan.m_max if scan.m_max is not None else max(1, (N - 2) // 2)
    n_cap = min(scan.n_max if scan.n_max is not None else D * D, D * D)
    dm = max(1, round(1.0 / scan.k))
    dn = max(1, round(scan.k * dm))

    points: list[tuple[int, int]] = []
    if scan.m_fixed is not None:
        m_w = min(scan.m_fixed, m_cap)
        n_w = 1
        while len(points) < scan.max_points and n_w <= n_cap:
            points.append((m_w, n_w))
            n_w += 1
    else:
        m_w, n_w = dm, dn
        while len(points) < scan.max_points and n_w <= n_cap:
            points.append((min(m_w, m_cap), n_w))
            if m_w >= m_cap:
                n_w += dn
            else:
                m_w += dm
                n_w = max(1, round(scan.k * m_w))

    t0 = time.perf_counter()
    trace: list[dict] = []
    results: list[RunResult] = []
    flags: list[str] = []
    A = A0
    plateau_at: int | None = None
    for idx, (m_t, n_t) in enumerate(points):
        res = minimize(A, model, N, m_t, n_t, config)
        A = res.tensor
        results.append(res)
        entry = dict(res.trace[0])
        trace.append(entry)
        if n_t >= D * D and "n-at-bond-limit" not in flags:
            flags.append("n-at-bond-limit")
        if len(results) >= 3:
            e0, e1, e2 = (r.energy for r in results[-3:])
            d1 = abs(e1 - e0) / max(abs(e0), 1e-300)
            d2 = abs(e2 - e1) / max(abs(e1), 1e-300)
            if d1 <= scan.plateau_tolerance and d2 <= scan.plateau_tolerance:
                plateau_at = len(results) - 3
                break

    wall = time.perf_counter() - t0
    if plateau_at is not None:
        best = results[plateau_at]
        status, converged = "plateau", True
    else:
        best = results[-1]
        status, converged = "scan-exhausted", False
        flags.append("n-cap")
    return RunResult(
        tensor=best.tensor,
        energy=best.energy,
        grad_norm=best.grad_norm,
        m=best.m,
        n=best.n,
        N=N,
        model=model.name,
        converged=converged,
        status=status,
        iterations=sum(r.iterations for r in results),
        n_value_evals=sum(r.n_value_evals for r in results),
        n_grad_evals=sum(r.n_grad_evals for r in results),
        wall_time=wall,
        trace=trace,
        flags=flags,
    )


def initialize(
    model: TwoSiteHamiltonian,
    N: int,
    D: int,
    strategy: str = "perturbed-product",
    seed: int = 0,
    base: MpsTensor | None = None,
    path: str | None = None,
    noise: float = 1e-3,
) -> MpsTensor:
    """Starting tensors.

    "perturbed-product": level-0 product state embedded at bond
    dimension D plus symmetric noise of size 1e-2. "random": i.i.d.
    normal upper triangles. "continuation": `base` (or the tensor file at
    `path`) embedded in the top-left block, noise * max|base| elsewhere;
    an embedded optimum is a stationary point of the enlarged problem,
    so the kick must be large enough for the line search to measure
    descent along the new directions. "file": load the tensor at `path`
    as-is.
    """
    rng = np.random.default_rng(seed)
    d = model.d
    if strategy == "perturbed-product":
        a = 1e-2 * rng.standard_normal((d, D, D))
        a[0, 0, 0] += 1.0
        a = np.stack([mirror_upper(ai) for ai in a])
        return MpsTensor(entries=a)
    if strategy == "random":
        return random_symmetric(d, D, rng)
    if strategy == "continuation":
        if base is None:
            if path is None:
                raise ValueError("continuation needs a base tensor or path")
            base, _ = load_tensor(path)
        if base.d != d or base.D > D:
            raise ValueError(f"cannot embed base (d={base.d}, D={base.D}) into D={D}")
        Db = base.D
        eps = noise * float(np.max(np.abs(base.entries))) if base.D else noise
        a = eps * rng.standard_normal((d, D, D))
        a = np.stack([mirror_upper(ai) for ai in a])
        a[:, :Db, :Db] = base.entries
        return MpsTensor(entries=a)
    if strategy == "file":
        if path is None:
            raise ValueError("strategy 'file' needs a path")
        A, _ = load_tensor(path)
        if A.d != d:
            raise ValueError(f"tensor file has d={A.d}, model needs d={d}")
        return A
    raise ValueError(f"unknown initialization strategy {strategy!r}")
