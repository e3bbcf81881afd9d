"""Command line entry points.

ringmps run    — optimize / scan / observables / oracle, driven by flags
                 or a spec file (flags override the file); every run
                 writes spec.txt next to its outputs so it can be
                 reproduced exactly.
ringmps report — aggregate run directories into summary.csv and figures.

Exit codes: 0 success, 2 invalid input, 3 non-convergence or failed
evaluation.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from pathlib import Path

import numpy as np

from .gradient import NonPhysicalStateError
from .io import RunSpec, save_result, save_spec, write_csv
from .models import (
    PAULI_X,
    PAULI_Z,
    TwoSiteHamiltonian,
    from_string,
    spin_matrices,
    unrotate_observable,
)
from .observables import correlation_function, local_expectation
from .optimize import OptimizeConfig, ScanConfig, initialize, minimize, scan_mn
from .oracles import ED_MAX_DIM, ed_correlation, ed_local_expectation, exact_diagonalize
from .oracles.freefermion import ising_free_fermion
from .spectral import EigensolverError
from .tensor import load_tensor


def default_operators(model: TwoSiteHamiltonian) -> list[tuple[str, np.ndarray]]:
    """Single-site operators worth measuring for a given local dimension."""
    if model.d == 2:
        return [("X", PAULI_X.astype(float)), ("Z", PAULI_Z.astype(float))]
    sx, _, sz = spin_matrices((model.d - 1) / 2.0)
    return [("Sz", sz), ("Sx", sx)]


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ringmps",
        description="Variational ground states of translation invariant spin rings.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="optimize, scan, measure or build references")
    run.add_argument("--spec", type=str, default=None, help="spec file; flags override it")
    run.add_argument("--model", type=str, default=None,
                     help="ising:B=<b> | heisenberg-half | heisenberg-one")
    run.add_argument("--N", type=int, default=None, help="ring length")
    run.add_argument("--D", type=int, default=None, help="bond dimension")
    run.add_argument("--mode", type=str, default=None,
                     choices=["optimize", "scan", "observables", "oracle"])
    run.add_argument("--m", type=int, default=None, help="exact transfer powers per side")
    run.add_argument("--n", type=int, default=None, help="retained eigenpairs")
    run.add_argument("--k", type=float, default=None, help="scan slope n = k*m")
    run.add_argument("--m-fixed", type=int, default=None, help="pin m during a scan")
    run.add_argument("--init", type=str, default=None,
                     choices=["perturbed-product", "random", "continuation", "file"])
    run.add_argument("--init-tensor", type=str, default=None,
                     help="tensor file for continuation/file init or observables")
    run.add_argument("--seed", type=int, default=None)
    run.add_argument("--tol-grad", type=float, default=None)
    run.add_argument("--tol-energy", type=float, default=None)
    run.add_argument("--plateau-tol", type=float, default=None)
    run.add_argument("--max-iterations", type=int, default=None)
    run.add_argument("--max-dr", type=int, default=None,
                     help="largest separation written by observables/oracle (0: N//2)")
    run.add_argument("--out", type=str, required=True, help="output directory")

    rep = sub.add_parser("report", help="summarize run directories")
    rep.add_argument("dirs", nargs="+", help="directories containing result.json files")
    rep.add_argument("--out", type=str, required=True, help="output directory")
    return parser


_FLAG_TO_FIELD = {
    "model": "model", "N": "N", "D": "D", "mode": "mode", "m": "m", "n": "n",
    "k": "k", "m_fixed": "m_fixed", "init": "init", "init_tensor": "init_tensor",
    "seed": "seed", "tol_grad": "tol_grad", "tol_energy": "tol_energy",
    "plateau_tol": "plateau_tol", "max_iterations": "max_iterations",
    "max_dr": "max_dr",
}


def spec_from_args(args: argparse.Namespace) -> RunSpec:
    if args.spec is not None:
        spec = RunSpec.from_text(Path(args.spec).read_text())
    else:
        spec = RunSpec()
    overrides = {
        field: getattr(args, flag)
        for flag, field in _FLAG_TO_FIELD.items()
        if getattr(args, flag, None) is not None
    }
    return dataclasses.replace(spec, **overrides)


def _initial_tensor(spec: RunSpec, model: TwoSiteHamiltonian):
    base = None
    if spec.init == "continuation" and spec.init_tensor:
        base, _ = load_tensor(spec.init_tensor)
    return initialize(
        model, spec.N, spec.D, strategy=spec.init, seed=spec.seed,
        base=base, path=spec.init_tensor,
    )


def _opt_config(spec: RunSpec) -> OptimizeConfig:
    return OptimizeConfig(
        max_iterations=spec.max_iterations,
        gradient_tolerance=spec.tol_grad,
        energy_tolerance=spec.tol_energy,
    )


def cmd_run(args: argparse.Namespace) -> int:
    try:
        spec = spec_from_args(args)
        spec.validate()
        model = from_string(spec.model)
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    save_spec(spec, out)
    try:
        if spec.mode == "optimize":
            A0 = _initial_tensor(spec, model)
            res = minimize(A0, model, spec.N, spec.m, spec.n, _opt_config(spec))
            save_result(res, out, spec)
            print(f"{spec.model} N={spec.N} D={spec.D} (m={spec.m}, n={spec.n}): "
                  f"energy {res.energy:.12f}, |g| {res.grad_norm:.3e}, {res.status}")
            return 0 if res.converged else 3
        if spec.mode == "scan":
            A0 = _initial_tensor(spec, model)
            scan_cfg = ScanConfig(
                k=spec.k, plateau_tolerance=spec.plateau_tol, m_fixed=spec.m_fixed
            )
            res = scan_mn(A0, model, spec.N, scan_cfg, _opt_config(spec))
            save_result(res, out, spec)
            write_csv(
                out / "scan_trace.csv",
                ["m", "n", "energy", "grad_norm", "iterations", "converged", "status"],
                [tuple(e[c] for c in
                       ("m", "n", "energy", "grad_norm", "iterations", "converged", "status"))
                 for e in res.trace],
                meta={"model": spec.model, "N": spec.N, "D": spec.D, "k": spec.k},
            )
            print(f"{spec.model} N={spec.N} D={spec.D} scan: energy {res.energy:.12f} "
                  f"at (m={res.m}, n={res.n}), {res.status}")
            return 0 if res.converged else 3
        if spec.mode == "observables":
            return _cmd_observables(spec, model, out)
        return _cmd_oracle(spec, model, out)
    except (NonPhysicalStateError, EigensolverError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 3


def _cmd_observables(spec: RunSpec, model: TwoSiteHamiltonian, out: Path) -> int:
    if not spec.init_tensor:
        print("error: observables mode needs --init-tensor", file=sys.stderr)
        return 2
    A, _ = load_tensor(spec.init_tensor)
    if A.d != model.d:
        print(f"error: tensor has d={A.d}, model needs d={model.d}", file=sys.stderr)
        return 2
    max_dr = spec.max_dr or spec.N // 2
    expectations: dict = {}
    for label, O in default_operators(model):
        value = local_expectation(A, model, O, spec.N, spec.n, seed=spec.seed)
        if isinstance(value, tuple):
            expectations[label] = {"even": value[0], "odd": value[1]}
        else:
            expectations[label] = value
        profile = correlation_function(
            A, model, O, spec.N, spec.n, m=spec.m, label=label, seed=spec.seed
        )
        rows = [r for r in profile.csv_rows() if r[0] <= max_dr]
        write_csv(
            out / f"gamma_{label}.csv",
            ["dr", "gamma", "abs_gamma"],
            rows,
            meta={
                "model": spec.model, "N": spec.N, "D": A.D, "m": spec.m, "n": spec.n,
                "operator": label,
                "mean_even": repr(profile.mean_even),
                "mean_odd": repr(profile.mean_odd),
            },
        )
    (out / "expectations.json").write_text(
        json.dumps(expectations, indent=2, sort_keys=True) + "\n"
    )
    print(f"observables for {spec.model} N={spec.N}: "
          + ", ".join(f"<{k}>" for k in expectations))
    return 0


def _cmd_oracle(spec: RunSpec, model: TwoSiteHamiltonian, out: Path) -> int:
    max_dr = spec.max_dr or spec.N // 2
    payload: dict = {"model": spec.model, "N": spec.N}
    if model.name.startswith("ising") and spec.N % 2 == 0:
        B = float(spec.model.partition("B=")[2] or 1.0)
        sol = ising_free_fermion(spec.N, B)
        payload.update(
            source="free-fermion",
            energy=sol.density,
            x=sol.x_expectation(),
            gamma={
                "Z": [sol.zz_correlation(dr) for dr in range(1, max_dr + 1)],
                "X": [sol.xx_correlation(dr) for dr in range(1, max_dr + 1)],
            },
        )
    elif model.d ** spec.N <= ED_MAX_DIM:
        ed = exact_diagonalize(model, spec.N)
        gamma: dict = {}
        for label, O in default_operators(model):
            means = {0: ed_local_expectation(ed, O)}
            ops = {0: O}
            if model.rotation is not None:
                ops[1] = unrotate_observable(model, O, 1)
                means[1] = ed_local_expectation(ed, ops[1], site=1)
            vals = []
            for dr in range(1, max_dr + 1):
                p = dr % 2 if model.rotation is not None else 0
                raw = ed_correlation(ed, O, ops[p], dr)
                vals.append(raw - means[0] * means[p])
            gamma[label] = vals
        payload.update(source="ed", energy=ed.density, gamma=gamma)
    else:
        print(
            f"error: no reference available for {spec.model} at N={spec.N} "
            f"(need an even-N transverse field chain or d^N <= {ED_MAX_DIM})",
            file=sys.stderr,
        )
        return 2
    (out / "oracle.json").write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    print(f"oracle[{payload['source']}] {spec.model} N={spec.N}: "
          f"energy {payload['energy']:.12f}")
    return 0


def main(argv: list[str] | None = None) -> int:
    args = _build_parser().parse_args(argv)
    if args.command == "run":
        return cmd_run(args)
    from .report import run_report

    return run_report(args.dirs, args.out)


if __name__ == "__main__":
    sys.exit(main())
