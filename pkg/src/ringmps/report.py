"""Aggregation of run directories into summary tables and figures.

Reads result.json / oracle.json / gamma_*.csv files produced by the run
command, writes one summary.csv and renders PNG figures: energy error
against bond dimension on log-log axes with a power-law fit, and
correlator decay curves with oracle overlays where a reference exists.
References pair with runs by a colocated oracle.json or, failing that,
by matching model and ring size anywhere under the reported directories.
Rows without a reference are kept and flagged, never dropped.
"""

from __future__ import annotations

import json
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from .io import read_csv, write_csv
from .models import from_string
from .observables import fit_power_law

DPI = 150


def _canonical_model(label) -> str:
    """Map a user-typed model label onto its canonical name so runs,
    measurements and references pair up regardless of spelling."""
    try:
        return from_string(str(label)).name
    except ValueError:
        return str(label)


def _oracle_index(dirs: list[str | Path]) -> dict:
    """(model, N) -> first oracle payload found under the given dirs."""
    index: dict = {}
    for top in sorted({Path(t).resolve() for t in dirs}):
        for path in sorted(top.rglob("oracle.json")):
            payload = json.loads(path.read_text())
            key = (_canonical_model(payload.get("model", "")), str(payload.get("N", "")))
            index.setdefault(key, payload)
    return index


def collect_runs(dirs: list[str | Path], oracle_index: dict | None = None) -> list[dict]:
    """Find result.json files under the given directories (recursively)
    and pair each with an oracle: colocated first, matching (model, N)
    from `oracle_index` as the fallback."""
    runs = []
    for top in dirs:
        top = Path(top)
        candidates = [top / "result.json"] if (top / "result.json").exists() else []
        candidates += sorted(p for p in top.rglob("result.json") if p != top / "result.json")
        for res_path in candidates:
            run_dir = res_path.parent
            entry = {"dir": run_dir, "result": json.loads(res_path.read_text())}
            oracle_path = run_dir / "oracle.json"
            entry["oracle"] = (
                json.loads(oracle_path.read_text()) if oracle_path.exists() else None
            )
            if entry["oracle"] is None and oracle_index:
                res = entry["result"]
                key = (_canonical_model(res.get("model", "")), str(res.get("N", "")))
                entry["oracle"] = oracle_index.get(key)
            runs.append(entry)
    return runs


def _measurement_dirs(dirs: list[str | Path], runs: list[dict]) -> list[dict]:
    """Directories holding gamma_*.csv but no result.json (bare
    measurement output), paired with a colocated oracle if present."""
    seen = {run["dir"].resolve() for run in runs}
    entries = []
    for top in sorted({Path(t).resolve() for t in dirs}):
        for csv_path in sorted(top.rglob("gamma_*.csv")):
            run_dir = csv_path.parent
            if run_dir.resolve() in seen:
                continue
            seen.add(run_dir.resolve())
            oracle_path = run_dir / "oracle.json"
            entries.append({
                "dir": run_dir,
                "result": None,
                "oracle": (
                    json.loads(oracle_path.read_text()) if oracle_path.exists() else None
                ),
            })
    return entries


def summary_rows(runs: list[dict]) -> list[tuple]:
    rows = []
    for run in runs:
        res = run["result"]
        oracle = run["oracle"]
        if oracle is not None and "energy" in oracle:
            ref = oracle["energy"]
            delta = abs(res["energy"] - ref) / max(abs(ref), 1e-300)
            ref_text, delta_text, note = repr(float(ref)), repr(float(delta)), ""
        else:
            ref_text, delta_text, note = "", "", "missing-oracle"
        rows.append(
            (
                run["dir"].name,
                res.get("model", ""),
                res.get("N", ""),
                res.get("D", ""),
                res.get("m", ""),
                res.get("n", ""),
                repr(float(res["energy"])),
                res.get("converged", ""),
                ref_text,
                delta_text,
                note,
            )
        )
    return rows


def write_summary(runs: list[dict], out_dir: Path) -> Path:
    columns = [
        "run", "model", "N", "D", "m", "n",
        "energy", "converged", "reference", "delta_rel", "note",
    ]
    return write_csv(out_dir / "summary.csv", columns, summary_rows(runs))


def fig_error_vs_D(runs: list[dict], out_dir: Path) -> list[Path]:
    """Log-log relative energy error against D, one figure per
    (model, N) group with at least two referenced points."""
    groups: dict[tuple, list[tuple[int, float]]] = {}
    for run in runs:
        res, oracle = run["result"], run["oracle"]
        if oracle is None or "energy" not in oracle:
            continue
        ref = oracle["energy"]
        delta = abs(res["energy"] - ref) / max(abs(ref), 1e-300)
        groups.setdefault((res["model"], res["N"]), []).append((res["D"], delta))
    paths = []
    for (model, N), pts in sorted(groups.items()):
        if len(pts) < 2:
            continue
        pts.sort()
        D = np.array([p[0] for p in pts], dtype=float)
        delta = np.array([p[1] for p in pts], dtype=float)
        fig, ax = plt.subplots(figsize=(5.0, 3.8))
        ax.loglog(D, np.maximum(delta, 1e-300), "o", color="tab:blue", label="data")
        try:
            fit = fit_power_law(D, delta)
            grid = np.geomspace(D.min(), D.max(), 64)
            ax.loglog(
                grid,
                10.0 ** fit.intercept * grid ** (-fit.exponent),
                "-",
                color="tab:orange",
                label=rf"$\Delta \sim D^{{-{fit.exponent:.2f}}}$",
            )
        except ValueError:
            pass
        ax.set_xlabel("bond dimension D")
        ax.set_ylabel("relative energy error")
        ax.set_title(f"{model}, N = {N}")
        ax.legend(frameon=False)
        fig.tight_layout()
        slug = model.replace(":", "_").replace("=", "")
        path = out_dir / f"error_vs_D_{slug}_N{N}.png"
        fig.savefig(path, dpi=DPI)
        plt.close(fig)
        paths.append(path)
    return paths


def fig_correlators(
    runs: list[dict], out_dir: Path, oracle_index: dict | None = None
) -> list[Path]:
    """One decay plot per gamma_*.csv found in the run directories,
    overlaying the oracle curve when one pairs with that label."""
    paths = []
    for run in runs:
        run_dir = run["dir"]
        for csv_path in sorted(run_dir.glob("gamma_*.csv")):
            label = csv_path.stem[len("gamma_"):]
            meta, columns, raw_rows = read_csv(csv_path)
            oracle = run["oracle"]
            if oracle is None and oracle_index:
                key = (_canonical_model(meta.get("model", "")), str(meta.get("N", "")))
                oracle = oracle_index.get(key)
            dr = np.array([int(r[0]) for r in raw_rows])
            gam = np.array([float(r[1]) for r in raw_rows])
            fig, ax = plt.subplots(figsize=(5.0, 3.8))
            ax.semilogy(dr, np.abs(gam), "o-", ms=3, color="tab:blue", label=label)
            if oracle is not None and label in oracle.get("gamma", {}):
                ref = np.asarray(oracle["gamma"][label], dtype=float)
                dr_ref = np.arange(1, ref.shape[0] + 1)
                ax.semilogy(
                    dr_ref, np.abs(ref), "--", color="tab:orange", label=f"{label} reference"
                )
            ax.set_xlabel("separation")
            ax.set_ylabel("|connected correlator|")
            ax.set_title(f"{run_dir.name}: {label}")
            ax.legend(frameon=False)
            fig.tight_layout()
            path = out_dir / f"gamma_{label}_{run_dir.name}.png"
            fig.savefig(path, dpi=DPI)
            plt.close(fig)
            paths.append(path)
    return paths


def run_report(dirs: list[str | Path], out_dir: str | Path) -> int:
    """Entry point used by the CLI. Returns a process exit code."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    oracle_index = _oracle_index(dirs)
    runs = collect_runs(dirs, oracle_index)
    if not runs:
        print("report: no result.json found under the given directories")
        return 2
    summary = write_summary(runs, out)
    measured = runs + _measurement_dirs(dirs, runs)
    figures = fig_error_vs_D(runs, out) + fig_correlators(measured, out, oracle_index)
    print(f"report: {len(runs)} runs -> {summary}")
    for fig_path in figures:
        print(f"report: wrote {fig_path}")
    return 0
