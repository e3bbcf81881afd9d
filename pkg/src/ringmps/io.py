"""Run spec files, result files and delimited output.

A RunSpec captures every knob of a run in a flat key = value text block
that round-trips losslessly, so the spec written next to the results can
reproduce them exactly. Results go to result.json plus tensor files;
correlators and scan traces go to CSV with self-describing # key = value
headers.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from pathlib import Path

from .optimize import RunResult
from .tensor import save_tensor

MODES = ("optimize", "scan", "observables", "oracle")


@dataclass
class RunSpec:
    """Flat, typed description of one CLI run."""

    model: str = "ising:B=1.0"
    N: int = 100
    D: int = 8
    mode: str = "optimize"
    m: int = 5
    n: int = 4
    k: float = 0.2
    m_fixed: int | None = None
    init: str = "perturbed-product"
    init_tensor: str | None = None
    seed: int = 0
    tol_grad: float = 1e-9
    tol_energy: float = 1e-13
    plateau_tol: float = 1e-12
    max_iterations: int = 2000
    max_dr: int = 0

    def validate(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.N < 4:
            raise ValueError(f"N must be at least 4, got {self.N}")
        if self.D < 1:
            raise ValueError(f"D must be positive, got {self.D}")
        if self.mode == "optimize":
            if not (0 <= self.m <= (self.N - 2) // 2):
                raise ValueError(f"m must lie in [0, (N-2)//2], got {self.m}")
            if not (1 <= self.n <= self.D * self.D):
                raise ValueError(f"n must lie in [1, D^2], got {self.n}")
        if self.mode == "scan" and self.k <= 0:
            raise ValueError(f"k must be positive, got {self.k}")

    def to_text(self) -> str:
        lines = []
        for f in dataclasses.fields(self):
            value = getattr(self, f.name)
            if value is None:
                text = "none"
            elif isinstance(value, float):
                text = repr(value)
            else:
                text = str(value)
            lines.append(f"{f.name} = {text}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "RunSpec":
        known = {f.name: f for f in dataclasses.fields(cls)}
        values: dict = {}
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ValueError(f"line {lineno}: expected 'key = value', got {raw!r}")
            key, _, val = line.partition("=")
            key, val = key.strip(), val.strip()
            if key not in known:
                raise ValueError(f"line {lineno}: unknown key {key!r}")
            values[key] = _parse_field(known[key], val)
        return cls(**values)


def _parse_field(f: dataclasses.Field, val: str):
    optional = "None" in str(f.type) or "| None" in str(f.type)
    if optional and val.lower() == "none":
        return None
    base = str(f.type).replace(" | None", "").strip()
    if base == "int":
        return int(val)
    if base == "float":
        return float(val)
    return val


def save_spec(spec: RunSpec, out_dir: str | Path) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    path = out / "spec.txt"
    path.write_text(spec.to_text())
    return path


def load_spec(path: str | Path) -> RunSpec:
    return RunSpec.from_text(Path(path).read_text())


def save_result(result: RunResult, out_dir: str | Path, spec: RunSpec | None = None) -> Path:
    """Write result.json plus the optimized tensor (tensor.npy/.json)."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    save_tensor(result.tensor, out / "tensor", metadata={"model": result.model})
    payload = result.to_dict()
    payload["tensor_file"] = "tensor.npy"
    if spec is not None:
        payload["spec"] = dataclasses.asdict(spec)
    path = out / "result.json"
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n")
    return path


def load_result_dict(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def write_csv(
    path: str | Path,
    columns: list[str],
    rows: list[tuple],
    meta: dict | None = None,
) -> Path:
    """Comma-delimited table with '# key = value' header lines carrying
    the run context. Floats keep full precision via repr."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    lines = []
    for key, value in (meta or {}).items():
        lines.append(f"# {key} = {value}")
    lines.append(",".join(columns))
    for row in rows:
        cells = []
        for cell in row:
            if isinstance(cell, float):
                cells.append(repr(cell))
            else:
                cells.append(str(cell))
        lines.append(",".join(cells))
    path.write_text("\n".join(lines) + "\n")
    return path


def read_csv(path: str | Path) -> tuple[dict, list[str], list[list[str]]]:
    """Inverse of `write_csv`: returns (meta, columns, raw string rows)."""
    meta: dict = {}
    columns: list[str] = []
    rows: list[list[str]] = []
    for raw in Path(path).read_text().splitlines():
        line = raw.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, val = line[1:].partition("=")
            meta[key.strip()] = val.strip()
        elif not columns:
            columns = line.split(",")
        else:
            rows.append(line.split(","))
    return meta, columns, rows
