"""Small JSON disk cache for oracle scalars and tables.

Enabled by pointing the environment variable RINGMPS_CACHE_DIR at a
writable directory; without it every call recomputes. Only derived
numbers are cached (energies, correlator tables), never eigenvectors.
"""

from __future__ import annotations

import json
import os
import re
from pathlib import Path

ENV_VAR = "RINGMPS_CACHE_DIR"


def cache_dir() -> Path | None:
    """The active cache directory, created on demand, or None."""
    root = os.environ.get(ENV_VAR)
    if not root:
        return None
    path = Path(root)
    path.mkdir(parents=True, exist_ok=True)
    return path


def _key_to_name(key: str) -> str:
    return re.sub(r"[^A-Za-z0-9_.=-]", "_", key) + ".json"


def get(key: str) -> dict | None:
    root = cache_dir()
    if root is None:
        return None
    path = root / _key_to_name(key)
    if not path.exists():
        return None
    try:
        return json.loads(path.read_text())
    except (json.JSONDecodeError, OSError):
        return None


def put(key: str, value: dict) -> None:
    root = cache_dir()
    if root is None:
        return
    path = root / _key_to_name(key)
    tmp = path.with_suffix(".tmp")
    tmp.write_text(json.dumps(value, indent=1, sort_keys=True))
    tmp.replace(path)


def cached_ed_energy(model_name: str, N: int) -> float:
    """Ground energy of the named model's N-site ring, ED, disk-cached."""
    key = f"ed_{model_name}_N={N}"
    hit = get(key)
    if hit is not None:
        return float(hit["energy"])
    from ..models import from_string
    from .ed import exact_diagonalize

    res = exact_diagonalize(from_string(model_name), N)
    put(key, {"model": model_name, "N": N, "energy": res.energy, "gap": res.gap})
    return res.energy


def cached_free_fermion(N: int, B: float, max_dr: int = 0) -> dict:
    """Free-fermion reference for the Ising ring, disk-cached.

    Returns {"energy", "density", "sector", "x", "gamma_zz", "gamma_xx"}
    with correlator lists covering dr = 1 .. max_dr.
    """
    key = f"ff_N={N}_B={B}_dr={max_dr}"
    hit = get(key)
    if hit is not None:
        return hit
    from .freefermion import ising_free_fermion

    sol = ising_free_fermion(N, B)
    value = {
        "N": N,
        "B": B,
        "energy": sol.energy,
        "density": sol.density,
        "sector": sol.sector,
        "x": sol.x_expectation(),
        "gamma_zz": [sol.zz_correlation(r) for r in range(1, max_dr + 1)],
        "gamma_xx": [sol.xx_correlation(r) for r in range(1, max_dr + 1)],
    }
    put(key, value)
    return value
