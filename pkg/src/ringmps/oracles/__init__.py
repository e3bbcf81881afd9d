"""Independent reference calculations used to verify the main code paths.

Three layers, in increasing physical scope:

* `ring`: exact contraction of the MPS ring with dense transfer matrices
  (no spectral truncation) plus a brute-force state-vector evaluation of
  the same state; validates the spectral engine on small systems.
* `ed`: sparse exact diagonalization of the spin Hamiltonian itself.
* `freefermion`: closed-form solution of the transverse-field Ising ring
  through its free-fermion representation; validated against `ed`.
"""

from .ring import (
    exact_ring_energy,
    exact_ring_gradient_terms,
    exact_ring_correlation,
    statevector,
    statevector_energy,
)
from .ed import (
    ED_MAX_DIM,
    EDResult,
    exact_diagonalize,
    ed_correlation,
    ed_local_expectation,
)
from .freefermion import FreeFermionSolution, ising_free_fermion
from .cache import cache_dir, cached_free_fermion, cached_ed_energy

__all__ = [
    "ED_MAX_DIM",
    "exact_ring_energy",
    "exact_ring_gradient_terms",
    "exact_ring_correlation",
    "statevector",
    "statevector_energy",
    "EDResult",
    "exact_diagonalize",
    "ed_correlation",
    "ed_local_expectation",
    "FreeFermionSolution",
    "ising_free_fermion",
    "cache_dir",
    "cached_free_fermion",
    "cached_ed_energy",
]
