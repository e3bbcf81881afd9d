"""Variational ground states of periodic spin chains with a one-site
translation invariant MPS ansatz.

The state |psi(A)> = sum Tr(A_i1 ... A_iN)|i1...iN> is optimized over
symmetric real matrices A_i by conjugate gradients, with energy and
gradient evaluated through a spectral approximation of transfer-matrix
powers. See the README for the CLI and file formats.
"""

from .models import TwoSiteHamiltonian, from_string, ising, heisenberg_half_rotated, heisenberg_one_rotated
from .tensor import MpsTensor, pack, unpack, gauge_transform, normalize, random_symmetric, save_tensor, load_tensor
from .transfer import TransferOperator, build_transfer
from .spectral import SpectralApproximation, dominant_eigs, EigensolverError
from .gradient import GradientWorkspace, NonPhysicalStateError, make_workspace, energy_gradient, energy_value, norm_and_neff
from .optimize import OptimizeConfig, ScanConfig, RunResult, minimize, scan_mn, initialize
from .observables import local_expectation, correlation_function, correlation_pair, fit_power_law
from .io import RunSpec

__version__ = "0.1.0"

__all__ = [
    "TwoSiteHamiltonian",
    "from_string",
    "ising",
    "heisenberg_half_rotated",
    "heisenberg_one_rotated",
    "MpsTensor",
    "pack",
    "unpack",
    "gauge_transform",
    "normalize",
    "random_symmetric",
    "save_tensor",
    "load_tensor",
    "TransferOperator",
    "build_transfer",
    "SpectralApproximation",
    "dominant_eigs",
    "EigensolverError",
    "GradientWorkspace",
    "NonPhysicalStateError",
    "make_workspace",
    "energy_gradient",
    "energy_value",
    "norm_and_neff",
    "OptimizeConfig",
    "ScanConfig",
    "RunResult",
    "minimize",
    "scan_mn",
    "initialize",
    "local_expectation",
    "correlation_function",
    "correlation_pair",
    "fit_power_law",
    "RunSpec",
    "__version__",
]
