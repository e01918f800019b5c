"""Quantum field theory with a polynomial interaction on de Sitter space, computed numerically.

Modes of the Klein-Gordon equation in global coordinates, smeared two-point
and Green kernels, truncated Wightman and scattering functions, Gram matrices
of the form factor functional, the stationary support calculus and boundary
integrability scans.
"""

from .errors import (BudgetExceeded, ContractError, DomainError, MissingEntry, PoleError,
                     PreconditionViolation, ResidualExceeded)
from .geometry import DeSitterPoint, GridSpec, ModelParams, make_grid
from .modes import build_mode, compute_mu
from .testfn import TestFunction, apply_kg, make_bump, make_cap
from .kernels import SmearedKernel, pair_kernel
from .wightman import (Current, In, Loc, Out, ccr_commutator, full_npoint, out_npoint,
                       smatrix_element, truncated_npoint)
from .gns import gram, null_quotient, signature
from .stationary import TermPattern, verify_out_in_equivalence, verify_spectral_support
from .dispersion import envelope_fit, scan_In, threshold

__version__ = "0.1.0"
