"""Bregman regularized proximal point methods for monotone equilibrium
problems on Hadamard manifolds.

The public surface is re-exported here; see the submodules for details:

* :mod:`bregprox.manifolds` -- positive orthant and SPD geometry
* :mod:`bregprox.bregman` -- Bregman functions and distances
* :mod:`bregprox.equilibrium` -- bifunctions, regularization, condition checkers
* :mod:`bregprox.solver` -- the outer proximal loop and inner solvers
* :mod:`bregprox.convexity` -- geodesic convexity probes of ``K_x``
* :mod:`bregprox.harness` -- configuration-driven experiments
"""

from .bregman import (BREGMAN_KEYS, BregmanFunction, bregman_distance, check_b2_b3,
                      check_level_set_bounded, make_breg1, make_breg2, make_bregman,
                      make_det_bregman, make_org, make_trace_bregman)
from .convexity import (ConvexityReport, Violation, reproduce_reference_values,
                        test_kx_convexity, verify_det_identities)
from .equilibrium import (BIFUNCTION_KEYS, Bifunction, FeasibleSet, RegularizedBifunction,
                          check_c6, check_monotone, check_upper_lower_semicontinuity,
                          make_bifunction, make_example1, make_spd_logdet, regularize)
from .errors import (ConfigError, ContractError, ConvergenceError, DomainError,
                     ParameterError)
from .manifolds import Geodesic, Manifold, PositiveOrthant, SPDManifold, mat_fn, sym_eig
from .solver import (SolverConfig, SolverTrace, SubproblemResidual, solve_inner_extragradient,
                     solve_inner_logchart, solve_outer, subproblem_residual, verify_run)

__version__ = "0.1.0"
