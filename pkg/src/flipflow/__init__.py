"""Metric flips of Calabi-symmetric bundles by the reduced Ricci flow.

The package tracks the evolving Kahler class of X_{p,q} exactly
(``cohomology``), evolves the reduced potential profile through the
finite-time singularity and onto the flip partner (``profiles``,
``solver``, ``scenario``), verifies the quantitative estimates along
the way (``diagnostics``), and classifies the weighted C*-quotient
local models in exact arithmetic (``quotients``).
"""

from .cohomology import (BundleModel, ClassPath, KahlerClass,
                         SingularityClass, SingularityKind, canonical_rates,
                         class_at, classify_singularity, paper_literal_rates,
                         singular_time, volume_poly, volume_ratio)
from .config import ScenarioConfig, parse_config
from .diagnostics import (estimate_suite, exceptional_diameter,
                          fit_left_exponent, fs_diameter, metric_eigenvalues,
                          neck_diameter, profile_volume, radial_length,
                          ricci_modify)
from .profiles import (Grid, Profile, Tolerances, ValidationReport,
                       canonical_profile, cone_profile, cone_scaling_check,
                       differentiate, perturbed_profile, validate_calabi)
from .quotients import (QuotientReport, QuotientWeights, charts, classify,
                        upsilon, validate_weights)
from .scenario import (ScenarioResult, Verdict, run_flip_scenario,
                       run_simulation)
from .solver import (FlowPhase, FlowState, SingularEvent, SolverConfig,
                     flip_continue, gauge_constant, initial_state, rhs,
                     run_until_singular, step, step_implicit)

__version__ = "0.1.0"
