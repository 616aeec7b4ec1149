"""Numerical laboratory for one-parameter families of quasi-periodic SL(2,R) cocycles."""

from ._backend import BACKEND_NAME, kernel_counter
from .asymptotics import (
    AssumptionReport,
    AssumptionViolation,
    PowerLawFit,
    SweepRecord,
    default_gaps,
    extrapolate_edge_L,
    fit_power_law,
    holder_check,
    run_sweep,
    theorem_bound_check,
    verify_assumptions,
    verify_at,
)
from .bundles import (
    BundlePair,
    DifferenceField,
    compute_bundles,
    difference_field,
    growth_ratio,
    mobius_apply,
    stable_direction,
    step_ratio,
    unstable_direction,
)
from .core import (
    CocycleMap,
    Frequency,
    Mat2,
    ParameterFamily,
    Potential,
    constant_family,
    iterate_product,
    iterate_product_scaled,
    schrodinger_cocycle,
    schrodinger_family,
    shear_exp,
)
from .edge import EdgeEstimate, UHCertificate, certify_uh, find_edge, schrodinger_bracket, suggested_edge_grid
from .errors import (
    BadBracket,
    ConeViolation,
    ConfigError,
    DegenerateFit,
    DomainError,
    MultipleMinimaWarning,
    NonConvergence,
    QPCocycleError,
    QuadratureNotConverged,
    WindowViolation,
)
from .lyapunov import (
    DerivativeEstimate,
    LyapunovEstimate,
    derivative_fd,
    derivative_lemma31,
    le_from_bundle,
    le_norm_growth,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
