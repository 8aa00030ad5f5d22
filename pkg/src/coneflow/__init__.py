"""coneflow: cone-field positivity certificates for smooth dynamical systems.

Certify that a system's linearization leaves a user-defined cone field
invariant, measure projective (Hilbert-metric) contraction over finite
horizons, compute the dominant interior direction field, and classify
omega-limit sets of the certified systems.
"""

from .dynsys import ChartTopology, CoordKind, ProlongedState, SystemDef, TimeKind, chart_normalize, linearize, prolonged_rhs
from .errors import (
    ConeflowError,
    Diverged,
    EvaluationError,
    InvalidCone,
    InvalidInput,
    InvalidSpec,
    LeftDomain,
    NeedsDenserGrid,
    NoPeriod,
    NonContractive,
    NotHyperbolic,
    OutsideCone,
    WrongConeKind,
)
from .expressions import system_from_expressions
from .geometry import (
    Cone,
    ConeField,
    HilbertDistance,
    cone_contains,
    contraction_ratio,
    hilbert_bounds,
    hilbert_distance,
    projective_diameter,
    validate_transport,
)
from .integrate import FundamentalMatrix, Trajectory, flow, fundamental_matrix, variational_flow
from .limitsets import (
    ClassifySettings,
    LimitSetReport,
    LimitSetVerdict,
    OmegaSet,
    Section,
    alignment_profile,
    classify_limit_set,
    detect_period,
    invariant_region_check,
    omega_estimate,
    saddle_tangency_diagnostic,
    verdict_table,
)
from .models import ModelName, ModelSpec, make_model
from .pffield import PFResidual, PFVector, pf_field_on_grid, pf_residual, pf_vector_at
from .positivity import (
    BoundarySample,
    ContractionReport,
    PositivityReport,
    StrictVerdict,
    Verdict,
    boundary_samples,
    check_pointwise_positivity,
    check_strict_positivity,
    metzler_check,
)

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
