"""Numerical laboratory for the descent flow T' = (T^t - T) T on SO(n).

The package covers the trace cost n - tr(T) and its first and second order
structure, the critical components and their geometry, structure-preserving
integration of the flow, linearized stability at equilibria, and batch
experiments measuring the almost-global convergence to the identity.
"""

__version__ = "0.1.0"

from .errors import (
    AdmissionError,
    AmbiguousTrace,
    BadIndex,
    BaseMismatch,
    ComponentMismatch,
    NoNegativePair,
    NotCritical,
    NumericalFailure,
    SingularInput,
    SonFlowError,
)
from .manifold import (
    RotationMatrix,
    SkewMatrix,
    TangentVector,
    expm_skew,
    group_exp,
    group_log,
    haar_sample,
    haar_sample_batch,
    metric,
    project_to_group,
    random_tangent,
    skew_dim,
    skew_pairs,
    skew_to_coords,
    coords_to_skew,
)
from .objective import (
    HessianForm,
    cost,
    differential,
    gradient,
    gradient_norm,
    hessian_at,
    hessian_kernel_dimension,
)
from .critical import (
    CriticalPointInfo,
    classify,
    component_dimension,
    connect_in_component,
    make_critical,
    tangent_projector_at,
)
from .flow import (
    FlowConfig,
    Trajectory,
    Verdict,
    integrate,
    integrate_batch,
    so2_reference,
    step,
    vector_field,
)
from .linearize import (
    LinearizationReport,
    hessian_linearization_consistency,
    linearize,
    unstable_direction,
)
from .experiments import (
    BasinReport,
    SaddleEscapeReport,
    check_morse_bott,
    run_basin,
    run_saddle_escape,
    run_validation_suite,
)
