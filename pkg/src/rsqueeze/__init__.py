"""Remote preparation of squeezed light on shared Gaussian entanglement.

Simulation library and scenario CLI: Gaussian states and channels, homodyne
conditioning with post-selection windows, fidelity metrics and squeezed-state
fits, seeded Monte Carlo measurement runs, and reproducible scenario tables.
"""

from .conventions import (
    VACUUM_VARIANCE,
    antisqueezed_variance,
    db_from_r,
    db_to_variance,
    r_from_db,
    squeezed_variance,
    variance_to_db,
)
from .errors import (
    AccuracyError,
    DensityOnlyWarning,
    LowStatisticsWarning,
    NumericalDegeneracyError,
    WindowUnderflowError,
)
from .gaussian import (
    EprParams,
    GaussianState,
    apply_loss,
    displace,
    epr_state,
    ghz_like,
    marginal,
    purity,
    quad_selector,
    quad_variance,
    rotate,
    rotation_matrix,
    squeezing_db,
    symplectic_eigenvalues,
    tmsv,
    vacuum,
    wigner_at,
)
from .conditioning import (
    HomodyneProjection,
    WindowedConditional,
    condition_exact,
    condition_sequence,
    condition_windowed,
    predicted_conditional_squeezing,
    predicted_displacement,
    remaining_modes,
    success_probability,
    windowed_marginal,
)
from .metrics import (
    SqueezedFit,
    SqueezedTarget,
    estimate_squeezed_fit,
    fidelity_pure_target,
    target_state,
)
from .montecarlo import (
    ConditionalEstimate,
    MeasurementPlan,
    SampleBatch,
    SelectionResult,
    estimate_conditional,
    export_batch_csv,
    postselect,
    sample_joint,
    tomography_fit,
)

__version__ = "0.1.0"
