"""Band structure, quasimomentum and gap eigenvalue counts for perturbed
periodic one-dimensional Dirac systems."""

from .errors import ConfigError, DiracGapError, PreconditionError
from .params import DEFAULT_PARAMS, NumericParams
from .potentials import (
    CouplingProfile,
    DiracSystem,
    HCheckReport,
    PeriodicPotential,
    PerturbationTemplate,
    eval_potential,
    validate_template,
)
from .integrate import (
    PruferState,
    TransferMatrix,
    coefficient_matrix,
    constant_step,
    propagate_prufer,
    prufer_angles,
    prufer_path,
    solution_samples,
    transfer_matrix,
)
from .floquet import (
    BandInterval,
    BandStructure,
    Edge,
    FloquetData,
    band_edges,
    discriminant,
    discriminant_grid,
    floquet_solution,
    quasimomentum,
    quasimomentum_diff,
    rotation_number,
    rotation_numbers,
)
from .counting import (
    BoundaryCondition,
    LengthSweepRow,
    CountResult,
    SplitCheck,
    TruncationPlan,
    count_length_sweep,
    count_halfline,
    count_interval,
    plan_truncation,
    shoot_angle,
    shoot_angles,
    split_count_check,
)
from .asymptotics import (
    ConvergenceReport,
    ConvergenceRow,
    DensityPrediction,
    SupportBracket,
    convergence_experiment,
    density_integrand,
    predicted_density,
    support_bounds,
)

__version__ = "0.1.0"
