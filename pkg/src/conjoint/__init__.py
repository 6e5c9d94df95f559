"""Joint Gaussian-copula modeling of meshes, surface features and indicators.

A cohort of corresponded anatomical meshes, per-vertex scalar features and
mixed-type clinical indicators is modeled as one latent multivariate Gaussian:
each component maps through its (empirical or Gaussian) marginal to a standard
normal, ties in non-continuous variables are broken by averaging over random
rankings, and the latent covariance is kept in low-rank factored form. The
fitted model supports conditioning on arbitrary partial observations,
prediction, reproducible sampling, principal-mode traversal, a reconstruction
benchmark and an HTTP explorer service.

>>> from conjoint import SyntheticConfig, generate_matrix, fit_joint_model
>>> from conjoint import observation_from_values
>>> cohort, _ = generate_matrix(SyntheticConfig(instances=40, vertices=16))
>>> model = fit_joint_model(cohort.Y, cohort.specs)
>>> instance = model.predict(observation_from_values(model, {"age": 75.0}))
"""

from .errors import (
    ConjointError,
    CorrespondenceError,
    DegenerateMarginal,
    EXIT_CODES,
    FormatError,
    InvalidConfig,
    InvalidInput,
    InvalidLevel,
    InvalidMode,
    InvalidRank,
    InvalidTask,
    LayoutMismatch,
    MissingRecord,
    SingularConditioning,
    exit_code,
)
from .specs import Block, Kind, MarginalKind, VariableSpec
from .marginals import (
    EmpiricalMarginal,
    GaussianMarginal,
    MarginalModel,
    TransformTables,
    fit_marginal,
)
from .model import (
    ConditionalModel,
    CrossValidationResult,
    FitConfig,
    JointModel,
    LatentGaussian,
    PartialObservation,
    condition,
    cross_validate_sigma,
    fit_joint_model,
    observation_from_values,
    posterior_mean_matrix,
    predict,
    principal_mode_instance,
    sample,
    sample_latent,
    sample_latent_rows,
)
from .meshdata import (
    Cohort,
    InstanceLayout,
    TriangleMesh,
    assign_voxels_to_vertices,
    build_component_specs,
    derive_layout,
    devectorize,
    load_cohort,
    read_mesh,
    topology_checksum,
    vectorize,
    write_mesh,
)
from .serialize import load_model, model_from_bytes, model_to_bytes, save_model
from .synthetic import (
    GroundTruth,
    IndicatorRecipe,
    SyntheticConfig,
    default_indicator_recipes,
    default_indicator_specs,
    generate_cohort,
    generate_matrix,
    indicator_specs_for,
    write_cohort,
)
from .benchmark import (
    ExperimentReport,
    HistogramRow,
    HistogramTable,
    ReportRow,
    run_reconstruction_experiment,
    sample_distribution_report,
)
from .service import build_condition_report, make_server, model_meta

__version__ = "0.1.0"

__all__ = [
    "Block",
    "Cohort",
    "ConditionalModel",
    "ConjointError",
    "CorrespondenceError",
    "CrossValidationResult",
    "DegenerateMarginal",
    "EXIT_CODES",
    "EmpiricalMarginal",
    "ExperimentReport",
    "FitConfig",
    "FormatError",
    "GaussianMarginal",
    "GroundTruth",
    "HistogramRow",
    "HistogramTable",
    "IndicatorRecipe",
    "InstanceLayout",
    "InvalidConfig",
    "InvalidInput",
    "InvalidLevel",
    "InvalidMode",
    "InvalidRank",
    "InvalidTask",
    "JointModel",
    "Kind",
    "LatentGaussian",
    "LayoutMismatch",
    "MarginalKind",
    "MarginalModel",
    "MissingRecord",
    "PartialObservation",
    "ReportRow",
    "SingularConditioning",
    "SyntheticConfig",
    "TransformTables",
    "TriangleMesh",
    "VariableSpec",
    "assign_voxels_to_vertices",
    "build_component_specs",
    "build_condition_report",
    "condition",
    "cross_validate_sigma",
    "default_indicator_recipes",
    "default_indicator_specs",
    "derive_layout",
    "devectorize",
    "exit_code",
    "fit_joint_model",
    "fit_marginal",
    "generate_cohort",
    "generate_matrix",
    "indicator_specs_for",
    "load_cohort",
    "load_model",
    "make_server",
    "model_from_bytes",
    "model_meta",
    "model_to_bytes",
    "observation_from_values",
    "posterior_mean_matrix",
    "predict",
    "principal_mode_instance",
    "read_mesh",
    "run_reconstruction_experiment",
    "sample",
    "sample_distribution_report",
    "sample_latent",
    "sample_latent_rows",
    "save_model",
    "topology_checksum",
    "vectorize",
    "write_cohort",
    "write_mesh",
    "__version__",
]
