"""lmfx: sparse multiresponse OLS over experiments, queried counterfactually.

Fit once over compressed sufficient statistics, then answer average,
conditional, and dynamic treatment-effect queries — with homoskedastic,
heteroskedasticity-robust, or cluster-robust uncertainty — without refitting
or materializing counterfactual design matrices.
"""

from .compress import CompressedDataset, compress
from .covariance import CovarianceType, cov_beta
from .data import (
    CATEGORICAL,
    KEY,
    NUMERIC,
    Column,
    Dataset,
    from_frame,
    load_csv,
    sort_by,
    write_csv,
)
from .design import (
    ModelMatrix,
    ModelSpec,
    Term,
    build_model_matrix,
    categorical,
    delta_column_means,
    interaction,
    intercept,
    numeric,
    spec_from_dict,
    spec_to_dict,
    time_basis,
)
from .effects import (
    ARM_BOTH,
    ARM_CONTROL_ONLY,
    ARM_NEITHER,
    ARM_TREATED_ONLY,
    EffectEstimate,
    EffectQuery,
    ate,
    cate,
    dte,
    reference_path_effects,
)
from .errors import (
    DataError,
    GroupKeyError,
    LmfxError,
    RankError,
    SpecError,
    StaleMatrixError,
    VerifyError,
)
from .generate import GenerateConfig, generate, generate_to_files
from .pipeline import (
    Analysis,
    analyze_dataset,
    analyze_file,
    derive_schema,
    verify_query,
)
from .solver import FittedModel, fit, group_residual_moments

__version__ = "1.0.0"

__all__ = [
    "ARM_BOTH",
    "ARM_CONTROL_ONLY",
    "ARM_NEITHER",
    "ARM_TREATED_ONLY",
    "Analysis",
    "CATEGORICAL",
    "Column",
    "CompressedDataset",
    "CovarianceType",
    "DataError",
    "Dataset",
    "EffectEstimate",
    "EffectQuery",
    "FittedModel",
    "GenerateConfig",
    "GroupKeyError",
    "KEY",
    "LmfxError",
    "ModelMatrix",
    "ModelSpec",
    "NUMERIC",
    "RankError",
    "SpecError",
    "StaleMatrixError",
    "Term",
    "VerifyError",
    "analyze_dataset",
    "analyze_file",
    "ate",
    "build_model_matrix",
    "cate",
    "categorical",
    "compress",
    "cov_beta",
    "delta_column_means",
    "derive_schema",
    "dte",
    "fit",
    "from_frame",
    "generate",
    "generate_to_files",
    "group_residual_moments",
    "interaction",
    "intercept",
    "load_csv",
    "numeric",
    "reference_path_effects",
    "sort_by",
    "spec_from_dict",
    "spec_to_dict",
    "time_basis",
    "verify_query",
    "write_csv",
]
