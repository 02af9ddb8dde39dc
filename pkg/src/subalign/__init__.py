"""Unsupervised domain adaptation by PCA subspace alignment."""

__version__ = "0.1.0"

from .alignment import (  # noqa: E402
    AlignmentModel,
    SimilarityMetric,
    align_subspaces,
    fit_alignment,
    load_model,
    project_source,
    project_target,
    samle_distance,
    save_model,
    similarity,
)
from .classifiers import (  # noqa: E402
    LabeledDataset,
    LinearModel,
    mean_average_precision,
    nn_classify,
    svm_classify,
    svm_train,
)
from .dimensionality import (  # noqa: E402
    DimensionSelection,
    StabilityBoundParams,
    compute_dmax,
    fit_alignment_mle,
    mle_intrinsic_dim,
    select_dim_cv,
)
from .divergence import (  # noqa: E402
    DivergenceReport,
    gaussian_kl,
    hdh_divergence,
    kl_reduction_after_alignment,
    tdas,
)
from .errors import (  # noqa: E402
    InvalidInputError,
    NumericError,
    ParseError,
    StratificationError,
    SubalignError,
)
from .linalg import NormalizationStats, Subspace, covariance, pca, zscore  # noqa: E402
from .supervised import (  # noqa: E402
    MetricMatrix,
    TripletSet,
    build_triplets,
    itml_fit,
    itml_pca_subspace,
    lmsa_fit,
)
