"""Local explanations for black-box node classifiers on graphs.

The main explainer fits a nonnegative kernel-dependence lasso over the
explained node's N-hop neighborhood and returns the most informative
features. Baseline explainers, a trainable reference GNN, simulated-user
evaluation protocols, and coverage-based instance selection round out the
toolkit; a CLI ties it all together.
"""

__version__ = "0.1.0"

from .exceptions import (
    DegenerateProblemError,
    GateUnmetError,
    GraphFormatError,
    GraphLimeError,
    InsufficientNeighborsError,
    ModelFormatError,
    TrainingError,
)
from .graph import (
    Graph,
    LocalSample,
    NoiseInjection,
    assemble_local_sample,
    inject_noise_features,
    load_graph,
    n_hop_neighborhood,
    save_graph,
)
from .kernels import (
    Gram,
    KernelConfig,
    center_and_normalize,
    gaussian_gram_feature,
    gaussian_gram_output,
    mask_with_adjacency,
    median_width,
    nhsic,
)
from .hsic import (
    Coefficients,
    HsicLassoSelector,
    HsicProblem,
    SolverConfig,
    build_problem,
    objective,
    objective_via_nhsic,
    problem_from_matrices,
    solve_nonnegative_lars,
    solve_projected_gradient,
    top_k,
)
from .gnn import Predictor, ReferenceGnn, load_model, save_model
from .explainers import (
    VALID_METHODS,
    Explanation,
    GraphLimeExplainer,
    GreedyExplainer,
    LinearLimeExplainer,
    RandomExplainer,
    make_explainer,
)
from .evaluation import (
    ExplanationMatrix,
    ModelSelectionReport,
    NoiseReport,
    TrustReport,
    coverage_score,
    explanation_matrix,
    global_importance,
    run_model_selection,
    run_noise_experiment,
    run_trust_experiment,
    submodular_pick,
)
from .synthetic import generate_synthetic

__all__ = [
    "__version__",
    "Coefficients",
    "DegenerateProblemError",
    "Explanation",
    "ExplanationMatrix",
    "GateUnmetError",
    "Gram",
    "Graph",
    "GraphFormatError",
    "GraphLimeError",
    "GraphLimeExplainer",
    "GreedyExplainer",
    "HsicLassoSelector",
    "HsicProblem",
    "InsufficientNeighborsError",
    "KernelConfig",
    "LinearLimeExplainer",
    "LocalSample",
    "ModelFormatError",
    "ModelSelectionReport",
    "NoiseInjection",
    "NoiseReport",
    "Predictor",
    "RandomExplainer",
    "ReferenceGnn",
    "SolverConfig",
    "TrainingError",
    "TrustReport",
    "VALID_METHODS",
    "assemble_local_sample",
    "build_problem",
    "center_and_normalize",
    "coverage_score",
    "explanation_matrix",
    "gaussian_gram_feature",
    "gaussian_gram_output",
    "generate_synthetic",
    "global_importance",
    "inject_noise_features",
    "load_graph",
    "load_model",
    "make_explainer",
    "mask_with_adjacency",
    "median_width",
    "n_hop_neighborhood",
    "nhsic",
    "objective",
    "objective_via_nhsic",
    "problem_from_matrices",
    "run_model_selection",
    "run_noise_experiment",
    "run_trust_experiment",
    "save_graph",
    "save_model",
    "solve_nonnegative_lars",
    "solve_projected_gradient",
    "submodular_pick",
    "top_k",
]
