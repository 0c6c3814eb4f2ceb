"""Basin-of-attraction reconstruction for the bistable Lorenz flow.

Pipeline: sample initial conditions, integrate each to its terminal fixed
point, train a feedforward classifier on the labels, then reuse the
classifier to reconstruct basins on grids, extract the basin boundary from
near-0.5 probabilities, and relate classification accuracy to basin
entropy across the bistability range.
"""

from .dynsys import (
    BISTABLE_R_MAX,
    BISTABLE_R_MIN,
    IntegratorConfig,
    LorenzParams,
    StepSizeUnderflow,
    fixed_points,
    integrate_many,
    integrate_to_rest,
    lorenz_rhs,
    symmetry_image,
    tsit5_step,
)
from .labeling import (
    AttractorLabel,
    DatasetResult,
    LabeledDataset,
    LabeledSample,
    SamplingDomain,
    classify_final_state,
    generate_dataset,
    label_initial_condition,
    load_dataset,
    save_dataset,
    train_test_split,
)
from .mlp import (
    NetworkArch,
    NetworkParams,
    TrainConfig,
    TrainReport,
    TrainingDivergence,
    accuracy,
    bce_loss,
    forward,
    forward_batch,
    gradient,
    init_params,
    load_model,
    predict_class,
    predict_class_batch,
    save_model,
    train,
)
from .entropy import BoxResult, EntropyConfig, EntropyResult, basin_entropy, box_entropy
from .boundary import (
    GridSpec2D,
    ProbField,
    SphereField,
    SphereSpec,
    evaluate_slice,
    evaluate_sphere,
    extract_boundary,
    grid_accuracy,
    ground_truth_slice,
    midway_center,
)
from .analysis import (
    DEFAULT_SWEEP_R,
    FitResult,
    SweepConfig,
    SweepRow,
    derive_seeds,
    fit_exponential,
    fit_linear,
    sweep,
    t_cdf,
    two_region_fits,
)

__version__ = "0.1.0"
