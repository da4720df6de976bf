"""Point-supervised semantic segmentation toolkit.

Train dense segmentation models from full masks, image-level labels,
clicked points, or squiggles; weigh supervised pixels; regularize with a
per-pixel objectness prior; model annotation cost; and simulate (or
collect, via the bundled HTTP service and browser UI) human annotations.
"""

from .core import (
    IGNORE,
    ClassCatalog,
    LabelMap,
    ScoreMap,
    SoftmaxMap,
    load_image_png,
    load_mask_png,
    predict,
    save_image_png,
    save_mask_png,
    softmax,
)
from .losses import (
    ImageLevelLabels,
    LossValue,
    PointLabel,
    WeightedPoints,
    combined_loss,
    loss_img,
    loss_obj,
    loss_pix,
    loss_point,
)
from .supervision import (
    SupervisionKind,
    SupervisionRecord,
    WeightScheme,
    WeightSchemeKind,
    assign_weights,
    compose_hybrid,
    derive_image_labels,
    dilate_points,
)
from .objectness import (
    ObjectnessMap,
    ScoredWindow,
    heuristic_scorer,
    oracle_scorer,
    prior_from_windows,
)
from .model import (
    InitMode,
    ModelConfig,
    ModelParams,
    TrainConfig,
    backward,
    forward,
    init_params,
    load_checkpoint,
    save_checkpoint,
    sgd_step,
    train,
)
from .evaluate import IOUReport, miou
from .budget import BudgetModel, annotation_time, fixed_budget_plan, hybrid_time
from .annosim import (
    AnnotationEvent,
    AnnotatorProfile,
    PlantedImage,
    SceneConfig,
    TaskKind,
    generate_scene,
    quality_control,
    sample_random_points,
    simulate_point_annotator,
    simulate_squiggle_annotator,
)

__version__ = "0.1.0"
