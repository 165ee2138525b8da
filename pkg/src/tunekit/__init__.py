"""Hyperparameter campaigns with early stopping, image augmentation,
multi-view evaluation, and ensembling."""

from .asha import AshaConfig, AshaScheduler, BestTrial, Decision, TrialStatus, rung_levels
from .augment import (
    OP_POOL,
    ChannelNormalizer,
    ChannelStats,
    RandAugment,
    RandomResizedCrop,
    apply_op,
    compute_channel_stats,
    normalize,
    op_parameter,
    rand_augment,
    random_resized_crop,
    sample_crop_spec,
)
from .ensemble import (
    CurvePoint,
    ModelPredictions,
    combine,
    ensemble_accuracy,
    ensemble_size_curve,
    load_predictions_jsonl,
    write_curve_csv,
    write_predictions_jsonl,
)
from .errors import (
    EventLogError,
    ImageError,
    OptimError,
    PredictionError,
    ProtocolError,
    SchedulerError,
    SpaceError,
    TrialDiverged,
    TunekitError,
    WorkerError,
)
from .events import CampaignEvent, EventLog, read_events, replay_scheduler
from .executor import (
    ExternalExecutor,
    LogisticExecutor,
    SyntheticExecutor,
    make_executor,
    synthetic_metric,
    synthetic_plateau,
)
from .optim import OptimizerConfig, cosine_lr, sgd_momentum_step
from .orchestrator import (
    CampaignConfig,
    CampaignResult,
    final_train,
    report,
    run_ablation,
    run_campaign,
)
from .space import (
    Choice,
    LogUniform,
    SearchSpace,
    TrialConfig,
    default_search_space,
    sample_config,
    validate_config,
)
from .tta import (
    SCALES,
    TTAPredictor,
    ViewSpec,
    aggregate_predictions,
    materialize_view,
    plan_views,
    softmax,
)

__version__ = "0.1.0"
