"""Toolkit for video reasoning segmentation pipelines: verifiable rewards for
structured keyframe/grounding outputs, GRPO advantage math, an agentic
keyframe-selection simulator, J/F segmentation metrics, and training-record
construction.
"""

__version__ = "0.1.0"

from .geometry import (
    COORD_SCALE,
    BBox,
    BinaryMask,
    MaskSequence,
    PointCue,
    RleMask,
    box_iou,
    box_l1,
    mask_area,
    mask_union,
    max_inscribed_center,
    point_in_box,
    point_l1,
    rle_decode,
    rle_encode,
)
from .responses import (
    AksOption,
    CueList,
    FormatScore,
    GroundingCue,
    ParsedResponse,
    Task,
    format_reward,
    parse,
    serialize_response,
)
from .rewards import (
    Matching,
    RewardBreakdown,
    RewardConfig,
    ScoreMatrix,
    aks_accuracy,
    hungarian_max,
    ktg_accuracy,
    score_batch,
    score_matrix,
    score_response,
    total_reward,
)
from .grpo import (
    GrpoConfig,
    RolloutGroup,
    advantages,
    clipped_term,
    group_objective,
    kl_lowvar,
)
from .aks import (
    AksConfig,
    AksEpisode,
    AksBatchStats,
    EvaluatorPolicy,
    GreedyAreaSelector,
    NoisyEvaluator,
    OracleEvaluator,
    ProtocolViolation,
    ReevalMode,
    ScriptedSelector,
    SelectorPolicy,
    Termination,
    VideoMeta,
    area_ratio,
    batch_stats,
    oracle_evaluator,
    run_episode,
)
from .metrics import (
    MetricReport,
    default_tolerance,
    evaluate_dataset,
    evaluate_sequence,
    f_frame,
    j_frame,
)
from .dataset import (
    AnnotatedVideo,
    DatasetRecord,
    MixSpec,
    annotate_cues,
    build_mix,
    pick_keyframe,
    pick_negative_frame,
)
