"""2D-to-3D pose lifting with confidence/depth input augmentation.

The library covers the full desk-scale experiment loop: domain types and
interchange formats, the keypoint augmentation pipeline, a synthetic scene
generator with exact depth/occlusion labels, a trainable residual-MLP lifter,
pose metrics, ordinal-depth oracle channels, and an ablation harness with a
CLI (``auglift``).
"""

from .skeleton import (  # noqa: F401
    INVALID_DEPTH,
    AugmentedPose,
    CameraIntrinsics,
    ConfidenceVec,
    DepthRaster,
    DetectionFrame,
    Pose2D,
    Pose3D,
    SkeletonTopology,
    default_topology,
    project_point,
    root_center,
)
from .pipeline import (  # noqa: F401
    AugLiftConfig,
    augment_frame,
    compute_bbox_stats,
    compute_mean_box_size,
    normalize_confidence,
    normalize_depths,
    rescale_pose,
    sample_keypoint_depth,
)
from .metrics import MetricReport, auc, evaluate_poses, mpjpe, p_mpjpe, pck  # noqa: F401
from .ordinal import (  # noqa: F401
    AT,
    BEHIND,
    FRONT,
    ODConfig,
    coarse_bins,
    occupied_bin_count,
    od_input_channel,
    relative_depths,
    three_way_labels,
)
from .lifter import (  # noqa: F401
    InputMode,
    LifterConfig,
    LifterParams,
    TrainConfig,
    TrainingDiverged,
    forward,
    init_params,
    load_params,
    loss_and_grad,
    save_params,
    train,
)
from .synth import (  # noqa: F401
    BodyModel,
    LabeledSample,
    SceneConfig,
    compute_visibility,
    default_body,
    generate_dataset,
    render_depth,
    sample_pose3d,
    simulate_detection,
)

__version__ = "0.1.0"
