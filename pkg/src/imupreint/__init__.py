"""IMU preintegration under world-frame and body-frame constant-acceleration models."""
from .dataset_io import (
    associate,
    read_groundtruth,
    read_imu_log,
    read_trajectory,
    select_keyframes,
    write_imu_log,
    write_trajectory,
)
from .evaluation import AlignmentResult, ErrorReport, align_rigid, compute_errors, improvement_percent
from .lifted import build_A, exp_A_closed, exp_A_series, lift, propagate_lifted, unlift
from .preintegration import (
    CLASSICAL,
    GRAVITY,
    PROPOSED,
    PreintDelta,
    Transform,
    apply_delta,
    integrate,
    integrate_keyframes,
    preintegrate,
    step_classical,
    step_proposed,
    transform_between,
)
from .simulator import ScenarioSpec, SegmentSpec, fine_oracle, generate, load_scenario
from .so3 import h_functions, mat_E, mat_Gamma, mat_Lambda, skew
from .state import ImuSample, NavState, Trajectory

__version__ = "0.1.0"
