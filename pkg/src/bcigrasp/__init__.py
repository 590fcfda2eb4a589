"""Deterministic headless simulator for motor-imagery-steered grasping.

A 6-DoF arm is steered by a four-class intent stream through a six-state
controller, with an eye-in-hand vision pipeline, a Riemannian
minimum-distance-to-mean intent classifier, a prompted training protocol,
a batch experiment harness, and a live telemetry service.
"""

from .config import SimConfig
from .fsm import FsmState, JointCommand, legal_edges, tick
from .harness import TrialRecord, run_experiment, summarize
from .intent import (
    AutoSearchIntent,
    ClassifierIntent,
    ExternalIntent,
    IntentSample,
    OracleIntent,
    PromptFollowIntent,
    RandomIntent,
)
from .mdm import CertaintyScore, MdmClassifier, certainty, covariance, synth_window
from .scene import (
    GraspObject,
    GraspOutcome,
    RobotState,
    Scene,
    attempt_grasp,
    build_scene,
    forward_kinematics,
    reset_trial,
    step,
)
from .sim import GraspSimulator, run_until_grasp
from .spd import karcher_mean, riemann_distance
from .trainer import Prompt, TrainerSimulator, collect_training_set, tracking_error
from .vision import (
    Blob,
    ImagePair,
    ObjectOfInterest,
    classify_shape,
    estimate_distance,
    overlay_ar,
    rank_objects,
    render,
    segment_colors,
)

__version__ = "0.1.0"
