"""Simulation configuration: arm geometry, camera, capture volume, controller gains.

Everything that a scene or controller treats as a constant lives here, so a
single JSON file fully determines a simulation run.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass, field


@dataclass
class ArmConfig:
    """Kinematic chain of the 6-DoF arm.

    Joint roles: J1 base yaw, J2 shoulder pitch (long arm), J3 elbow pitch
    (short arm), J4 frozen roll, J5 wrist pitch, J6 frozen roll.  Pitch
    angles are measured from vertical; the gripper is mounted perpendicular
    to the forearm (``mount_pitch``).
    """

    base_height: float = 0.20
    long_arm: float = 0.40
    short_arm: float = 0.30
    palm_offset: float = 0.10
    camera_back_offset: float = 0.05
    mount_pitch: float = math.pi / 2
    home_wrist_pitch: float = 1.05
    joint_limits: list = field(default_factory=lambda: [
        [-math.pi, math.pi],
        [0.0, 2.0],
        [-2.0, 2.0],
        [0.0, 0.0],
        [-math.pi / 2, math.pi / 2],
        [0.0, 0.0],
    ])

    def home_pose(self) -> list:
        return [0.0, 0.0, 0.0, 0.0, self.home_wrist_pitch, 0.0]


@dataclass
class CameraConfig:
    width: int = 128
    height: int = 128
    fov_deg: float = 60.0

    @property
    def focal_px(self) -> float:
        return (self.width / 2.0) / math.tan(math.radians(self.fov_deg) / 2.0)


@dataclass
class CaptureConfig:
    """Geometric gripper capture volume checked at closure."""

    aperture: float = 0.10
    finger_span: float = 0.08
    # Lateral slack removed per shape; spheres are the least forgiving.
    shape_margin: dict = field(default_factory=lambda: {
        "cube": 0.0,
        "cylinder": 0.015,
        "sphere": 0.025,
    })


@dataclass
class SceneConfig:
    set_radius: float = 0.5
    # Nine bearings, 40 deg apart.  Colors cycle so same-colored objects are
    # never co-visible in the 60 deg field of view.
    set_bearings_deg: list = field(default_factory=lambda: [
        -160.0, -120.0, -80.0, -40.0, 0.0, 40.0, 80.0, 120.0, 160.0,
    ])
    set_shapes: list = field(default_factory=lambda: [
        "cube", "cylinder", "sphere",
        "cylinder", "sphere", "cube",
        "sphere", "cube", "cylinder",
    ])
    set_colors: list = field(default_factory=lambda: [
        "red", "yellow", "blue",
        "red", "yellow", "blue",
        "red", "yellow", "blue",
    ])
    random_radius: list = field(default_factory=lambda: [0.2, 0.7])
    random_sector: list = field(default_factory=lambda: [-2.8, 2.8])
    object_size: float = 0.05
    cylinder_height: float = 0.06
    drift_enabled: bool = False
    drift_speed: float = 0.01
    drift_bin_half_width: float = 0.05


@dataclass
class FsmConfig:
    cert_gain: float = 1.0          # rad/s per unit certainty
    v_max: float = 0.5              # clamp on every joint velocity, rad/s
    cert_min: float = 0.05          # intent below this treated as none
    center_threshold_px: float = 5.0
    center_full_threshold_px: float = 2.5
    center_gain: float = 0.02       # rad/s per pixel of error
    d_final: float = 0.15
    d_grasp: float = 0.05
    t_dwell: float = 2.0
    eps_home: float = 0.01
    j2_comfort: float = 1.8
    slow_approach: float = 0.05     # default J2 rate, rad/s
    j3_rate: float = 0.15           # autonomous final-approach rate, rad/s
    no_ooi_timeout: float = 1.0
    home_gain: float = 2.0          # proportional return-to-start gain


@dataclass
class SignalConfig:
    channels: int = 32
    sample_rate: float = 250.0
    window_samples: int = 250
    shrinkage: float = 0.1
    class_gain: float = 0.6         # covariance bump added at full separability
    intent_hold: float = 0.2        # seconds between fresh intent draws


@dataclass
class TrainerConfig:
    joint_speed: float = 0.2
    move_duration: float = 2.0
    rest_duration: float = 2.0
    floor_height: float = 0.1


@dataclass
class SimConfig:
    dt: float = 0.05
    trial_timeout: float = 600.0
    arm: ArmConfig = field(default_factory=ArmConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    capture: CaptureConfig = field(default_factory=CaptureConfig)
    scene: SceneConfig = field(default_factory=SceneConfig)
    fsm: FsmConfig = field(default_factory=FsmConfig)
    signal: SignalConfig = field(default_factory=SignalConfig)
    trainer: TrainerConfig = field(default_factory=TrainerConfig)

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2)

    @classmethod
    def from_json(cls, text: str) -> "SimConfig":
        raw = json.loads(text)
        return cls.from_dict(raw)

    @classmethod
    def from_dict(cls, raw: dict) -> "SimConfig":
        kwargs = {}
        for f in dataclasses.fields(cls):
            if f.name not in raw:
                continue
            value = raw[f.name]
            if dataclasses.is_dataclass(f.type) or f.name in _SECTIONS:
                section_cls = _SECTIONS[f.name]
                kwargs[f.name] = section_cls(**value)
            else:
                kwargs[f.name] = value
        return cls(**kwargs)

    @classmethod
    def load(cls, path: str) -> "SimConfig":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_json(fh.read())

    def save(self, path: str) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(self.to_json())


_SECTIONS = {
    "arm": ArmConfig,
    "camera": CameraConfig,
    "capture": CaptureConfig,
    "scene": SceneConfig,
    "fsm": FsmConfig,
    "signal": SignalConfig,
    "trainer": TrainerConfig,
}


DEFAULT_CONFIG = SimConfig()
