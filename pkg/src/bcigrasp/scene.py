"""World model: graspable objects, the 6-DoF arm, time stepping, grasp geometry.

The arm chain: J1 base yaw, J2 shoulder pitch driving the long arm, J3 elbow
pitch driving the short arm, J5 wrist pitch carrying the gripper and the
eye-in-hand camera; J4 and J6 are frozen rolls.  Pitch angles are measured
from vertical, and the gripper is mounted perpendicular to the forearm so a
wrist pitch of zero looks along the forearm normal.

Everything here is value-semantic: ``step`` and ``reset_trial`` return new
``Scene`` objects, and identical seeds with identical command sequences
reproduce trajectories bit for bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SimConfig

SHAPES = ("cube", "cylinder", "sphere")
COLORS = ("red", "yellow", "blue")

SET_LOCATIONS = "set_locations"
RANDOM_LOCATIONS = "random_locations"
PROTOCOLS = (SET_LOCATIONS, RANDOM_LOCATIONS)

GRIPPER_OPEN = "open"
GRIPPER_CLOSED = "closed"


@dataclass(frozen=True)
class GraspObject:
    id: int
    shape: str
    color: str
    position: np.ndarray
    characteristic_size: float
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    bin_center: np.ndarray | None = None
    height: float | None = None  # cylinders are taller than wide

    def __post_init__(self):
        if self.shape not in SHAPES:
            raise ValueError(f"unknown shape {self.shape!r}")
        if self.color not in COLORS:
            raise ValueError(f"unknown color {self.color!r}")
        if self.characteristic_size <= 0:
            raise ValueError("characteristic_size must be positive")

    @property
    def half_height(self) -> float:
        if self.shape == "cylinder" and self.height is not None:
            return self.height / 2.0
        return self.characteristic_size / 2.0


@dataclass(frozen=True)
class RobotState:
    joints: np.ndarray
    joint_limits: np.ndarray
    home_pose: np.ndarray
    gripper: str = GRIPPER_OPEN

    def at_home(self, eps: float) -> bool:
        return bool(np.abs(self.joints - self.home_pose).max() <= eps)


@dataclass(frozen=True)
class Pose:
    """Position plus an orthonormal (right, down, forward) triad."""

    position: np.ndarray
    forward: np.ndarray
    right: np.ndarray
    down: np.ndarray


@dataclass(frozen=True)
class GraspOutcome:
    success: bool
    contacted_object: int | None
    closure_pose: np.ndarray


@dataclass(frozen=True)
class Scene:
    objects: tuple
    robot: RobotState
    sim_time: float
    rng_seed: int
    protocol: str
    reset_count: int = 0
    drift_enabled: bool = False
    training_robot: RobotState | None = None


def make_robot(cfg: SimConfig) -> RobotState:
    arm = cfg.arm
    return RobotState(
        joints=np.array(arm.home_pose(), dtype=float),
        joint_limits=np.asarray(arm.joint_limits, dtype=float),
        home_pose=np.array(arm.home_pose(), dtype=float),
        gripper=GRIPPER_OPEN,
    )


def _object_half_height(shape: str, size: float, cyl_height: float) -> float:
    return (cyl_height if shape == "cylinder" else size) / 2.0


def _place_set_objects(cfg: SimConfig) -> tuple:
    sc = cfg.scene
    objs = []
    for i, (bearing_deg, shape, color) in enumerate(
        zip(sc.set_bearings_deg, sc.set_shapes, sc.set_colors)
    ):
        bearing = math.radians(bearing_deg)
        z = _object_half_height(shape, sc.object_size, sc.cylinder_height)
        pos = np.array([
            sc.set_radius * math.cos(bearing),
            sc.set_radius * math.sin(bearing),
            z,
        ])
        objs.append(GraspObject(
            id=i, shape=shape, color=color, position=pos,
            characteristic_size=sc.object_size,
            height=sc.cylinder_height if shape == "cylinder" else None,
            bin_center=pos.copy(),
        ))
    return tuple(objs)


def _place_random_object(cfg: SimConfig, seed: int, reset_count: int,
                         drift: bool) -> tuple:
    sc = cfg.scene
    rng = np.random.default_rng([abs(int(seed)), int(reset_count), 0x5EED])
    radius = rng.uniform(sc.random_radius[0], sc.random_radius[1])
    bearing = rng.uniform(sc.random_sector[0], sc.random_sector[1])
    shape = SHAPES[rng.integers(0, len(SHAPES))]
    color = COLORS[rng.integers(0, len(COLORS))]
    z = _object_half_height(shape, sc.object_size, sc.cylinder_height)
    pos = np.array([radius * math.cos(bearing), radius * math.sin(bearing), z])
    velocity = np.zeros(3)
    if drift and shape == "sphere":
        heading = rng.uniform(0.0, 2.0 * math.pi)
        velocity = sc.drift_speed * np.array([math.cos(heading), math.sin(heading), 0.0])
    obj = GraspObject(
        id=0, shape=shape, color=color, position=pos,
        characteristic_size=sc.object_size,
        height=sc.cylinder_height if shape == "cylinder" else None,
        velocity=velocity, bin_center=pos.copy(),
    )
    return (obj,)


def build_scene(protocol: str, seed: int, cfg: SimConfig | None = None, *,
                drift: bool | None = None, with_training_robot: bool = False) -> Scene:
    """Construct the initial world for a protocol.

    ``set_locations`` rings nine distinct (shape, color) objects around the
    base; ``random_locations`` places a single uniformly drawn object at a
    uniform radius inside the reachable sector.
    """
    cfg = cfg or SimConfig()
    if protocol not in PROTOCOLS:
        raise ValueError(f"unknown protocol {protocol!r}")
    drift = cfg.scene.drift_enabled if drift is None else drift
    if protocol == SET_LOCATIONS:
        objects = _place_set_objects(cfg)
        if drift:
            objects = _enable_sphere_drift(objects, seed, 0, cfg)
    else:
        objects = _place_random_object(cfg, seed, 0, drift)
    return Scene(
        objects=objects,
        robot=make_robot(cfg),
        sim_time=0.0,
        rng_seed=int(seed),
        protocol=protocol,
        reset_count=0,
        drift_enabled=drift,
        training_robot=make_robot(cfg) if with_training_robot else None,
    )


def _enable_sphere_drift(objects: tuple, seed: int, reset_count: int,
                         cfg: SimConfig) -> tuple:
    rng = np.random.default_rng([abs(int(seed)), int(reset_count), 0xD21F7])
    out = []
    for obj in objects:
        if obj.shape == "sphere":
            heading = rng.uniform(0.0, 2.0 * math.pi)
            vel = cfg.scene.drift_speed * np.array(
                [math.cos(heading), math.sin(heading), 0.0])
            out.append(replace(obj, velocity=vel))
        else:
            out.append(obj)
    return tuple(out)


# ---------------------------------------------------------------------------
# Kinematics


def forward_kinematics(robot: RobotState, cfg: SimConfig) -> tuple[Pose, Pose]:
    """Palm pose and eye-in-hand camera pose for the current joint vector.

    Camera axes follow the image convention: ``right`` along increasing
    image x, ``down`` along increasing image y, ``forward`` the optical axis.
    """
    arm = cfg.arm
    q1, q2, q3, _, q5, _ = robot.joints
    c1, s1 = math.cos(q1), math.sin(q1)
    radial = np.array([c1, s1, 0.0])
    up = np.array([0.0, 0.0, 1.0])

    shoulder = np.array([0.0, 0.0, arm.base_height])
    elbow = shoulder + arm.long_arm * (math.sin(q2) * radial + math.cos(q2) * up)
    a23 = q2 + q3
    wrist = elbow + arm.short_arm * (math.sin(a23) * radial + math.cos(a23) * up)

    beta = a23 + q5 + arm.mount_pitch
    axis = math.sin(beta) * radial + math.cos(beta) * up
    palm_pos = wrist + arm.palm_offset * axis
    cam_pos = palm_pos - arm.camera_back_offset * axis

    right = np.array([s1, -c1, 0.0])
    down = np.cross(axis, right)
    palm = Pose(position=palm_pos, forward=axis, right=right, down=down)
    camera = Pose(position=cam_pos, forward=axis, right=right, down=down)
    return palm, camera


def end_effector_position(robot: RobotState, cfg: SimConfig) -> np.ndarray:
    return forward_kinematics(robot, cfg)[0].position


# ---------------------------------------------------------------------------
# Time stepping


def _step_object(obj: GraspObject, dt: float, half_width: float) -> GraspObject:
    if not obj.velocity.any():
        return obj
    pos = obj.position + obj.velocity * dt
    vel = obj.velocity.copy()
    center = obj.bin_center if obj.bin_center is not None else obj.position
    for axis in (0, 1):
        lo = center[axis] - half_width
        hi = center[axis] + half_width
        if pos[axis] > hi:
            pos[axis] = 2.0 * hi - pos[axis]
            vel[axis] = -vel[axis]
        elif pos[axis] < lo:
            pos[axis] = 2.0 * lo - pos[axis]
            vel[axis] = -vel[axis]
    return replace(obj, position=pos, velocity=vel)


def step(scene: Scene, joint_velocities, dt: float, cfg: SimConfig, *,
         gripper: str | None = None,
         training_velocities=None) -> Scene:
    """Advance one explicit-Euler step; joints clamp to their limits."""
    if dt <= 0:
        raise ValueError("dt must be positive")
    v = np.asarray(joint_velocities, dtype=float)
    robot = scene.robot
    joints = np.clip(robot.joints + v * dt,
                     robot.joint_limits[:, 0], robot.joint_limits[:, 1])
    new_robot = replace(robot, joints=joints,
                        gripper=gripper if gripper is not None else robot.gripper)

    training = scene.training_robot
    if training is not None and training_velocities is not None:
        tv = np.asarray(training_velocities, dtype=float)
        tj = np.clip(training.joints + tv * dt,
                     training.joint_limits[:, 0], training.joint_limits[:, 1])
        training = replace(training, joints=tj)

    objects = scene.objects
    if scene.drift_enabled:
        half = cfg.scene.drift_bin_half_width
        objects = tuple(_step_object(o, dt, half) for o in objects)

    return replace(scene, objects=objects, robot=new_robot,
                   training_robot=training, sim_time=scene.sim_time + dt)


# ---------------------------------------------------------------------------
# Grasping


def capture_offsets(obj_position: np.ndarray, palm: Pose) -> tuple[float, float]:
    """(axial, lateral) offset of a point in the palm frame."""
    o = obj_position - palm.position
    axial = float(o @ palm.forward)
    lateral = float(np.linalg.norm(o - axial * palm.forward))
    return axial, lateral


def object_captured(obj: GraspObject, palm: Pose, cfg: SimConfig) -> bool:
    axial, lateral = capture_offsets(obj.position, palm)
    margin = cfg.capture.shape_margin[obj.shape]
    return (abs(axial) <= cfg.capture.finger_span / 2.0
            and lateral <= cfg.capture.aperture / 2.0 - margin)


def attempt_grasp(scene: Scene, cfg: SimConfig) -> GraspOutcome:
    """Close the gripper: success iff an object sits inside the capture volume."""
    palm, _ = forward_kinematics(scene.robot, cfg)
    best = None
    best_dist = math.inf
    for obj in scene.objects:
        if object_captured(obj, palm, cfg):
            d = float(np.linalg.norm(obj.position - palm.position))
            if d < best_dist:
                best, best_dist = obj, d
    return GraspOutcome(
        success=best is not None,
        contacted_object=best.id if best is not None else None,
        closure_pose=palm.position,
    )


def reset_trial(scene: Scene, cfg: SimConfig) -> Scene:
    """Robot home, gripper open, objects back at protocol placement.

    ``random_locations`` draws a fresh placement; simulated time continues.
    """
    reset_count = scene.reset_count + 1
    if scene.protocol == SET_LOCATIONS:
        objects = _place_set_objects(cfg)
        if scene.drift_enabled:
            objects = _enable_sphere_drift(objects, scene.rng_seed, reset_count, cfg)
    else:
        objects = _place_random_object(cfg, scene.rng_seed, reset_count,
                                       scene.drift_enabled)
    robot = replace(scene.robot, joints=scene.robot.home_pose.copy(),
                    gripper=GRIPPER_OPEN)
    training = scene.training_robot
    if training is not None:
        training = replace(training, joints=training.home_pose.copy())
    return replace(scene, objects=objects, robot=robot, training_robot=training,
                   reset_count=reset_count)
