"""Six-state grasp controller: per-state joint authority and transitions.

States: 1 ObjectSearch, 2 CenterObject, 3 InitialApproach, 4 FinalApproach,
5 GraspObject, 6 ReturnToStart.  User intent drives states 1-3; computer
vision drives centering and the approach handoffs; states 4-6 ignore intent
entirely.  Every transition other than those entering or leaving
CenterObject locks the arm for one step (an all-zero command).

``tick`` is a pure transition function: all controller memory lives in the
``FsmState`` value it returns.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .config import SimConfig
from .intent import BOTH_FEET, BOTH_HANDS, LEFT, RIGHT, IntentSample
from .scene import RobotState, forward_kinematics
from .vision import VisionView

OBJECT_SEARCH = 1
CENTER_OBJECT = 2
INITIAL_APPROACH = 3
FINAL_APPROACH = 4
GRASP_OBJECT = 5
RETURN_TO_START = 6

STATE_NAMES = {
    OBJECT_SEARCH: "object_search",
    CENTER_OBJECT: "center_object",
    INITIAL_APPROACH: "initial_approach",
    FINAL_APPROACH: "final_approach",
    GRASP_OBJECT: "grasp_object",
    RETURN_TO_START: "return_to_start",
}

BCI, CV, DEFAULT = "bci", "cv", "default"

GRIP_HOLD, GRIP_CLOSE, GRIP_OPEN = "hold", "close", "open"

# FinalApproach gives up waiting for the distance estimate to cross the
# grasp threshold once it has clearly passed the closest point of approach.
NEAR_WINDOW = 0.12
RISING_TICKS = 3

# Centering that stops improving (a target pinned against the yaw limit,
# or an unreachable view) falls back to ObjectSearch instead of spinning.
CENTER_STALL_SECONDS = 1.0
CENTER_PROGRESS_PX = 1.0


def legal_edges() -> frozenset:
    """Exact transition relation, for trace audits."""
    edges = {
        (OBJECT_SEARCH, BCI, CENTER_OBJECT),
        (CENTER_OBJECT, CV, OBJECT_SEARCH),
        (CENTER_OBJECT, CV, INITIAL_APPROACH),
        (INITIAL_APPROACH, CV, CENTER_OBJECT),
        (INITIAL_APPROACH, CV, FINAL_APPROACH),
        (FINAL_APPROACH, CV, GRASP_OBJECT),
        (GRASP_OBJECT, DEFAULT, RETURN_TO_START),
        (RETURN_TO_START, DEFAULT, OBJECT_SEARCH),
    }
    for state in STATE_NAMES:
        for trigger in (BCI, CV, DEFAULT):
            edges.add((state, trigger, state))
    return frozenset(edges)


@dataclass(frozen=True)
class FsmState:
    current: int = OBJECT_SEARCH
    return_state: int | None = None      # present only while centering
    lock_pending: bool = False
    state_entry_time: float = 0.0
    ooi_id: int | None = None
    full_center: bool = False            # entry centering converges tighter
    no_ooi_since: float | None = None
    last_distance: float | None = None
    rising_ticks: int = 0
    best_center_err: float | None = None
    best_center_time: float = 0.0


@dataclass(frozen=True)
class JointCommand:
    velocities: np.ndarray = field(default_factory=lambda: np.zeros(6))
    gripper_command: str = GRIP_HOLD


def _zero_command(gripper: str = GRIP_HOLD) -> JointCommand:
    return JointCommand(velocities=np.zeros(6), gripper_command=gripper)


def _confident(intent: IntentSample, cfg: SimConfig) -> int | None:
    """Class of the intent if it clears the certainty threshold."""
    if intent.cls is None or intent.certainty < cfg.fsm.cert_min:
        return None
    return intent.cls


def _scaled(intent: IntentSample, cfg: SimConfig) -> float:
    return min(cfg.fsm.cert_gain * intent.certainty, cfg.fsm.v_max)


def _transition(fsm: FsmState, to: int, t: float, *, return_state=None,
                full_center=False, ooi_id=None, lock=True) -> FsmState:
    return FsmState(
        current=to,
        return_state=return_state,
        lock_pending=lock,
        state_entry_time=t,
        ooi_id=ooi_id if ooi_id is not None else fsm.ooi_id,
        full_center=full_center,
    )


def _centering_velocities(view: VisionView, cfg: SimConfig) -> np.ndarray:
    v = np.zeros(6)
    err = view.center_error()
    if err is None:
        return v
    gain, vmax = cfg.fsm.center_gain, cfg.fsm.v_max
    v[0] = float(np.clip(-gain * err[0], -vmax, vmax))
    v[4] = float(np.clip(gain * err[1], -vmax, vmax))
    return v


def _estimated_reach(view: VisionView, robot: RobotState,
                     cfg: SimConfig) -> float | None:
    """Distance from the elbow to the vision-estimated object position.

    With the target centered, the object sits on the optical axis at the
    estimated distance; the grasp is kinematically possible only while
    that point stays within the short arm plus the palm offset.
    """
    est = view.ooi.estimated_distance if view.has_ooi else None
    if est is None:
        return None
    _, cam = forward_kinematics(robot, cfg)
    target = cam.position + est * cam.forward
    arm = cfg.arm
    q1, q2 = robot.joints[0], robot.joints[1]
    radial = np.array([math.cos(q1), math.sin(q1), 0.0])
    elbow = (np.array([0.0, 0.0, arm.base_height])
             + arm.long_arm * (math.sin(q2) * radial
                               + math.cos(q2) * np.array([0.0, 0.0, 1.0])))
    return float(np.linalg.norm(target - elbow))


def tick(fsm: FsmState, intent: IntentSample, view: VisionView,
         robot: RobotState, t: float, cfg: SimConfig) -> tuple[FsmState, JointCommand]:
    """Advance the controller one step; returns the new state and command.

    The command returned at a transition step is all-zero (the lock), and
    states 4-6 never read the intent argument.
    """
    handler = _HANDLERS[fsm.current]
    return handler(fsm, intent, view, robot, t, cfg)


def _tick_object_search(fsm, intent, view, robot, t, cfg):
    fsm = replace(fsm, lock_pending=False)
    cls = _confident(intent, cfg)
    if cls == BOTH_HANDS and view.has_ooi:
        nxt = _transition(fsm, CENTER_OBJECT, t, return_state=INITIAL_APPROACH,
                          full_center=True, ooi_id=view.ooi_object_id, lock=False)
        return nxt, _zero_command()
    v = np.zeros(6)
    if cls == LEFT:
        v[0] = _scaled(intent, cfg)
    elif cls == RIGHT:
        v[0] = -_scaled(intent, cfg)
    return fsm, JointCommand(velocities=v)


def _tick_center_object(fsm, intent, view, robot, t, cfg):
    del intent  # centering is vision-driven; ranking shifts happen upstream
    return_state = fsm.return_state or OBJECT_SEARCH
    if not view.has_ooi:
        nxt = _transition(fsm, return_state, t, lock=False)
        return nxt, _zero_command()
    err = view.center_error()
    threshold = (cfg.fsm.center_full_threshold_px if fsm.full_center
                 else cfg.fsm.center_threshold_px)
    if abs(err[0]) <= threshold and abs(err[1]) <= threshold:
        nxt = _transition(fsm, return_state, t, ooi_id=view.ooi_object_id,
                          lock=False)
        return nxt, _zero_command()
    err_norm = max(abs(err[0]), abs(err[1]))
    best, best_t = fsm.best_center_err, fsm.best_center_time
    if best is None or err_norm < best - CENTER_PROGRESS_PX:
        best, best_t = err_norm, t
    elif t - max(fsm.state_entry_time, best_t) > CENTER_STALL_SECONDS:
        nxt = _transition(fsm, OBJECT_SEARCH, t, lock=False)
        return nxt, _zero_command()
    fsm = replace(fsm, ooi_id=view.ooi_object_id, lock_pending=False,
                  best_center_err=best, best_center_time=best_t)
    return fsm, JointCommand(velocities=_centering_velocities(view, cfg))


def _tick_initial_approach(fsm, intent, view, robot, t, cfg):
    fsm = replace(fsm, lock_pending=False)
    if not view.has_ooi:
        since = fsm.no_ooi_since if fsm.no_ooi_since is not None else t
        if t - since > cfg.fsm.no_ooi_timeout:
            # recovery: fall back to search via an empty centering pass
            nxt = _transition(fsm, CENTER_OBJECT, t, return_state=OBJECT_SEARCH,
                              lock=False)
            return nxt, _zero_command()
        return replace(fsm, no_ooi_since=since), _zero_command()
    fsm = replace(fsm, no_ooi_since=None, ooi_id=view.ooi_object_id)

    est = view.ooi.estimated_distance
    reach = _estimated_reach(view, robot, cfg)
    max_reach = cfg.arm.short_arm + cfg.arm.palm_offset
    if ((est is not None and est < cfg.fsm.d_final)
            or robot.joints[1] >= cfg.fsm.j2_comfort
            or (reach is not None and reach <= max_reach)):
        nxt = _transition(fsm, FINAL_APPROACH, t, lock=True)
        return nxt, _zero_command()

    err = view.center_error()
    threshold = cfg.fsm.center_threshold_px
    if abs(err[0]) > threshold or abs(err[1]) > threshold:
        nxt = _transition(fsm, CENTER_OBJECT, t, return_state=INITIAL_APPROACH,
                          full_center=False, lock=False)
        return nxt, _zero_command()

    cls = _confident(intent, cfg)
    v = np.zeros(6)
    if cls == LEFT:
        v[0] = _scaled(intent, cfg)       # turning halts the approach
    elif cls == RIGHT:
        v[0] = -_scaled(intent, cfg)
    elif cls == BOTH_HANDS:
        v[1] = _scaled(intent, cfg)
    elif cls == BOTH_FEET:
        v[1] = -_scaled(intent, cfg)
    else:
        v[1] = cfg.fsm.slow_approach
    return fsm, JointCommand(velocities=v)


def _tick_final_approach(fsm, intent, view, robot, t, cfg):
    del intent  # fully autonomous from here on
    fsm = replace(fsm, lock_pending=False)
    est = view.ooi.estimated_distance if view.has_ooi else None

    rising = fsm.rising_ticks
    if est is not None and fsm.last_distance is not None:
        if est > fsm.last_distance + 1e-9 and est < NEAR_WINDOW:
            rising += 1
        else:
            rising = 0
    j3_at_limit = robot.joints[2] >= robot.joint_limits[2, 1] - 1e-9
    if ((est is not None and est < cfg.fsm.d_grasp)
            or rising >= RISING_TICKS
            or j3_at_limit):
        nxt = _transition(fsm, GRASP_OBJECT, t, lock=True)
        return nxt, _zero_command()

    fsm = replace(fsm, last_distance=est if est is not None else fsm.last_distance,
                  rising_ticks=rising)
    v = np.zeros(6)
    if view.has_ooi:
        v = _centering_velocities(view, cfg)
    v[1] = 0.0                      # long arm stays stationary
    v[2] = cfg.fsm.j3_rate          # short arm closes in
    return fsm, JointCommand(velocities=v)


def _tick_grasp_object(fsm, intent, view, robot, t, cfg):
    del intent, view
    fsm = replace(fsm, lock_pending=False)
    if t - fsm.state_entry_time >= cfg.fsm.t_dwell:
        nxt = _transition(fsm, RETURN_TO_START, t, lock=True)
        return nxt, _zero_command()
    return fsm, _zero_command(gripper=GRIP_CLOSE)


def _tick_return_to_start(fsm, intent, view, robot, t, cfg):
    del intent, view
    fsm = replace(fsm, lock_pending=False)
    error = robot.home_pose - robot.joints
    if np.abs(error).max() <= cfg.fsm.eps_home:
        nxt = _transition(fsm, OBJECT_SEARCH, t, ooi_id=None, lock=True)
        return replace(nxt, ooi_id=None), _zero_command()
    v = np.clip(cfg.fsm.home_gain * error, -cfg.fsm.v_max, cfg.fsm.v_max)
    return fsm, JointCommand(velocities=v, gripper_command=GRIP_OPEN)


_HANDLERS = {
    OBJECT_SEARCH: _tick_object_search,
    CENTER_OBJECT: _tick_center_object,
    INITIAL_APPROACH: _tick_initial_approach,
    FINAL_APPROACH: _tick_final_approach,
    GRASP_OBJECT: _tick_grasp_object,
    RETURN_TO_START: _tick_return_to_start,
}
