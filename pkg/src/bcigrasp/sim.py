"""Single-trial simulation loop: wires the world, vision, intent, and FSM.

The control loop consumes the analytic vision summary every step; the pixel
renderer runs only where pixels are the measurement: the depth snapshot at
the approach handoff (shape classification) and the final frame before
closure (color).  That keeps batch runs fast without touching what the
experiment records.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import fsm as fsm_mod
from .config import SimConfig
from .fsm import GRIP_CLOSE, GRIP_OPEN, FsmState, JointCommand, tick as fsm_tick
from .intent import IntentContext, IntentSample, IntentSource, none_intent
from .scene import (
    GRIPPER_CLOSED,
    GRIPPER_OPEN,
    GraspOutcome,
    Scene,
    attempt_grasp,
    build_scene,
    forward_kinematics,
    reset_trial,
    step,
)
from .vision import (
    VisionView,
    classify_shape,
    dominant_color,
    observe,
    overlay_ar,
    rank_objects,
    render,
    segment_colors,
)


@dataclass
class TickInfo:
    t: float
    fsm: FsmState
    command: JointCommand
    intent: IntentSample
    view: VisionView


@dataclass
class Measurement:
    """What the vision system believes it grasped, plus audit ground truth."""

    shape: str | None = None
    color: str | None = None
    outcome: GraspOutcome | None = None
    attempt_time: float | None = None
    true_object_id: int | None = None

    @property
    def selected(self) -> tuple | None:
        if self.shape is None or self.color is None:
            return None
        return (self.shape, self.color)


class GraspSimulator:
    """Steps one scene under one intent source until told to stop."""

    def __init__(self, cfg: SimConfig, protocol: str, seed: int,
                 source: IntentSource, *, drift: bool | None = None,
                 desired_id: int | None = None,
                 with_training_robot: bool = False):
        self.cfg = cfg
        self.source = source
        self.scene = build_scene(protocol, seed, cfg, drift=drift,
                                 with_training_robot=with_training_robot)
        self.fsm = FsmState(state_entry_time=0.0)
        self.desired_id = desired_id
        self.measurement = Measurement()
        self.last_intent: IntentSample = none_intent(0.0)
        self.trial_start = 0.0
        self._grasp_executed = False

    # -- helpers -----------------------------------------------------------

    @property
    def t(self) -> float:
        return self.scene.sim_time

    def desired_object(self):
        if self.desired_id is None:
            return None
        for obj in self.scene.objects:
            if obj.id == self.desired_id:
                return obj
        return None

    def _target_bearing(self) -> float | None:
        target = self.desired_object()
        if target is None:
            return None
        return math.atan2(target.position[1], target.position[0])

    def current_view(self) -> VisionView:
        """Analytic vision summary for the current scene and intent."""
        _, camera = forward_kinematics(self.scene.robot, self.cfg)
        rank_class = (self.last_intent.cls
                      if self.fsm.current in (1, 2, 3) else None)
        return observe(self.scene, camera, self.cfg, rank_class,
                       shape_override=self.measurement.shape
                       if self.fsm.current >= fsm_mod.FINAL_APPROACH else None)

    def render_frame(self, with_overlay: bool = True):
        """Real rendered frame (slow path), for telemetry and measurement."""
        _, camera = forward_kinematics(self.scene.robot, self.cfg)
        image = render(self.scene, camera, self.cfg)
        if not with_overlay:
            return image, None
        blobs = segment_colors(image.rgb)
        rank_class = (self.last_intent.cls
                      if self.fsm.current in (1, 2, 3) else None)
        ooi = rank_objects(blobs, rank_class, cfg=self.cfg)
        rgb = overlay_ar(image.rgb, ooi) if ooi is not None else image.rgb
        return image, rgb

    def _snapshot_shape(self, view: VisionView) -> None:
        """Depth snapshot at the approach handoff decides the shape."""
        image, _ = self.render_frame(with_overlay=False)
        depth = image.depth
        if view.has_ooi:
            min_x, min_y, max_x, max_y = view.ooi.blob.bbox
            mask = np.full(depth.shape, np.inf)
            y0, y1 = max(min_y - 2, 0), min(max_y + 3, depth.shape[0])
            x0, x1 = max(min_x - 2, 0), min(max_x + 3, depth.shape[1])
            mask[y0:y1, x0:x1] = depth[y0:y1, x0:x1]
            depth = mask
        self.measurement.shape = classify_shape(depth, self.cfg)

    def _snapshot_color(self) -> None:
        image, _ = self.render_frame(with_overlay=False)
        self.measurement.color = dominant_color(image.rgb)

    # -- main loop ----------------------------------------------------------

    def tick(self) -> TickInfo:
        cfg = self.cfg
        view = self.current_view()
        ctx = IntentContext(
            t=self.t,
            fsm_state=self.fsm.current,
            has_ooi=view.has_ooi,
            ooi_center_error=view.center_error(),
            ooi_distance=view.ooi.estimated_distance if view.has_ooi else None,
            yaw=float(self.scene.robot.joints[0]),
            target_bearing=self._target_bearing(),
            target_is_ooi=(self.desired_id is not None
                           and view.ooi_object_id == self.desired_id),
        )
        intent = self.source.next_intent(ctx)
        self.last_intent = intent

        prev_state = self.fsm.current
        self.fsm, command = fsm_tick(self.fsm, intent, view,
                                     self.scene.robot, self.t, cfg)

        if (prev_state == fsm_mod.INITIAL_APPROACH
                and self.fsm.current == fsm_mod.FINAL_APPROACH):
            self._snapshot_shape(view)
        if (prev_state == fsm_mod.FINAL_APPROACH
                and self.fsm.current == fsm_mod.GRASP_OBJECT):
            self._snapshot_color()

        gripper = None
        if command.gripper_command == GRIP_CLOSE:
            gripper = GRIPPER_CLOSED
        elif command.gripper_command == GRIP_OPEN:
            gripper = GRIPPER_OPEN
        if (prev_state == fsm_mod.GRASP_OBJECT
                and self.fsm.current == fsm_mod.RETURN_TO_START
                and not self._grasp_executed):
            # the grasp settles over the closure dwell; whatever is still in
            # the capture volume when the arm starts back is what was caught
            outcome = attempt_grasp(self.scene, cfg)
            self.measurement.outcome = outcome
            self.measurement.attempt_time = self.t
            self.measurement.true_object_id = outcome.contacted_object
            self._grasp_executed = True

        self.scene = step(self.scene, command.velocities, cfg.dt, cfg,
                          gripper=gripper)
        return TickInfo(t=self.t, fsm=self.fsm, command=command,
                        intent=intent, view=view)

    def grasp_attempted(self) -> bool:
        return self.measurement.outcome is not None

    def start_new_trial(self, desired_id: int | None = None) -> None:
        """Reset the world and measurement state; simulated time continues."""
        self.scene = reset_trial(self.scene, self.cfg)
        self.fsm = FsmState(state_entry_time=self.t)
        self.measurement = Measurement()
        self.last_intent = none_intent(self.t)
        self.trial_start = self.t
        self._grasp_executed = False
        if desired_id is not None:
            self.desired_id = desired_id


def run_until_grasp(sim: GraspSimulator, timeout: float) -> bool:
    """Advance until a grasp is attempted; False on trial timeout."""
    deadline = sim.trial_start + timeout
    while sim.t < deadline:
        sim.tick()
        if sim.grasp_attempted():
            return True
    return False
