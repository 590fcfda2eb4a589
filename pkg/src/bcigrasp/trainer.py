"""Training protocol: a prompting robot the user follows with the real one.

A second arm in the scene plays timed movement prompts (uniform class, two
seconds of motion, two seconds of rest); the user-controlled arm runs the
ordinary control stack and tries to follow.  Prompts double as labels: the
synthetic windows recorded during move intervals feed classifier training
directly, and the integrated end-effector separation between the two arms
gives a task-level score of how well the user tracked.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import fsm as fsm_mod
from .config import SimConfig
from .fsm import FsmState, tick as fsm_tick
from .intent import BOTH_FEET, BOTH_HANDS, LEFT, RIGHT, IntentContext, IntentSource
from .mdm import SignalWindow, covariance, rest_window, synth_window
from .scene import build_scene, end_effector_position, forward_kinematics, step
from .vision import observe


@dataclass(frozen=True)
class Prompt:
    cls: int
    move_start: float
    move_duration: float = 2.0
    rest_duration: float = 2.0

    @property
    def move_end(self) -> float:
        return self.move_start + self.move_duration

    @property
    def rest_end(self) -> float:
        return self.move_end + self.rest_duration


def next_prompt(rng: np.random.Generator, t: float,
                cfg: SimConfig | None = None) -> Prompt:
    """Uniformly drawn class starting its move phase at ``t``."""
    tc = cfg.trainer if cfg is not None else None
    return Prompt(
        cls=int(rng.integers(0, 4)),
        move_start=t,
        move_duration=tc.move_duration if tc else 2.0,
        rest_duration=tc.rest_duration if tc else 2.0,
    )


def drive_training_robot(prompt: Prompt, t: float, robot, cfg: SimConfig):
    """Joint velocities for the prompting arm, plus a floor-reset signal.

    Left and right turn the base; both hands and both feet pitch the long
    arm forward and backward.  Rest intervals hold still.  Dipping the
    end-effector below the floor height asks for both robots to reset.
    """
    v = np.zeros(6)
    if prompt.move_start <= t < prompt.move_end:
        omega = cfg.trainer.joint_speed
        if prompt.cls == LEFT:
            v[0] = omega
        elif prompt.cls == RIGHT:
            v[0] = -omega
        elif prompt.cls == BOTH_HANDS:
            v[1] = omega
        elif prompt.cls == BOTH_FEET:
            v[1] = -omega
    reset = bool(end_effector_position(robot, cfg)[2] < cfg.trainer.floor_height)
    return v, reset


def tracking_error(user_trace, trainer_trace, dt: float) -> float:
    """Time-integrated end-effector separation, meter-seconds."""
    if len(user_trace) != len(trainer_trace):
        raise ValueError("traces must share timestamps")
    total = 0.0
    for pu, pt in zip(user_trace, trainer_trace):
        total += float(np.linalg.norm(np.asarray(pu) - np.asarray(pt))) * dt
    return total


@dataclass
class SessionLog:
    prompts: list = field(default_factory=list)
    windows: list = field(default_factory=list)  # (t_center, SignalWindow)
    distance_trace: list = field(default_factory=list)  # (t, meters)
    user_trace: list = field(default_factory=list)
    trainer_trace: list = field(default_factory=list)
    dt: float = 0.05

    def total_tracking_error(self) -> float:
        return tracking_error(self.user_trace, self.trainer_trace, self.dt)


def collect_training_set(session: SessionLog, shrinkage: float = 0.1):
    """Covariance dataset from the labeled move-interval windows."""
    covs, labels = [], []
    for _, window in session.windows:
        if window.label is None:
            continue
        covs.append(covariance(window, shrinkage=shrinkage))
        labels.append(window.label)
    if not covs:
        raise ValueError("session produced no labeled windows")
    return covs, np.asarray(labels, dtype=int)


class TrainerSimulator:
    """Runs a prompted session: trainer arm plays cues, user arm follows."""

    def __init__(self, cfg: SimConfig, seed: int, source: IntentSource, *,
                 separability: float = 1.0, window_hop: float = 0.2):
        self.cfg = cfg
        self.source = source
        self.separability = separability
        self.window_hop = window_hop
        self.scene = build_scene("set_locations", seed, cfg,
                                 with_training_robot=True)
        self.fsm = FsmState()
        self.prompt_rng = np.random.default_rng([abs(int(seed)), 0x9401])
        self.window_rng = np.random.default_rng([abs(int(seed)), 0x3A17])
        self.prompt: Prompt | None = None
        self.log = SessionLog(dt=cfg.dt)
        self._next_window_t = 0.0
        self._last_intent_cls: int | None = None

    def _active_prompt(self, t: float) -> Prompt:
        if self.prompt is None or t >= self.prompt.rest_end:
            start = self.prompt.rest_end if self.prompt is not None else 0.0
            self.prompt = next_prompt(self.prompt_rng, start, self.cfg)
            self.log.prompts.append(self.prompt)
        return self.prompt

    def _prompt_class_at(self, t: float) -> int | None:
        for prompt in reversed(self.log.prompts):
            if prompt.move_start <= t < prompt.move_end:
                return prompt.cls
            if prompt.rest_end <= t:
                break
        return None

    def _emit_window(self, t: float) -> None:
        window_len = (self.cfg.signal.window_samples
                      / self.cfg.signal.sample_rate)
        t_center = t - window_len / 2.0
        label = self._prompt_class_at(t_center)
        sig = self.cfg.signal
        if label is None:
            window = rest_window(self.window_rng, channels=sig.channels,
                                 samples=sig.window_samples)
        else:
            window = synth_window(label, self.separability, self.window_rng,
                                  channels=sig.channels,
                                  samples=sig.window_samples,
                                  gain=sig.class_gain)
        self.log.windows.append((t_center, window))

    def _reset_robots(self) -> None:
        robot = self.scene.robot
        training = self.scene.training_robot
        self.scene = replace(
            self.scene,
            robot=replace(robot, joints=robot.home_pose.copy()),
            training_robot=replace(training, joints=training.home_pose.copy()),
        )
        self.fsm = FsmState(state_entry_time=self.scene.sim_time)

    def tick(self) -> None:
        cfg = self.cfg
        t = self.scene.sim_time
        prompt = self._active_prompt(t)

        trainer_v, floor_reset = drive_training_robot(
            prompt, t, self.scene.training_robot, cfg)

        _, camera = forward_kinematics(self.scene.robot, cfg)
        rank_class = (self._last_intent_cls
                      if self.fsm.current in (1, 2, 3) else None)
        view = observe(self.scene, camera, cfg, rank_class)
        ctx = IntentContext(
            t=t,
            fsm_state=self.fsm.current,
            has_ooi=view.has_ooi,
            ooi_center_error=view.center_error(),
            ooi_distance=view.ooi.estimated_distance if view.has_ooi else None,
            yaw=float(self.scene.robot.joints[0]),
            prompt_class=self._prompt_class_at(t),
        )
        intent = self.source.next_intent(ctx)
        self._last_intent_cls = intent.cls
        self.fsm, command = fsm_tick(self.fsm, intent, view,
                                     self.scene.robot, t, cfg)

        self.scene = step(self.scene, command.velocities, cfg.dt, cfg,
                          training_velocities=trainer_v)

        user_ee = end_effector_position(self.scene.robot, cfg)
        trainer_ee = end_effector_position(self.scene.training_robot, cfg)
        self.log.user_trace.append(user_ee)
        self.log.trainer_trace.append(trainer_ee)
        self.log.distance_trace.append(
            (self.scene.sim_time, float(np.linalg.norm(user_ee - trainer_ee))))

        if self.scene.sim_time >= self._next_window_t:
            self._emit_window(self.scene.sim_time)
            self._next_window_t += self.window_hop

        if floor_reset or self.fsm.current == fsm_mod.GRASP_OBJECT:
            self._reset_robots()

    def run(self, duration: float) -> SessionLog:
        end = self.scene.sim_time + duration
        while self.scene.sim_time < end:
            self.tick()
        return self.log


def run_training_session(cfg: SimConfig, duration: float, seed: int,
                         source: IntentSource, *,
                         separability: float = 1.0) -> SessionLog:
    sim = TrainerSimulator(cfg, seed, source, separability=separability)
    return sim.run(duration)


# ---------------------------------------------------------------------------
# Session persistence (JSON lines, shared covariance encoding)


def save_session(path: str, session: SessionLog, shrinkage: float = 0.1) -> None:
    from .mdm import _upper  # shared upper-triangular encoding

    with open(path, "w", encoding="utf-8") as fh:
        for prompt in session.prompts:
            fh.write(json.dumps({
                "type": "prompt", "class": prompt.cls,
                "move_start": prompt.move_start,
                "move_duration": prompt.move_duration,
                "rest_duration": prompt.rest_duration,
            }) + "\n")
        for t_center, window in session.windows:
            cov = covariance(window, shrinkage=shrinkage)
            fh.write(json.dumps({
                "type": "window", "t": t_center,
                "label": window.label, "dim": cov.shape[0],
                "upper": _upper(cov),
            }) + "\n")
        for t, meters in session.distance_trace:
            fh.write(json.dumps({
                "type": "ee_distance", "t": t, "meters": meters,
            }) + "\n")


def load_session_dataset(path: str):
    """Labeled covariances from a persisted session, ready for fitting."""
    from .mdm import _from_upper

    covs, labels = [], []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            rec = json.loads(line)
            if rec.get("type") != "window" or rec.get("label") is None:
                continue
            covs.append(_from_upper(rec["upper"], rec["dim"]))
            labels.append(int(rec["label"]))
    return covs, np.asarray(labels, dtype=int)
