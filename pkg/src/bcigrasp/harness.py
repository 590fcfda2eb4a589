"""Batch experiment runner: seeded trials, records, and summary statistics.

Each trial runs the full control stack to a grasp attempt or a timeout,
then records what the vision system thinks it grasped next to the ground
truth.  Records are JSON lines; everything replays from the per-trial seed.
"""

from __future__ import annotations

import dataclasses
import json
import math
from dataclasses import dataclass

import numpy as np

from .config import SimConfig
from .intent import (
    AutoSearchIntent,
    ClassifierIntent,
    ExternalIntent,
    IntentSource,
    OracleIntent,
    RandomIntent,
)
from .mdm import MdmClassifier, covariance, synth_window
from .scene import RANDOM_LOCATIONS, SET_LOCATIONS, build_scene
from .sim import GraspSimulator, run_until_grasp


@dataclass
class TrialRecord:
    trial_id: int
    protocol: str
    desired_object: tuple          # (shape, color)
    selected_object: tuple | None  # as measured by the vision classifiers
    grasp_success: bool
    correct_selection: bool
    duration: float
    seed: int
    intent_kind: str
    separability: float | None = None
    attempted: bool = True
    true_grasped_id: int | None = None

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["desired_object"] = list(self.desired_object)
        if self.selected_object is not None:
            d["selected_object"] = list(self.selected_object)
        return json.dumps(d)

    @classmethod
    def from_json(cls, line: str) -> "TrialRecord":
        d = json.loads(line)
        d["desired_object"] = tuple(d["desired_object"])
        if d.get("selected_object") is not None:
            d["selected_object"] = tuple(d["selected_object"])
        return cls(**d)


@dataclass
class Summary:
    n_trials: int
    n_attempted: int
    n_success: int
    n_correct: int
    n_correct_and_grasped: int
    mean_duration: float
    per_object: dict  # (shape, color) -> {"attempts": int, "successes": int}
    per_shape: dict   # shape -> {"attempts": int, "successes": int}

    @property
    def success_rate(self) -> float:
        return self.n_success / self.n_trials if self.n_trials else 0.0

    @property
    def correct_selection_rate(self) -> float:
        return self.n_correct / self.n_trials if self.n_trials else 0.0

    @property
    def correct_and_grasped_rate(self) -> float:
        return self.n_correct_and_grasped / self.n_trials if self.n_trials else 0.0


def _train_default_model(separability: float, seed: int,
                         cfg: SimConfig, n_per_class: int = 30) -> MdmClassifier:
    rng = np.random.default_rng([abs(int(seed)), 0x7EA1])
    sig = cfg.signal
    covs, labels = [], []
    for c in range(4):
        for _ in range(n_per_class):
            w = synth_window(c, separability, rng, channels=sig.channels,
                             samples=sig.window_samples, gain=sig.class_gain)
            covs.append(covariance(w, shrinkage=sig.shrinkage))
            labels.append(c)
    return MdmClassifier().fit(covs, labels)


def make_intent_source(kind: str, seed: int, cfg: SimConfig, *,
                       separability: float = 1.0,
                       model: MdmClassifier | None = None,
                       external: ExternalIntent | None = None) -> IntentSource:
    if kind == "random":
        return RandomIntent(seed=seed, hold=cfg.signal.intent_hold)
    if kind == "oracle":
        return OracleIntent()
    if kind == "none":
        return AutoSearchIntent()
    if kind == "classifier":
        if model is None:
            model = _train_default_model(separability, seed, cfg)
        sig = cfg.signal
        return ClassifierIntent(model, separability, seed=seed,
                                inner=OracleIntent(), hold=sig.intent_hold,
                                channels=sig.channels,
                                samples=sig.window_samples,
                                gain=sig.class_gain, shrinkage=sig.shrinkage)
    if kind == "external":
        if external is None:
            raise ValueError("external intent needs a queue")
        return external
    raise ValueError(f"unknown intent kind {kind!r}")


def run_trial(cfg: SimConfig, protocol: str, trial_id: int, seed: int,
              intent_kind: str, *, separability: float = 1.0,
              model: MdmClassifier | None = None,
              drift: bool | None = None) -> TrialRecord:
    """One seeded trial to grasp attempt or timeout."""
    trial_seed = seed + trial_id
    rng = np.random.default_rng([abs(int(seed)), trial_id, 0xD0])
    probe = build_scene(protocol, trial_seed, cfg, drift=drift)
    if protocol == SET_LOCATIONS:
        desired_id = int(rng.integers(0, len(probe.objects)))
    else:
        desired_id = 0

    source = make_intent_source(intent_kind, trial_seed, cfg,
                                separability=separability, model=model)
    sim = GraspSimulator(cfg, protocol, trial_seed, source,
                         desired_id=desired_id, drift=drift)
    attempted = run_until_grasp(sim, timeout=cfg.trial_timeout)

    desired = sim.desired_object()
    desired_key = (desired.shape, desired.color)
    m = sim.measurement
    selected = m.selected if attempted else None
    success = bool(m.outcome.success) if attempted and m.outcome else False
    duration = (m.attempt_time - sim.trial_start if attempted and m.attempt_time
                else cfg.trial_timeout)
    return TrialRecord(
        trial_id=trial_id,
        protocol=protocol,
        desired_object=desired_key,
        selected_object=selected,
        grasp_success=success,
        correct_selection=selected == desired_key,
        duration=float(duration),
        seed=trial_seed,
        intent_kind=intent_kind,
        separability=separability if intent_kind == "classifier" else None,
        attempted=attempted,
        true_grasped_id=m.true_object_id,
    )


def run_experiment(cfg: SimConfig, protocol: str, n_trials: int,
                   intent_kind: str, seed: int, *,
                   separability: float = 1.0,
                   drift: bool | None = None,
                   progress=None) -> list[TrialRecord]:
    """Run seeded trials; the random-locations protocol forces search mode."""
    if protocol not in (SET_LOCATIONS, RANDOM_LOCATIONS):
        raise ValueError(f"unknown protocol {protocol!r}")
    if protocol == RANDOM_LOCATIONS:
        intent_kind = "none"
    model = None
    if intent_kind == "classifier":
        model = _train_default_model(separability, seed, cfg)
    records = []
    for trial_id in range(n_trials):
        records.append(run_trial(cfg, protocol, trial_id, seed, intent_kind,
                                 separability=separability, model=model,
                                 drift=drift))
        if progress is not None:
            progress(records[-1])
    return records


def summarize(records: list[TrialRecord]) -> Summary:
    if not records:
        raise ValueError("no records to summarize")
    per_object: dict = {}
    per_shape: dict = {}
    n_success = n_correct = n_both = n_attempted = 0
    durations = []
    for rec in records:
        if rec.attempted and rec.selected_object is not None:
            key = tuple(rec.selected_object)
            slot = per_object.setdefault(key, {"attempts": 0, "successes": 0})
            slot["attempts"] += 1
            shape_slot = per_shape.setdefault(key[0], {"attempts": 0, "successes": 0})
            shape_slot["attempts"] += 1
            if rec.grasp_success:
                slot["successes"] += 1
                shape_slot["successes"] += 1
        n_attempted += rec.attempted
        n_success += rec.grasp_success
        n_correct += rec.correct_selection
        n_both += rec.correct_selection and rec.grasp_success
        durations.append(rec.duration)
    return Summary(
        n_trials=len(records),
        n_attempted=n_attempted,
        n_success=n_success,
        n_correct=n_correct,
        n_correct_and_grasped=n_both,
        mean_duration=float(np.mean(durations)),
        per_object=per_object,
        per_shape=per_shape,
    )


def binomial_band(p: float, n: int, confidence_z: float = 2.576) -> tuple:
    half = confidence_z * math.sqrt(p * (1.0 - p) / n)
    return max(0.0, p - half), min(1.0, p + half)


def save_records(path: str, records: list[TrialRecord]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(rec.to_json() + "\n")


def load_records(path: str) -> list[TrialRecord]:
    records = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                records.append(TrialRecord.from_json(line))
    return records


def format_summary(summary: Summary) -> str:
    lines = [
        f"trials:               {summary.n_trials}",
        f"attempted:            {summary.n_attempted}",
        f"grasp successes:      {summary.n_success} ({summary.success_rate:.1%})",
        f"correct selections:   {summary.n_correct} ({summary.correct_selection_rate:.1%})",
        f"correct and grasped:  {summary.n_correct_and_grasped}"
        f" ({summary.correct_and_grasped_rate:.1%})",
        f"mean duration:        {summary.mean_duration:.1f} s",
        "",
        f"{'object':24s} {'attempts':>8s} {'successes':>9s} {'rate':>7s}",
    ]
    for key in sorted(summary.per_object):
        slot = summary.per_object[key]
        rate = slot["successes"] / slot["attempts"] if slot["attempts"] else 0.0
        name = f"{key[1]} {key[0]}"
        lines.append(f"{name:24s} {slot['attempts']:8d} {slot['successes']:9d}"
                     f" {rate:6.1%}")
    lines.append("")
    lines.append(f"{'shape':24s} {'attempts':>8s} {'successes':>9s} {'rate':>7s}")
    for shape in sorted(summary.per_shape):
        slot = summary.per_shape[shape]
        rate = slot["successes"] / slot["attempts"] if slot["attempts"] else 0.0
        lines.append(f"{shape:24s} {slot['attempts']:8d} {slot['successes']:9d}"
                     f" {rate:6.1%}")
    return "\n".join(lines)


def summary_to_json(summary: Summary) -> str:
    d = dataclasses.asdict(summary)
    d["per_object"] = {f"{k[1]} {k[0]}": v for k, v in summary.per_object.items()}
    d["success_rate"] = summary.success_rate
    d["correct_selection_rate"] = summary.correct_selection_rate
    d["correct_and_grasped_rate"] = summary.correct_and_grasped_rate
    return json.dumps(d, indent=2)
