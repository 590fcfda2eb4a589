"""Intent sources: the single human-to-robot channel feeding the controller.

Every source emits ``IntentSample`` values once per simulator step, so the
state machine never depends on where intent comes from: a uniform-random
baseline, a scripted oracle policy, the synthetic-EEG classifier pipeline,
or an external queue fed by a live client.
"""

from __future__ import annotations

import math
import threading
from dataclasses import dataclass, field

import numpy as np

from .mdm import MdmClassifier, covariance, rest_window, synth_window

LEFT, RIGHT, BOTH_HANDS, BOTH_FEET = 0, 1, 2, 3


@dataclass(frozen=True)
class IntentSample:
    cls: int | None          # None means no confident command
    certainty: float
    timestamp: float

    def __post_init__(self):
        if self.cls is None and self.certainty != 0.0:
            raise ValueError("an absent intent carries zero certainty")


def none_intent(t: float) -> IntentSample:
    return IntentSample(cls=None, certainty=0.0, timestamp=t)


@dataclass
class IntentContext:
    """Read-only per-tick summary handed to intent sources."""

    t: float
    fsm_state: int
    has_ooi: bool
    ooi_center_error: tuple | None
    ooi_distance: float | None
    yaw: float
    target_bearing: float | None = None
    target_is_ooi: bool = False
    prompt_class: int | None = None


class IntentSource:
    """Base contract: one sample per simulator step."""

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        raise NotImplementedError


class RandomIntent(IntentSource):
    """Uniform class with certainty U(0, 0.5), redrawn every ``hold`` seconds.

    Stands in for the ambient stream of a cap nobody is wearing; the hold
    mimics the correlation between overlapping classification windows.
    """

    def __init__(self, seed: int, hold: float = 0.2):
        self.rng = np.random.default_rng([abs(int(seed)), 0xA11CE])
        self.hold = hold
        self._last: IntentSample | None = None
        self._last_draw = -math.inf

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        if ctx.t - self._last_draw >= self.hold - 1e-9 or self._last is None:
            self._last = IntentSample(
                cls=int(self.rng.integers(0, 4)),
                certainty=float(self.rng.uniform(0.0, 0.5)),
                timestamp=ctx.t,
            )
            self._last_draw = ctx.t
        return IntentSample(self._last.cls, self._last.certainty, ctx.t)


def wrap_angle(a: float) -> float:
    return (a + math.pi) % (2.0 * math.pi) - math.pi


class OracleIntent(IntentSource):
    """Deterministic upper-bound policy steering toward a known target.

    Turns toward the target bearing, asks for the approach once the target
    is the object of interest and roughly centered, and backs off when the
    ranking drifted to something else with no bearing error left to fix.
    """

    BEARING_TOL = math.radians(5.0)

    def _steer(self, ctx: IntentContext, err: float) -> IntentSample:
        """Turn toward the target; once aligned, stop shifting the ranking.

        With no confident class the ranking reference reverts to the image
        center, which the aligned target is closest to, so flanking objects
        lose the next ranking pass on their own.
        """
        if abs(err) > self.BEARING_TOL:
            return IntentSample(LEFT if err > 0 else RIGHT, 1.0, ctx.t)
        return none_intent(ctx.t)

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        if ctx.fsm_state not in (1, 2, 3) or ctx.target_bearing is None:
            return none_intent(ctx.t)
        err = wrap_angle(ctx.target_bearing - ctx.yaw)
        if ctx.fsm_state == 1:
            if ctx.target_is_ooi and abs(err) <= self.BEARING_TOL:
                return IntentSample(BOTH_HANDS, 1.0, ctx.t)
            return self._steer(ctx, err)
        if ctx.fsm_state == 2:
            if ctx.target_is_ooi:
                return none_intent(ctx.t)
            return self._steer(ctx, err)
        # initial approach
        if ctx.target_is_ooi:
            return IntentSample(BOTH_HANDS, 1.0, ctx.t)
        return self._steer(ctx, err)


class AutoSearchIntent(IntentSource):
    """Vision-only search: turn left until something is in view, then go.

    Used by the random-locations protocol, where no user input exists and
    the approach itself runs on the default pathways.  The base yaw has
    hard limits, so the sweep reverses at the end stops instead of
    spinning forever against them.
    """

    YAW_MARGIN = 0.02
    COOLOFF_SECONDS = 3.0

    def __init__(self, turn_certainty: float = 0.8):
        self.turn_certainty = turn_certainty
        self._direction = LEFT
        self._prev_state = 1
        self._cooloff_until = -math.inf

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        # a centering pass that fell back to search while the object is
        # still in view means this viewpoint cannot work: sweep onward
        if ctx.fsm_state == 1 and self._prev_state == 2 and ctx.has_ooi:
            self._cooloff_until = ctx.t + self.COOLOFF_SECONDS
        self._prev_state = ctx.fsm_state
        if ctx.fsm_state != 1:
            return none_intent(ctx.t)
        if ctx.has_ooi and ctx.t >= self._cooloff_until:
            return IntentSample(BOTH_HANDS, 1.0, ctx.t)
        if self._direction == LEFT and ctx.yaw >= math.pi - self.YAW_MARGIN:
            self._direction = RIGHT
        elif self._direction == RIGHT and ctx.yaw <= -math.pi + self.YAW_MARGIN:
            self._direction = LEFT
        return IntentSample(self._direction, self.turn_certainty, ctx.t)


class PromptFollowIntent(IntentSource):
    """Perfectly obedient trainer-session user: emits the active prompt.

    The default certainty makes the commanded joint rate equal the
    prompting robot's own speed, which is what faithful following means.
    """

    def __init__(self, certainty: float = 0.2):
        self.certainty = certainty

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        if ctx.prompt_class is None:
            return none_intent(ctx.t)
        return IntentSample(int(ctx.prompt_class), self.certainty, ctx.t)


class ClassifierIntent(IntentSource):
    """Synthetic-EEG pipeline: imagined class -> window -> covariance -> MDM.

    The imagined class comes from an inner policy (an oracle during test
    trials, the prompt during training sessions); the emitted class and
    certainty are whatever the classifier decodes from the synthetic window
    at the configured separability.
    """

    # Raw mean-minus-min certainties live on a small scale; this maps them
    # onto the common intent scale (clamped to 1) before they drive joints.
    CERT_SCALE = 12.0

    def __init__(self, model: MdmClassifier, separability: float, seed: int,
                 inner: IntentSource | None = None, hold: float = 0.2,
                 channels: int = 32, samples: int = 250, gain: float | None = None,
                 shrinkage: float = 0.1, cert_scale: float | None = None):
        self.model = model
        self.separability = separability
        self.inner = inner if inner is not None else PromptFollowIntent()
        self.rng = np.random.default_rng([abs(int(seed)), 0xC1A55])
        self.hold = hold
        self.channels = channels
        self.samples = samples
        from .mdm import DEFAULT_CLASS_GAIN
        self.gain = gain if gain is not None else DEFAULT_CLASS_GAIN
        self.shrinkage = shrinkage
        self.cert_scale = cert_scale if cert_scale is not None else self.CERT_SCALE
        self._last: IntentSample | None = None
        self._last_draw = -math.inf

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        if ctx.t - self._last_draw >= self.hold - 1e-9 or self._last is None:
            imagined = self.inner.next_intent(ctx)
            if imagined.cls is None:
                window = rest_window(self.rng, channels=self.channels,
                                     samples=self.samples)
            else:
                window = synth_window(imagined.cls, self.separability, self.rng,
                                      channels=self.channels, samples=self.samples,
                                      gain=self.gain)
            cls, score = self.model.predict_one(
                covariance(window, shrinkage=self.shrinkage))
            certainty = min(score.value * self.cert_scale, 1.0)
            self._last = IntentSample(cls, certainty, ctx.t)
            self._last_draw = ctx.t
        return IntentSample(self._last.cls, self._last.certainty, ctx.t)


@dataclass
class ExternalIntent(IntentSource):
    """Queue of client-supplied samples with a staleness window.

    A network thread calls ``push``; the simulation drains the freshest
    sample each tick.  Anything older than ``staleness`` seconds of wall
    receipt never drives motion, so a vanished client stops the arm.
    """

    staleness: float = 0.5
    connected: bool = False
    _lock: threading.Lock = field(default_factory=threading.Lock)
    _latest: tuple | None = None   # (cls, certainty, recv_time)

    def push(self, cls: int, certainty: float, recv_time: float) -> None:
        with self._lock:
            self._latest = (int(cls), max(0.0, min(1.0, float(certainty))),
                            float(recv_time))
            self.connected = True

    def disconnect(self) -> None:
        with self._lock:
            self.connected = False

    def next_intent(self, ctx: IntentContext) -> IntentSample:
        with self._lock:
            latest = self._latest
            connected = self.connected
        if not connected or latest is None:
            return none_intent(ctx.t)
        cls, certainty, recv = latest
        if ctx.t - recv > self.staleness:
            return none_intent(ctx.t)
        return IntentSample(cls, certainty, ctx.t)


INTENT_KINDS = ("random", "oracle", "classifier", "external", "none")
