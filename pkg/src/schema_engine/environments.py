"""Scripted environments and lesions.

An environment exposes named receptor and effector channels. Effector commands
given at tick ``t`` reach receptors after fixed per-channel delays; ``step``
advances one tick and returns the receptor patterns for the next tick.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from enum import Enum
from typing import Deque, Dict, List, Mapping, Optional, Set, Tuple

import numpy as np

from .errors import ConfigError, StructuralIntegrityError
from .patterns import SHARP, Pattern, check_dim, vector


class Environment:
    name: str = "environment"
    receptors: Dict[str, int]
    effectors: Dict[str, int]

    def observe(self) -> Dict[str, Pattern]:
        """Receptor patterns for the current tick."""
        raise NotImplementedError

    def events(self) -> Dict[str, bool]:
        """Named predicates that hold at the current tick (used by drive schedules)."""
        return {}

    def info(self) -> Dict[str, object]:
        return {}

    def advance(self, commands: Dict[str, Pattern]) -> None:
        raise NotImplementedError

    def ground_truth(self) -> Set[Tuple[str, str, int]]:
        """``(effector, receptor, delay)`` relations wired into the script."""
        return set()


def env_step(env: Environment, effector_inputs: Mapping[str, Pattern]) -> Dict[str, Pattern]:
    """Deliver effector commands, advance one tick and return the new receptor patterns."""
    for port, p in effector_inputs.items():
        if port not in env.effectors:
            raise StructuralIntegrityError(f"{env.name}: unknown effector port {port!r}")
        check_dim(p, env.effectors[port], f"{env.name}.{port}")
    commands = {name: effector_inputs.get(name, SHARP) for name in env.effectors}
    env.advance(commands)
    return env.observe()


class GripWorld(Environment):
    """Three motor channels (sidestep, open_grip, lunge), two receptors.

    ``open_grip`` echoes on ``grip_feedback`` after ``tau_grip`` ticks and
    ``lunge`` brings the target into view (``target_view``) after ``tau_view``
    ticks; ``sidestep`` reaches no receptor. The target stays within reach for
    ``reach_window`` ticks after it appears, and ``target_in_grip`` holds when the
    grip feedback is within ``grasp_tolerance`` of ``grasp_pattern`` while the
    target is in reach.
    """

    name = "grip-world"

    def __init__(self, tau_view: int = 2, tau_grip: int = 3, reach_window: int = 8,
                 grasp_pattern=(1.0,), grasp_tolerance: float = 0.2, gain: float = 1.0,
                 seed: int = 0):
        if tau_view < 1 or tau_grip < 1:
            raise ConfigError("environment.params: delays must be >= 1")
        self.tau = {"grip_feedback": int(tau_grip), "target_view": int(tau_view)}
        self.source = {"grip_feedback": "open_grip", "target_view": "lunge"}
        self.reach_window = int(reach_window)
        self.grasp = vector(grasp_pattern)
        self.tolerance = float(grasp_tolerance)
        self.gain = float(gain)
        self.receptors = {"grip_feedback": 1, "target_view": 1}
        self.effectors = {"sidestep": 1, "open_grip": 1, "lunge": 1}
        depth = max(self.tau.values())
        self._cmds: Dict[str, Deque[Pattern]] = {
            e: deque([SHARP] * depth, maxlen=depth) for e in self.effectors
        }
        self.t = 0
        self.position = 0.0
        self._last_seen: Optional[int] = None
        self._obs = {r: SHARP for r in self.receptors}
        truth = self.ground_truth()
        assert truth == {("open_grip", "grip_feedback", self.tau["grip_feedback"]),
                         ("lunge", "target_view", self.tau["target_view"])}, truth

    def ground_truth(self):
        return {(self.source[r], r, self.tau[r]) for r in self.receptors}

    def observe(self):
        return dict(self._obs)

    def in_reach(self) -> bool:
        return self._last_seen is not None and self.t - self._last_seen < self.reach_window

    def events(self):
        grip = self._obs["grip_feedback"]
        gripped = (
            grip is not SHARP
            and self.in_reach()
            and float(np.linalg.norm(grip - self.grasp)) <= self.tolerance
        )
        return {"target_in_grip": gripped, "target_visible": self._obs["target_view"] is not SHARP}

    def info(self):
        return {"in_reach": self.in_reach()}

    def advance(self, commands):
        for e, p in commands.items():
            self._cmds[e].append(p)
        if commands["sidestep"] is not SHARP:
            self.position += float(commands["sidestep"][0])
        self.t += 1
        obs = {}
        for r, tau in self.tau.items():
            # the command issued tau ticks before the new tick
            cmd = self._cmds[self.source[r]][-tau]
            obs[r] = SHARP if cmd is SHARP else vector(self.gain * cmd)
        if obs["target_view"] is not SHARP:
            self._last_seen = self.t
        self._obs = obs


class LinearPlantWorld(Environment):
    """``state(t+1) = W_plant @ push(t)`` with a periodically presented target.

    Each episode lasts ``goal_ticks + rest_ticks`` ticks; a fresh goal drawn from
    ``[-goal_range, goal_range]^n`` is shown on the ``target`` receptor during the
    first ``goal_ticks``. ``state`` is inactive on ticks following no command.
    """

    name = "linear-plant"

    def __init__(self, W_plant=((1.0, 0.5), (0.0, 1.0)), goal_ticks: int = 6,
                 rest_ticks: int = 4, goal_range: float = 1.0, reach_tolerance: float = 0.05,
                 seed: int = 0):
        self.W = np.array(W_plant, dtype=float)
        n = self.W.shape[0]
        if self.W.shape != (n, n):
            raise ConfigError("environment.params.W_plant must be square")
        if goal_ticks < 1 or rest_ticks < 0:
            raise ConfigError("environment.params: goal_ticks >= 1 and rest_ticks >= 0 required")
        self.goal_ticks, self.rest_ticks = int(goal_ticks), int(rest_ticks)
        self.period = self.goal_ticks + self.rest_ticks
        self.goal_range = float(goal_range)
        self.tolerance = float(reach_tolerance)
        self.rng = np.random.default_rng(seed)
        self.receptors = {"state": n, "target": n}
        self.effectors = {"push": n}
        self.t = 0
        self.goal = self._draw()
        self._state: Pattern = SHARP

    def _draw(self) -> np.ndarray:
        n = self.W.shape[0]
        return self.rng.uniform(-self.goal_range, self.goal_range, n)

    @property
    def episode(self) -> int:
        return self.t // self.period

    def target_shown(self) -> bool:
        return self.t % self.period < self.goal_ticks

    def ground_truth(self):
        return {("push", "state", 1)}

    def observe(self):
        return {"state": self._state, "target": vector(self.goal) if self.target_shown() else SHARP}

    def events(self):
        s = self._state
        hit = s is not SHARP and float(np.linalg.norm(s - self.goal)) <= self.tolerance
        return {"target_reached": hit and self.target_shown()}

    def info(self):
        return {"episode": self.episode}

    def advance(self, commands):
        push = commands["push"]
        self._state = SHARP if push is SHARP else vector(self.W @ push)
        self.t += 1
        if self.t % self.period == 0:
            self.goal = self._draw()


ENVIRONMENTS = {"grip-world": GripWorld, "linear-plant": LinearPlantWorld}


def make_environment(name: str, params: Mapping, seed: int) -> Environment:
    try:
        cls = ENVIRONMENTS[name]
    except KeyError:
        raise ConfigError(f"environment.name: unknown environment {name!r}") from None
    try:
        return cls(**dict(params), seed=seed)
    except TypeError as exc:
        raise ConfigError(f"environment.params: {exc}") from None


# --- lesions --------------------------------------------------------------------

class LesionMode(str, Enum):
    SILENCE_OUTPUT = "silence"
    SEVER_CONNECTION = "sever"


@dataclass(frozen=True)
class LesionSpec:
    """Damage applied once at ``onset``.

    ``silence`` makes the target schema's original behavior emit ``SHARP``
    (modulatory overrides still pass); ``sever`` removes the connection
    ``edge = (source, source_port, target_port)`` into the target.
    """

    target: str
    onset: int
    mode: LesionMode = LesionMode.SILENCE_OUTPUT
    edge: Optional[Tuple[str, str, str]] = None


def apply_lesion(agent, spec: LesionSpec) -> None:
    """Apply a lesion to a live agent; ``target`` may name the original schema id."""
    sid = agent.resolve(spec.target)
    if sid is None:
        raise ConfigError(f"lesion target {spec.target!r} is not a live schema")
    if spec.mode is LesionMode.SILENCE_OUTPUT:
        agent.schemas[sid].vars["lesioned"] = True
        return
    if spec.edge is None:
        raise ConfigError("lesion.edge is required for mode 'sever'")
    src, sport, dport = spec.edge
    src_id = agent.resolve(src) or src
    try:
        agent.connections.disconnect(src_id, sport, sid, dport)
    except KeyError:
        raise ConfigError(
            f"lesion: no connection {src}.{sport} -> {spec.target}.{dport} to sever"
        ) from None
