"""Outer-loop distributed laws producing per-agent acceleration commands.

Every law is evaluated against one frozen snapshot of all agents' (p, v);
the laws act on the horizontal x/y axes and leave z at zero (altitude is
held by the inner loop).
"""

from __future__ import annotations

import importlib
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from .control import PdGains
from .errors import InvalidBounds, LawError
from .graph import CommGraph, SpanningTree

PLANAR = np.array([1.0, 1.0, 0.0])


class AgentAbstractState(NamedTuple):
    position: np.ndarray
    velocity: np.ndarray


@dataclass(frozen=True)
class ConsensusParams:
    beta: float = 1.0
    leader: int | None = None

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("consensus damping beta must be positive")


@dataclass(frozen=True)
class MinMaxParams:
    bounds: tuple
    tree: SpanningTree
    deadband: float = 0.05
    magnitude: str = "absolute"  # or "relative": apply beta_c - beta_p

    def __post_init__(self):
        if self.deadband < 0:
            raise ValueError("deadband must be non-negative")
        if self.magnitude not in ("absolute", "relative"):
            raise ValueError(f"unknown magnitude mode {self.magnitude!r}")
        for child, parent in self.tree.edges:
            if not self.bounds[child] > self.bounds[parent]:
                raise InvalidBounds(f"bound of agent {child + 1} ({self.bounds[child]}) must exceed "
                                    f"bound of its parent {parent + 1} ({self.bounds[parent]})")


def _sign(x: float) -> float:
    return 1.0 if x > 0 else -1.0 if x < 0 else 0.0


class WaypointTracker:
    """Active-waypoint bookkeeping; advances inside the capture radius when slow."""

    def __init__(self, waypoints, capture_radius: float = 0.1, capture_speed: float = 0.2):
        self.waypoints = [np.asarray(w, dtype=float) for w in waypoints]
        if not self.waypoints:
            raise ValueError("at least one waypoint is required")
        self.capture_radius = capture_radius
        self.capture_speed = capture_speed
        self.index = 0
        self.reached: list[float] = []

    @property
    def active(self) -> np.ndarray:
        return self.waypoints[self.index]

    @property
    def done(self) -> bool:
        return len(self.reached) == len(self.waypoints)

    def update(self, state: AgentAbstractState, t: float = 0.0) -> np.ndarray:
        target = self.active
        dist = np.linalg.norm((state.position - target)[:2])
        speed = np.linalg.norm(state.velocity[:2])
        if len(self.reached) <= self.index and dist <= self.capture_radius and speed < self.capture_speed:
            self.reached.append(t)
            if self.index + 1 < len(self.waypoints):
                self.index += 1
        return self.active


def waypoint_law(state: AgentAbstractState, target, gains: PdGains,
                 target_velocity=(0.0, 0.0, 0.0)) -> np.ndarray:
    target = np.asarray(target, dtype=float)
    err_p = np.zeros(3)
    err_p[:2] = target[:2] - state.position[:2]
    err_v = np.asarray(target_velocity, dtype=float) - state.velocity
    return (gains.kp * err_p + gains.kd * err_v) * PLANAR


def consensus_law(i: int, states: Sequence[AgentAbstractState], g: CommGraph,
                  params: ConsensusParams) -> np.ndarray:
    if i in g.leaders or (params.leader is not None and i == params.leader):
        return np.zeros(3)
    me = states[i]
    acc = np.zeros(3)
    for j in np.flatnonzero(g.weights[i] > 0):
        acc += g.weights[i, j] * (states[j].position - me.position)
    acc -= params.beta * me.velocity
    return acc * PLANAR


def minmax_axis(dp: float, dv: float, beta_c: float, beta_p: float, deadband: float,
                magnitude: str = "absolute") -> float:
    """Bang-bang input on one axis for relative state ``(dp, dv)`` = child - parent.

    Outside the band ``|s| <= deadband`` the input is ``-mag * sign(s)``.
    Inside it the input is the boundary-layer term ``-mag * s / deadband``,
    plus, for a pair closing on each other, the constant deceleration that
    stops exactly at the parent; the sum is clipped to ``mag``.
    """
    if not beta_c > beta_p:
        raise InvalidBounds(f"beta_c={beta_c} must exceed beta_p={beta_p}")
    rel = beta_c - beta_p
    mag = beta_c if magnitude == "absolute" else rel
    s = 2.0 * rel * dp + dv * abs(dv)
    if abs(s) > deadband:
        return -mag * _sign(s)
    a = -mag * s / deadband if deadband > 0.0 else 0.0
    if dp * dv < 0.0:
        a -= _sign(dv) * dv * dv / (2.0 * abs(dp))
    return min(mag, max(-mag, a))


def minmax_law(child: AgentAbstractState, parent: AgentAbstractState, beta_c: float,
               beta_p: float, deadband: float = 0.05, magnitude: str = "absolute") -> np.ndarray:
    dp = child.position - parent.position
    dv = child.velocity - parent.velocity
    return np.array([minmax_axis(float(dp[k]), float(dv[k]), beta_c, beta_p, deadband, magnitude)
                     for k in (0, 1)] + [0.0])


CustomLaw = Callable[[int, Sequence[AgentAbstractState], "LawContext"], np.ndarray]
_REGISTRY: dict[str, CustomLaw] = {}


def register_law(name: str):
    """Decorator registering a custom law under ``name``."""
    def deco(fn: CustomLaw) -> CustomLaw:
        _REGISTRY[name] = fn
        return fn
    return deco


def resolve_custom_law(name: str) -> CustomLaw:
    """Registered name, or ``package.module:function``."""
    if name in _REGISTRY:
        return _REGISTRY[name]
    if ":" in name:
        module, attr = name.split(":", 1)
        return getattr(importlib.import_module(module), attr)
    raise KeyError(f"no custom law registered as {name!r}")


@dataclass
class LawContext:
    law: str
    graph: CommGraph | None = None
    consensus: ConsensusParams | None = None
    minmax: MinMaxParams | None = None
    waypoint_gains: PdGains = PdGains(1.0, 1.0)
    trackers: list = field(default_factory=list)
    root_mode: str = "hold"
    accel_clamp: float | None = None
    custom: CustomLaw | None = None
    time: float = 0.0


def _clip(vec: np.ndarray, limit: float | None) -> np.ndarray:
    if limit is None:
        return vec
    return np.clip(vec, -limit, limit)


def _agent_command(i: int, states: Sequence[AgentAbstractState], ctx: LawContext,
                   targets: list) -> np.ndarray:
    if ctx.law == "waypoint":
        return _clip(waypoint_law(states[i], targets[i], ctx.waypoint_gains), ctx.accel_clamp)
    if ctx.law == "consensus":
        return _clip(consensus_law(i, states, ctx.graph, ctx.consensus), ctx.accel_clamp)
    if ctx.law == "minmax":
        mm = ctx.minmax
        tree = mm.tree
        if i == tree.root:
            if ctx.root_mode == "waypoint":
                cmd = waypoint_law(states[i], targets[i], ctx.waypoint_gains)
                return _clip(cmd, mm.bounds[i])
            return np.zeros(3)
        p = tree.parent[i]
        return minmax_law(states[i], states[p], mm.bounds[i], mm.bounds[p], mm.deadband, mm.magnitude)
    if ctx.law == "custom":
        return _clip(np.asarray(ctx.custom(i, states, ctx), dtype=float) * PLANAR, ctx.accel_clamp)
    raise ValueError(f"unknown law {ctx.law!r}")


def run_law_tick(states: Sequence[AgentAbstractState], ctx: LawContext,
                 order: Sequence[int] | None = None) -> list[np.ndarray]:
    """Commands for every agent from one snapshot, returned in agent order.

    ``order`` only changes the evaluation sequence; outputs are identical.
    """
    snapshot = tuple(AgentAbstractState(np.array(s.position, dtype=float), np.array(s.velocity, dtype=float))
                     for s in states)
    for s in snapshot:
        s.position.setflags(write=False)
        s.velocity.setflags(write=False)
    n = len(snapshot)
    targets: list = [None] * n
    if ctx.trackers:
        if len(ctx.trackers) != n:
            raise ValueError("one waypoint tracker per agent is required")
        targets = [tr.update(snapshot[i], ctx.time) for i, tr in enumerate(ctx.trackers)]
    out: list = [None] * n
    for i in (range(n) if order is None else order):
        try:
            out[i] = _agent_command(i, snapshot, ctx, targets)
        except Exception as exc:
            raise LawError(i, exc) from exc
    return out
