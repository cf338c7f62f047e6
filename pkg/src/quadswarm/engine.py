"""Deterministic fixed-step scenario loop.

Each control tick: snapshot every agent's (p, v), evaluate the selected law
for all agents on that snapshot, hand each command to the agent's inner loop
and sub-step its plant until the next tick. Per-agent plant work may run on
a thread pool; results are committed in ascending agent order, so the log
does not depend on the worker count.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .config import ScenarioConfig
from .control import GainSet, PdGains, Setpoint, controller_tick
from .dynamics import QuadParams, QuadState, integrate
from .errors import ConfigError, NumericDivergence
from .graph import CommGraph, SpanningTree, extract_spanning_tree
from .laws import (AgentAbstractState, ConsensusParams, LawContext, MinMaxParams, WaypointTracker,
                   resolve_custom_law, run_law_tick)


@dataclass
class TrajectoryLog:
    """Per-tick samples; arrays are indexed ``[tick, agent, axis]``."""

    times: np.ndarray
    positions: np.ndarray
    velocities: np.ndarray
    commands: np.ndarray
    attitudes: np.ndarray
    metadata: dict = field(default_factory=dict)

    @classmethod
    def allocate(cls, ticks: int, n: int, control_dt: float, metadata: dict) -> "TrajectoryLog":
        shape = (ticks, n, 3)
        return cls(np.arange(ticks) * control_dt, np.zeros(shape), np.zeros(shape), np.zeros(shape),
                   np.zeros(shape), metadata)

    @property
    def n_agents(self) -> int:
        return self.positions.shape[1]

    def __len__(self) -> int:
        return len(self.times)

    def truncated(self, ticks: int) -> "TrajectoryLog":
        return TrajectoryLog(self.times[:ticks], self.positions[:ticks], self.velocities[:ticks],
                             self.commands[:ticks], self.attitudes[:ticks], dict(self.metadata))


class QuadAgent:
    def __init__(self, position, gains: GainSet, params: QuadParams, physics_dt: float, substeps: int):
        self.state = QuadState.at_rest(position)
        self.altitude = float(position[2])
        self.gains = gains
        self.params = params
        self.dt = physics_dt
        self.substeps = substeps

    def abstract(self) -> AgentAbstractState:
        return AgentAbstractState(self.state.position.copy(), self.state.velocity.copy())

    @property
    def attitude(self) -> np.ndarray:
        return self.state.attitude

    def advance(self, accel: np.ndarray, altitude: float | None) -> None:
        z = self.altitude if altitude is None else altitude
        sp = Setpoint.acceleration(accel, z)
        cmd = controller_tick(self.state, sp, self.gains, self.params)
        self.state = integrate(self.state, cmd, self.dt, self.substeps, self.params)


class IdealAgent:
    """Exact zero-order-hold double integrator on x/y; z stays put."""

    def __init__(self, position, physics_dt: float, substeps: int):
        self.position = np.array(position, dtype=float)
        self.velocity = np.zeros(3)
        self.dt = physics_dt
        self.substeps = substeps

    def abstract(self) -> AgentAbstractState:
        return AgentAbstractState(self.position.copy(), self.velocity.copy())

    @property
    def attitude(self) -> np.ndarray:
        return np.zeros(3)

    def advance(self, accel: np.ndarray, altitude: float | None) -> None:
        a = np.array([accel[0], accel[1], 0.0])
        dt = self.dt
        for _ in range(self.substeps):
            self.position = self.position + self.velocity * dt + 0.5 * a * dt * dt
            self.velocity = self.velocity + a * dt
        if not (np.all(np.isfinite(self.position)) and np.all(np.abs(self.position) < 1e9)):
            raise NumericDivergence("ideal agent diverged")


def initial_positions(cfg: ScenarioConfig) -> np.ndarray:
    """Explicit positions, or uniform draws in the box from PCG64(seed)."""
    r = cfg.robot
    if r.initial == "explicit":
        return np.array(r.positions, dtype=float)
    rng = np.random.Generator(np.random.PCG64(r.seed))
    lo = np.array([b[0] for b in r.box])
    hi = np.array([b[1] for b in r.box])
    return rng.uniform(lo, hi, size=(r.count, 3))


def graph_from_matrix(kind: str, matrix, directed: bool, leaders=()) -> CommGraph:
    if kind == "laplacian":
        return CommGraph.from_laplacian(matrix, directed=directed, leaders=leaders)
    return CommGraph(np.array(matrix, dtype=float), directed=directed, leaders=leaders)


def build_tree(cfg: ScenarioConfig) -> SpanningTree:
    mm = cfg.minmax
    n = cfg.robot.count
    root = mm.root - 1
    if mm.matrix is None:
        graph = CommGraph.complete(n)
    else:
        graph = graph_from_matrix(mm.matrix_kind, mm.matrix, mm.directed)
    if mm.tree is None:
        return extract_spanning_tree(graph, root)
    parent = {c - 1: p - 1 for c, p in mm.tree}
    for c, p in parent.items():
        if not graph.weights[c, p] > 0:
            raise ValueError(f"tree edge {c + 1}<-{p + 1} is not in the communication graph")
    return SpanningTree(root, parent)


def build_context(cfg: ScenarioConfig, start: np.ndarray) -> LawContext:
    n = cfg.robot.count
    ctx = LawContext(law=cfg.law, waypoint_gains=PdGains(cfg.waypoint.p_gain, cfg.waypoint.d_gain),
                     accel_clamp=cfg.gains.accel_clamp)
    wp = cfg.waypoint
    if cfg.law == "waypoint" or (cfg.law == "minmax" and cfg.minmax.root_mode == "waypoint"):
        ctx.trackers = [WaypointTracker(wp.waypoints, wp.capture_radius, wp.capture_speed) for _ in range(n)]
        ctx.root_mode = cfg.minmax.root_mode
    if cfg.law == "consensus":
        k = cfg.consensus
        leaders = () if k.leader == 0 else (k.leader - 1,)
        ctx.graph = graph_from_matrix(k.matrix_kind, k.matrix, k.directed, leaders)
        ctx.consensus = ConsensusParams(k.beta, None if k.leader == 0 else k.leader - 1)
    elif cfg.law == "minmax":
        ctx.minmax = MinMaxParams(cfg.minmax.bounds, build_tree(cfg), cfg.minmax.deadband,
                                  cfg.minmax.magnitude)
    elif cfg.law == "custom":
        try:
            ctx.custom = resolve_custom_law(cfg.custom)
        except (KeyError, ImportError, AttributeError, ValueError) as exc:
            raise ConfigError(f"cannot load custom law: {exc}", key="control.custom") from None
    return ctx


def _altitude_targets(cfg: ScenarioConfig, ctx: LawContext) -> list:
    out = [None] * cfg.robot.count
    for i, tr in enumerate(ctx.trackers):
        if len(tr.active) == 3 and (cfg.law == "waypoint" or i == ctx.minmax.tree.root):
            out[i] = float(tr.active[2])
    return out


def run_scenario(cfg: ScenarioConfig, *, workers: int = 1, params: QuadParams | None = None) -> TrajectoryLog:
    """Simulate ``cfg``; same config and seed give a bit-identical log.

    On plant divergence a :class:`NumericDivergence` is raised carrying the
    agent, the tick and the partial log (``exc.log``).
    """
    params = params or QuadParams()
    timing = cfg.timing
    n = cfg.robot.count
    start = initial_positions(cfg)
    ctx = build_context(cfg, start)
    if cfg.robot.model == "quadrotor":
        agents = [QuadAgent(p, cfg.gains, params, timing.physics_dt, timing.substeps) for p in start]
    else:
        agents = [IdealAgent(p, timing.physics_dt, timing.substeps) for p in start]

    meta = {"config_sha256": cfg.digest(), "seed": cfg.robot.seed, "version": __version__,
            "law": cfg.law, "agents": n, "model": cfg.robot.model, "control_dt": timing.control_dt}
    log = TrajectoryLog.allocate(timing.ticks, n, timing.control_dt, meta)
    pool = ThreadPoolExecutor(max_workers=workers) if workers > 1 else None
    try:
        for tick in range(timing.ticks):
            ctx.time = float(log.times[tick])
            snapshot = [a.abstract() for a in agents]
            commands = run_law_tick(snapshot, ctx)
            for i, agent in enumerate(agents):
                log.positions[tick, i] = snapshot[i].position
                log.velocities[tick, i] = snapshot[i].velocity
                log.commands[tick, i] = commands[i]
                log.attitudes[tick, i] = agent.attitude
            if tick == timing.ticks - 1:
                break
            altitudes = _altitude_targets(cfg, ctx)

            def advance(i: int):
                try:
                    agents[i].advance(commands[i], altitudes[i])
                except NumericDivergence as exc:
                    return exc
                return None

            results = list(pool.map(advance, range(n))) if pool else [advance(i) for i in range(n)]
            for i, exc in enumerate(results):
                if exc is not None:
                    err = NumericDivergence(f"agent {i + 1} diverged at tick {tick + 1}: {exc}",
                                            agent=i, tick=tick + 1)
                    err.log = log.truncated(tick + 1)
                    raise err
    finally:
        if pool:
            pool.shutdown()
    if ctx.trackers:
        log.metadata["waypoints_reached_s"] = [[float(t) for t in tr.reached] for tr in ctx.trackers]
    return log
