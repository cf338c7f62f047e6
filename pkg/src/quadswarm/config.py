"""Scenario config files: parsing, validation and canonical printing.

Grammar (UTF-8, line oriented)::

    # comment                      anywhere after '#'
    [section]                      robot, control, control.waypoint,
                                   control.consensus, control.minmax,
                                   output, timing, gains
    key = value                    keys are case-insensitive
    matrix = [[2,-1,-1],           bracketed values may span lines until
              [-1,1,0],[-1,0,1]]   the brackets balance

Scalars are integers, decimals, ``true``/``false`` or bare words; lists use
JSON bracket syntax. Agent numbers in configs are 1-based; ``leader = 0``
selects leaderless consensus.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
import re
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .control import GainSet, PdGains
from .errors import ConfigError

LAWS = ("custom", "waypoint", "consensus", "minmax")
MODELS = ("quadrotor", "double_integrator")
_KEY_RE = re.compile(r"^[a-z_][a-z0-9_]*$")
_SECTION_RE = re.compile(r"^[a-z_][a-z0-9_.]*$")


@dataclass(frozen=True)
class RobotConfig:
    count: int
    initial: str = "random"  # or "explicit"
    positions: tuple | None = None
    seed: int = 0
    box: tuple = ((-5.0, 5.0), (-5.0, 5.0), (1.0, 1.0))
    model: str = "quadrotor"


@dataclass(frozen=True)
class WaypointConfig:
    p_gain: float = 1.0
    d_gain: float = 1.0
    waypoints: tuple = ()
    capture_radius: float = 0.1
    capture_speed: float = 0.2


@dataclass(frozen=True)
class ConsensusConfig:
    leader: int = 0
    matrix_kind: str = "laplacian"
    matrix: tuple | None = None
    beta: float = 1.0
    directed: bool = False


@dataclass(frozen=True)
class MinMaxConfig:
    root: int = 1
    bounds: tuple | None = None
    tree: tuple | None = None  # None: extract from the graph
    matrix_kind: str = "adjacency"
    matrix: tuple | None = None  # None: complete graph
    directed: bool = False
    deadband: float = 0.05
    magnitude: str = "absolute"
    root_mode: str = "hold"


@dataclass(frozen=True)
class OutputConfig:
    velocity_plot: bool = False
    position_plot: bool = True
    save_plot: bool = True
    show_plot: bool = False
    save_data: bool = True


@dataclass(frozen=True)
class TimingConfig:
    duration: float = 10.0
    physics_dt: float = 0.001
    control_dt: float = 0.01

    @property
    def substeps(self) -> int:
        return int(round(self.control_dt / self.physics_dt))

    @property
    def ticks(self) -> int:
        return int(math.floor(self.duration / self.control_dt + 1e-9)) + 1


@dataclass(frozen=True)
class ScenarioConfig:
    robot: RobotConfig
    law: str
    custom: str | None = None
    waypoint: WaypointConfig = field(default_factory=WaypointConfig)
    consensus: ConsensusConfig = field(default_factory=ConsensusConfig)
    minmax: MinMaxConfig = field(default_factory=MinMaxConfig)
    output: OutputConfig = field(default_factory=OutputConfig)
    timing: TimingConfig = field(default_factory=TimingConfig)
    gains: GainSet = field(default_factory=GainSet)

    def digest(self) -> str:
        return hashlib.sha256(format_config(self).encode("utf-8")).hexdigest()


# ---------------------------------------------------------------- lexing

@dataclass
class _Entry:
    value: Any
    line: int
    column: int


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    if re.fullmatch(r"[+-]?\d+", text):
        return int(text)
    try:
        return float(text)
    except ValueError:
        pass
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "\"'":
        return text[1:-1]
    return text


def _bracket_depth(text: str) -> int:
    return text.count("[") - text.count("]")


def lex(text: str) -> dict[str, dict[str, _Entry]]:
    """Split config text into ``{section: {key: entry}}`` (no type checks)."""
    sections: dict[str, dict[str, _Entry]] = {}
    current: str | None = None
    lines = text.splitlines()
    i = 0
    while i < len(lines):
        raw = lines[i]
        lineno = i + 1
        i += 1
        body = raw.split("#", 1)[0].strip()
        if not body:
            continue
        if body.startswith("["):
            if not body.endswith("]"):
                raise ConfigError("unterminated section header", line=lineno,
                                  column=raw.index("[") + 1, kind="parse")
            name = body[1:-1].strip().lower()
            if not _SECTION_RE.match(name):
                raise ConfigError(f"malformed section name {name!r}", line=lineno,
                                  column=raw.index("[") + 2, kind="parse")
            if name in sections:
                raise ConfigError(f"duplicate section [{name}]", key=name, line=lineno,
                                  column=1, kind="parse")
            sections[name] = {}
            current = name
            continue
        if "=" not in body:
            raise ConfigError("expected 'key = value'", line=lineno, column=len(raw) - len(raw.lstrip()) + 1,
                              kind="parse")
        key_text, value_text = body.split("=", 1)
        key = key_text.strip().lower()
        key_col = raw.index(key_text.strip()) + 1
        if current is None:
            raise ConfigError(f"key {key!r} outside any section", key=key, line=lineno,
                              column=key_col, kind="parse")
        dotted = f"{current}.{key}"
        if not _KEY_RE.match(key):
            raise ConfigError(f"malformed key {key_text.strip()!r}", key=dotted, line=lineno,
                              column=key_col, kind="parse")
        if key in sections[current]:
            raise ConfigError("duplicate key", key=dotted, line=lineno, column=key_col, kind="parse")
        value_text = value_text.strip()
        value_col = raw.index("=") + 2 + (len(raw[raw.index("=") + 1:]) - len(raw[raw.index("=") + 1:].lstrip()))
        if not value_text:
            raise ConfigError("missing value", key=dotted, line=lineno, column=value_col, kind="parse")
        if value_text.startswith("["):
            while _bracket_depth(value_text) > 0 and i < len(lines):
                value_text += " " + lines[i].split("#", 1)[0].strip()
                i += 1
            if _bracket_depth(value_text) != 0:
                raise ConfigError("unbalanced brackets", key=dotted, line=lineno,
                                  column=value_col, kind="parse")
            try:
                value = json.loads(value_text)
            except json.JSONDecodeError as exc:
                col = value_col + exc.colno - 1 if exc.lineno == 1 else None
                raise ConfigError(f"malformed list: {exc.msg}", key=dotted, line=lineno,
                                  column=col, kind="parse") from None
        else:
            value = _parse_scalar(value_text)
        sections[current][key] = _Entry(value, lineno, value_col)
    return sections


# ---------------------------------------------------------------- typing

class _Section:
    """Typed accessors over one lexed section; tracks which keys were read."""

    def __init__(self, name: str, entries: dict[str, _Entry] | None):
        self.name = name
        self.entries = entries or {}
        self.used: set[str] = set()

    def error(self, key: str, message: str) -> ConfigError:
        entry = self.entries.get(key)
        return ConfigError(message, key=f"{self.name}.{key}",
                           line=entry.line if entry else None,
                           column=entry.column if entry else None)

    def has(self, key: str) -> bool:
        return key in self.entries

    def raw(self, key: str, default=None):
        self.used.add(key)
        return self.entries[key].value if key in self.entries else default

    def require(self, key: str):
        if key not in self.entries:
            raise ConfigError("required key missing", key=f"{self.name}.{key}")
        return self.raw(key)

    def number(self, key: str, default: float | None = None, *, required: bool = False) -> float:
        value = self.require(key) if required else self.raw(key, default)
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise self.error(key, f"expected a number, got {value!r}")
        if not math.isfinite(value):
            raise self.error(key, "must be finite")
        return float(value)

    def integer(self, key: str, default: int | None = None, *, required: bool = False) -> int:
        value = self.require(key) if required else self.raw(key, default)
        if isinstance(value, bool) or not isinstance(value, int):
            raise self.error(key, f"expected an integer, got {value!r}")
        return value

    def boolean(self, key: str, default: bool) -> bool:
        value = self.raw(key, default)
        if not isinstance(value, bool):
            raise self.error(key, f"expected true or false, got {value!r}")
        return value

    def choice(self, key: str, options, default: str | None = None, *, required: bool = False) -> str:
        value = self.require(key) if required else self.raw(key, default)
        if not isinstance(value, str) or value.lower() not in options:
            raise self.error(key, f"expected one of {', '.join(options)}, got {value!r}")
        return value.lower()

    def matrix(self, key: str, *, rows: int | None = None, cols: int | None = None) -> tuple:
        value = self.raw(key)
        if not isinstance(value, list) or not all(isinstance(r, list) for r in value):
            raise self.error(key, "expected a list of rows")
        out = []
        for row in value:
            if cols is not None and len(row) != cols:
                raise self.error(key, f"each row needs {cols} entries")
            vals = []
            for x in row:
                if isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x):
                    raise self.error(key, f"non-numeric entry {x!r}")
                vals.append(float(x))
            out.append(tuple(vals))
        if rows is not None and len(out) != rows:
            raise self.error(key, f"expected {rows} rows, got {len(out)}")
        return tuple(out)

    def vector(self, key: str, length: int) -> tuple:
        value = self.raw(key)
        if not isinstance(value, list) or len(value) != length:
            raise self.error(key, f"expected a list of {length} numbers")
        if any(isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in value):
            raise self.error(key, "entries must be finite numbers")
        return tuple(float(x) for x in value)

    def check_unknown(self) -> None:
        for key in self.entries:
            if key not in self.used:
                raise self.error(key, "unknown key")


def _validate_graph_matrix(sec: _Section, kind: str, mat: tuple, directed: bool) -> None:
    m = np.array(mat)
    n = m.shape[0]
    if kind == "adjacency":
        for i in range(n):
            if m[i, i] != 0:
                raise sec.error("matrix", f"adjacency diagonal must be zero (row {i + 1})")
            for j in range(n):
                if m[i, j] < 0:
                    raise sec.error("matrix", f"adjacency entries must be non-negative (row {i + 1})")
        weights = m
    else:
        for i in range(n):
            for j in range(n):
                if i != j and m[i, j] > 0:
                    raise sec.error("matrix", f"laplacian off-diagonal entries must be non-positive "
                                              f"(row {i + 1})")
            # decimal weights such as 0.1 are not exact in binary; allow rounding only
            if abs(math.fsum(m[i])) > 1e-12 * max(1.0, float(np.abs(m[i]).max())):
                raise sec.error("matrix", f"laplacian row {i + 1} sums to {math.fsum(m[i]):g}, not 0")
        weights = -m + np.diag(np.diag(m))
    if not directed and not np.array_equal(weights, weights.T):
        raise sec.error("matrix", "matrix is not symmetric; set directed = true for a digraph")


GAIN_KEYS = ("altitude", "heading", "roll", "pitch", "pos_x", "pos_y")
SECTIONS = ("robot", "control", "control.waypoint", "control.consensus", "control.minmax",
            "output", "timing", "gains")


def parse_config(text: str) -> ScenarioConfig:
    """Parse and fully validate scenario text; raises :class:`ConfigError`."""
    lexed = lex(text)
    for name in lexed:
        if name not in SECTIONS:
            first = next(iter(lexed[name].values()), None)
            raise ConfigError(f"unknown section [{name}]", key=name,
                              line=first.line if first else None)
    sec = {name: _Section(name, lexed.get(name)) for name in SECTIONS}

    r = sec["robot"]
    count = r.integer("count", required=True)
    if count < 1:
        raise r.error("count", "robot count must be >= 1")
    initial = r.choice("initial", ("random", "explicit"),
                       "explicit" if r.has("positions") else "random")
    positions = None
    if initial == "explicit":
        if not r.has("positions"):
            raise ConfigError("explicit initial positions need a positions list", key="robot.positions")
        positions = r.matrix("positions", rows=count, cols=3)
    elif r.has("positions"):
        raise r.error("positions", "positions given but initial = random")
    seed = r.integer("seed", 0)
    if seed < 0:
        raise r.error("seed", "seed must be non-negative")
    box = RobotConfig.box
    if r.has("box"):
        box = r.matrix("box", rows=3, cols=2)
        if any(lo > hi for lo, hi in box):
            raise r.error("box", "each box row must be [low, high] with low <= high")
    model = r.choice("model", MODELS, "quadrotor")
    robot = RobotConfig(count, initial, positions, seed, box, model)

    c = sec["control"]
    law = c.choice("law", LAWS, required=True)
    custom = c.raw("custom")
    if custom is not None and not isinstance(custom, str):
        raise c.error("custom", "custom law must be a name or module:function")
    if law == "custom" and custom is None:
        raise ConfigError("law = custom requires a custom entry", key="control.custom")

    w = sec["control.waypoint"]
    waypoints = ()
    if w.has("waypoints"):
        value = w.raw("waypoints")
        if not isinstance(value, list) or not value:
            raise w.error("waypoints", "expected a non-empty list of [x, y] or [x, y, z]")
        pts = []
        for pt in value:
            if not isinstance(pt, list) or len(pt) not in (2, 3) or any(
                    isinstance(x, bool) or not isinstance(x, (int, float)) or not math.isfinite(x) for x in pt):
                raise w.error("waypoints", f"bad waypoint {pt!r}")
            pts.append(tuple(float(x) for x in pt))
        waypoints = tuple(pts)
    waypoint = WaypointConfig(
        p_gain=w.number("p_gain", 1.0), d_gain=w.number("d_gain", 1.0), waypoints=waypoints,
        capture_radius=w.number("capture_radius", 0.1), capture_speed=w.number("capture_speed", 0.2))
    for key in ("p_gain", "d_gain"):
        if getattr(waypoint, key) < 0:
            raise w.error(key, "gain must be non-negative")
    for key in ("capture_radius", "capture_speed"):
        if not getattr(waypoint, key) > 0:
            raise w.error(key, "must be positive")

    k = sec["control.consensus"]
    leader = k.integer("leader", 0)
    if not 0 <= leader <= count:
        raise k.error("leader", f"leader must be 0 (leaderless) or 1..{count}")
    kind = k.choice("matrix_kind", ("adjacency", "laplacian"), "laplacian")
    directed = k.boolean("directed", False)
    matrix = None
    if k.has("matrix"):
        matrix = k.matrix("matrix", rows=count, cols=count)
        _validate_graph_matrix(k, kind, matrix, directed)
    elif law == "consensus":
        raise ConfigError("consensus law needs a matrix", key="control.consensus.matrix")
    beta = k.number("beta", 1.0)
    if not beta > 0:
        raise k.error("beta", "beta must be positive")
    consensus = ConsensusConfig(leader, kind, matrix, beta, directed)

    mm = sec["control.minmax"]
    root = mm.integer("root", 1)
    if not 1 <= root <= count:
        raise mm.error("root", f"root must be in 1..{count}")
    bounds = None
    if mm.has("bounds"):
        bounds = mm.vector("bounds", count)
        if any(b < 0 for b in bounds):
            raise mm.error("bounds", "bounds must be non-negative")
    elif law == "minmax":
        raise ConfigError("minmax law needs per-agent bounds", key="control.minmax.bounds")
    tree = None
    raw_tree = mm.raw("tree", "auto")
    if raw_tree != "auto":
        if not isinstance(raw_tree, list) or any(
                not isinstance(e, list) or len(e) != 2 or not all(isinstance(x, int) and not isinstance(x, bool)
                                                                  for x in e) for e in raw_tree):
            raise mm.error("tree", "expected auto or a list of [child, parent] pairs")
        tree = tuple(tuple(e) for e in raw_tree)
        children = [e[0] for e in tree]
        if any(not 1 <= x <= count for e in tree for x in e):
            raise mm.error("tree", f"tree agents must be in 1..{count}")
        if len(set(children)) != len(children) or root in children or len(children) != count - 1:
            raise mm.error("tree", "every non-root agent needs exactly one parent")
    mkind = mm.choice("matrix_kind", ("adjacency", "laplacian"), "adjacency")
    mdirected = mm.boolean("directed", False)
    mmatrix = None
    if mm.has("matrix"):
        mmatrix = mm.matrix("matrix", rows=count, cols=count)
        _validate_graph_matrix(mm, mkind, mmatrix, mdirected)
    deadband = mm.number("deadband", 0.05)
    if deadband < 0:
        raise mm.error("deadband", "deadband must be non-negative")
    magnitude = mm.choice("magnitude", ("absolute", "relative"), "absolute")
    root_mode = mm.choice("root_mode", ("hold", "waypoint"), "hold")
    minmax = MinMaxConfig(root, bounds, tree, mkind, mmatrix, mdirected, deadband, magnitude, root_mode)

    if (law == "waypoint" or (law == "minmax" and root_mode == "waypoint")) and not waypoints:
        raise ConfigError("waypoint following needs waypoints", key="control.waypoint.waypoints")

    o = sec["output"]
    output = OutputConfig(*(o.boolean(f.name, f.default) for f in dataclasses.fields(OutputConfig)))

    t = sec["timing"]
    timing = TimingConfig(t.number("duration", 10.0), t.number("physics_dt", 0.001),
                          t.number("control_dt", 0.01))
    if not timing.duration > 0:
        raise t.error("duration", "duration must be positive")
    if not timing.physics_dt > 0:
        raise t.error("physics_dt", "physics_dt must be positive")
    if not timing.control_dt >= timing.physics_dt:
        raise t.error("control_dt", "control_dt must be >= physics_dt")
    if abs(timing.control_dt / timing.physics_dt - timing.substeps) > 1e-9 * timing.substeps:
        raise t.error("control_dt", "control_dt must be an integer multiple of physics_dt")
    if timing.physics_dt > 1e-3 * (1 + 1e-12) and model == "quadrotor":
        raise t.error("physics_dt", "quadrotor physics_dt must be <= 0.001 s")

    g = sec["gains"]
    defaults = GainSet()
    pd = {}
    for name in GAIN_KEYS:
        base = getattr(defaults, name)
        kp, kd = g.number(f"{name}_kp", base.kp), g.number(f"{name}_kd", base.kd)
        if kp < 0 or kd < 0:
            raise g.error(f"{name}_kp" if kp < 0 else f"{name}_kd", "gain must be non-negative")
        pd[name] = PdGains(kp, kd)
    rotor_bias = None
    if g.has("rotor_bias"):
        rotor_bias = g.number("rotor_bias")
        if rotor_bias < 0:
            raise g.error("rotor_bias", "rotor_bias must be non-negative")
    tilt_clamp = g.number("tilt_clamp", defaults.tilt_clamp)
    if not 0 < tilt_clamp <= 0.5:
        raise g.error("tilt_clamp", "tilt_clamp must lie in (0, 0.5]")
    accel_clamp = g.number("accel_clamp", defaults.accel_clamp)
    if not accel_clamp > 0:
        raise g.error("accel_clamp", "accel_clamp must be positive")
    gains = GainSet(**pd, rotor_bias=rotor_bias, tilt_clamp=tilt_clamp, accel_clamp=accel_clamp,
                    drag_feedforward=g.boolean("drag_feedforward", defaults.drag_feedforward))

    for s in sec.values():
        s.check_unknown()

    cfg = ScenarioConfig(robot, law, custom, waypoint, consensus, minmax, output, timing, gains)
    if law == "minmax":
        _validate_minmax(cfg, mm)
    return cfg


def _validate_minmax(cfg: ScenarioConfig, sec: _Section) -> None:
    from .engine import build_tree  # local: engine imports this module

    try:
        tree = build_tree(cfg)
    except Exception as exc:
        raise sec.error("tree" if cfg.minmax.tree else "matrix", str(exc)) from None
    bounds = cfg.minmax.bounds
    for child, parent in tree.edges:
        if not bounds[child] > bounds[parent]:
            raise sec.error("bounds", f"agent {child + 1} bound {bounds[child]:g} must exceed its "
                                      f"parent {parent + 1} bound {bounds[parent]:g}")


# ---------------------------------------------------------------- printing

def _fmt(x) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, float):
        return repr(x)
    if isinstance(x, (tuple, list)):
        return "[" + ", ".join(_fmt(v) for v in x) + "]"
    return str(x)


def format_config(cfg: ScenarioConfig) -> str:
    """Canonical text for ``cfg``; :func:`parse_config` of it returns an equal value."""
    out: list[str] = []

    def section(name: str, items: list[tuple[str, Any]]):
        out.append(f"[{name}]")
        for key, value in items:
            if value is not None:
                out.append(f"{key} = {_fmt(value)}")
        out.append("")

    r = cfg.robot
    section("robot", [("count", r.count), ("initial", r.initial), ("positions", r.positions),
                      ("seed", r.seed), ("box", r.box), ("model", r.model)])
    section("control", [("law", cfg.law), ("custom", cfg.custom)])
    w = cfg.waypoint
    section("control.waypoint", [("p_gain", w.p_gain), ("d_gain", w.d_gain),
                                 ("waypoints", w.waypoints or None),
                                 ("capture_radius", w.capture_radius), ("capture_speed", w.capture_speed)])
    k = cfg.consensus
    section("control.consensus", [("leader", k.leader), ("matrix_kind", k.matrix_kind),
                                  ("matrix", k.matrix), ("beta", k.beta), ("directed", k.directed)])
    m = cfg.minmax
    section("control.minmax", [("root", m.root), ("bounds", m.bounds),
                               ("tree", "auto" if m.tree is None else m.tree),
                               ("matrix_kind", m.matrix_kind), ("matrix", m.matrix),
                               ("directed", m.directed), ("deadband", m.deadband),
                               ("magnitude", m.magnitude), ("root_mode", m.root_mode)])
    section("output", [(f.name, getattr(cfg.output, f.name)) for f in dataclasses.fields(OutputConfig)])
    t = cfg.timing
    section("timing", [("duration", t.duration), ("physics_dt", t.physics_dt), ("control_dt", t.control_dt)])
    g = cfg.gains
    items = []
    for name in GAIN_KEYS:
        items += [(f"{name}_kp", getattr(g, name).kp), (f"{name}_kd", getattr(g, name).kd)]
    items += [("rotor_bias", g.rotor_bias), ("tilt_clamp", g.tilt_clamp), ("accel_clamp", g.accel_clamp),
              ("drag_feedforward", g.drag_feedforward)]
    section("gains", items)
    return "\n".join(out)


def load_config(path) -> ScenarioConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
