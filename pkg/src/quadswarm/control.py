"""Cascaded PD inner loops that let an outer law treat each quadrotor as a
double integrator driven by an acceleration command in {E}.

Per control tick: altitude PD -> thrust; (position PD or outer acceleration
command) -> tilt setpoints via the small-angle map in {B'} -> roll/pitch PD
-> tau_x, tau_y; heading PD -> tau_z.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dynamics import QuadParams, QuadState, WrenchCommand
from .errors import ThrustTooLow
from .frames import wrap_angle

POSITION_HOLD = "position"
ACCELERATION = "acceleration"
THRUST_MIN = 0.1


@dataclass(frozen=True)
class PdGains:
    kp: float
    kd: float

    def __post_init__(self):
        if self.kp < 0 or self.kd < 0:
            raise ValueError("PD gains must be non-negative")


@dataclass(frozen=True)
class GainSet:
    altitude: PdGains = PdGains(8.0, 5.0)
    heading: PdGains = PdGains(2.0, 0.5)
    roll: PdGains = PdGains(20.0, 2.0)
    pitch: PdGains = PdGains(20.0, 2.0)
    pos_x: PdGains = PdGains(1.0, 1.0)
    pos_y: PdGains = PdGains(1.0, 1.0)
    # None: hover feedforward m*g. Otherwise the thrust 4*b*bias^2 of a rotor-speed bias.
    rotor_bias: float | None = None
    tilt_clamp: float = 0.3
    accel_clamp: float = 3.0
    drag_feedforward: bool = True

    def __post_init__(self):
        if not 0.0 < self.tilt_clamp <= 0.5:
            raise ValueError("tilt_clamp must lie in (0, 0.5]")
        if not self.accel_clamp > 0:
            raise ValueError("accel_clamp must be positive")
        if self.rotor_bias is not None and self.rotor_bias < 0:
            raise ValueError("rotor_bias must be non-negative")

    def hover_thrust(self, params: QuadParams) -> float:
        if self.rotor_bias is None:
            return params.m * params.g
        return 4.0 * params.b * self.rotor_bias ** 2


@dataclass(frozen=True, eq=False)
class Setpoint:
    position: np.ndarray
    velocity: np.ndarray = field(default_factory=lambda: np.zeros(3))
    yaw: float = 0.0
    accel: np.ndarray = field(default_factory=lambda: np.zeros(3))
    mode: str = POSITION_HOLD
    yaw_rate: float = 0.0

    def __post_init__(self):
        if self.mode not in (POSITION_HOLD, ACCELERATION):
            raise ValueError(f"unknown setpoint mode {self.mode!r}")
        for name in ("position", "velocity", "accel"):
            arr = np.asarray(getattr(self, name), dtype=float)
            if arr.shape != (3,) or not np.all(np.isfinite(arr)):
                raise ValueError(f"setpoint {name} must be a finite 3-vector")
            object.__setattr__(self, name, arr)

    @classmethod
    def hold(cls, position, yaw: float = 0.0) -> "Setpoint":
        return cls(np.asarray(position, dtype=float), yaw=yaw)

    @classmethod
    def acceleration(cls, accel, altitude: float, yaw: float = 0.0) -> "Setpoint":
        return cls(np.array([0.0, 0.0, altitude]), yaw=yaw,
                   accel=np.asarray(accel, dtype=float), mode=ACCELERATION)


def _clamp(x: float, lo: float, hi: float) -> float:
    return lo if x < lo else hi if x > hi else x


def altitude_loop(state: QuadState, sp: Setpoint, gains: GainSet, params: QuadParams) -> float:
    g = gains.altitude
    thrust = (g.kp * (sp.position[2] - state.position[2])
              + g.kd * (sp.velocity[2] - state.velocity[2])
              + gains.hover_thrust(params))
    return _clamp(float(thrust), 0.0, params.max_thrust)


def heading_loop(state: QuadState, sp: Setpoint, gains: GainSet) -> float:
    g = gains.heading
    return g.kp * wrap_angle(sp.yaw - state.yaw) + g.kd * (sp.yaw_rate - float(state.rates[2]))


def attitude_loop(state: QuadState, pitch_cmd: float, roll_cmd: float,
                  gains: GainSet) -> tuple[float, float]:
    """Roll and pitch PD; returns ``(tau_x, tau_y)``. Commanded rates are zero."""
    tau_x = gains.roll.kp * (roll_cmd - state.roll) + gains.roll.kd * (0.0 - float(state.rates[0]))
    tau_y = gains.pitch.kp * (pitch_cmd - state.pitch) + gains.pitch.kd * (0.0 - float(state.rates[1]))
    return tau_x, tau_y


def position_loop(state: QuadState, sp: Setpoint, gains: GainSet) -> np.ndarray:
    # computed in {E}: feedback position and velocity are Earth-frame
    lim = gains.accel_clamp
    ax = gains.pos_x.kp * (sp.position[0] - state.position[0]) + gains.pos_x.kd * (sp.velocity[0] - state.velocity[0])
    ay = gains.pos_y.kp * (sp.position[1] - state.position[1]) + gains.pos_y.kd * (sp.velocity[1] - state.velocity[1])
    return np.array([_clamp(float(ax), -lim, lim), _clamp(float(ay), -lim, lim), 0.0])


def accel_to_attitude(accel, thrust: float, m: float, yaw: float, tilt_clamp: float,
                      thrust_min: float = THRUST_MIN) -> tuple[float, float]:
    """Small-angle map from a horizontal {E} acceleration to ``(pitch, roll)``."""
    if thrust <= thrust_min:
        raise ThrustTooLow(f"thrust {thrust:.4g} N <= {thrust_min} N")
    ax, ay = float(accel[0]), float(accel[1])
    c, s = math.cos(yaw), math.sin(yaw)
    ax_b, ay_b = c * ax + s * ay, -s * ax + c * ay
    pitch = _clamp(m / thrust * ax_b, -tilt_clamp, tilt_clamp)
    roll = _clamp(m / thrust * ay_b, -tilt_clamp, tilt_clamp)
    return pitch, roll


def commanded_acceleration(state: QuadState, sp: Setpoint, gains: GainSet,
                           params: QuadParams) -> np.ndarray:
    """Horizontal acceleration handed to the tilt map, including drag feedforward."""
    if sp.mode == ACCELERATION:
        lim = gains.accel_clamp
        accel = np.array([_clamp(float(sp.accel[0]), -lim, lim), _clamp(float(sp.accel[1]), -lim, lim), 0.0])
    else:
        accel = position_loop(state, sp, gains)
    if gains.drag_feedforward:
        accel = accel + (params.drag @ state.velocity) / params.m * np.array([1.0, 1.0, 0.0])
    return accel


def controller_tick(state: QuadState, sp: Setpoint, gains: GainSet, params: QuadParams) -> WrenchCommand:
    thrust = altitude_loop(state, sp, gains, params)
    accel = commanded_acceleration(state, sp, gains, params)
    try:
        pitch_cmd, roll_cmd = accel_to_attitude(accel, thrust, params.m, state.yaw, gains.tilt_clamp)
    except ThrustTooLow:
        pitch_cmd = roll_cmd = 0.0
    tau_x, tau_y = attitude_loop(state, pitch_cmd, roll_cmd, gains)
    tau_z = heading_loop(state, sp, gains)
    return WrenchCommand(thrust, tau_x, tau_y, tau_z)
