"""Rigid-body quadrotor plant: rotor thrust, mixer, Newton/Euler dynamics and
a fixed-step semi-implicit Euler integrator.

Sign bookkeeping. {E} is z-up. Thrust is carried as a non-negative magnitude
``T`` acting along the body "up" axis (-z of the z-down body frame). The
force seen in {B'} for roll ``r`` and pitch ``p`` is ``Rx(r) Ry(p) [0, 0, T]``
= ``(T sin p, T sin r cos p, T cos r cos p)``, which is rotated to {E}
through yaw and opposed by gravity ``-g`` on the Earth z axis. The mixer's
first row (all ``-b``) therefore appears here as ``T = b * sum(w_i^2)``.

Attitude kinematics use the small-angle approximation: Euler-angle rates
equal the body rates component-wise (roll <- wx, pitch <- wy, yaw <- wz).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .errors import InfeasibleCommand, NumericDivergence
from .frames import wrap_angle

EPS_ALLOC = 1e-9
DIVERGENCE_LIMIT = 1e9


def _default_inertia() -> np.ndarray:
    return np.diag([0.0347, 0.0459, 0.0977])


def _default_drag() -> np.ndarray:
    return np.diag([0.1, 0.1, 0.15])


@dataclass(frozen=True, eq=False)
class QuadParams:
    m: float = 1.5
    g: float = 9.81
    J: np.ndarray = field(default_factory=_default_inertia)
    b: float = 1e-5
    k: float = 2e-7
    d: float = 0.2
    drag: np.ndarray = field(default_factory=_default_drag)
    omega_max: float = 1200.0
    dt_max: float = 1e-3

    def __post_init__(self):
        J = np.array(self.J, dtype=float)
        drag = np.array(self.drag, dtype=float)
        object.__setattr__(self, "J", J)
        object.__setattr__(self, "drag", drag)
        for name in ("m", "g", "b", "k", "d", "omega_max", "dt_max"):
            if not getattr(self, name) > 0:
                raise ValueError(f"QuadParams.{name} must be positive")
        if J.shape != (3, 3) or not np.allclose(J, J.T) or np.any(np.linalg.eigvalsh(J) <= 0):
            raise ValueError("QuadParams.J must be symmetric positive definite")
        if drag.shape != (3, 3) or np.any(drag != np.diag(np.diag(drag))) or np.any(np.diag(drag) < 0):
            raise ValueError("QuadParams.drag must be diagonal and non-negative")
        object.__setattr__(self, "_J_inv", np.linalg.inv(J))

    @property
    def J_inv(self) -> np.ndarray:
        return self._J_inv

    @property
    def max_thrust(self) -> float:
        return 4.0 * self.b * self.omega_max ** 2

    @property
    def hover_thrust(self) -> float:
        return self.m * self.g


class WrenchCommand(NamedTuple):
    thrust: float
    tau_x: float
    tau_y: float
    tau_z: float

    @property
    def torque(self) -> np.ndarray:
        return np.array([self.tau_x, self.tau_y, self.tau_z])


@dataclass(frozen=True, eq=False)
class RotorSpeeds:
    speeds: np.ndarray
    saturated: bool = False

    def __post_init__(self):
        object.__setattr__(self, "speeds", np.asarray(self.speeds, dtype=float))


@dataclass(frozen=True, eq=False)
class QuadState:
    position: np.ndarray
    velocity: np.ndarray
    attitude: np.ndarray  # roll, pitch, yaw
    rates: np.ndarray  # body rates wx, wy, wz
    rotors: np.ndarray

    def __post_init__(self):
        for name in ("position", "velocity", "attitude", "rates", "rotors"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))

    @classmethod
    def at_rest(cls, position=(0.0, 0.0, 0.0), yaw: float = 0.0) -> "QuadState":
        return cls(np.array(position, dtype=float), np.zeros(3), np.array([0.0, 0.0, yaw]),
                   np.zeros(3), np.zeros(4))

    @property
    def roll(self) -> float:
        return float(self.attitude[0])

    @property
    def pitch(self) -> float:
        return float(self.attitude[1])

    @property
    def yaw(self) -> float:
        return float(self.attitude[2])

    def is_finite(self) -> bool:
        return all(np.all(np.isfinite(getattr(self, n)))
                   for n in ("position", "velocity", "attitude", "rates", "rotors"))


def rotor_thrust(omega: float, b: float) -> float:
    return b * omega * omega


def mixer_forward(rotors, params: QuadParams) -> WrenchCommand:
    speeds = rotors.speeds if isinstance(rotors, RotorSpeeds) else rotors
    u1, u2, u3, u4 = (float(w) * float(w) for w in speeds)
    b, k, d = params.b, params.k, params.d
    return WrenchCommand(
        thrust=b * (u1 + u2 + u3 + u4),
        tau_x=d * b * (u4 - u2),
        tau_y=d * b * (u1 - u3),
        tau_z=k * (u1 + u3 - u2 - u4),
    )


def _solve_squared(cmd: WrenchCommand, params: QuadParams) -> tuple[float, float, float, float]:
    # closed-form inverse of the 4x4 mixer
    b, k, d = params.b, params.k, params.d
    s13 = 0.5 * (cmd.thrust / b + cmd.tau_z / k)
    s24 = 0.5 * (cmd.thrust / b - cmd.tau_z / k)
    dx = cmd.tau_x / (d * b)
    dy = cmd.tau_y / (d * b)
    return (0.5 * (s13 + dy), 0.5 * (s24 - dx), 0.5 * (s13 - dy), 0.5 * (s24 + dx))


def mixer_inverse(cmd: WrenchCommand, params: QuadParams) -> RotorSpeeds:
    """Rotor speeds realizing ``cmd``.

    Raises :class:`InfeasibleCommand` if any squared speed is below
    ``-EPS_ALLOC``; speeds above ``omega_max`` are clamped and flagged.
    """
    squared = _solve_squared(cmd, params)
    if min(squared) < -EPS_ALLOC:
        raise InfeasibleCommand(squared)
    speeds = np.sqrt(np.maximum(0.0, np.array(squared)))
    saturated = bool(np.any(speeds > params.omega_max))
    return RotorSpeeds(np.minimum(speeds, params.omega_max), saturated)


def allocate(cmd: WrenchCommand, params: QuadParams) -> RotorSpeeds:
    """Like :func:`mixer_inverse` but never fails.

    Thrust is clamped to ``[0, max_thrust]`` and kept; torques are scaled
    toward zero by the largest factor in [0, 1] that keeps every squared
    speed inside ``[0, omega_max**2]``.
    """
    thrust = min(max(cmd.thrust, 0.0), params.max_thrust)
    base = _solve_squared(WrenchCommand(thrust, 0.0, 0.0, 0.0), params)
    full = _solve_squared(WrenchCommand(thrust, cmd.tau_x, cmd.tau_y, cmd.tau_z), params)
    upper = params.omega_max ** 2
    scale = 1.0
    for u0, u1 in zip(base, full):
        du = u1 - u0
        if u1 < 0.0 and du < 0.0:
            scale = min(scale, u0 / -du)
        elif u1 > upper and du > 0.0:
            scale = min(scale, (upper - u0) / du)
    scale = max(scale, 0.0)
    squared = [u0 + scale * (u1 - u0) for u0, u1 in zip(base, full)]
    speeds = np.minimum(np.sqrt(np.maximum(0.0, squared)), params.omega_max)
    return RotorSpeeds(speeds, saturated=scale < 1.0 or thrust != cmd.thrust)


def translational_derivative(state: QuadState, thrust: float, params: QuadParams) -> np.ndarray:
    roll, pitch, yaw = (float(a) for a in state.attitude)
    f_bp = (thrust * math.sin(pitch),
            thrust * math.sin(roll) * math.cos(pitch),
            thrust * math.cos(roll) * math.cos(pitch))
    c, s = math.cos(yaw), math.sin(yaw)
    force = np.array([c * f_bp[0] - s * f_bp[1], s * f_bp[0] + c * f_bp[1], f_bp[2]])
    drag = params.drag @ state.velocity
    return (force - drag) / params.m - np.array([0.0, 0.0, params.g])


def rotational_derivative(state: QuadState, torque, params: QuadParams) -> np.ndarray:
    w = state.rates
    return params.J_inv @ (-np.cross(w, params.J @ w) + np.asarray(torque, dtype=float))


def _check_finite(state: QuadState) -> None:
    for name in ("position", "velocity", "attitude", "rates"):
        arr = getattr(state, name)
        if not np.all(np.isfinite(arr)) or np.any(np.abs(arr) > DIVERGENCE_LIMIT):
            raise NumericDivergence(f"plant {name} diverged: {arr.tolist()}")


def integrate(state: QuadState, cmd: WrenchCommand, dt: float, steps: int,
              params: QuadParams) -> QuadState:
    """Hold ``cmd`` for ``steps`` semi-implicit Euler steps of size ``dt``.

    The command is allocated to rotors once; the realized wrench (after
    saturation) drives the rigid body. Scalar math keeps every agent's
    arithmetic identical regardless of how many agents are simulated.
    """
    if not 0.0 < dt <= params.dt_max * (1.0 + 1e-12):
        raise ValueError(f"dt={dt} outside (0, {params.dt_max}]")
    rotors = allocate(cmd, params)
    thrust, tx, ty, tz = mixer_forward(rotors, params)

    m, g = params.m, params.g
    bx, by, bz = (float(v) for v in np.diag(params.drag))
    J = [float(v) for v in params.J.ravel()]
    Ji = [float(v) for v in params.J_inv.ravel()]
    px, py, pz = (float(v) for v in state.position)
    vx, vy, vz = (float(v) for v in state.velocity)
    roll, pitch, yaw = (float(v) for v in state.attitude)
    wx, wy, wz = (float(v) for v in state.rates)

    for _ in range(steps):
        sr, cr = math.sin(roll), math.cos(roll)
        sp, cp = math.sin(pitch), math.cos(pitch)
        sy, cy = math.sin(yaw), math.cos(yaw)
        fx, fy, fz = thrust * sp, thrust * sr * cp, thrust * cr * cp
        ax = (cy * fx - sy * fy - bx * vx) / m
        ay = (sy * fx + cy * fy - by * vy) / m
        az = (fz - bz * vz) / m - g

        hx = J[0] * wx + J[1] * wy + J[2] * wz
        hy = J[3] * wx + J[4] * wy + J[5] * wz
        hz = J[6] * wx + J[7] * wy + J[8] * wz
        mx = tx - (wy * hz - wz * hy)
        my = ty - (wz * hx - wx * hz)
        mz = tz - (wx * hy - wy * hx)
        dwx = Ji[0] * mx + Ji[1] * my + Ji[2] * mz
        dwy = Ji[3] * mx + Ji[4] * my + Ji[5] * mz
        dwz = Ji[6] * mx + Ji[7] * my + Ji[8] * mz

        vx += dt * ax
        vy += dt * ay
        vz += dt * az
        px += dt * vx
        py += dt * vy
        pz += dt * vz
        wx += dt * dwx
        wy += dt * dwy
        wz += dt * dwz
        roll += dt * wx
        pitch += dt * wy
        yaw += dt * wz
        if yaw > math.pi or yaw <= -math.pi:
            yaw = wrap_angle(yaw)

    out = QuadState(np.array([px, py, pz]), np.array([vx, vy, vz]),
                    np.array([roll, pitch, yaw]), np.array([wx, wy, wz]), rotors.speeds)
    _check_finite(out)
    return out


def step_plant(state: QuadState, cmd: WrenchCommand, dt: float, params: QuadParams) -> QuadState:
    return integrate(state, cmd, dt, 1, params)
