"""Rotations between the Earth frame {E} (z up), the body frame {B} and the
yaw-only frame {B'} whose horizontal plane is parallel to Earth's.

Convention: ``apply(rot_z(yaw), v_E)`` gives the coordinates of ``v_E`` in
{B'}; the reverse direction is the transpose. Other modules go through
:func:`earth_to_bprime` / :func:`bprime_to_earth` so this is set in one place.
"""

from __future__ import annotations

import math

import numpy as np


def rot_z(yaw: float) -> np.ndarray:
    c, s = math.cos(yaw), math.sin(yaw)
    return np.array([[c, s, 0.0], [-s, c, 0.0], [0.0, 0.0, 1.0]])


def rot_x(roll: float) -> np.ndarray:
    c, s = math.cos(roll), math.sin(roll)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, s], [0.0, -s, c]])


def rot_y(pitch: float) -> np.ndarray:
    c, s = math.cos(pitch), math.sin(pitch)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def compose(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a @ b


def apply(r: np.ndarray, v) -> np.ndarray:
    return r @ np.asarray(v, dtype=float)


def transpose(r: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(r.T)


def earth_to_bprime(v_earth, yaw: float) -> np.ndarray:
    return apply(rot_z(yaw), v_earth)


def bprime_to_earth(v_bprime, yaw: float) -> np.ndarray:
    return apply(transpose(rot_z(yaw)), v_bprime)


def wrap_angle(angle: float) -> float:
    """Wrap to (-pi, pi]."""
    wrapped = math.remainder(angle, 2.0 * math.pi)
    if wrapped == -math.pi:
        return math.pi
    return wrapped


def is_rotation(r: np.ndarray, tol: float = 1e-9) -> bool:
    r = np.asarray(r, dtype=float)
    if r.shape != (3, 3) or not np.all(np.isfinite(r)):
        return False
    ortho = np.max(np.abs(r.T @ r - np.eye(3))) <= tol
    return bool(ortho and abs(np.linalg.det(r) - 1.0) <= tol)
