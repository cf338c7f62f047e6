import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from quadswarm.frames import (apply, bprime_to_earth, compose, earth_to_bprime, is_rotation, rot_x, rot_y,
                              rot_z, transpose, wrap_angle)

angles = st.floats(-20.0, 20.0, allow_nan=False)


def test_rot_z_examples():
    assert np.array_equal(rot_z(0.0), np.eye(3))
    np.testing.assert_allclose(rot_z(math.pi / 2), [[0, 1, 0], [-1, 0, 0], [0, 0, 1]], atol=1e-15)
    np.testing.assert_allclose(compose(rot_z(0.3), rot_z(0.5)), rot_z(0.8), atol=1e-15)


def test_rot_x_rot_y_examples():
    assert np.array_equal(rot_x(0.0), np.eye(3))
    np.testing.assert_allclose(apply(rot_y(math.pi), (1, 0, 0)), (-1, 0, 0), atol=1e-15)
    np.testing.assert_allclose(compose(rot_x(0.1), rot_x(-0.1)), np.eye(3), atol=1e-12)


def test_apply_compose_transpose():
    assert np.array_equal(apply(np.eye(3), (1, 2, 3)), [1, 2, 3])
    r = rot_z(0.7)
    np.testing.assert_allclose(apply(transpose(r), apply(r, (1, 0, 2))), (1, 0, 2), atol=1e-12)
    assert is_rotation(compose(rot_x(0.1), rot_y(0.2)), tol=1e-12)


def test_bprime_helpers_are_inverse():
    v = np.array([0.3, -1.2, 2.0])
    np.testing.assert_allclose(bprime_to_earth(earth_to_bprime(v, 1.1), 1.1), v, atol=1e-14)
    # {B'} x axis after a quarter yaw lies along Earth +y
    np.testing.assert_allclose(bprime_to_earth((1, 0, 0), math.pi / 2), (0, 1, 0), atol=1e-15)


@settings(max_examples=1000, deadline=None)
@given(angles)
def test_rotations_are_proper(theta):
    for r in (rot_x(theta), rot_y(theta), rot_z(theta)):
        assert is_rotation(r, tol=1e-9)
    np.testing.assert_allclose(transpose(rot_z(theta)), rot_z(-theta), atol=1e-12)


@settings(max_examples=300, deadline=None)
@given(angles, st.lists(st.floats(-1e3, 1e3), min_size=3, max_size=3))
def test_apply_preserves_norm(theta, v):
    r = compose(rot_x(theta), compose(rot_y(0.5 * theta), rot_z(2 * theta)))
    assert abs(np.linalg.norm(apply(r, v)) - np.linalg.norm(v)) <= 1e-9 * max(1.0, np.linalg.norm(v))


@pytest.mark.parametrize("raw, wrapped", [(0.0, 0.0), (math.pi, math.pi), (-math.pi, math.pi),
                                          (3 * math.pi, math.pi), (6.2, 6.2 - 2 * math.pi)])
def test_wrap_angle(raw, wrapped):
    assert wrap_angle(raw) == pytest.approx(wrapped, abs=1e-12)
    assert -math.pi < wrap_angle(raw) <= math.pi
