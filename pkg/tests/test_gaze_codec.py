import math

from hypothesis import given, settings, strategies as st
import mpmath
import numpy as np
import pytest

from supergaze import gaze_codec as gc
from supergaze.errors import DomainError

from helpers import mp_angle_deg

mpmath.mp.dps = 40

yaws = st.floats(-math.pi + 1e-6, math.pi, allow_nan=False)
pitches = st.floats(-math.pi / 2 + 1e-6, math.pi / 2 - 1e-6, allow_nan=False)
vectors = st.tuples(*[st.floats(-10, 10, allow_nan=False)] * 3).filter(lambda v: np.linalg.norm(v) > 1e-3)


def mp_vector(yaw, pitch):
    y, p = mpmath.mpf(yaw), mpmath.mpf(pitch)
    return [mpmath.cos(p) * mpmath.sin(y), mpmath.sin(p), mpmath.cos(p) * mpmath.cos(y)]


class TestAnglesToVector:
    def test_forward_axis(self):
        np.testing.assert_allclose(gc.angles_to_vector(0.0, 0.0), [0, 0, 1])

    def test_right_yaw(self):
        np.testing.assert_allclose(gc.angles_to_vector(math.pi / 2, 0.0), [1, 0, 0], atol=1e-15)

    def test_against_extended_precision(self):
        expected = [float(v) for v in mp_vector(0.7, -0.3)]
        np.testing.assert_allclose(gc.angles_to_vector(0.7, -0.3), expected, rtol=0, atol=1e-15)

    def test_unit_norm(self, rng):
        g = gc.angles_to_vector(rng.uniform(-np.pi, np.pi, 100), rng.uniform(-1.5, 1.5, 100))
        np.testing.assert_allclose(np.linalg.norm(g, axis=-1), 1.0, atol=1e-15)


class TestVectorToAngles:
    def test_forward(self):
        yaw, pitch = gc.vector_to_angles([0, 0, 1])
        assert yaw == 0 and pitch == 0

    def test_pole(self):
        yaw, pitch = gc.vector_to_angles([0, 1, 0])
        assert yaw == 0
        assert pitch == pytest.approx(math.pi / 2)

    def test_backward_yaw_is_pi_not_minus_pi(self):
        yaw, _ = gc.vector_to_angles([-0.0, 0, -1])
        assert yaw == pytest.approx(math.pi)

    def test_zero_norm_raises(self):
        with pytest.raises(DomainError):
            gc.vector_to_angles([0, 0, 0])

    def test_random_round_trip(self, rng):
        g = rng.normal(size=(10_000, 3))
        g /= np.linalg.norm(g, axis=1, keepdims=True)
        keep = np.abs(np.arcsin(g[:, 1])) <= np.pi / 2 - 1e-6
        g = g[keep]
        yaw, pitch = gc.vector_to_angles(g)
        back = gc.angles_to_vector(yaw, pitch)
        np.testing.assert_allclose(back, g, atol=1e-9)
        yaw2, pitch2 = gc.vector_to_angles(back)
        np.testing.assert_allclose(pitch2, pitch, atol=1e-9)
        dyaw = np.angle(np.exp(1j * (yaw2 - yaw)))
        assert np.abs(dyaw).max() < 1e-9

    def test_normalization_idempotent(self, rng):
        g = rng.normal(size=(50, 3)) * 7
        n1 = gc.normalize(g)
        np.testing.assert_allclose(gc.normalize(n1), n1, atol=1e-15)


class TestEncodeDecode:
    @pytest.mark.parametrize("yaw,pitch,expected", [
        (0.0, 0.0, (0.0, 1.0, 0.0)),
        (math.pi, 0.0, (0.0, -1.0, 0.0)),
    ])
    def test_encode_trivial(self, yaw, pitch, expected):
        np.testing.assert_allclose(gc.encode(yaw, pitch), expected, atol=1e-15)

    def test_encode_extended_precision(self):
        expected = [float(mpmath.sin(2)), float(mpmath.cos(2)), float(mpmath.sin(mpmath.mpf("0.4")))]
        np.testing.assert_allclose(gc.encode(2.0, 0.4), expected, rtol=0, atol=1e-16)

    def test_decode_yaw_cases(self):
        assert gc.decode_yaw([0.0, 1.0, 0.0]) == 0.0
        assert gc.decode_yaw([0.0, -1.0, 0.0]) == pytest.approx(math.pi, abs=1e-15)
        t = math.radians(100)
        assert gc.decode_yaw([math.sin(t), math.cos(t), 0]) == pytest.approx(t, abs=1e-9)

    def test_decode_yaw_components_at_100_degrees(self):
        t = math.radians(100)
        s, c, _ = gc.yaw_components([math.sin(t), math.cos(t), 0])
        assert s == pytest.approx(t, abs=1e-12) and c == pytest.approx(t, abs=1e-12)

    def test_decode_yaw_grid(self):
        yaw = np.linspace(-np.pi, np.pi, 3601)[1:]
        out = gc.decode_yaw(np.stack([np.sin(yaw), np.cos(yaw), np.zeros_like(yaw)], -1))
        assert np.abs(out - yaw).max() < 1e-9

    @pytest.mark.parametrize("sp,expected", [(0.0, 0.0), (1.0, math.pi / 2), (1.2, math.pi / 2), (-3.0, -math.pi / 2)])
    def test_decode_pitch(self, sp, expected):
        assert gc.decode_pitch([0, 1, sp]) == pytest.approx(expected)

    def test_decode_clamps_inconsistent_prediction(self):
        yaw, pitch = gc.decode([1.7, -2.0, 0.3])
        assert -math.pi < yaw <= math.pi
        assert np.isfinite(pitch)

    def test_near_seam_stays_near_pi(self):
        # both estimates share the sign of sy, so the blend cannot collapse towards 0
        yaw = gc.decode_yaw([0.0415, -0.95, 0.0])
        assert abs(abs(yaw) - math.pi) < 0.1

    def test_weight_limits(self):
        for t in np.linspace(-0.0099, 0.0099, 21):
            _, _, w = gc.yaw_components(gc.encode(t, 0.0))
            assert w > 0.99
        for centre in (math.pi / 2, -math.pi / 2):
            for t in centre + np.linspace(-0.0099, 0.0099, 21):
                _, _, w = gc.yaw_components(gc.encode(t, 0.0))
                assert w < 0.01

    @settings(max_examples=300, deadline=None)
    @given(yaws, pitches)
    def test_round_trip_property(self, yaw, pitch):
        y, p = gc.decode(gc.encode(yaw, pitch))
        assert abs(np.angle(np.exp(1j * (y - yaw)))) < 1e-6
        assert abs(p - pitch) < 1e-6


class TestAngularError:
    def test_identity(self):
        assert gc.angular_error([0, 0, 1], [0, 0, 1]) == 0.0

    def test_orthogonal(self):
        assert gc.angular_error([1, 0, 0], [0, 1, 0]) == pytest.approx(90.0)

    def test_zero_norm(self):
        with pytest.raises(DomainError):
            gc.angular_error([0, 0, 0], [1, 0, 0])

    def test_against_extended_precision(self, rng):
        a = rng.normal(size=(1000, 3))
        b = rng.normal(size=(1000, 3))
        ours = gc.angular_error(a, b)
        ref = np.array([mp_angle_deg(x, y) for x, y in zip(a, b)])
        assert np.abs(ours - ref).max() < 1e-6

    @settings(max_examples=200, deadline=None)
    @given(vectors, vectors, st.floats(0.01, 100), st.floats(0.01, 100))
    def test_symmetric_and_scale_invariant(self, g, h, a, b):
        e = gc.angular_error(g, h)
        assert 0 <= e <= 180
        assert gc.angular_error(h, g) == pytest.approx(e, abs=1e-9)
        assert gc.angular_error(np.multiply(a, g), np.multiply(b, h)) == pytest.approx(e, abs=1e-9)

    @settings(max_examples=200, deadline=None)
    @given(vectors)
    def test_self_and_antipodal(self, g):
        assert gc.angular_error(g, g) == pytest.approx(0.0, abs=1e-12)
        assert gc.angular_error(g, np.negative(g)) == pytest.approx(180.0, abs=1e-12)


def test_encode_broadcasts_scalar_pitch():
    trig = gc.encode(np.array([0.0, 0.5, 1.0]), 0.2)
    assert trig.shape == (3, 3)
    np.testing.assert_allclose(trig[:, 2], np.sin(0.2))
