"""Conversions between gaze vectors, yaw/pitch angles and the trigonometric triple.

Cartesian convention used everywhere in the package::

    g = (cos(pitch) * sin(yaw), sin(pitch), cos(pitch) * cos(yaw))

so yaw 0, pitch 0 looks along +z (towards the camera), positive yaw turns
towards +x and positive pitch towards +y. Dataset loaders convert their
native conventions into this one.

All angles are radians; only :func:`angular_error` reports degrees.
Functions are vectorised over leading axes.
"""

import numpy as np

from .errors import DomainError

_NORM_EPS = 1e-300


def _sign(x):
    # sign(0) = 1
    return np.where(x >= 0, 1.0, -1.0)


def _wrap(theta):
    """Map angles into (-pi, pi]."""
    wrapped = np.remainder(theta + np.pi, 2 * np.pi) - np.pi
    return np.where(wrapped <= -np.pi, wrapped + 2 * np.pi, wrapped)


def normalize(g):
    g = np.asarray(g, dtype=np.float64)
    norm = np.linalg.norm(g, axis=-1, keepdims=True)
    if np.any(norm <= _NORM_EPS):
        raise DomainError("gaze vector has zero norm")
    return g / norm


def angles_to_vector(yaw, pitch):
    """Unit gaze vector(s) for the given yaw and pitch, shape ``(..., 3)``."""
    yaw = np.asarray(yaw, dtype=np.float64)
    pitch = np.asarray(pitch, dtype=np.float64)
    cp = np.cos(pitch)
    return np.stack([cp * np.sin(yaw), np.sin(pitch), cp * np.cos(yaw)], axis=-1)


def vector_to_angles(g):
    """Inverse of :func:`angles_to_vector`; returns ``(yaw, pitch)``.

    At the poles yaw is 0 by convention (``atan2(0, 0) == 0``).
    """
    g = normalize(g)
    x, y, z = g[..., 0], g[..., 1], g[..., 2]
    yaw = np.arctan2(x, z)
    yaw = np.where(yaw <= -np.pi, np.pi, yaw)
    pitch = np.arcsin(np.clip(y, -1.0, 1.0))
    return yaw, pitch


def encode(yaw, pitch):
    """Trigonometric target ``(sin yaw, cos yaw, sin pitch)``, shape ``(..., 3)``."""
    yaw, pitch = np.broadcast_arrays(np.asarray(yaw, dtype=np.float64), np.asarray(pitch, dtype=np.float64))
    return np.stack([np.sin(yaw), np.cos(yaw), np.sin(pitch)], axis=-1)


def yaw_components(trig):
    """Sine-based and cosine-based yaw estimates and the blending weight.

    Returns ``(theta_s, theta_c, w)``. Predicted ``sy``/``cy`` are clamped to
    [-1, 1]. When the two estimates straddle the +-pi seam, ``theta_c`` is
    shifted by 2*pi so both lie within pi of each other before averaging.
    """
    trig = np.asarray(trig, dtype=np.float64)
    sy = np.clip(trig[..., 0], -1.0, 1.0)
    cy = np.clip(trig[..., 1], -1.0, 1.0)
    s_sy = _sign(sy)
    asin_sy = np.arcsin(sy)
    theta_s = np.where(_sign(cy) == 1.0, asin_sy, s_sy * np.pi - asin_sy)
    theta_c = s_sy * np.arccos(cy)
    diff = theta_c - theta_s
    theta_c = theta_c - 2 * np.pi * np.round(diff / (2 * np.pi))
    w = np.abs(np.cos((theta_s + theta_c) / 2))
    return theta_s, theta_c, w


def decode_yaw(trig):
    theta_s, theta_c, w = yaw_components(trig)
    return _wrap(w * theta_s + (1 - w) * theta_c)


def decode_pitch(trig):
    trig = np.asarray(trig, dtype=np.float64)
    return np.arcsin(np.clip(trig[..., 2], -1.0, 1.0))


def decode(trig):
    """``(yaw, pitch)`` recovered from a (possibly predicted) trig triple."""
    return decode_yaw(trig), decode_pitch(trig)


def trig_to_vector(trig):
    return angles_to_vector(*decode(trig))


def vector_to_trig(g):
    return encode(*vector_to_angles(g))


def angular_error(g, g_hat):
    """Angle between gaze vectors in degrees, in [0, 180].

    Equal to ``acos(g . g_hat / (|g| |g_hat|))``, evaluated as
    ``atan2(|g x g_hat|, g . g_hat)`` which stays accurate near 0 and 180.
    Symmetric and invariant to positive rescaling of either argument.
    """
    g = np.asarray(g, dtype=np.float64)
    g_hat = np.asarray(g_hat, dtype=np.float64)
    n1 = np.linalg.norm(g, axis=-1)
    n2 = np.linalg.norm(g_hat, axis=-1)
    if np.any(n1 <= _NORM_EPS) or np.any(n2 <= _NORM_EPS):
        raise DomainError("angular error undefined for zero-norm vectors")
    u = g / n1[..., None]
    v = g_hat / n2[..., None]
    cross = np.linalg.norm(np.cross(u, v), axis=-1)
    dot = np.sum(u * v, axis=-1)
    return np.degrees(np.arctan2(cross, dot))
