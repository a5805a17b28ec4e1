"""Encode a few gaze directions as (sin yaw, cos yaw, sin pitch) and decode them back."""
import numpy as np

from supergaze import gaze_codec

yaw = np.radians([0, 45, 100, 179, -135, 180])
pitch = np.radians([0, 10, -30, 5, 60, -80])

trig = gaze_codec.encode(yaw, pitch)
print(np.round(trig, 4))

back_yaw, back_pitch = gaze_codec.decode(trig)
print(np.degrees(back_yaw))
print(np.degrees(back_pitch))

# the blend weight favours the sine branch near yaw 0 and the cosine branch near +-90
theta_s, theta_c, w = gaze_codec.yaw_components(gaze_codec.encode(np.radians([0, 30, 60, 89, 120]), 0.0))
print(np.round(w, 3))

# a noisy prediction still decodes to a nearby direction
noisy = trig + np.random.default_rng(0).normal(scale=0.05, size=trig.shape)
print(gaze_codec.angular_error(gaze_codec.trig_to_vector(trig), gaze_codec.trig_to_vector(noisy)))

# angular error is symmetric and hits 180 for opposite directions
g = gaze_codec.angles_to_vector(yaw, pitch)
print(gaze_codec.angular_error(g, -g))
