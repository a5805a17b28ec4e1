import numpy as np
import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt

from supergaze import synthetic
from supergaze.preprocessing import (STATIC_SCALES, TEMPORAL_SCALES, EyeRegions, Preprocessor, multiscale,
                                     temporal_schedule)

frame = synthetic.render(224, [synthetic.Face(0.5, 0.5, 0.3)], yaw=0.4, pitch=0.1)
print(frame.shape, frame.dtype)

views = multiscale(frame, STATIC_SCALES)
print(len(views), [tuple(v.shape) for v in views])

fig, axes = plt.subplots(1, len(STATIC_SCALES), figsize=(12, 3))
for ax, view, s in zip(axes, views, STATIC_SCALES):
    ax.imshow(view.permute(1, 2, 0).numpy())
    ax.set_title(f"crop {s}")
    ax.axis("off")
fig.savefig("multiscale.png", dpi=80)

# seven frames, zooming in toward the middle one
frames = [synthetic.render(224, [synthetic.Face(0.5, 0.5, 0.3)], yaw=0.1 * k) for k in range(7)]
print(TEMPORAL_SCALES)
print([round(float(v.mean()), 3) for v in temporal_schedule(frames)])

# no eye boxes available: the eye branch gets zero images
pre = Preprocessor("none", detector=None)
heads, eyes = pre.prepare_static(frame, EyeRegions())
print(heads.shape, eyes.shape, float(eyes.abs().sum()))
