"""Fix annotations whose face box landed on a bystander.

A synthetic set of 300 frames is generated; in 20 of them the stored box
points at a small face in a corner. Those centres fall outside the valid
interval, so the detector is re-run and the largest face with a valid
centre replaces the boxes.
"""
from supergaze import data, synthetic
from supergaze.detectors import BlobDetector

samples, scenes, planted = synthetic.rectification_fixture(300, 20, seed=1)
intervals = data.ValidIntervals()

centres = data.face_center_distribution(samples)
print(centres.shape, centres.min(0), centres.max(0))

fixed, report = data.rectify(samples, intervals, BlobDetector(), scenes)
print(report.to_dict()["totals"])
print(report.rectified[:5])

before = {s.image_path: s for s in samples}
after = {s.image_path: s for s in fixed}
p = planted[0]
print(before[p].face_box)
print(after[p].face_box)

data.plot_face_centers(samples, intervals, "centres_before.png")
data.plot_face_centers(fixed, intervals, "centres_after.png")

# running it again changes nothing
again, report2 = data.rectify(fixed, intervals, BlobDetector(), scenes)
print(again == fixed, report2.total("invalid"))
