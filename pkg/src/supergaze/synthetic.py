"""Procedurally rendered head images with known geometry.

Used by the tests, demos and CLI smoke runs: faces are bright discs with
two dark eyes that :class:`supergaze.detectors.BlobDetector` can find.
"""

from dataclasses import dataclass
import math
from pathlib import Path

import numpy as np
import torch

from . import gaze_codec
from .data import make_sample, save_jsonl
from .imaging import save_image

FACE_COLOR = (0.95, 0.72, 0.60)
EYE_COLOR = (0.08, 0.06, 0.06)


@dataclass(frozen=True)
class Face:
    cx: float      # normalised centre
    cy: float
    radius: float  # normalised to image width


def _disc(canvas, cx, cy, r, color):
    _, h, w = canvas.shape
    ys = torch.arange(h, dtype=torch.float32)[:, None] + 0.5
    xs = torch.arange(w, dtype=torch.float32)[None, :] + 0.5
    mask = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
    for c in range(3):
        canvas[c][mask] = color[c]


def eye_centers(face, size, yaw=0.0, pitch=0.0):
    """Pixel centres ``(left, right)`` of the eyes of ``face``."""
    r = face.radius * size
    cx, cy = face.cx * size, face.cy * size
    dx = 0.18 * r * math.sin(yaw) * math.cos(pitch)
    dy = -0.18 * r * math.sin(pitch)
    return (cx - 0.4 * r + dx, cy - 0.15 * r + dy), (cx + 0.4 * r + dx, cy - 0.15 * r + dy)


def render(size, faces, yaw=0.0, pitch=0.0, background=(0.10, 0.15, 0.30)):
    """``(3, size, size)`` image; the first face is the gaze subject.

    Background shading and eye offsets depend on the gaze so that images
    of different gazes differ.
    """
    img = torch.empty(3, size, size)
    grad = torch.linspace(0, 1, size)
    for c in range(3):
        img[c] = background[c]
    img[1] += 0.15 * (0.5 + 0.5 * math.sin(yaw)) * grad[None, :]
    img[2] += 0.15 * (0.5 + 0.5 * math.cos(yaw)) * grad[:, None]
    img[0] += 0.10 * (0.5 + 0.5 * math.sin(pitch)) * grad[:, None]
    for i, face in enumerate(faces):
        r = face.radius * size
        _disc(img, face.cx * size, face.cy * size, r, FACE_COLOR)
        y, p = (yaw, pitch) if i == 0 else (0.0, 0.0)
        for ex, ey in eye_centers(face, size, y, p):
            _disc(img, ex, ey, max(1.2, 0.16 * r), EYE_COLOR)
    return img.clamp_(0, 1)


def face_box(face, size):
    """Normalised bounding box of a rendered face disc (pixel-quantised)."""
    r = face.radius * size
    cx, cy = face.cx * size, face.cy * size
    x0, x1 = math.floor(cx - r), math.ceil(cx + r)
    y0, y1 = math.floor(cy - r), math.ceil(cy + r)
    return (max(0, x0) / size, max(0, y0) / size, min(size, x1) / size, min(size, y1) / size)


def eye_boxes(face, size, yaw=0.0, pitch=0.0):
    r = face.radius * size
    half = max(1.2, 0.16 * r) * 1.6
    out = []
    for ex, ey in eye_centers(face, size, yaw, pitch):
        out.append((max(0.0, ex - half) / size, max(0.0, ey - half) / size,
                    min(size, ex + half) / size, min(size, ey + half) / size))
    return tuple(out)


class SyntheticScenes:
    """Lazily rendered images keyed by ``image_path``."""

    def __init__(self, size):
        self.size = size
        self.scenes = {}

    def add(self, path, faces, yaw, pitch):
        self.scenes[str(path)] = (tuple(faces), yaw, pitch)

    def image(self, path):
        faces, yaw, pitch = self.scenes[str(path)]
        return render(self.size, faces, yaw, pitch)

    def __call__(self, sample):
        return self.image(sample.image_path)

    def write(self, root, suffix=None):
        root = Path(root)
        for path in self.scenes:
            save_image(self.image(path), root / path)


def random_gaze(rng, max_pitch=0.6):
    yaw = rng.uniform(-math.pi, math.pi)
    pitch = rng.uniform(-max_pitch, max_pitch)
    return yaw, pitch


def gaze_fixture(n=32, size=64, seed=0, subset="train", sequences=1, prefix="img", eyes_absent=0):
    """``n`` single-subject frames with stored face and eye boxes.

    Frames are split evenly over ``sequences`` with consecutive frame
    indices. The last ``eyes_absent`` samples carry no eye boxes.
    Returns ``(samples, scenes)``.
    """
    rng = np.random.default_rng(seed)
    scenes = SyntheticScenes(size)
    samples = []
    per_seq = math.ceil(n / sequences)
    for i in range(n):
        yaw, pitch = random_gaze(rng)
        face = Face(rng.uniform(0.45, 0.55), rng.uniform(0.48, 0.55), rng.uniform(0.24, 0.3))
        path = f"{prefix}/{i // per_seq:03d}/{i % per_seq:05d}.png"
        scenes.add(path, [face], yaw, pitch)
        left, right = (None, None) if i >= n - eyes_absent else eye_boxes(face, size, yaw, pitch)
        samples.append(make_sample(path, subject_id=i // per_seq, sequence_id=f"seq{i // per_seq:03d}",
                                   frame_index=i % per_seq, gaze=gaze_codec.angles_to_vector(yaw, pitch),
                                   face_box=face_box(face, size), left_eye_box=left, right_eye_box=right,
                                   subset=subset))
    return samples, scenes


def rectification_fixture(n=1000, planted=50, size=96, seed=0, subsets=("train", "val", "test")):
    """Frames whose stored face box belongs to a bystander for ``planted`` of them.

    Every frame shows the subject near the centre; planted frames also
    show a smaller bystander in a corner and their stored boxes point at
    the bystander. Returns ``(samples, scenes, planted_paths)``.
    """
    rng = np.random.default_rng(seed)
    scenes = SyntheticScenes(size)
    planted_idx = set(rng.choice(n, size=planted, replace=False).tolist())
    samples, planted_paths = [], []
    for i in range(n):
        subset = subsets[i % len(subsets)]
        yaw, pitch = random_gaze(rng)
        subject = Face(rng.uniform(0.44, 0.58), rng.uniform(0.48, 0.54), rng.uniform(0.17, 0.2))
        faces = [subject]
        annotated = subject
        if i in planted_idx:
            bystander = Face(rng.choice([0.1, 0.88]) + rng.uniform(-0.02, 0.02), rng.uniform(0.12, 0.2), 0.08)
            faces.append(bystander)
            annotated = bystander
        path = f"{subset}/{i:05d}.png"
        scenes.add(path, faces, yaw, pitch)
        left, right = eye_boxes(annotated, size)
        samples.append(make_sample(path, subject_id=i, sequence_id=f"s{i:05d}", frame_index=0,
                                   gaze=gaze_codec.angles_to_vector(yaw, pitch),
                                   face_box=face_box(annotated, size), left_eye_box=left,
                                   right_eye_box=right, subset=subset))
        if i in planted_idx:
            planted_paths.append(path)
    return samples, scenes, planted_paths


def write_gaze360_layout(root, samples, scenes, recording="rec_000"):
    """Write images plus a Gaze360-style ``metadata.mat`` for ``samples``.

    ``image_path`` of the returned samples follows the Gaze360 layout.
    """
    from scipy.io import savemat

    from .data import load_gaze360

    root = Path(root)
    split_code = {"train": 0, "val": 1, "test": 2}

    def xywh(box):
        return [-1.0] * 4 if box is None else [box[0], box[1], box[2] - box[0], box[3] - box[1]]

    cols = {k: [] for k in ("recording", "person_identity", "frame", "gaze_dir", "split",
                            "person_face_bbox", "person_eye_left_bbox", "person_eye_right_bbox")}
    for i, s in enumerate(samples):
        person, frame = i // 10000, i % 10000
        target = root / "imgs" / recording / "head" / f"{person:06d}" / f"{frame:06d}.jpg"
        save_image(scenes(s), target)
        g = s.gaze
        cols["recording"].append(0)
        cols["person_identity"].append(person)
        cols["frame"].append(frame)
        cols["gaze_dir"].append([g[0], g[1], -g[2]])
        cols["split"].append(split_code[s.subset])
        cols["person_face_bbox"].append(xywh(s.face_box))
        cols["person_eye_left_bbox"].append(xywh(s.left_eye_box))
        cols["person_eye_right_bbox"].append(xywh(s.right_eye_box))
    meta = {k: np.asarray(v, dtype=np.float64) for k, v in cols.items()}
    meta["recordings"] = np.array([recording], dtype=object)
    savemat(root / "metadata.mat", meta)
    return load_gaze360(root)


def write_jsonl_dataset(root, samples, scenes):
    """Images plus ``annotations.jsonl`` under ``root``."""
    root = Path(root)
    scenes.write(root)
    save_jsonl(samples, root / "annotations.jsonl")
    return root
