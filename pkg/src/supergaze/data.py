"""Annotation schema, dataset loaders, face-location analysis and rectification.

Normalised annotations are JSON Lines, one frame per line::

    {"version": 1, "image_path": "imgs/rec_000/head/000001/000010.jpg",
     "subject_id": "1", "sequence_id": "rec_000/000001", "frame_index": 10,
     "gaze": [x, y, z], "face_box": [x0, y0, x1, y1] | null,
     "left_eye_box": [...] | null, "right_eye_box": [...] | null,
     "subset": "train" | "val" | "test"}

``gaze`` follows the package convention (see :mod:`supergaze.gaze_codec`)
and is stored unit-norm. Boxes are normalised to the image size, i.e.
in [0, 1]^2. ``image_path`` is relative to the dataset root.
"""

from collections import defaultdict
import csv
from dataclasses import dataclass, field, replace
import json
import logging
from pathlib import Path

import numpy as np

from .errors import ConfigurationError, LoadError
from .preprocessing import WINDOW, eye_box_from_landmarks

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
SUBSETS = ("train", "val", "test")
_BOX_KEYS = ("face_box", "left_eye_box", "right_eye_box")


@dataclass(frozen=True)
class GazeSample:
    image_path: str
    subject_id: str
    sequence_id: str
    frame_index: int
    gaze: tuple
    face_box: tuple = None
    left_eye_box: tuple = None
    right_eye_box: tuple = None
    subset: str = "train"

    @property
    def frame_id(self):
        return self.image_path

    def to_record(self):
        rec = {"version": SCHEMA_VERSION, "image_path": self.image_path, "subject_id": self.subject_id,
               "sequence_id": self.sequence_id, "frame_index": self.frame_index,
               "gaze": list(self.gaze), "subset": self.subset}
        for key in _BOX_KEYS:
            box = getattr(self, key)
            rec[key] = None if box is None else list(box)
        return rec


def _unit(gaze):
    g = np.asarray(gaze, dtype=np.float64).reshape(3)
    n = np.linalg.norm(g)
    if not np.isfinite(n) or n == 0:
        raise ValueError("gaze vector must be finite and non-zero")
    if abs(n - 1.0) > 4e-16:
        # already-unit vectors are kept bit-exact so save/load is lossless
        g = g / n
    return tuple(float(v) for v in g)


def _box(box):
    if box is None:
        return None
    b = tuple(float(v) for v in box)
    if len(b) != 4:
        raise ValueError(f"box needs 4 values, got {len(b)}")
    x0, y0, x1, y1 = b
    if not (0 <= x0 < x1 <= 1 and 0 <= y0 < y1 <= 1):
        raise ValueError(f"box {b} not inside [0, 1]^2 with positive area")
    return b


def make_sample(image_path, subject_id, sequence_id, frame_index, gaze, face_box=None,
                left_eye_box=None, right_eye_box=None, subset="train"):
    """Validated :class:`GazeSample`; gaze is normalised, boxes checked."""
    if subset not in SUBSETS:
        raise ValueError(f"unknown subset {subset!r}")
    return GazeSample(str(image_path), str(subject_id), str(sequence_id), int(frame_index), _unit(gaze),
                      _box(face_box), _box(left_eye_box), _box(right_eye_box), subset)


def sample_from_record(rec):
    if rec.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported or missing version {rec.get('version')!r}")
    return make_sample(rec["image_path"], rec["subject_id"], rec["sequence_id"], rec["frame_index"],
                       rec["gaze"], rec.get("face_box"), rec.get("left_eye_box"), rec.get("right_eye_box"),
                       rec.get("subset", "train"))


def save_jsonl(samples, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", encoding="utf-8") as fh:
        for s in samples:
            fh.write(json.dumps(s.to_record()) + "\n")
    return path


def load_jsonl(path):
    path = Path(path)
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as exc:
        raise LoadError(f"cannot read annotations {path}: {exc}") from exc
    samples, malformed = [], []
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
            if not isinstance(rec, dict):
                raise ValueError("record is not an object")
            missing = {"version", "image_path", "subject_id", "sequence_id", "frame_index", "gaze"} - set(rec)
            if missing:
                raise ValueError(f"missing fields {sorted(missing)}")
        except ValueError as exc:
            malformed.append(f"line {lineno} ({exc})")
            continue
        try:
            samples.append(sample_from_record(rec))
        except (ValueError, TypeError, KeyError) as exc:
            logger.warning("%s line %d skipped: %s", path, lineno, exc)
    if malformed:
        raise LoadError(f"malformed annotations in {path}", malformed)
    return samples


def _mat_strings(arr):
    out = []
    for item in np.ravel(arr):
        while isinstance(item, np.ndarray) and item.size == 1 and item.dtype == object:
            item = item.item()
        out.append(str(np.ravel(item)[0]) if isinstance(item, np.ndarray) else str(item))
    return [s.strip() for s in out]


def _xywh_box(row):
    x, y, w, h = (float(v) for v in row)
    if w <= 0 or h <= 0 or x < 0 or y < 0:
        return None
    return (max(0.0, x), max(0.0, y), min(1.0, x + w), min(1.0, y + h))


def load_gaze360(root):
    """Gaze360 ``metadata.mat`` layout.

    Uses fields ``recordings``, ``recording``, ``person_identity``,
    ``frame``, ``gaze_dir``, ``split`` (0 train, 1 val, 2 test, others
    ignored) and the normalised ``[x, y, w, h]`` boxes
    ``person_face_bbox`` / ``person_eye_left_bbox`` /
    ``person_eye_right_bbox`` (negative values mean absent). Images are
    ``imgs/<recording>/head/<person:06d>/<frame:06d>.jpg``.

    Gaze360 defines yaw as ``atan2(x, -z)`` and pitch as ``asin(y)``, so
    the native vector maps to ``(x, y, -z)`` here.
    """
    from scipy.io import loadmat

    path = Path(root) / "metadata.mat"
    try:
        meta = loadmat(path)
    except (OSError, ValueError) as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    try:
        recordings = _mat_strings(meta["recordings"])
        rec_idx = np.ravel(meta["recording"]).astype(int)
        person = np.ravel(meta["person_identity"]).astype(int)
        frame = np.ravel(meta["frame"]).astype(int)
        gaze = np.asarray(meta["gaze_dir"], dtype=np.float64).reshape(-1, 3)
        split = np.ravel(meta["split"]).astype(int)
        boxes = {k: np.asarray(meta[m], dtype=np.float64).reshape(-1, 4) for k, m in
                 (("face_box", "person_face_bbox"), ("left_eye_box", "person_eye_left_bbox"),
                  ("right_eye_box", "person_eye_right_bbox"))}
    except KeyError as exc:
        raise LoadError(f"{path} lacks field {exc}") from exc
    subsets = {0: "train", 1: "val", 2: "test"}
    samples = []
    for i in range(len(rec_idx)):
        if split[i] not in subsets:
            continue
        rec = recordings[rec_idx[i]]
        try:
            samples.append(make_sample(
                f"imgs/{rec}/head/{person[i]:06d}/{frame[i]:06d}.jpg", person[i], f"{rec}/{person[i]:06d}",
                frame[i], (gaze[i, 0], gaze[i, 1], -gaze[i, 2]),
                subset=subsets[split[i]], **{k: _xywh_box(v[i]) for k, v in boxes.items()}))
        except ValueError as exc:
            logger.warning("gaze360 record %d skipped: %s", i, exc)
    return samples


GFIE_COLUMNS = ("image_path", "subject_id", "sequence_id", "frame_index", "gaze_x", "gaze_y", "gaze_z", "subset")


def load_gfie(root):
    """GFIE-style ``annotations.csv`` with columns :data:`GFIE_COLUMNS`.

    Optional box columns ``face_x0 .. face_y1``, ``left_x0 ..`` and
    ``right_x0 ..`` hold normalised corners. Gaze is in camera coordinates
    (x right, y down, z forward) and maps to ``(x, -y, -z)`` here.
    """
    path = Path(root) / "annotations.csv"
    try:
        fh = path.open("r", encoding="utf-8", newline="")
    except OSError as exc:
        raise LoadError(f"cannot read {path}: {exc}") from exc
    samples, malformed = [], []
    with fh:
        reader = csv.DictReader(fh)
        missing = set(GFIE_COLUMNS) - set(reader.fieldnames or ())
        if missing:
            raise LoadError(f"{path} lacks columns {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            try:
                boxes = {}
                for key, prefix in (("face_box", "face"), ("left_eye_box", "left"), ("right_eye_box", "right")):
                    cols = [row.get(f"{prefix}_{c}") for c in ("x0", "y0", "x1", "y1")]
                    boxes[key] = None if any(c in (None, "") for c in cols) else [float(c) for c in cols]
                g = (float(row["gaze_x"]), -float(row["gaze_y"]), -float(row["gaze_z"]))
                frame_index = int(row["frame_index"])
            except ValueError as exc:
                malformed.append(f"line {lineno} ({exc})")
                continue
            try:
                samples.append(make_sample(row["image_path"], row["subject_id"], row["sequence_id"],
                                           frame_index, g, subset=row["subset"], **boxes))
            except ValueError as exc:
                logger.warning("%s line %d skipped: %s", path, lineno, exc)
    if malformed:
        raise LoadError(f"malformed annotations in {path}", malformed)
    return samples


FORMATS = ("gaze360", "gfie", "jsonl")


def load_dataset(root, format="jsonl"):
    """Samples from a dataset root (or, for ``jsonl``, a file or a directory with ``annotations.jsonl``)."""
    root = Path(root)
    if format == "jsonl":
        path = root / "annotations.jsonl" if root.is_dir() else root
        return load_jsonl(path)
    if not root.is_dir():
        raise LoadError(f"dataset root {root} is not a readable directory")
    if format == "gaze360":
        return load_gaze360(root)
    if format == "gfie":
        return load_gfie(root)
    raise ConfigurationError(f"unknown dataset format {format!r}; choose from {FORMATS}")


def detect_format(path):
    """Guess the format of a dataset path."""
    path = Path(path)
    if path.is_file():
        return "jsonl"
    if (path / "metadata.mat").exists():
        return "gaze360"
    if (path / "annotations.csv").exists():
        return "gfie"
    if (path / "annotations.jsonl").exists():
        return "jsonl"
    raise LoadError(f"cannot infer dataset format of {path}")


# --- face locations and rectification ---------------------------------------

PUBLISHED_INTERVALS = {
    "train": ((0.29, 0.74), (0.39, 0.69)),
    "val": ((0.30, 0.72), (0.41, 0.61)),
    "test": ((0.31, 0.74), (0.40, 0.63)),
}


@dataclass(frozen=True)
class ValidIntervals:
    """Closed X/Y intervals of plausible normalised face centres, per subset."""

    intervals: dict = field(default_factory=lambda: dict(PUBLISHED_INTERVALS))

    def __post_init__(self):
        for subset, ((xlo, xhi), (ylo, yhi)) in self.intervals.items():
            if not (0 <= xlo < xhi <= 1 and 0 <= ylo < yhi <= 1):
                raise ConfigurationError(f"bad interval for {subset!r}: {self.intervals[subset]}")

    @classmethod
    def from_file(cls, path):
        """YAML/JSON mapping ``subset -> {x: [lo, hi], y: [lo, hi]}``; unspecified subsets keep defaults."""
        import yaml

        path = Path(path)
        if not path.is_file():
            raise FileNotFoundError(f"intervals file not found: {path}")
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
        merged = dict(PUBLISHED_INTERVALS)
        try:
            for subset, xy in raw.items():
                merged[subset] = (tuple(map(float, xy["x"])), tuple(map(float, xy["y"])))
        except (AttributeError, KeyError, TypeError, ValueError) as exc:
            raise ConfigurationError(f"malformed intervals file {path}: {exc}") from exc
        return cls(merged)

    def contains(self, center, subset):
        try:
            (xlo, xhi), (ylo, yhi) = self.intervals[subset]
        except KeyError:
            raise ConfigurationError(f"no valid interval configured for subset {subset!r}") from None
        x, y = center
        return xlo <= x <= xhi and ylo <= y <= yhi


def box_center(box):
    x0, y0, x1, y1 = box
    return (x0 + x1) / 2, (y0 + y1) / 2


def face_center_distribution(samples, subset=None):
    """``(N, 2)`` normalised face centres of samples that have a face box."""
    pts = [box_center(s.face_box) for s in samples
           if s.face_box is not None and (subset is None or s.subset == subset)]
    return np.asarray(pts, dtype=np.float64).reshape(-1, 2)


def is_valid_center(center, intervals, subset):
    return intervals.contains(center, subset)


@dataclass
class RectificationReport:
    counts: dict = field(default_factory=dict)
    rectified: list = field(default_factory=list)
    discarded: list = field(default_factory=list)

    def _bump(self, subset, key):
        c = self.counts.setdefault(subset, {"total": 0, "inspected": 0, "valid": 0, "invalid": 0,
                                            "redetected": 0, "discarded": 0})
        c[key] += 1

    def total(self, key):
        return sum(c[key] for c in self.counts.values())

    def to_dict(self):
        keys = ("total", "inspected", "valid", "invalid", "redetected", "discarded")
        return {"version": SCHEMA_VERSION, "counts": self.counts,
                "totals": {k: self.total(k) for k in keys},
                "rectified": self.rectified, "discarded": self.discarded}

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=2), encoding="utf-8")


def _normalised(box, width, height):
    if box is None:
        return None
    x0, y0, x1, y1 = box
    return _box((max(0.0, x0 / width), max(0.0, y0 / height), min(1.0, x1 / width), min(1.0, y1 / height)))


def rectify(samples, intervals, detector, load_image, drop_unrecovered=False):
    """Re-detect faces for samples whose face centre lies outside the valid interval.

    Samples with a valid centre (or no face box) pass through untouched.
    For an invalid one the stored face/eye boxes are dropped and the
    detector runs on ``load_image(sample)``; the largest detected face whose
    centre is valid supplies the new boxes. Otherwise the sample keeps its
    gaze with no boxes (or is dropped with ``drop_unrecovered``). Gaze is
    never modified.
    """
    report = RectificationReport()
    out = []
    for s in samples:
        report._bump(s.subset, "total")
        if s.face_box is None:
            out.append(s)
            continue
        report._bump(s.subset, "inspected")
        if intervals.contains(box_center(s.face_box), s.subset):
            report._bump(s.subset, "valid")
            out.append(s)
            continue
        report._bump(s.subset, "invalid")
        stripped = replace(s, face_box=None, left_eye_box=None, right_eye_box=None)
        try:
            image = load_image(s)
            detections = detector.detect(image)
        except Exception as exc:
            logger.warning("re-detection failed for %s: %s", s.frame_id, exc)
            detections, image = [], None
        best = None
        if image is not None:
            h, w = image.shape[1:]
            for det in sorted(detections, key=lambda d: d.area, reverse=True):
                cx, cy = det.center()
                if intervals.contains((cx / w, cy / h), s.subset):
                    best = det
                    break
        if best is None:
            report._bump(s.subset, "discarded")
            report.discarded.append(s.frame_id)
            if not drop_unrecovered:
                out.append(stripped)
            continue
        left = eye_box_from_landmarks(best.left_eye, w, h)
        right = eye_box_from_landmarks(best.right_eye, w, h)
        out.append(replace(stripped, face_box=_normalised(best.face_box, w, h),
                           left_eye_box=_normalised(left, w, h), right_eye_box=_normalised(right, w, h)))
        report._bump(s.subset, "redetected")
        report.rectified.append(s.frame_id)
    return out, report


def plot_face_centers(samples, intervals, path, title="Face centre distribution"):
    """Scatter of face centres per subset with the valid region outlined."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    from matplotlib.patches import Rectangle

    subsets = [s for s in SUBSETS if any(x.subset == s for x in samples)] or list(SUBSETS)
    fig, axes = plt.subplots(1, len(subsets), figsize=(4 * len(subsets), 4), squeeze=False)
    for ax, subset in zip(axes[0], subsets):
        pts = face_center_distribution(samples, subset)
        ax.scatter(pts[:, 0], pts[:, 1], s=2, c="tab:blue")
        if subset in intervals.intervals:
            (xlo, xhi), (ylo, yhi) = intervals.intervals[subset]
            ax.add_patch(Rectangle((xlo, ylo), xhi - xlo, yhi - ylo, fill=False, edgecolor="red", lw=1.5))
        ax.set_xlim(0, 1)
        ax.set_ylim(1, 0)
        ax.set_aspect("equal")
        ax.set_title(f"{subset} (n={len(pts)})")
    fig.suptitle(title)
    fig.tight_layout()
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fig.savefig(path, dpi=100)
    plt.close(fig)
    return path


# --- temporal windows --------------------------------------------------------

def temporal_windows(samples, length=WINDOW):
    """Sliding windows of ``length`` consecutive frames within each sequence.

    Frames are ordered by ``frame_index``; a gap in the indices ends a run.
    The label of a window is the gaze of ``window[length // 2]``.
    """
    by_seq = defaultdict(list)
    for s in samples:
        by_seq[(s.subset, s.sequence_id)].append(s)
    windows = []
    for key in sorted(by_seq):
        frames = sorted(by_seq[key], key=lambda s: s.frame_index)
        run = [frames[0]]
        for prev, cur in zip(frames, frames[1:]):
            if cur.frame_index == prev.frame_index + 1:
                run.append(cur)
            else:
                windows.extend(run[i:i + length] for i in range(len(run) - length + 1))
                run = [cur]
        windows.extend(run[i:i + length] for i in range(len(run) - length + 1))
    return windows
