"""Torch dataset turning annotated samples into model inputs and targets."""

from pathlib import Path

import numpy as np
import torch
from torch.utils.data import Dataset

from . import gaze_codec
from .data import temporal_windows
from .enhancers import load_cached
from .imaging import load_image
from .preprocessing import CENTER_FRAME, EyeRegions


def target_trig(sample):
    return gaze_codec.vector_to_trig(np.asarray(sample.gaze)).astype(np.float32)


def stored_regions(sample, image):
    """Eye regions in pixels from the stored normalised boxes."""
    h, w = image.shape[1:]

    def px(box):
        return None if box is None else (box[0] * w, box[1] * h, box[2] * w, box[3] * h)

    return EyeRegions(px(sample.left_eye_box), px(sample.right_eye_box))


def label_of(item):
    """Ground-truth sample of a frame or of a window's centre frame."""
    return item[CENTER_FRAME] if isinstance(item, (list, tuple)) else item


class GazeDataset(Dataset):
    """Items are ``(heads, eyes, trig_target)``.

    Static mode yields one item per sample; temporal mode one per
    7-frame window. With ``preprocessor.detector is None`` stored eye
    boxes are used. ``sr_cache`` points at a directory produced by
    :func:`supergaze.enhancers.write_sr_cache`. Preprocessed tensors are
    memoised when ``cache`` is set.
    """

    def __init__(self, samples, root, preprocessor, mode="static", sr_cache=None,
                 image_loader=None, cache=True, items=None):
        self.root = Path(root) if root is not None else None
        self.preprocessor = preprocessor
        self.mode = mode
        self.sr_cache = sr_cache
        self.image_loader = image_loader or (lambda s: load_image(self.root / s.image_path))
        if items is None:
            items = list(samples) if mode == "static" else temporal_windows(samples)
        self.items = items
        self._cache = {} if cache else None

    def __len__(self):
        return len(self.items)

    def _frame_inputs(self, sample):
        image = self.image_loader(sample)
        regions = None if self.preprocessor.detector is not None else stored_regions(sample, image)
        enhanced = None
        if self.sr_cache is not None and self.root is not None and self.preprocessor.sr_config != "none":
            enhanced = load_cached(self.root / sample.image_path, self.root, self.sr_cache)
        return image, regions, enhanced

    def inputs(self, index):
        item = self.items[index]
        if self.mode == "static":
            image, regions, enhanced = self._frame_inputs(item)
            return self.preprocessor.prepare_static(image, regions, enhanced, frame_id=item.frame_id)
        frames, regions, enhanced = zip(*(self._frame_inputs(s) for s in item))
        return self.preprocessor.prepare_temporal(frames, list(regions), list(enhanced),
                                                  frame_ids=[s.frame_id for s in item])

    def __getitem__(self, index):
        if self._cache is not None and index in self._cache:
            return self._cache[index]
        heads, eyes = self.inputs(index)
        out = (heads, eyes, torch.from_numpy(target_trig(label_of(self.items[index]))))
        if self._cache is not None:
            self._cache[index] = out
        return out
