"""
Inpainting plans: centered masks inside each box, grouped into passes.

Class-wise plans run one pass per distinct predicted label of an image with
the union of that label's masks; object-wise plans run one pass per box.
"""
import json
import math
from dataclasses import dataclass
from itertools import groupby
from pathlib import Path

import numpy as np

from detections.manifest import BoundingBox

CLASS_WISE = 'class_wise'
OBJECT_WISE = 'object_wise'
MODES = (CLASS_WISE, OBJECT_WISE)


class MaskRect(BoundingBox):
    pass


@dataclass(frozen=True)
class InpaintPass:
    image_path: str
    prompt_label: str
    member_ids: tuple
    mask_rects: tuple

    def to_dict(self):
        return {
            'label': self.prompt_label,
            'members': list(self.member_ids),
            'rects': [r.as_list() for r in self.mask_rects],
        }


@dataclass(frozen=True)
class MaskPlan:
    image_path: str
    mode: str
    ratio: float
    passes: tuple = ()

    def member_ids(self):
        return [m for p in self.passes for m in p.member_ids]

    def to_dict(self):
        return {
            'image_path': self.image_path,
            'mode': self.mode,
            'passes': [p.to_dict() for p in self.passes],
        }


def round_half_up(value):
    return math.floor(value + 0.5)


def center_mask(box, ratio):
    """
    Mask covering ``ratio`` of the box's width and height, centered.
    Sizes round half up (at least 1px), offsets round down.
    """
    w_m = max(1, round_half_up(ratio * box.w))
    h_m = max(1, round_half_up(ratio * box.h))
    w_m = min(w_m, box.w)
    h_m = min(h_m, box.h)
    return MaskRect(box.x + (box.w - w_m) // 2,
                    box.y + (box.h - h_m) // 2,
                    w_m, h_m)


def build_plan(image, mode, ratio):
    if mode not in MODES:
        raise ValueError(f'unknown plan mode {mode!r}')
    ordered = sorted(image.detections,
                     key=lambda d: (d.label, d.detection_id))
    passes = []
    if mode == CLASS_WISE:
        for label, group in groupby(ordered, key=lambda d: d.label):
            members = list(group)
            passes.append(InpaintPass(
                image_path=image.image_path,
                prompt_label=label,
                member_ids=tuple(d.detection_id for d in members),
                mask_rects=tuple(center_mask(d.box, ratio) for d in members)))
    else:
        for det in ordered:
            passes.append(InpaintPass(
                image_path=image.image_path,
                prompt_label=det.label,
                member_ids=(det.detection_id,),
                mask_rects=(center_mask(det.box, ratio),)))
    return MaskPlan(image_path=image.image_path,
                    mode=mode,
                    ratio=ratio,
                    passes=tuple(passes))


def rasterize(inpaint_pass, width, height):
    """Binary (height, width) uint8 mask; 1 inside any rect of the pass."""
    mask = np.zeros((height, width), dtype=np.uint8)
    for rect in inpaint_pass.mask_rects:
        mask[rect.y:rect.bottom, rect.x:rect.right] = 1
    return mask


def save_plans(plans, path):
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as fh:
        for plan in plans:
            record = plan if isinstance(plan, dict) else plan.to_dict()
            fh.write(json.dumps(record) + '\n')
    return path
