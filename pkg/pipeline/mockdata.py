"""
Synthetic manifests for the all-mock pipeline.

Objects are solid rectangles on a grey background, laid out on a grid so no
two boxes overlap. An ID object is painted with the mock inpainter's fill
color of its predicted label; an OOD object carries an ID label but is
painted with the fill color of an OOD label.
"""
import logging
import math
from pathlib import Path

import numpy as np
from PIL import Image

from detections.manifest import GT_ID, GT_OOD, BoundingBox, Detection, \
                                ImageRecord, Manifest, save_manifest
from inpainting.backends import label_color

logger = logging.getLogger(__name__)

BACKGROUND = (128, 128, 128)
DEFAULT_ID_LABELS = ('cat', 'dog', 'horse')
DEFAULT_OOD_LABELS = ('zebra', 'fox')


def grid_boxes(n, image_size, margin=4):
    """``n`` non-overlapping boxes, one per grid cell, row by row."""
    if n < 1:
        return []
    width, height = image_size
    cols = math.ceil(math.sqrt(n))
    rows = math.ceil(n / cols)
    cell_w, cell_h = width // cols, height // rows
    if cell_w <= 2 * margin or cell_h <= 2 * margin:
        raise ValueError(f'{n} boxes do not fit into {width}x{height}')
    return [BoundingBox((i % cols) * cell_w + margin,
                        (i // cols) * cell_h + margin,
                        cell_w - 2 * margin,
                        cell_h - 2 * margin)
            for i in range(n)]


def paint_scene(image_size, objects):
    """RGB raster with every (box, color) pair painted over the background."""
    width, height = image_size
    raster = np.empty((height, width, 3), dtype=np.uint8)
    raster[...] = BACKGROUND
    for box, color in objects:
        raster[box.y:box.bottom, box.x:box.right] = color
    return raster


def _check_colors(id_labels, ood_labels):
    fills = {label_color(label): label for label in id_labels}
    for label in ood_labels:
        color = label_color(label)
        if color in fills or color == BACKGROUND:
            raise ValueError(f'OOD label {label!r} shares its fill color '
                             f'with {fills.get(color, "the background")!r}')


def generate_mock_manifest(out_dir, n_id=25, n_ood=25,
                           id_labels=DEFAULT_ID_LABELS,
                           ood_labels=DEFAULT_OOD_LABELS,
                           per_image=5, image_size=(160, 160), seed=0):
    """
    Write ``manifest.jsonl`` and its PNG images into ``out_dir``; returns
    the manifest path.
    """
    if n_id < 0 or n_ood < 0 or per_image < 1:
        raise ValueError('counts must be non-negative and per_image positive')
    id_labels, ood_labels = list(id_labels), list(ood_labels)
    _check_colors(id_labels, ood_labels)
    out_dir = Path(out_dir)
    (out_dir / 'images').mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(seed)

    kinds = [GT_ID] * n_id + [GT_OOD] * n_ood
    rng.shuffle(kinds)
    images = []
    for start in range(0, len(kinds), per_image):
        chunk = kinds[start:start + per_image]
        boxes = grid_boxes(len(chunk), image_size)
        objects, detections = [], []
        for offset, (gt, box) in enumerate(zip(chunk, boxes)):
            label = id_labels[int(rng.integers(len(id_labels)))]
            if gt == GT_ID:
                color = label_color(label)
            else:
                color = label_color(ood_labels[int(rng.integers(len(ood_labels)))])
            objects.append((box, color))
            detections.append(Detection(
                detection_id=f'd{start + offset:04d}',
                box=box,
                label=label,
                confidence=round(float(rng.uniform(0.3, 1.0)), 3),
                gt=gt))
        image_path = f'images/scene_{start // per_image:03d}.png'
        Image.fromarray(paint_scene(image_size, objects), mode='RGB') \
            .save(out_dir / image_path)
        images.append(ImageRecord(image_path=image_path,
                                  width=image_size[0],
                                  height=image_size[1],
                                  detections=tuple(detections)))
    manifest = Manifest(id_labels=tuple(id_labels),
                        images=tuple(images),
                        metadata={'generator': 'mockdata', 'seed': seed})
    path = save_manifest(manifest, out_dir / 'manifest.jsonl')
    logger.info('mock manifest written path=%s images=%d id=%d ood=%d',
                path, len(images), n_id, n_ood)
    return path
