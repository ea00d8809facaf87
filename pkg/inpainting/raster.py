"""RGB rasters are (height, width, 3) uint8 arrays; masks are (height, width) 0/1 uint8."""
import base64
import io

import numpy as np
from PIL import Image

from core.exceptions import DegenerateCrop
from masking.plan import round_half_up


def load_raster(path):
    with Image.open(path) as img:
        return np.asarray(img.convert('RGB'), dtype=np.uint8).copy()


def size_of(raster):
    """(width, height) of a raster."""
    return raster.shape[1], raster.shape[0]


def resize_image(raster, size):
    if size_of(raster) == tuple(size):
        return raster
    img = Image.fromarray(raster, mode='RGB')
    return np.asarray(img.resize(tuple(size), Image.Resampling.BILINEAR),
                      dtype=np.uint8).copy()


def resize_mask(mask, size):
    if size_of(mask) == tuple(size):
        return mask
    img = Image.fromarray(mask, mode='L')
    return np.asarray(img.resize(tuple(size), Image.Resampling.NEAREST),
                      dtype=np.uint8).copy()


def scale_factors(src_size, dst_size):
    return dst_size[0] / src_size[0], dst_size[1] / src_size[1]


def crop(raster, box, scale=(1.0, 1.0), detection_id=None):
    """
    Crop ``box`` (original-image coordinates) out of ``raster``, scaling the
    box edges by ``scale`` when the raster was resized.
    """
    sx, sy = scale
    x0, x1 = round_half_up(box.x * sx), round_half_up(box.right * sx)
    y0, y1 = round_half_up(box.y * sy), round_half_up(box.bottom * sy)
    height, width = raster.shape[:2]
    if x1 - x0 < 1 or y1 - y0 < 1 or x0 < 0 or y0 < 0 \
            or x1 > width or y1 > height:
        raise DegenerateCrop(detection_id, [x0, y0, x1 - x0, y1 - y0])
    return np.ascontiguousarray(raster[y0:y1, x0:x1])


def dominant_color(raster):
    """Most frequent RGB value; ties go to the smallest packed value."""
    flat = raster.reshape(-1, 3).astype(np.uint32)
    packed = (flat[:, 0] << 16) | (flat[:, 1] << 8) | flat[:, 2]
    values, counts = np.unique(packed, return_counts=True)
    value = int(values[np.argmax(counts)])
    return (value >> 16) & 0xFF, (value >> 8) & 0xFF, value & 0xFF


def outside_mask_delta(original, output, mask):
    """Largest per-channel difference outside the mask, in [0, 1] units."""
    keep = mask == 0
    if not keep.any():
        return 0.0
    diff = np.abs(original.astype(np.int16) - output.astype(np.int16))
    return float(diff[keep].max()) / 255.0


def encode_png(raster):
    buf = io.BytesIO()
    mode = 'RGB' if raster.ndim == 3 else 'L'
    Image.fromarray(raster, mode=mode).save(buf, format='PNG')
    return base64.b64encode(buf.getvalue()).decode('ascii')


def decode_png(data):
    with Image.open(io.BytesIO(base64.b64decode(data))) as img:
        return np.asarray(img.convert('RGB'), dtype=np.uint8).copy()
