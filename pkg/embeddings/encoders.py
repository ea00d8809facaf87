"""
Encoders behind the similarity triplet.

A vision-language encoder maps crops and text into one space;
a visual encoder maps crops into its own space. Every vector leaves
an encoder L2-normalized.
"""
import functools
import hashlib
import logging
import math
import threading
from dataclasses import dataclass

import numpy as np
from django.conf import settings
from PIL import Image

from core.exceptions import BackendUnavailable, ConfigError, EncoderError
from core.hashing import fnv1a_64
from inpainting.adapter import AdapterProcess
from inpainting.backends import label_color
from inpainting.raster import dominant_color, encode_png

logger = logging.getLogger(__name__)

MOCK_ANGLE_DEG = 10.0


def normalize(values):
    vector = np.asarray(values, dtype=np.float64).ravel()
    if not np.all(np.isfinite(vector)):
        raise EncoderError('embedding has non-finite entries')
    norm = np.linalg.norm(vector)
    if norm == 0:
        raise EncoderError('embedding is the zero vector')
    return vector / norm


def cosine(u, v):
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    if u.shape != v.shape:
        raise ValueError(f'dimension mismatch: {u.shape} vs {v.shape}')
    nu, nv = np.linalg.norm(u), np.linalg.norm(v)
    if nu == 0 or nv == 0:
        raise ValueError('cosine of a zero vector')
    value = float(np.dot(u, v) / (nu * nv))
    return min(1.0, max(-1.0, value))


def seeded_unit_vector(seed, dim):
    rng = np.random.default_rng(seed)
    return normalize(rng.standard_normal(dim))


def _digest(data):
    return hashlib.sha1(data).hexdigest()


class Encoder:
    backend_id = 'abstract'
    preprocess = ''
    max_concurrent = 1
    dim = 0
    supports_text = False

    def __init__(self):
        self._memo = {}
        self._memo_lock = threading.Lock()

    def describe(self):
        return {'backend_id': self.backend_id, 'dim': self.dim,
                'preprocess': self.preprocess}

    def _remember(self, key, compute):
        key = (self.backend_id, key)
        with self._memo_lock:
            if key in self._memo:
                return self._memo[key]
        vector = normalize(compute())
        with self._memo_lock:
            self._memo[key] = vector
        return vector

    def embed_image(self, crop):
        if crop.ndim != 3 or crop.shape[0] < 1 or crop.shape[1] < 1:
            raise EncoderError(f'degenerate crop of shape {crop.shape}')
        header = f'{crop.shape}'.encode('ascii')
        key = 'image:' + _digest(header + crop.tobytes())
        return self._remember(key, lambda: self._image(crop))

    def embed_text(self, text):
        if not text:
            raise EncoderError('cannot embed empty text')
        key = 'text:' + _digest(text.encode('utf-8'))
        return self._remember(key, lambda: self._text(text))

    def prepare(self, labels, template):
        """Start a run: drop the memo and warm the label text vectors."""
        with self._memo_lock:
            self._memo.clear()
        if self.supports_text:
            for label in labels:
                self.embed_text(template.render(label))

    def _image(self, crop):
        raise NotImplementedError

    def _text(self, text):
        raise EncoderError(f'{self.backend_id} has no text tower')


class MockVisionLanguageEncoder(Encoder):
    """
    Text becomes a seeded random unit vector (seed FNV-1a-64 of the text).
    A crop whose dominant color is the mock inpainter's fill for a
    registered label becomes that label's text vector rotated by a fixed
    angle; any other color becomes a random vector seeded by the color.
    """
    backend_id = 'mock-vl'
    preprocess = 'dominant-color'
    max_concurrent = 8
    supports_text = True

    def __init__(self, dim=128, angle_deg=MOCK_ANGLE_DEG):
        super().__init__()
        self.dim = dim
        self.angle = math.radians(angle_deg)
        self.reference = seeded_unit_vector(fnv1a_64('mock-vl reference'), dim)
        self.registry = {}

    def describe(self):
        return {**super().describe(), 'angle_deg': math.degrees(self.angle)}

    def register(self, label, template):
        color = label_color(label)
        text = template.render(label)
        if self.registry.get(color, text) != text:
            logger.warning('mock fill color collision label=%s color=%s',
                           label, color)
            return
        self.registry[color] = text

    def prepare(self, labels, template):
        self.registry = {}
        for label in sorted(labels):
            self.register(label, template)
        super().prepare(labels, template)

    def rotate(self, vector):
        ortho = self.reference - np.dot(self.reference, vector) * vector
        ortho = ortho / np.linalg.norm(ortho)
        return math.cos(self.angle) * vector + math.sin(self.angle) * ortho

    def _text(self, text):
        return seeded_unit_vector(fnv1a_64(text), self.dim)

    def _image(self, crop):
        color = dominant_color(crop)
        text = self.registry.get(color)
        if text is not None:
            return self.rotate(self.embed_text(text))
        return seeded_unit_vector(fnv1a_64(bytes(color)), self.dim)


class MockVisualEncoder(Encoder):
    """Random unit vector seeded by the crop bytes: equal crops, equal vectors."""
    backend_id = 'mock-visual'
    preprocess = 'raw-bytes'
    max_concurrent = 8

    def __init__(self, dim=128):
        super().__init__()
        self.dim = dim

    def _image(self, crop):
        digest = hashlib.sha1(f'{crop.shape}'.encode('ascii') + crop.tobytes())
        seed = int.from_bytes(digest.digest()[:8], 'little')
        return seeded_unit_vector(seed, self.dim)


class AdapterEncoder(Encoder):
    def __init__(self, command, timeout=300.0):
        super().__init__()
        self.process = AdapterProcess(command, timeout)
        info = self.process.hello()
        self.backend_id = info.get('backend_id', f'adapter:{command}')
        self.dim = int(info.get('dim', 0))
        self.preprocess = info.get('preprocess', '')
        self.max_concurrent = int(info.get('max_concurrent', 1))
        self.supports_text = bool(info.get('supports_text', True))

    def _image(self, crop):
        answer = self.process.request({'op': 'embed_image',
                                       'image': encode_png(crop)})
        return answer['vector']

    def _text(self, text):
        answer = self.process.request({'op': 'embed_text', 'text': text})
        return answer['vector']


class OpenClipEncoder(Encoder):
    """open_clip model, e.g. ``ViT-H-14/laion2b_s32b_b79k``."""
    supports_text = True

    def __init__(self, model_name, device=None):
        super().__init__()
        try:
            import open_clip
            import torch
        except ImportError as e:
            raise BackendUnavailable(
                f'openclip backend needs the "models" extra: {e}')
        arch, _, pretrained = model_name.partition('/')
        self._torch = torch
        self.device = device or ('cuda' if torch.cuda.is_available() else 'cpu')
        try:
            model, _, transform = open_clip.create_model_and_transforms(
                arch, pretrained=pretrained or None, device=self.device)
        except (RuntimeError, OSError) as e:
            raise BackendUnavailable(f'cannot load open_clip {model_name}: {e}')
        self.model = model.eval()
        self.transform = transform
        self.tokenizer = open_clip.get_tokenizer(arch)
        self.backend_id = f'openclip:{model_name}'
        self.dim = int(model.text_projection.shape[1])
        self.preprocess = repr(transform)
        self._lock = threading.Lock()

    def _image(self, crop):
        pixels = self.transform(Image.fromarray(crop)).unsqueeze(0).to(self.device)
        with self._lock, self._torch.no_grad():
            features = self.model.encode_image(pixels)
        return features[0].float().cpu().numpy()

    def _text(self, text):
        tokens = self.tokenizer([text]).to(self.device)
        with self._lock, self._torch.no_grad():
            features = self.model.encode_text(tokens)
        return features[0].float().cpu().numpy()


@dataclass(frozen=True)
class EncoderSet:
    vl: Encoder
    visual: Encoder

    def __post_init__(self):
        if not self.vl.supports_text:
            raise ConfigError(f'{self.vl.backend_id} cannot embed text')

    def vl_image(self, crop):
        return self.vl.embed_image(crop)

    def vl_text(self, text):
        return self.vl.embed_text(text)

    def visual_image(self, crop):
        return self.visual.embed_image(crop)

    def prepare(self, labels, template):
        self.vl.prepare(labels, template)
        if self.visual is not self.vl:
            self.visual.prepare([], template)

    def describe(self):
        return {'vl': self.vl.describe(), 'visual': self.visual.describe()}


def embed_text(label_or_prompt, template, encoders):
    """The text rendered through the scoring template, then encoded."""
    return encoders.vl_text(template.render(label_or_prompt))


def embed_image_vl(crop, encoders):
    return encoders.vl_image(crop)


def embed_image_visual(crop, encoders):
    return encoders.visual_image(crop)


@functools.lru_cache(maxsize=None)
def _cached_encoder(kind, arg):
    if kind == 'adapter':
        return AdapterEncoder(arg, timeout=settings.RONIN_ADAPTER_TIMEOUT)
    return OpenClipEncoder(arg)


def get_encoder(selector, role):
    """
    ``mock``, ``adapter:CMD`` or ``openclip:ARCH/PRETRAINED``. Mocks are
    cheap and built per run; model-backed encoders are shared per process.
    """
    kind, _, arg = selector.partition(':')
    if kind == 'mock':
        dim = settings.RONIN_MOCK_DIM
        return MockVisionLanguageEncoder(dim) if role == 'vl' \
            else MockVisualEncoder(dim)
    if kind in ('adapter', 'openclip') and arg:
        return _cached_encoder(kind, arg)
    raise ConfigError(f'unknown {role} backend {selector!r}')


def build_encoders(vl_selector, visual_selector):
    return EncoderSet(vl=get_encoder(vl_selector, 'vl'),
                      visual=get_encoder(visual_selector, 'visual'))
