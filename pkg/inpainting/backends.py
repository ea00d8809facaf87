"""
Class-conditioned inpainting backends.

Every backend only generates pixels; ``InpaintBackend.inpaint`` resizes to
the requested resolution, counts the call and composes the generated pixels
back into the input through the mask, so the unmasked region is preserved.
"""
import functools
import logging
import threading
import time
from dataclasses import dataclass, field

import numpy as np
from django.conf import settings
from PIL import Image

from core.exceptions import BackendError, BackendUnavailable, \
                            ConfigError, ResolutionUnsupported
from core.hashing import fnv1a_32
from .adapter import AdapterProcess
from .raster import decode_png, encode_png, resize_image, resize_mask, size_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class BackendCapabilities:
    max_concurrent: int = 1
    preferred_resolutions: tuple = ()
    supports_batching: bool = False

    def __post_init__(self):
        if self.max_concurrent < 1:
            raise ValueError('max_concurrent must be at least 1')


@dataclass(frozen=True, eq=False)
class InpaintRequest:
    image: np.ndarray = field(repr=False)
    mask: np.ndarray = field(repr=False)
    prompt: str
    steps: int = 20
    guidance_scale: float = None
    seed: int = 0
    target_resolution: tuple = None
    # condition label; prompts may carry more than the label
    label: str = None

    def __post_init__(self):
        if self.image.ndim != 3 or self.image.shape[2] != 3:
            raise ValueError(f'image must be RGB, got shape {self.image.shape}')
        if self.mask.shape != self.image.shape[:2]:
            raise ValueError(f'mask {self.mask.shape} does not match '
                             f'image {self.image.shape[:2]}')
        if self.steps < 1:
            raise ValueError('steps must be at least 1')
        if not self.prompt or not self.prompt.strip():
            raise ValueError('prompt must not be empty')

    @property
    def condition_label(self):
        if self.label:
            return self.label
        return self.prompt.split(',')[0].strip()


@dataclass(frozen=True, eq=False)
class InpaintResult:
    image: np.ndarray = field(repr=False)
    backend_id: str
    wall_time: float = 0.0
    # false when the mask was empty and the backend was never reached
    called: bool = True


def label_color(label):
    """Fill color of the mock backend: low 24 bits of FNV-1a-32(label)."""
    h = fnv1a_32(label)
    return (h >> 16) & 0xFF, (h >> 8) & 0xFF, h & 0xFF


class InpaintBackend:
    backend_id = 'abstract'
    capabilities = BackendCapabilities()

    def __init__(self):
        self.calls = 0
        self._calls_lock = threading.Lock()

    def check_resolution(self, size):
        pass

    def _generate(self, image, mask, request):
        raise NotImplementedError

    def describe(self):
        return {'backend_id': self.backend_id}

    def inpaint(self, request):
        image, mask = request.image, request.mask
        if request.target_resolution:
            size = tuple(request.target_resolution)
            self.check_resolution(size)
            image = resize_image(image, size)
            mask = resize_mask(mask, size)
        if not mask.any():
            return InpaintResult(image.copy(), self.backend_id, 0.0, called=False)
        with self._calls_lock:
            self.calls += 1
        start = time.perf_counter()
        generated = self._generate(image, mask, request)
        if generated.shape != image.shape:
            raise BackendError(f'{self.backend_id} returned {generated.shape}, '
                               f'expected {image.shape}')
        output = np.where(mask[..., None].astype(bool), generated, image)
        return InpaintResult(output.astype(np.uint8), self.backend_id,
                             time.perf_counter() - start)


class MockInpainter(InpaintBackend):
    """
    Fills the mask with a solid color derived from the condition label.
    Ignores steps, guidance and seed, so outputs are identical everywhere.
    """
    backend_id = 'mock'
    capabilities = BackendCapabilities(max_concurrent=8)

    def _generate(self, image, mask, request):
        generated = np.empty_like(image)
        generated[...] = label_color(request.condition_label)
        return generated


class AdapterInpainter(InpaintBackend):
    def __init__(self, command, timeout=300.0):
        super().__init__()
        self.process = AdapterProcess(command, timeout)
        info = self.process.hello()
        self.backend_id = info.get('backend_id', f'adapter:{command}')
        self.capabilities = BackendCapabilities(
            max_concurrent=int(info.get('max_concurrent', 1)),
            preferred_resolutions=tuple(tuple(r) for r in
                                        info.get('preferred_resolutions', [])),
            supports_batching=bool(info.get('supports_batching', False)))

    def _generate(self, image, mask, request):
        answer = self.process.request({
            'op': 'inpaint',
            'image': encode_png(image),
            'mask': encode_png(mask * 255),
            'prompt': request.prompt,
            'label': request.condition_label,
            'steps': request.steps,
            'guidance_scale': request.guidance_scale,
            'seed': request.seed,
        })
        generated = decode_png(answer['image'])
        if size_of(generated) != size_of(image):
            # adapters may work at their own resolution
            generated = resize_image(generated, size_of(image))
        return generated


class DiffusersInpainter(InpaintBackend):
    """Any diffusers inpainting checkpoint, e.g. stabilityai/stable-diffusion-2-inpainting."""
    capabilities = BackendCapabilities(max_concurrent=1,
                                       preferred_resolutions=((512, 512),))

    def __init__(self, model_id, device=None):
        super().__init__()
        try:
            import torch
            from diffusers import AutoPipelineForInpainting
        except ImportError as e:
            raise BackendUnavailable(
                f'diffusers backend needs the "models" extra: {e}')
        self._torch = torch
        self.device = device or ('cuda' if torch.cuda.is_available() else 'cpu')
        dtype = torch.float16 if self.device == 'cuda' else torch.float32
        try:
            self.pipe = AutoPipelineForInpainting.from_pretrained(
                model_id, torch_dtype=dtype).to(self.device)
        except (OSError, ValueError) as e:
            raise BackendUnavailable(f'cannot load {model_id}: {e}')
        self.pipe.set_progress_bar_config(disable=True)
        self.backend_id = f'diffusers:{model_id}'
        self._lock = threading.Lock()

    def check_resolution(self, size):
        if size[0] % 8 or size[1] % 8:
            raise ResolutionUnsupported(
                f'{self.backend_id} needs multiples of 8, got {size[0]}x{size[1]}')

    def _generate(self, image, mask, request):
        width, height = size_of(image)
        # latent models work on multiples of 8; round-trip back afterwards
        work = (max(8, round(width / 8) * 8), max(8, round(height / 8) * 8))
        generator = self._torch.Generator(device=self.device) \
            .manual_seed(request.seed % (2 ** 63))
        kwargs = {}
        if request.guidance_scale is not None:
            kwargs['guidance_scale'] = request.guidance_scale
        with self._lock:
            out = self.pipe(prompt=request.prompt,
                            image=Image.fromarray(resize_image(image, work)),
                            mask_image=Image.fromarray(
                                resize_mask(mask, work) * 255, mode='L'),
                            num_inference_steps=request.steps,
                            width=work[0],
                            height=work[1],
                            generator=generator,
                            **kwargs).images[0]
        return resize_image(np.asarray(out.convert('RGB'), dtype=np.uint8),
                            (width, height))


@functools.lru_cache(maxsize=None)
def get_inpaint_backend(selector):
    """``mock``, ``adapter:CMD`` or ``diffusers:MODEL_ID``; one instance per process."""
    kind, _, arg = selector.partition(':')
    if kind == 'mock':
        backend = MockInpainter()
    elif kind == 'adapter' and arg:
        backend = AdapterInpainter(arg, timeout=settings.RONIN_ADAPTER_TIMEOUT)
    elif kind == 'diffusers' and arg:
        backend = DiffusersInpainter(arg)
    else:
        raise ConfigError(f'unknown inpaint backend {selector!r}')
    logger.info('inpaint backend ready selector=%s id=%s max_concurrent=%d',
                selector, backend.backend_id,
                backend.capabilities.max_concurrent)
    return backend
