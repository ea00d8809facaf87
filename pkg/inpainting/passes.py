import logging
from dataclasses import dataclass, field

import numpy as np

from core.hashing import pass_seed
from masking.plan import rasterize
from .backends import InpaintRequest
from .raster import size_of

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class PassOutput:
    image: np.ndarray = field(repr=False)
    member_ids: tuple
    prompt: str
    seed: int
    backend_id: str
    wall_time: float
    called: bool = True


def run_pass(raster, inpaint_pass, backend, prompts, *, steps, run_seed=0,
             guidance_scale=None, target_resolution=None):
    """
    One backend call for one pass: rasterize the pass mask over the original
    image, build the prompt and inpaint.
    """
    width, height = size_of(raster)
    mask = rasterize(inpaint_pass, width, height)
    prompt = prompts.build(inpaint_pass.prompt_label)
    seed = pass_seed(run_seed, inpaint_pass.image_path,
                     inpaint_pass.prompt_label)
    result = backend.inpaint(InpaintRequest(
        image=raster,
        mask=mask,
        prompt=prompt,
        steps=steps,
        guidance_scale=guidance_scale,
        seed=seed,
        target_resolution=target_resolution,
        label=inpaint_pass.prompt_label))
    logger.debug('inpaint pass image=%s label=%s members=%d wall=%.3f',
                 inpaint_pass.image_path, inpaint_pass.prompt_label,
                 len(inpaint_pass.member_ids), result.wall_time)
    return PassOutput(image=result.image,
                      member_ids=inpaint_pass.member_ids,
                      prompt=prompt,
                      seed=seed,
                      backend_id=result.backend_id,
                      wall_time=result.wall_time,
                      called=result.called)
