"""
End-to-end orchestration.

For every image: plan the passes, inpaint each pass once, crop the original
and the inpainted object, measure the similarity triplet and score it.
The orchestrator owns all run state; workers get immutable images and hand
back ``ImageOutcome`` values.
"""
import json
import logging
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

from tqdm import tqdm

from core.exceptions import BackendError, BackendUnavailable, ConfigError, \
                            DegenerateCrop, RoninError
from detections.manifest import filter_confidence, load_manifest
from embeddings.encoders import build_encoders
from evaluation.metrics import ScoreSet, evaluate
from inpainting.backends import get_inpaint_backend
from inpainting.passes import run_pass
from inpainting.raster import crop, load_raster, resize_image, \
                              scale_factors, size_of
from masking.plan import MODES, build_plan, save_plans
from prompting.prompts import PromptBuilder, PromptTemplate, load_exclusions
from scoring.triplet import DROP_CHOICES, ScoredDetection, ScoreParams, \
                            ablated_score, mcm_score, triplet_similarities
from .config import CELERY
from .forms import parse_resolution

logger = logging.getLogger(__name__)

NO_DATA = 'no data: evaluation needs at least one ID and one OOD score'


@dataclass
class ImageOutcome:
    image_path: str
    scored: list = field(default_factory=list)
    errors: list = field(default_factory=list)
    inpaint_calls: int = 0
    inpaint_time: float = 0.0
    wall_time: float = 0.0
    fallbacks: list = field(default_factory=list)
    plan: dict = None

    def fail(self, detection_id, stage, error):
        logger.warning('ledger image=%s id=%s stage=%s error=%s',
                       self.image_path, detection_id, stage, error)
        self.errors.append({
            'id': detection_id,
            'image_path': self.image_path,
            'stage': stage,
            'error': type(error).__name__,
            'message': str(error),
        })

    def to_dict(self):
        return {
            'image_path': self.image_path,
            'scored': [s.to_dict() for s in self.scored],
            'errors': self.errors,
            'inpaint_calls': self.inpaint_calls,
            'inpaint_time': self.inpaint_time,
            'wall_time': self.wall_time,
            'fallbacks': self.fallbacks,
            'plan': self.plan,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(image_path=data['image_path'],
                   scored=[ScoredDetection.from_dict(s) for s in data['scored']],
                   errors=data['errors'],
                   inpaint_calls=data['inpaint_calls'],
                   inpaint_time=data['inpaint_time'],
                   wall_time=data['wall_time'],
                   fallbacks=data['fallbacks'],
                   plan=data['plan'])


@dataclass
class RunResult:
    config: object
    fingerprint: str
    scores_path: Path
    scored: list
    errors: list
    filtered: list
    report: object = None
    baseline: object = None
    note: str = ''
    stage_times: dict = field(default_factory=dict)
    inpaint_calls: int = 0
    n_images: int = 0
    mean_image_time: float = 0.0
    prompt_fallbacks: list = field(default_factory=list)
    plans: list = field(default_factory=list)

    @property
    def n_detections(self):
        return len(self.scored) + len(self.errors) + len(self.filtered)

    @property
    def partial(self):
        return bool(self.errors)


class Pipeline:
    """Backends and scoring state shared by the workers of one run."""

    def __init__(self, config, id_labels):
        self.config = config
        self.id_labels = list(id_labels)
        self.inpainter = get_inpaint_backend(config.inpaint_backend)
        self.encoders = build_encoders(config.vl_backend, config.visual_backend)
        self.scoring_template = PromptTemplate(config.scoring_template)
        exclusions = load_exclusions(config.exclusions) \
            if config.exclusions else None
        self.prompts = PromptBuilder(config.inpaint_template,
                                     config.refined_template,
                                     exclusions,
                                     config.negation)
        self.params = ScoreParams(config.alpha, config.beta, config.epsilon)
        self.encoders.prepare(self.id_labels, self.scoring_template)
        self.fingerprint = config.fingerprint(
            backends={'inpaint': self.inpainter.describe(),
                      **self.encoders.describe()},
            exclusions_digest=exclusions.digest() if exclusions else None)
        self._slots = threading.BoundedSemaphore(
            self.inpainter.capabilities.max_concurrent)

    def process_image(self, image, source):
        start = time.perf_counter()
        outcome = ImageOutcome(image.image_path)
        try:
            raster = load_raster(source)
        except (OSError, ValueError) as e:
            for det in image.detections:
                outcome.fail(det.detection_id, 'image', e)
            return outcome
        if size_of(raster) != (image.width, image.height):
            error = RoninError(f'image is {size_of(raster)}, manifest says '
                               f'{(image.width, image.height)}')
            for det in image.detections:
                outcome.fail(det.detection_id, 'image', error)
            return outcome

        config = self.config
        plan = build_plan(image, config.mode, config.mask_ratio)
        if config.dump_plans:
            outcome.plan = plan.to_dict()
        # ori crops always come from the original, brought into the inpainted frame
        frame = resize_image(raster, config.target_resolution) \
            if config.target_resolution else raster
        scale = scale_factors(size_of(raster), size_of(frame))
        by_id = {det.detection_id: det for det in image.detections}

        scored = {}
        for inpaint_pass in plan.passes:
            label = inpaint_pass.prompt_label
            if self.prompts.falls_back(label) and label not in outcome.fallbacks:
                outcome.fallbacks.append(label)
            try:
                with self._slots:
                    output = run_pass(raster, inpaint_pass, self.inpainter,
                                      self.prompts,
                                      steps=config.steps,
                                      run_seed=config.seed,
                                      guidance_scale=config.guidance_scale,
                                      target_resolution=config.target_resolution)
            except BackendUnavailable:
                raise
            except (BackendError, ValueError) as e:
                for did in inpaint_pass.member_ids:
                    outcome.fail(did, 'inpaint', e)
                continue
            if output.called:
                outcome.inpaint_calls += 1
            outcome.inpaint_time += output.wall_time
            for did in output.member_ids:
                det = by_id[did]
                try:
                    scored[did] = self._score(det, image, frame, output, scale)
                except BackendUnavailable:
                    raise
                except (DegenerateCrop, BackendError, ValueError) as e:
                    outcome.fail(did, 'score', e)

        outcome.scored = [scored[d.detection_id] for d in image.detections
                          if d.detection_id in scored]
        outcome.wall_time = time.perf_counter() - start
        return outcome

    def _score(self, det, image, frame, output, scale):
        config = self.config
        ori = crop(frame, det.box, scale, det.detection_id)
        inp = crop(output.image, det.box, scale, det.detection_id)
        triplet = triplet_similarities(ori, inp, det.label, self.encoders,
                                       self.scoring_template)
        mcm = None
        if config.mcm:
            mcm = mcm_score(ori, self.id_labels, config.mcm_temperature,
                            self.encoders, self.scoring_template)
        return ScoredDetection(detection_id=det.detection_id,
                               image_path=image.image_path,
                               label=det.label,
                               gt=det.gt,
                               triplet=triplet,
                               score=ablated_score(triplet, self.params,
                                                   config.drop),
                               mode=config.mode,
                               fingerprint=self.fingerprint,
                               seed=output.seed,
                               mcm=mcm)


def _execute(pipeline, manifest, progress):
    config = pipeline.config
    images = list(manifest.images)
    if not images:
        return []
    if config.executor == CELERY:
        from celery import group
        from .tasks import score_image
        job = group(score_image.s(config.to_dict(), image.to_dict(),
                                  str(manifest.resolve(image)),
                                  list(manifest.id_labels))
                    for image in images)
        return [ImageOutcome.from_dict(r) for r in job.apply_async().get()]
    with ThreadPoolExecutor(max_workers=max(1, config.workers)) as pool:
        outcomes = pool.map(
            lambda image: pipeline.process_image(image, manifest.resolve(image)),
            images)
        if progress:
            outcomes = tqdm(outcomes, total=len(images), desc='images',
                            unit='img')
        return list(outcomes)


def write_scores(scored, path):
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as fh:
        for item in scored:
            fh.write(json.dumps(item.to_dict(), sort_keys=True) + '\n')
    return path


def run(config, progress=False):
    """Score every detection of the manifest and evaluate the scores."""
    started = time.perf_counter()
    manifest = load_manifest(config.manifest)
    manifest, filtered = filter_confidence(manifest, config.min_confidence)
    pipeline = Pipeline(config, manifest.id_labels)
    loaded = time.perf_counter()
    logger.info('run start fingerprint=%s mode=%s images=%d detections=%d',
                pipeline.fingerprint, config.mode, len(manifest.images),
                manifest.n_detections)

    outcomes = _execute(pipeline, manifest, progress)
    scored = [s for o in outcomes for s in o.scored]
    errors = [e for o in outcomes for e in o.errors]
    processed = time.perf_counter()

    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    scores_path = write_scores(scored, out_dir / 'scores.jsonl')

    result = RunResult(config=config,
                       fingerprint=pipeline.fingerprint,
                       scores_path=scores_path,
                       scored=scored,
                       errors=errors,
                       filtered=filtered,
                       inpaint_calls=sum(o.inpaint_calls for o in outcomes),
                       n_images=len(outcomes),
                       prompt_fallbacks=sorted({label for o in outcomes
                                                for label in o.fallbacks}),
                       plans=[o.plan for o in outcomes if o.plan])
    if outcomes:
        result.mean_image_time = sum(o.wall_time for o in outcomes) / len(outcomes)
    score_set = ScoreSet.from_scored(scored)
    if score_set.complete:
        result.report = evaluate(score_set)
        if config.mcm:
            baseline = ScoreSet.from_scored(scored, key='mcm')
            if baseline.complete:
                result.baseline = evaluate(baseline)
    else:
        result.note = NO_DATA
        logger.warning('run evaluation skipped: %s', NO_DATA)
    if result.plans:
        save_plans(result.plans, out_dir / 'plans.jsonl')
    finished = time.perf_counter()
    result.stage_times = {
        'load': loaded - started,
        'inpaint': sum(o.inpaint_time for o in outcomes),
        'process': processed - loaded,
        'evaluate': finished - processed,
        'total': finished - started,
    }
    logger.info('run done fingerprint=%s scored=%d errors=%d calls=%d total=%.2fs',
                result.fingerprint, len(scored), len(errors),
                result.inpaint_calls, result.stage_times['total'])
    return result


def _choice(choices):
    def parse(value):
        value = str(value).strip().replace('-', '_')
        if value not in choices:
            raise ConfigError(f'{value!r} is not one of {", ".join(choices)}')
        return value
    return parse


def _alpha_beta(value):
    if isinstance(value, (list, tuple)):
        alpha, beta = value
    else:
        try:
            alpha, beta = str(value).split(':')
        except ValueError:
            raise ConfigError(f'alpha_beta values look like 2:1, got {value!r}')
    return float(alpha), float(beta)


def _resolution(value):
    try:
        return parse_resolution(value)
    except Exception as e:
        raise ConfigError(str(e))


SWEEP_AXES = {
    'steps': int,
    'mask_ratio': float,
    'resolution': _resolution,
    'mode': _choice(MODES),
    'alpha_beta': _alpha_beta,
    'drop': _choice(DROP_CHOICES),
    'prompting': _choice(('simple', 'refined')),
    'inpaint_backend': str,
}


def _value_label(value):
    if value is None:
        return 'native'
    if isinstance(value, tuple):
        sep = 'x' if all(isinstance(v, int) for v in value) else ':'
        return sep.join(f'{v:g}' if isinstance(v, float) else str(v)
                        for v in value)
    # selectors like adapter:/path must stay one directory level
    return str(value).replace('/', '_').replace('\\', '_')


def apply_axis(config, axis, value):
    if axis == 'steps':
        changes = {'steps': value}
    elif axis == 'mask_ratio':
        changes = {'mask_ratio': value}
    elif axis == 'resolution':
        changes = {'target_resolution': value}
    elif axis == 'mode':
        changes = {'mode': value}
    elif axis == 'alpha_beta':
        changes = {'alpha': value[0], 'beta': value[1]}
    elif axis == 'drop':
        changes = {'drop': value}
    elif axis == 'prompting':
        if value == 'refined' and not config.exclusions:
            raise ConfigError('refined prompting needs an exclusions file')
        changes = {'exclusions': config.exclusions if value == 'refined' else None}
    elif axis == 'inpaint_backend':
        changes = {'inpaint_backend': value}
    else:
        raise ConfigError(f'unknown sweep axis {axis!r}')
    out_dir = Path(config.out_dir) / f'{axis}={_value_label(value)}'
    return replace(config, out_dir=str(out_dir), **changes)


@dataclass
class SweepEntry:
    value: object
    label: str
    config: object = None
    result: RunResult = None
    error: str = ''


@dataclass
class SweepResult:
    axis: str
    out_dir: Path
    entries: list = field(default_factory=list)

    @property
    def results(self):
        return [e.result for e in self.entries if e.result is not None]


def sweep(config, axis, values, progress=False):
    """One run per value with the shared seed; failing runs are isolated."""
    if axis not in SWEEP_AXES:
        raise ConfigError(f'unknown sweep axis {axis!r}; '
                          f'choose from {", ".join(SWEEP_AXES)}')
    if not values:
        raise ConfigError('sweep needs at least one value')
    try:
        parsed = [SWEEP_AXES[axis](v) for v in values]
    except ValueError as e:
        raise ConfigError(f'bad value for {axis}: {e}')
    configs = [apply_axis(config, axis, v) for v in parsed]
    outcome = SweepResult(axis=axis, out_dir=Path(config.out_dir))
    for value, run_config in zip(parsed, configs):
        entry = SweepEntry(value=value, label=_value_label(value),
                           config=run_config)
        try:
            entry.result = run(run_config, progress=progress)
        except RoninError as e:
            logger.error('sweep run failed axis=%s value=%s error=%s',
                         axis, entry.label, e)
            entry.error = f'{type(e).__name__}: {e}'
        outcome.entries.append(entry)
    return outcome
