import functools
import json

from celery import shared_task

from detections.manifest import ImageRecord
from .config import RunConfig
from .runner import Pipeline


@functools.lru_cache(maxsize=4)
def _pipeline(config_json, id_labels):
    return Pipeline(RunConfig.from_dict(json.loads(config_json)), id_labels)


@shared_task
def score_image(config_data, image_data, image_path, id_labels):
    """
    Task to score every detection of one image. Returns the ImageOutcome
    as a dict; a worker keeps one Pipeline per config.
    """
    pipeline = _pipeline(json.dumps(config_data, sort_keys=True),
                         tuple(id_labels))
    outcome = pipeline.process_image(ImageRecord.from_dict(image_data),
                                     image_path)
    return outcome.to_dict()
