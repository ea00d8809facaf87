"""
Detection manifests.

A manifest is JSONL: a header line ``{"id_labels": [...], "meta": {...}}``
followed by one line per image. Everything downstream only sees the
dataclasses below, never the detector that produced them.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path

from jsonschema import Draft202012Validator
from PIL import Image

from core.exceptions import LabelError, ManifestError, \
                            ManifestParseError, ManifestValidationError
from .labels import expand_labels, normalize_label

logger = logging.getLogger(__name__)

GT_ID = 'id'
GT_OOD = 'ood'
GT_FLAGS = (GT_ID, GT_OOD)

HEADER_SCHEMA = {
    'type': 'object',
    'required': ['id_labels'],
    'properties': {
        'id_labels': {
            'oneOf': [
                {'type': 'array', 'items': {'type': 'string'}},
                {'type': 'string'},
            ],
        },
        'meta': {'type': 'object'},
    },
}

IMAGE_SCHEMA = {
    'type': 'object',
    'required': ['image_path', 'detections'],
    'properties': {
        'image_path': {'type': 'string', 'minLength': 1},
        'width': {'type': 'integer'},
        'height': {'type': 'integer'},
        'detections': {
            'type': 'array',
            'items': {
                'type': 'object',
                'required': ['id', 'box', 'label', 'confidence', 'gt'],
                'properties': {
                    'id': {'type': 'string', 'minLength': 1},
                    'box': {
                        'type': 'array',
                        'items': {'type': 'integer'},
                        'minItems': 4,
                        'maxItems': 4,
                    },
                    'label': {'type': 'string'},
                    'confidence': {'type': 'number'},
                    'gt': {'enum': list(GT_FLAGS)},
                },
            },
        },
    },
}

_header_validator = Draft202012Validator(HEADER_SCHEMA)
_image_validator = Draft202012Validator(IMAGE_SCHEMA)


@dataclass(frozen=True)
class BoundingBox:
    x: int
    y: int
    w: int
    h: int

    @property
    def right(self):
        return self.x + self.w

    @property
    def bottom(self):
        return self.y + self.h

    @property
    def area(self):
        return self.w * self.h

    def contains(self, other):
        return (self.x <= other.x and self.y <= other.y
                and other.right <= self.right
                and other.bottom <= self.bottom)

    def fits(self, width, height):
        return (self.x >= 0 and self.y >= 0
                and self.right <= width and self.bottom <= height)

    def as_list(self):
        return [self.x, self.y, self.w, self.h]

    @classmethod
    def from_list(cls, values):
        x, y, w, h = values
        return cls(int(x), int(y), int(w), int(h))


@dataclass(frozen=True)
class Detection:
    detection_id: str
    box: BoundingBox
    label: str
    confidence: float
    gt: str

    @property
    def is_id(self):
        return self.gt == GT_ID

    def to_dict(self):
        return {
            'id': self.detection_id,
            'box': self.box.as_list(),
            'label': self.label,
            'confidence': self.confidence,
            'gt': self.gt,
        }

    @classmethod
    def from_dict(cls, data):
        return cls(detection_id=data['id'],
                   box=BoundingBox.from_list(data['box']),
                   label=data['label'],
                   confidence=data['confidence'],
                   gt=data['gt'])


@dataclass(frozen=True)
class ImageRecord:
    image_path: str
    width: int
    height: int
    detections: tuple = ()

    def to_dict(self):
        return {
            'image_path': self.image_path,
            'width': self.width,
            'height': self.height,
            'detections': [d.to_dict() for d in self.detections],
        }

    @classmethod
    def from_dict(cls, data):
        return cls(image_path=data['image_path'],
                   width=data['width'],
                   height=data['height'],
                   detections=tuple(Detection.from_dict(d)
                                    for d in data['detections']))


@dataclass(frozen=True)
class Manifest:
    id_labels: tuple
    images: tuple = ()
    metadata: dict = field(default_factory=dict)
    # directory image paths are relative to
    root: Path = field(default=Path('.'), compare=False)

    def resolve(self, image):
        return self.root / image.image_path

    def detections(self):
        for image in self.images:
            yield from image.detections

    @property
    def n_detections(self):
        return sum(len(image.detections) for image in self.images)


@dataclass(frozen=True)
class Violation:
    rule: str
    message: str
    detection_id: str = None
    image_path: str = None

    def __str__(self):
        where = self.detection_id or self.image_path or 'manifest'
        return f'{self.rule} ({where}): {self.message}'


def _first_schema_error(validator, data):
    errors = sorted(validator.iter_errors(data), key=lambda e: list(e.path))
    if not errors:
        return None
    error = errors[0]
    location = '/'.join(str(p) for p in error.path)
    return f'{location}: {error.message}' if location else error.message


def _read_size(path):
    with Image.open(path) as img:
        return img.size


def load_manifest(path, aliases=None, check_images=True):
    """
    Load, canonicalize and validate a JSONL manifest.

    Image paths are kept exactly as written and resolved against the
    manifest directory. Missing width/height are read from the image header.
    """
    path = Path(path)
    root = path.parent
    header = None
    images = []
    with open(path, encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                data = json.loads(line)
            except json.JSONDecodeError as e:
                raise ManifestParseError(f'malformed JSON: {e.msg}', lineno)
            if header is None:
                error = _first_schema_error(_header_validator, data)
                if error:
                    raise ManifestParseError(f'bad header: {error}', lineno)
                try:
                    id_labels = expand_labels(data['id_labels'], aliases)
                except LabelError as e:
                    raise ManifestParseError(str(e), lineno)
                header = (id_labels, data.get('meta', {}))
                continue
            images.append(_parse_image(data, lineno, root, aliases,
                                       check_images))
    if header is None:
        raise ManifestParseError('missing header line', 1)
    manifest = Manifest(id_labels=tuple(header[0]),
                        images=tuple(images),
                        metadata=header[1],
                        root=root)
    violations = validate_manifest(manifest, aliases)
    if violations:
        raise ManifestValidationError(violations)
    logger.info('manifest loaded path=%s images=%d detections=%d',
                path, len(manifest.images), manifest.n_detections)
    return manifest


def _parse_image(data, lineno, root, aliases, check_images):
    error = _first_schema_error(_image_validator, data)
    if error:
        raise ManifestParseError(f'malformed record: {error}', lineno)
    image_file = root / data['image_path']
    if check_images and not image_file.is_file():
        raise ManifestError(f'line {lineno}: missing image file {image_file}')
    width, height = data.get('width'), data.get('height')
    if width is None or height is None:
        if not image_file.is_file():
            raise ManifestError(
                f'line {lineno}: no size given and image {image_file} missing')
        width, height = _read_size(image_file)
    detections = []
    for raw in data['detections']:
        try:
            label = normalize_label(raw['label'], aliases)
        except LabelError as e:
            raise ManifestParseError(f'detection {raw["id"]}: {e}', lineno)
        detections.append(Detection(detection_id=raw['id'],
                                    box=BoundingBox.from_list(raw['box']),
                                    label=label,
                                    confidence=raw['confidence'],
                                    gt=raw['gt']))
    return ImageRecord(image_path=data['image_path'],
                       width=width,
                       height=height,
                       detections=tuple(detections))


def save_manifest(manifest, path):
    path = Path(path)
    with open(path, 'w', encoding='utf-8') as fh:
        header = {'id_labels': list(manifest.id_labels),
                  'meta': manifest.metadata}
        fh.write(json.dumps(header, ensure_ascii=False) + '\n')
        for image in manifest.images:
            fh.write(json.dumps(image.to_dict(), ensure_ascii=False) + '\n')
    return path


def validate_manifest(manifest, aliases=None):
    """Return every invariant violation; an empty list means valid."""
    violations = []
    known = set(manifest.id_labels)
    seen = set()
    for image in manifest.images:
        if image.width < 1 or image.height < 1:
            violations.append(Violation(
                'image size', f'{image.width}x{image.height}',
                image_path=image.image_path))
        for det in image.detections:
            did = det.detection_id
            if did in seen:
                violations.append(Violation(
                    'duplicate id', f'{did} appears more than once',
                    detection_id=did, image_path=image.image_path))
            seen.add(did)
            box = det.box
            if box.w < 1 or box.h < 1:
                violations.append(Violation(
                    'box size', f'{box.as_list()} has zero extent',
                    detection_id=did, image_path=image.image_path))
            if not box.fits(image.width, image.height):
                violations.append(Violation(
                    'box bounds',
                    f'{box.as_list()} outside {image.width}x{image.height}',
                    detection_id=did, image_path=image.image_path))
            try:
                canonical = normalize_label(det.label, aliases) == det.label
            except LabelError:
                canonical = False
            if not canonical:
                violations.append(Violation(
                    'label form', f'{det.label!r} is not canonical',
                    detection_id=did, image_path=image.image_path))
            if det.label not in known:
                violations.append(Violation(
                    'unknown label', f'{det.label!r} not in id_labels',
                    detection_id=did, image_path=image.image_path))
            if not 0.0 <= det.confidence <= 1.0:
                violations.append(Violation(
                    'confidence range', f'{det.confidence} not in [0, 1]',
                    detection_id=did, image_path=image.image_path))
            if det.gt not in GT_FLAGS:
                violations.append(Violation(
                    'gt flag', f'{det.gt!r} is neither id nor ood',
                    detection_id=did, image_path=image.image_path))
    return violations


def filter_confidence(manifest, min_confidence):
    """Drop detections below ``min_confidence``; returns (manifest, dropped ids)."""
    if min_confidence is None:
        return manifest, []
    dropped = []
    images = []
    for image in manifest.images:
        kept = []
        for det in image.detections:
            if det.confidence >= min_confidence:
                kept.append(det)
            else:
                dropped.append(det.detection_id)
        images.append(replace(image, detections=tuple(kept)))
    if dropped:
        logger.info('confidence filter min=%s dropped=%d',
                    min_confidence, len(dropped))
    return replace(manifest, images=tuple(images)), dropped
