"""
Condition strings for the inpainting backend.

The simple prompt is the predicted label itself. The refined prompt adds
near non-ID concepts the generator should stay away from, e.g.
``horse, not a donkey, not a zebra``.
"""
import hashlib
import json
import logging
import string
from dataclasses import dataclass, field
from pathlib import Path

from django.conf import settings

from core.exceptions import ConfigError, ExclusionError, LabelError
from detections.labels import normalize_label

logger = logging.getLogger(__name__)

DEFAULT_NEGATION = ', not a {concept}'
PLACEHOLDERS = {'label', 'exclusions'}


@dataclass(frozen=True)
class PromptTemplate:
    pattern: str

    def __post_init__(self):
        try:
            fields = [name for _, name, _, _ in
                      string.Formatter().parse(self.pattern)
                      if name is not None]
        except ValueError as e:
            raise ConfigError(f'malformed template {self.pattern!r}: {e}')
        if fields.count('label') != 1:
            raise ConfigError(
                f'template {self.pattern!r} must contain {{label}} exactly once')
        unknown = set(fields) - PLACEHOLDERS
        if unknown:
            raise ConfigError(
                f'template {self.pattern!r} has unknown placeholders {sorted(unknown)}')

    def render(self, label, exclusions=''):
        text = self.pattern.format(label=label, exclusions=exclusions)
        return ' '.join(text.split())


@dataclass(frozen=True)
class ExclusionMap:
    entries: dict = field(default_factory=dict)

    def __contains__(self, label):
        return label in self.entries

    def __len__(self):
        return len(self.entries)

    def get(self, label):
        return self.entries.get(label, ())

    def digest(self):
        payload = json.dumps({k: list(v) for k, v in self.entries.items()},
                             sort_keys=True)
        return hashlib.sha256(payload.encode('utf-8')).hexdigest()[:16]


class ConceptClient:
    """
    Source of near non-ID concepts for a label (an LLM or a taxonomy).
    Runs read concepts from an exclusions file instead.
    """

    def nearest_concepts(self, label, k=5):
        raise NotImplementedError('concept retrieval is not wired to any service')


def _as_template(template):
    if isinstance(template, PromptTemplate):
        return template
    return PromptTemplate(template)


def simple_prompt(label, template):
    return _as_template(template).render(label)


def render_exclusions(concepts, negation=DEFAULT_NEGATION):
    return ''.join(negation.format(concept=c) for c in concepts)


def refined_prompt(label, exclusions, template, fallback=None,
                   negation=DEFAULT_NEGATION):
    concepts = exclusions.get(label)
    if not concepts:
        logger.info('refined prompt fallback label=%s', label)
        return simple_prompt(label, fallback or template)
    return _as_template(template).render(label,
                                         render_exclusions(concepts, negation))


def load_exclusions(path, aliases=None):
    try:
        with open(Path(path), encoding='utf-8') as fh:
            data = json.load(fh)
    except json.JSONDecodeError as e:
        raise ExclusionError(f'{path}: malformed JSON: {e.msg} (line {e.lineno})')
    except OSError as e:
        raise ExclusionError(f'{path}: {e}')
    if not isinstance(data, dict):
        raise ExclusionError(f'{path}: expected a JSON object of label -> concepts')
    entries = {}
    for raw_label, raw_concepts in data.items():
        if not isinstance(raw_concepts, list) or not raw_concepts:
            raise ExclusionError(f'{raw_label!r}: concepts must be a non-empty list')
        try:
            label = normalize_label(raw_label, aliases)
            concepts = [normalize_label(c, aliases) for c in raw_concepts]
        except LabelError as e:
            raise ExclusionError(f'{raw_label!r}: {e}')
        if label in entries:
            raise ExclusionError(f'{raw_label!r}: duplicate entry for {label!r}')
        if label in concepts:
            raise ExclusionError(f'{raw_label!r}: excludes itself')
        entries[label] = tuple(concepts)
    logger.info('exclusions loaded path=%s labels=%d', path, len(entries))
    return ExclusionMap(entries)


class PromptBuilder:
    """Builds the inpainting prompt of each pass."""

    def __init__(self, template, refined_template=None, exclusions=None,
                 negation=DEFAULT_NEGATION):
        self.template = _as_template(template)
        self.refined_template = _as_template(refined_template) \
            if refined_template else None
        self.exclusions = exclusions
        self.negation = negation

    @property
    def refined(self):
        return self.exclusions is not None

    def falls_back(self, label):
        """True when refined prompting has no exclusions for ``label``."""
        return self.refined and label not in self.exclusions

    def build(self, label):
        if not self.refined:
            return simple_prompt(label, self.template)
        return refined_prompt(label, self.exclusions,
                              self.refined_template or self.template,
                              fallback=self.template,
                              negation=self.negation)


def scoring_template():
    return PromptTemplate(settings.RONIN_SCORING_TEMPLATE)
