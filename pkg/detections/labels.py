from django.conf import settings
from core.exceptions import LabelError


BRITISH_TO_US = {
    'aeroplane': 'airplane',
    'couch': 'sofa',
    'tv monitor': 'tv monitor',
}

PRESETS = {
    'voc': ['Person', 'Car', 'Bicycle', 'Boat', 'Bus', 'Motorbike', 'Train',
            'Aeroplane', 'Chair', 'Bottle', 'Dining Table', 'Potted Plant',
            'TV Monitor', 'Couch', 'Bird', 'Cat', 'Cow', 'Dog', 'Horse',
            'Sheep'],
    'bdd': ['Pedestrian', 'Rider', 'Car', 'Truck', 'Bus', 'Train',
            'Motorcycle', 'Bicycle', 'Traffic Light', 'Traffic Sign'],
}


def _collapse(raw):
    if not isinstance(raw, str):
        raise LabelError(f'label must be a string, got {raw!r}')
    text = ' '.join(raw.split()).lower()
    if not text:
        raise LabelError('label is empty after trimming')
    return text


def alias_table(extra=None):
    """
    The British -> US table merged with configured extras. Chains are
    resolved so every value is a fixed point of the table.
    """
    if extra is None:
        extra = getattr(settings, 'RONIN_LABEL_ALIASES', {}) or {}
    raw = dict(BRITISH_TO_US)
    for key, value in extra.items():
        raw[_collapse(key)] = _collapse(value)
    table = {}
    for key in raw:
        seen = {key}
        value = raw[key]
        while value in raw and raw[value] != value:
            if value in seen:
                raise LabelError(f'label alias cycle through {key!r}')
            seen.add(value)
            value = raw[value]
        table[key] = value
    return table


def normalize_label(raw, aliases=None):
    """Trim, lowercase and map British spellings to their US counterparts."""
    text = _collapse(raw)
    table = alias_table(aliases)
    return table.get(text, text)


def expand_labels(labels, aliases=None):
    """
    Canonicalize a label list (or a preset name such as ``"voc"``),
    dropping duplicates but keeping the first-seen order.
    """
    if isinstance(labels, str):
        try:
            labels = PRESETS[labels.strip().lower()]
        except KeyError:
            raise LabelError(f'unknown label preset {labels!r}')
    canonical = []
    for raw in labels:
        label = normalize_label(raw, aliases)
        if label not in canonical:
            canonical.append(label)
    return canonical
