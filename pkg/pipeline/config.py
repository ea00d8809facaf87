import hashlib
import json
try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from core.exceptions import ConfigError
from masking.plan import CLASS_WISE
from scoring.triplet import DROP_NONE

LOCAL = 'local'
CELERY = 'celery'
EXECUTORS = (LOCAL, CELERY)

# fields that change where or how fast a run goes, never what it scores
OPERATIONAL_FIELDS = ('out_dir', 'executor', 'workers', 'dump_plans')


@dataclass(frozen=True)
class RunConfig:
    manifest: str
    out_dir: str = 'ronin-out'
    mode: str = CLASS_WISE
    mask_ratio: float = 0.9
    steps: int = 20
    target_resolution: tuple = None
    guidance_scale: float = None
    alpha: float = 2.0
    beta: float = 1.0
    epsilon: float = 1e-6
    inpaint_template: str = '{label}'
    scoring_template: str = 'a photo of a {label}'
    refined_template: str = '{label}{exclusions}'
    negation: str = ', not a {concept}'
    exclusions: str = None
    inpaint_backend: str = 'mock'
    vl_backend: str = 'mock'
    visual_backend: str = 'mock'
    seed: int = 0
    min_confidence: float = None
    mcm: bool = False
    mcm_temperature: float = 0.01
    drop: str = DROP_NONE
    executor: str = LOCAL
    workers: int = 1
    dump_plans: bool = False

    def __post_init__(self):
        if self.target_resolution is not None:
            object.__setattr__(self, 'target_resolution',
                               tuple(self.target_resolution))
        if not 0 < self.mask_ratio <= 1:
            raise ConfigError(f'mask_ratio must be in (0, 1], got {self.mask_ratio}')
        if self.steps < 1:
            raise ConfigError(f'steps must be at least 1, got {self.steps}')
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError('alpha and beta must be non-negative')

    def to_dict(self):
        data = asdict(self)
        if self.target_resolution is not None:
            data['target_resolution'] = list(self.target_resolution)
        return data

    @classmethod
    def from_dict(cls, data):
        names = {f.name for f in fields(cls)}
        return cls(**{k: v for k, v in data.items() if k in names})

    def fingerprint(self, backends=None, exclusions_digest=None):
        """Hash of everything that can change a score."""
        payload = {k: v for k, v in self.to_dict().items()
                   if k not in OPERATIONAL_FIELDS}
        payload['backends'] = backends or {}
        payload['exclusions_digest'] = exclusions_digest
        blob = json.dumps(payload, sort_keys=True, default=str)
        return hashlib.sha256(blob.encode('utf-8')).hexdigest()[:16]


def load_config_file(path):
    """Options from a TOML or JSON file; keys use RunConfig field names."""
    path = Path(path)
    try:
        if path.suffix == '.toml':
            with open(path, 'rb') as fh:
                data = tomllib.load(fh)
        else:
            with open(path, encoding='utf-8') as fh:
                data = json.load(fh)
    except (OSError, ValueError) as e:
        raise ConfigError(f'cannot read config {path}: {e}')
    if not isinstance(data, dict):
        raise ConfigError(f'config {path} must be a table of options')
    # a [run] table is accepted so sweep settings can sit next to it
    return dict(data.get('run', data))
