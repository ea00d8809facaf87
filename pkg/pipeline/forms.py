import re

from django import forms
from django.conf import settings

from core.exceptions import ConfigError
from masking.plan import MODES
from prompting.prompts import PromptTemplate
from scoring.triplet import DROP_CHOICES
from .config import EXECUTORS, RunConfig, load_config_file

RESOLUTION_RE = re.compile(r'^\s*(\d+)\s*[xX]\s*(\d+)\s*$')


def parse_resolution(value):
    """``"512x384"`` -> (512, 384); empty or ``native`` -> None."""
    if value in (None, '', 'native'):
        return None
    if isinstance(value, (list, tuple)):
        width, height = (int(v) for v in value)
    else:
        match = RESOLUTION_RE.match(str(value))
        if not match:
            raise forms.ValidationError(f'resolution must look like 512x512, got {value!r}')
        width, height = int(match.group(1)), int(match.group(2))
    if width < 1 or height < 1:
        raise forms.ValidationError('resolution must be positive')
    return width, height


def settings_defaults():
    return {
        'out_dir': 'ronin-out',
        'mode': settings.RONIN_MODE,
        'mask_ratio': settings.RONIN_MASK_RATIO,
        'steps': settings.RONIN_STEPS,
        'alpha': settings.RONIN_ALPHA,
        'beta': settings.RONIN_BETA,
        'epsilon': settings.RONIN_EPSILON,
        'inpaint_template': settings.RONIN_INPAINT_TEMPLATE,
        'scoring_template': settings.RONIN_SCORING_TEMPLATE,
        'refined_template': settings.RONIN_REFINED_TEMPLATE,
        'negation': settings.RONIN_NEGATION,
        'inpaint_backend': settings.RONIN_INPAINT_BACKEND,
        'vl_backend': settings.RONIN_VL_BACKEND,
        'visual_backend': settings.RONIN_VISUAL_BACKEND,
        'seed': settings.RONIN_SEED,
        'mcm_temperature': settings.RONIN_MCM_TEMPERATURE,
        'drop': 'none',
        'executor': settings.RONIN_EXECUTOR,
        'workers': settings.RONIN_WORKERS,
    }


class RunConfigForm(forms.Form):
    manifest = forms.CharField()
    out_dir = forms.CharField()
    mode = forms.CharField()
    mask_ratio = forms.FloatField()
    steps = forms.IntegerField(min_value=1)
    resolution = forms.CharField(required=False)
    guidance_scale = forms.FloatField(required=False, min_value=0)
    alpha = forms.FloatField(min_value=0)
    beta = forms.FloatField(min_value=0)
    epsilon = forms.FloatField()
    inpaint_template = forms.CharField(strip=False)
    scoring_template = forms.CharField(strip=False)
    refined_template = forms.CharField(strip=False)
    negation = forms.CharField(strip=False)
    exclusions = forms.CharField(required=False)
    inpaint_backend = forms.CharField()
    vl_backend = forms.CharField()
    visual_backend = forms.CharField()
    seed = forms.IntegerField(min_value=0)
    min_confidence = forms.FloatField(required=False, min_value=0,
                                      max_value=1)
    mcm = forms.BooleanField(required=False)
    mcm_temperature = forms.FloatField()
    drop = forms.ChoiceField(choices=[(c, c) for c in DROP_CHOICES])
    executor = forms.ChoiceField(choices=[(e, e) for e in EXECUTORS])
    workers = forms.IntegerField(min_value=1)
    dump_plans = forms.BooleanField(required=False)

    def clean_mode(self):
        mode = self.cleaned_data['mode'].strip().replace('-', '_')
        if mode not in MODES:
            raise forms.ValidationError(f'mode must be one of {", ".join(MODES)}')
        return mode

    def clean_mask_ratio(self):
        ratio = self.cleaned_data['mask_ratio']
        if not 0 < ratio <= 1:
            raise forms.ValidationError('mask ratio must be in (0, 1]')
        return ratio

    def clean_resolution(self):
        return parse_resolution(self.cleaned_data.get('resolution'))

    def clean_epsilon(self):
        epsilon = self.cleaned_data['epsilon']
        if not 0 < epsilon <= 1:
            raise forms.ValidationError('epsilon must be in (0, 1]')
        return epsilon

    def clean_mcm_temperature(self):
        temperature = self.cleaned_data['mcm_temperature']
        if temperature <= 0:
            raise forms.ValidationError('temperature must be positive')
        return temperature

    def _clean_template(self, name):
        pattern = self.cleaned_data[name]
        try:
            PromptTemplate(pattern)
        except ConfigError as e:
            raise forms.ValidationError(str(e))
        return pattern

    def clean_inpaint_template(self):
        return self._clean_template('inpaint_template')

    def clean_scoring_template(self):
        return self._clean_template('scoring_template')

    def clean_refined_template(self):
        return self._clean_template('refined_template')

    def clean_negation(self):
        negation = self.cleaned_data['negation']
        if '{concept}' not in negation:
            raise forms.ValidationError('negation must contain {concept}')
        return negation

    def clean_exclusions(self):
        return self.cleaned_data.get('exclusions') or None

    def to_config(self):
        if not self.is_valid():
            raise ConfigError(f'invalid run options: {self.errors.as_text()}',
                              errors=self.errors)
        data = dict(self.cleaned_data)
        data['target_resolution'] = data.pop('resolution')
        return RunConfig(**data)


def build_config(options, config_file=None):
    """
    RunConfig from settings defaults, then the config file, then explicit
    options (``None`` means "not given").
    """
    data = settings_defaults()
    if config_file:
        from_file = load_config_file(config_file)
        unknown = set(from_file) - set(RunConfigForm.base_fields) \
            - {'target_resolution'}
        if unknown:
            raise ConfigError(f'unknown options in {config_file}: '
                              f'{", ".join(sorted(unknown))}')
        data.update(from_file)
    data.update({k: v for k, v in options.items() if v is not None})
    if 'target_resolution' in data and 'resolution' not in data:
        data['resolution'] = data.pop('target_resolution')
    if isinstance(data.get('resolution'), (list, tuple)):
        data['resolution'] = 'x'.join(str(v) for v in data['resolution'])
    return RunConfigForm(data=data).to_config()
