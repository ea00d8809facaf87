"""Flags shared by ``run`` and ``sweep``, and the error to exit-code mapping."""
import logging
from contextlib import contextmanager

from django.core.management.base import CommandError

from core.exceptions import BackendUnavailable, ConfigError, EvaluationError, \
                            ExclusionError, ManifestError, RoninError
from pipeline.forms import build_config

logger = logging.getLogger(__name__)

EXIT_CONFIG = 1
EXIT_BACKEND = 2
EXIT_PARTIAL = 3

# flag dest -> RunConfigForm field
RUN_FLAGS = {
    'manifest': 'manifest',
    'mode': 'mode',
    'mask_ratio': 'mask_ratio',
    'steps': 'steps',
    'resolution': 'resolution',
    'guidance_scale': 'guidance_scale',
    'alpha': 'alpha',
    'beta': 'beta',
    'epsilon': 'epsilon',
    'inpaint_backend': 'inpaint_backend',
    'vl_backend': 'vl_backend',
    'visual_backend': 'visual_backend',
    'exclusions': 'exclusions',
    'min_confidence': 'min_confidence',
    'seed': 'seed',
    'out': 'out_dir',
    'mcm_temperature': 'mcm_temperature',
    'drop': 'drop',
    'executor': 'executor',
    'workers': 'workers',
}
SWITCHES = ('mcm', 'dump_plans')


def add_run_arguments(parser):
    parser.add_argument('--manifest', help='detection manifest (JSONL)')
    parser.add_argument('--config', help='TOML or JSON file with run options')
    parser.add_argument('--mode', help='class-wise or object-wise')
    parser.add_argument('--mask-ratio', type=float)
    parser.add_argument('--steps', type=int)
    parser.add_argument('--resolution', help='WxH or native')
    parser.add_argument('--guidance-scale', type=float)
    parser.add_argument('--alpha', type=float)
    parser.add_argument('--beta', type=float)
    parser.add_argument('--epsilon', type=float)
    parser.add_argument('--inpaint-backend',
                        help='mock, adapter:CMD or diffusers:MODEL_ID')
    parser.add_argument('--vl-backend',
                        help='mock, adapter:CMD or openclip:ARCH/PRETRAINED')
    parser.add_argument('--visual-backend',
                        help='mock, adapter:CMD or openclip:ARCH/PRETRAINED')
    parser.add_argument('--exclusions',
                        help='JSON map label -> excluded concepts')
    parser.add_argument('--min-confidence', type=float)
    parser.add_argument('--seed', type=int)
    parser.add_argument('--out', help='output directory')
    parser.add_argument('--mcm', action='store_true', default=None,
                        help='also score with the MCM baseline')
    parser.add_argument('--mcm-temperature', type=float)
    parser.add_argument('--drop', help='leave one triplet component out')
    parser.add_argument('--executor', help='local or celery')
    parser.add_argument('--workers', type=int)
    parser.add_argument('--dump-plans', action='store_true', default=None)
    parser.add_argument('--plots', action='store_true',
                        help='render PNG plots next to the CSV files')
    parser.add_argument('--strict', action='store_true',
                        help='exit 3 when any detection failed')
    parser.add_argument('--no-record', action='store_true',
                        help='do not store the run in the registry')


def config_from_options(options):
    raw = {field: options.get(flag) for flag, field in RUN_FLAGS.items()}
    for switch in SWITCHES:
        raw[switch] = options.get(switch)
    return build_config(raw, options.get('config'))


@contextmanager
def exit_codes():
    """Translate pipeline errors into CommandError exit codes."""
    try:
        yield
    except (ConfigError, ManifestError, ExclusionError, EvaluationError) as e:
        raise CommandError(str(e), returncode=EXIT_CONFIG)
    except BackendUnavailable as e:
        raise CommandError(f'backend unavailable: {e}',
                           returncode=EXIT_BACKEND)
    except RoninError as e:
        raise CommandError(str(e), returncode=EXIT_BACKEND)


def check_partial(command, n_errors, strict):
    if not n_errors:
        return
    message = f'{n_errors} detection(s) failed; see errors.jsonl'
    if strict:
        raise CommandError(message, returncode=EXIT_PARTIAL)
    command.stderr.write(command.style.WARNING(message))
