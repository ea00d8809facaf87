from django.core.management.base import BaseCommand

from pipeline.models import Run
from pipeline.reports import report
from pipeline.runner import run
from ._options import add_run_arguments, check_partial, config_from_options, \
                      exit_codes


class Command(BaseCommand):
    help = 'Score every detection of a manifest and evaluate ID vs OOD.'

    def add_arguments(self, parser):
        add_run_arguments(parser)

    def handle(self, *args, **options):
        with exit_codes():
            config = config_from_options(options)
            result = run(config, progress=options['verbosity'] > 0)
            report(result, plots=options['plots'])
        if not options['no_record']:
            Run.record(config, result)
        if result.report is not None:
            self.stdout.write(
                f'fingerprint={result.fingerprint} '
                f'auroc={result.report.auroc:.4f} '
                f'fpr@95={result.report.fpr_at_95:.4f} '
                f'scored={len(result.scored)} errors={len(result.errors)}')
        else:
            self.stdout.write(f'fingerprint={result.fingerprint} {result.note}')
        check_partial(self, len(result.errors), options['strict'])
