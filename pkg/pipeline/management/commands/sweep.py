from django.core.management.base import BaseCommand

from pipeline.models import Run, Sweep
from pipeline.reports import report
from pipeline.runner import SWEEP_AXES, sweep
from ._options import add_run_arguments, check_partial, config_from_options, \
                      exit_codes


class Command(BaseCommand):
    help = 'Run once per value of one config axis and compare the runs.'

    def add_arguments(self, parser):
        add_run_arguments(parser)
        parser.add_argument('--axis', required=True, choices=list(SWEEP_AXES))
        parser.add_argument('--values', required=True, nargs='+',
                            help='values, space or comma separated')

    def handle(self, *args, **options):
        values = [v for chunk in options['values'] for v in chunk.split(',')
                  if v.strip()]
        with exit_codes():
            config = config_from_options(options)
            outcome = sweep(config, options['axis'], values,
                            progress=options['verbosity'] > 1)
            report(outcome, plots=options['plots'])
        if not options['no_record']:
            record = Sweep.objects.create(axis=outcome.axis,
                                          values=values,
                                          out_dir=str(outcome.out_dir))
            for entry in outcome.entries:
                Run.record(entry.config, entry.result, sweep=record,
                           sweep_value=entry.label, error=entry.error)
        for entry in outcome.entries:
            report_ = entry.result.report if entry.result else None
            if report_ is not None:
                self.stdout.write(f'{outcome.axis}={entry.label} '
                                  f'auroc={report_.auroc:.4f} '
                                  f'fpr@95={report_.fpr_at_95:.4f}')
            else:
                self.stdout.write(f'{outcome.axis}={entry.label} '
                                  f'{entry.error or "no data"}')
        self.stdout.write(f'sweep.csv written to {outcome.out_dir}')
        n_errors = sum(len(r.errors) for r in outcome.results) \
            + sum(1 for e in outcome.entries if e.error)
        check_partial(self, n_errors, options['strict'])
