from pathlib import Path

from django.core.management.base import BaseCommand

from evaluation.metrics import ScoreSet, evaluate, read_scores
from pipeline.reports import write_eval_report
from ._options import exit_codes


class Command(BaseCommand):
    help = 'Re-evaluate an existing scores.jsonl.'

    def add_arguments(self, parser):
        parser.add_argument('--scores', required=True)
        parser.add_argument('--out', help='output directory '
                                          '(default: next to the scores)')
        parser.add_argument('--key', default='score', choices=['score', 'mcm'],
                            help='which score column to evaluate')
        parser.add_argument('--tpr', type=float, default=0.95)
        parser.add_argument('--bins', type=int, default=20)

    def handle(self, *args, **options):
        out_dir = options['out'] or Path(options['scores']).parent / 'eval'
        with exit_codes():
            scored = read_scores(options['scores'])
            eval_report = evaluate(ScoreSet.from_scored(scored, options['key']),
                                   tpr_target=options['tpr'],
                                   bins=options['bins'])
            write_eval_report(scored, eval_report, out_dir)
        self.stdout.write(f'auroc={eval_report.auroc:.4f} '
                          f'fpr@{options["tpr"]:g}={eval_report.fpr_at_95:.4f} '
                          f'threshold={eval_report.threshold_used:.6g} '
                          f'n_id={eval_report.n_id} n_ood={eval_report.n_ood}')
