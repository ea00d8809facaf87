"""
Report files of a run or a sweep.

One run writes ``report.json``, ``roc.csv``, ``hist.csv`` and ``labels.csv``
next to its ``scores.jsonl``; ``errors.jsonl`` only when the ledger is not
empty. A sweep adds ``sweep.csv`` in the sweep directory. ``--plots`` renders
PNG versions of the curves.
"""
import csv
import json
import logging
import math
from pathlib import Path

from core.exceptions import RoninError
from evaluation.metrics import label_table, roc_table, ScoreSet

logger = logging.getLogger(__name__)

ROC_COLUMNS = ['threshold', 'tpr', 'fpr']
HIST_COLUMNS = ['bin_left', 'bin_right', 'id_count', 'ood_count']
LABEL_COLUMNS = ['label', 'n', 'n_id', 'n_ood', 'mean_score']
SWEEP_COLUMNS = ['axis', 'value', 'auroc', 'fpr_at_95', 'threshold',
                 'n_scored', 'n_errors', 'inpaint_calls',
                 'mean_image_time', 'mean_inpaint_time', 'fingerprint', 'error']


def _writable(out_dir):
    out_dir = Path(out_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as e:
        raise RoninError(f'cannot write reports to {out_dir}: {e}')
    return out_dir


def _write_csv(path, columns, rows):
    with open(path, 'w', newline='', encoding='utf-8') as fh:
        writer = csv.DictWriter(fh, fieldnames=columns)
        writer.writeheader()
        for row in rows:
            writer.writerow(row)
    return path


def eval_summary(report):
    """EvalReport as JSON-safe dict; the ROC rows live in roc.csv."""
    if report is None:
        return None
    data = report.to_dict()
    data.pop('roc')
    return data


def report_dict(result, errors_file=None):
    config = result.config
    return {
        'fingerprint': result.fingerprint,
        'config': config.to_dict(),
        'counts': {
            'images': result.n_images,
            'detections': result.n_detections,
            'scored': len(result.scored),
            'errors': len(result.errors),
            'n_filtered': len(result.filtered),
            'inpaint_calls': result.inpaint_calls,
        },
        'stage_times': result.stage_times,
        'mean_image_time': result.mean_image_time,
        'eval': eval_summary(result.report),
        'baseline': eval_summary(result.baseline),
        'note': result.note or None,
        'scores_file': Path(result.scores_path).name,
        'errors_file': errors_file,
        'prompt_fallbacks': result.prompt_fallbacks,
    }


def write_run_report(result, out_dir=None, plots=False):
    out_dir = _writable(out_dir or result.config.out_dir)
    written = []
    errors_file = None
    if result.errors:
        errors_file = 'errors.jsonl'
        with open(out_dir / errors_file, 'w', encoding='utf-8') as fh:
            for entry in result.errors:
                fh.write(json.dumps(entry, sort_keys=True) + '\n')
        written.append(out_dir / errors_file)

    path = out_dir / 'report.json'
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump(report_dict(result, errors_file), fh, indent=2,
                  sort_keys=True)
    written.append(path)

    if result.report is not None:
        rows = [{'threshold': r.threshold, 'tpr': r.tpr, 'fpr': r.fpr}
                for r in result.report.roc]
        written.append(_write_csv(out_dir / 'roc.csv', ROC_COLUMNS, rows))
        rows = [vars(b) for b in result.report.histogram]
        written.append(_write_csv(out_dir / 'hist.csv', HIST_COLUMNS, rows))
    if result.scored:
        written.append(_write_csv(out_dir / 'labels.csv', LABEL_COLUMNS,
                                  label_table(result.scored)))
    if plots and result.report is not None:
        written += plot_run(result, out_dir)
    logger.info('report written out_dir=%s files=%d', out_dir, len(written))
    return written


def sweep_rows(sweep_result):
    rows = []
    for entry in sweep_result.entries:
        row = {'axis': sweep_result.axis, 'value': entry.label,
               'error': entry.error}
        result = entry.result
        if result is not None:
            report = result.report
            row.update({
                'auroc': report.auroc if report else '',
                'fpr_at_95': report.fpr_at_95 if report else '',
                'threshold': report.threshold_used if report else '',
                'n_scored': len(result.scored),
                'n_errors': len(result.errors),
                'inpaint_calls': result.inpaint_calls,
                'mean_image_time': result.mean_image_time,
                'mean_inpaint_time': result.stage_times.get('inpaint', 0.0)
                / max(1, result.n_images),
                'fingerprint': result.fingerprint,
            })
        rows.append(row)
    return rows


def write_sweep_report(sweep_result, plots=False):
    out_dir = _writable(sweep_result.out_dir)
    written = []
    for result in sweep_result.results:
        written += write_run_report(result, plots=plots)
    rows = sweep_rows(sweep_result)
    written.append(_write_csv(out_dir / 'sweep.csv', SWEEP_COLUMNS, rows))
    if plots:
        written += plot_sweep(sweep_result, rows, out_dir)
    return written


def report(results, out_dir=None, plots=False):
    """Write the report files of a RunResult, a SweepResult or a list of runs."""
    from .runner import RunResult, SweepResult
    if isinstance(results, SweepResult):
        return write_sweep_report(results, plots=plots)
    if isinstance(results, RunResult):
        return write_run_report(results, out_dir, plots=plots)
    results = list(results)
    if not results:
        raise RoninError('nothing to report')
    written = []
    for result in results:
        written += write_run_report(result, plots=plots)
    return written


def write_eval_report(scored, report, out_dir):
    """Files of ``ronin eval``: re-evaluation of an existing scores file."""
    out_dir = _writable(out_dir)
    path = out_dir / 'report.json'
    with open(path, 'w', encoding='utf-8') as fh:
        json.dump({'eval': eval_summary(report), 'n_scored': len(scored)},
                  fh, indent=2, sort_keys=True)
    written = [path]
    rows = [{'threshold': r.threshold, 'tpr': r.tpr, 'fpr': r.fpr}
            for r in report.roc]
    written.append(_write_csv(out_dir / 'roc.csv', ROC_COLUMNS, rows))
    written.append(_write_csv(out_dir / 'hist.csv', HIST_COLUMNS,
                              [vars(b) for b in report.histogram]))
    written.append(_write_csv(out_dir / 'labels.csv', LABEL_COLUMNS,
                              label_table(scored)))
    return written


def _pyplot():
    import matplotlib
    matplotlib.use('Agg')
    import matplotlib.pyplot as plt
    return plt


def plot_run(result, out_dir):
    plt = _pyplot()
    report = result.report
    written = []

    fig, ax = plt.subplots(figsize=(4, 4))
    rows = [r for r in roc_table(ScoreSet.from_scored(result.scored))
            if not math.isinf(r.threshold)]
    ax.plot([0.0] + [r.fpr for r in rows], [0.0] + [r.tpr for r in rows])
    ax.plot([0, 1], [0, 1], linestyle=':', color='grey')
    ax.set_xlabel('FPR')
    ax.set_ylabel('TPR')
    ax.set_title(f'AUROC {report.auroc:.4f}')
    fig.tight_layout()
    fig.savefig(out_dir / 'roc.png')
    plt.close(fig)
    written.append(out_dir / 'roc.png')

    fig, ax = plt.subplots(figsize=(5, 3))
    centers = [(b.bin_left + b.bin_right) / 2 for b in report.histogram]
    width = (report.histogram[0].bin_right - report.histogram[0].bin_left) \
        if report.histogram else 1.0
    ax.bar(centers, [b.id_count for b in report.histogram], width=width,
           alpha=0.6, label='ID')
    ax.bar(centers, [b.ood_count for b in report.histogram], width=width,
           alpha=0.6, label='OOD')
    ax.axvline(report.threshold_used, color='black', linestyle='--')
    ax.set_xlabel('score')
    ax.legend()
    fig.tight_layout()
    fig.savefig(out_dir / 'hist.png')
    plt.close(fig)
    written.append(out_dir / 'hist.png')
    return written


def plot_sweep(sweep_result, rows, out_dir):
    rows = [r for r in rows if r.get('auroc') not in (None, '')]
    if not rows:
        return []
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(5, 3))
    labels = [r['value'] for r in rows]
    ax.plot(labels, [r['auroc'] for r in rows], marker='o', label='AUROC')
    ax.plot(labels, [r['fpr_at_95'] for r in rows], marker='s',
            label='FPR@95')
    ax.set_xlabel(sweep_result.axis)
    ax.legend()
    fig.tight_layout()
    path = out_dir / 'sweep.png'
    fig.savefig(path)
    plt.close(fig)
    return [path]
