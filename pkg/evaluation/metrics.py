"""
ID-vs-OOD metrics. Higher scores mean more ID-like and a detection is
accepted as ID when ``score >= threshold``.
"""
import json
import math
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from core.exceptions import EvaluationError
from detections.manifest import GT_ID
from scoring.triplet import ScoredDetection


@dataclass(frozen=True)
class ScoreSet:
    id_scores: tuple = ()
    ood_scores: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, 'id_scores', tuple(self.id_scores))
        object.__setattr__(self, 'ood_scores', tuple(self.ood_scores))
        for value in self.id_scores + self.ood_scores:
            if not math.isfinite(value):
                raise EvaluationError(f'non-finite score {value}')

    @classmethod
    def from_scored(cls, scored, key='score'):
        id_scores, ood_scores = [], []
        for item in scored:
            value = getattr(item, key)
            if value is None:
                continue
            (id_scores if item.gt == GT_ID else ood_scores).append(value)
        return cls(tuple(id_scores), tuple(ood_scores))

    def swapped(self):
        return ScoreSet(self.ood_scores, self.id_scores)

    def mapped(self, fn):
        return ScoreSet(tuple(fn(v) for v in self.id_scores),
                        tuple(fn(v) for v in self.ood_scores))

    @property
    def complete(self):
        return bool(self.id_scores) and bool(self.ood_scores)


@dataclass(frozen=True)
class RecallReport:
    n_id_detections: int
    recall: float
    id_rejected: float
    threshold: float


@dataclass(frozen=True)
class RocRow:
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class HistogramBin:
    bin_left: float
    bin_right: float
    id_count: int
    ood_count: int


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    fpr_at_95: float
    threshold_used: float
    n_id: int
    n_ood: int
    tpr_target: float
    recall: RecallReport
    histogram: list = field(default_factory=list)
    roc: list = field(default_factory=list)

    def to_dict(self):
        return asdict(self)


def _arrays(s):
    if not s.complete:
        raise EvaluationError(
            f'need ID and OOD scores, got {len(s.id_scores)} ID '
            f'and {len(s.ood_scores)} OOD')
    return (np.sort(np.asarray(s.id_scores, dtype=np.float64)),
            np.sort(np.asarray(s.ood_scores, dtype=np.float64)))


def _count_at_least(sorted_scores, threshold):
    return len(sorted_scores) - np.searchsorted(sorted_scores, threshold,
                                                side='left')


def auroc(s):
    """Exact Mann-Whitney statistic: P(id > ood) with ties counting half."""
    ids, oods = _arrays(s)
    below = np.searchsorted(oods, ids, side='left')
    below_or_equal = np.searchsorted(oods, ids, side='right')
    wins = int(below.sum())
    ties = int((below_or_equal - below).sum())
    return (wins + 0.5 * ties) / (len(ids) * len(oods))


def fpr_at_tpr(s, tpr_target=0.95):
    """
    FPR at the largest threshold that still accepts ``tpr_target`` of the
    ID scores. Candidate thresholds are the scores themselves.
    """
    if not 0 < tpr_target <= 1:
        raise ValueError(f'tpr_target must be in (0, 1], got {tpr_target}')
    ids, oods = _arrays(s)
    candidates = np.unique(ids)
    tpr = _count_at_least(ids, candidates) / len(ids)
    threshold = float(candidates[tpr >= tpr_target].max())
    fpr = _count_at_least(oods, threshold) / len(oods)
    return float(fpr), threshold


def recall_and_rejection(id_scores, threshold):
    if not len(id_scores):
        raise EvaluationError('no ID scores')
    kept = sum(1 for v in id_scores if v >= threshold)
    recall = kept / len(id_scores)
    return RecallReport(n_id_detections=len(id_scores),
                        recall=recall,
                        id_rejected=1.0 - recall,
                        threshold=threshold)


def roc_table(s, n_points=None):
    """
    (threshold, tpr, fpr) rows for every distinct score, descending, after
    an implied (inf, 0, 0) start. ``n_points`` thins the table evenly.
    """
    ids, oods = _arrays(s)
    thresholds = np.unique(np.concatenate([ids, oods]))[::-1]
    tpr = _count_at_least(ids, thresholds) / len(ids)
    fpr = _count_at_least(oods, thresholds) / len(oods)
    rows = [RocRow(math.inf, 0.0, 0.0)]
    rows += [RocRow(float(t), float(a), float(b))
             for t, a, b in zip(thresholds, tpr, fpr)]
    if n_points and len(rows) > n_points:
        keep = np.unique(np.linspace(0, len(rows) - 1, n_points).round()
                         .astype(int))
        rows = [rows[i] for i in keep]
    return rows


def histogram(s, bins=20):
    values = np.asarray(s.id_scores + s.ood_scores, dtype=np.float64)
    if not len(values):
        return []
    edges = np.histogram_bin_edges(values, bins=bins)
    id_counts = np.histogram(s.id_scores, bins=edges)[0] if s.id_scores \
        else np.zeros(bins, dtype=int)
    ood_counts = np.histogram(s.ood_scores, bins=edges)[0] if s.ood_scores \
        else np.zeros(bins, dtype=int)
    return [HistogramBin(float(edges[i]), float(edges[i + 1]),
                         int(id_counts[i]), int(ood_counts[i]))
            for i in range(len(edges) - 1)]


def evaluate(s, tpr_target=0.95, bins=20, roc_points=None):
    fpr, threshold = fpr_at_tpr(s, tpr_target)
    return EvalReport(auroc=auroc(s),
                      fpr_at_95=fpr,
                      threshold_used=threshold,
                      n_id=len(s.id_scores),
                      n_ood=len(s.ood_scores),
                      tpr_target=tpr_target,
                      recall=recall_and_rejection(s.id_scores, threshold),
                      histogram=histogram(s, bins),
                      roc=roc_table(s, roc_points))


def label_table(scored):
    """Per predicted label: count, ID/OOD split and mean score."""
    groups = defaultdict(list)
    for item in scored:
        groups[item.label].append(item)
    rows = []
    for label in sorted(groups):
        items = groups[label]
        rows.append({
            'label': label,
            'n': len(items),
            'n_id': sum(1 for i in items if i.gt == GT_ID),
            'n_ood': sum(1 for i in items if i.gt != GT_ID),
            'mean_score': sum(i.score for i in items) / len(items),
        })
    return rows


def read_scores(path):
    scored = []
    with open(Path(path), encoding='utf-8') as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                scored.append(ScoredDetection.from_dict(json.loads(line)))
            except (KeyError, TypeError, ValueError) as e:
                # NaN similarities surface as ValueError
                raise EvaluationError(f'{path} line {lineno}: {e}')
    return scored
