import json
import math
import random
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from core.exceptions import EvaluationError
from scoring.triplet import ScoredDetection, SimilarityTriplet
from .metrics import ScoreSet, auroc, evaluate, fpr_at_tpr, histogram, \
                     label_table, read_scores, recall_and_rejection, roc_table


def brute_auroc(s):
    total = 0.0
    for i in s.id_scores:
        for o in s.ood_scores:
            total += 1.0 if i > o else 0.5 if i == o else 0.0
    return total / (len(s.id_scores) * len(s.ood_scores))


def brute_fpr(s, target):
    best = None
    for t in sorted(set(s.id_scores)):
        if sum(1 for i in s.id_scores if i >= t) / len(s.id_scores) >= target:
            best = t
    return sum(1 for o in s.ood_scores if o >= best) / len(s.ood_scores), best


def random_set(rng):
    pool = [round(rng.random(), 2) for _ in range(rng.randint(1, 30))]
    n_id, n_ood = rng.randint(1, 100), rng.randint(1, 100)
    return ScoreSet([rng.choice(pool) if rng.random() < 0.3 else rng.random()
                     for _ in range(n_id)],
                    [rng.choice(pool) if rng.random() < 0.3 else rng.random()
                     for _ in range(n_ood)])


class AurocTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(auroc(ScoreSet([0.9, 0.8], [0.2, 0.1])), 1.0)
        self.assertEqual(auroc(ScoreSet([0.5], [0.5])), 0.5)
        self.assertAlmostEqual(auroc(ScoreSet([0.8, 0.6, 0.4], [0.7, 0.3])), 4 / 6)

    def test_empty_side(self):
        with self.assertRaises(EvaluationError):
            auroc(ScoreSet([0.1], []))

    def test_matches_brute_force(self):
        rng = random.Random(2024)
        for _ in range(500):
            s = random_set(rng)
            self.assertEqual(auroc(s), brute_auroc(s))

    def test_swap_antisymmetry(self):
        rng = random.Random(1)
        for _ in range(100):
            s = ScoreSet([rng.random() for _ in range(20)],
                         [rng.random() for _ in range(15)])
            self.assertAlmostEqual(auroc(s) + auroc(s.swapped()), 1.0, places=12)

    def test_rejects_non_finite(self):
        with self.assertRaises(EvaluationError):
            ScoreSet([math.nan], [0.1])


class FprAtTprTests(SimpleTestCase):

    def test_examples(self):
        self.assertEqual(fpr_at_tpr(ScoreSet([0.9, 0.8], [0.2, 0.1])), (0.0, 0.8))
        ids = [round(0.05 * k, 2) for k in range(1, 21)]
        fpr, threshold = fpr_at_tpr(ScoreSet(ids, [0.12]))
        self.assertEqual(threshold, 0.10)
        self.assertEqual(fpr, 1.0)
        self.assertEqual(fpr_at_tpr(ScoreSet([0.3, 0.7], [0.5]), 1.0), (1.0, 0.3))

    def test_matches_threshold_scan(self):
        rng = random.Random(77)
        for _ in range(500):
            s = random_set(rng)
            self.assertEqual(fpr_at_tpr(s, 0.95), brute_fpr(s, 0.95))

    def test_target_range(self):
        with self.assertRaises(ValueError):
            fpr_at_tpr(ScoreSet([0.1], [0.2]), 0.0)

    def test_threshold_recomputes_fpr(self):
        s = ScoreSet([0.2, 0.4, 0.6, 0.9], [0.1, 0.5, 0.7])
        fpr, threshold = fpr_at_tpr(s, 0.75)
        self.assertEqual(fpr, sum(1 for o in s.ood_scores if o >= threshold) / 3)


class MonotoneInvarianceTests(SimpleTestCase):

    def test_cube_and_log(self):
        rng = random.Random(5)
        for _ in range(100):
            s = ScoreSet([rng.uniform(0.01, 3) for _ in range(rng.randint(1, 40))],
                         [rng.uniform(0.01, 3) for _ in range(rng.randint(1, 40))])
            for fn in (lambda x: x ** 3, lambda x: math.log(x + 2)):
                t = s.mapped(fn)
                self.assertEqual(auroc(t), auroc(s))
                self.assertEqual(fpr_at_tpr(t)[0], fpr_at_tpr(s)[0])


class RecallTests(SimpleTestCase):

    def test_examples(self):
        report = recall_and_rejection([0.6, 0.7], 0.5)
        self.assertEqual((report.recall, report.id_rejected), (1.0, 0.0))
        report = recall_and_rejection([0.2, 0.8], 0.5)
        self.assertEqual(report.recall, 0.5)
        self.assertAlmostEqual(report.recall + report.id_rejected, 1.0, delta=1e-9)

    def test_empty(self):
        with self.assertRaises(EvaluationError):
            recall_and_rejection([], 0.5)


class RocTableTests(SimpleTestCase):

    def test_perfect_separation(self):
        rows = roc_table(ScoreSet([0.9, 0.8], [0.2, 0.1]))
        self.assertIn((1.0, 0.0), [(r.tpr, r.fpr) for r in rows])

    def test_single_shared_score(self):
        rows = roc_table(ScoreSet([0.5, 0.5], [0.5]))
        self.assertEqual([(r.tpr, r.fpr) for r in rows], [(0.0, 0.0), (1.0, 1.0)])
        self.assertTrue(math.isinf(rows[0].threshold))

    def test_matches_recount(self):
        rng = random.Random(10)
        for _ in range(50):
            s = ScoreSet([rng.random() for _ in range(10)],
                         [rng.random() for _ in range(10)])
            rows = roc_table(s)
            for row in rows[1:]:
                self.assertEqual(row.tpr, sum(1 for i in s.id_scores
                                              if i >= row.threshold) / 10)
                self.assertEqual(row.fpr, sum(1 for o in s.ood_scores
                                              if o >= row.threshold) / 10)
            for above, below in zip(rows, rows[1:]):
                self.assertGreater(above.threshold, below.threshold)
                self.assertLessEqual(above.tpr, below.tpr)
                self.assertLessEqual(above.fpr, below.fpr)

    def test_thinning(self):
        rows = roc_table(ScoreSet(list(range(50)), list(range(50, 100))), n_points=10)
        self.assertLessEqual(len(rows), 10)
        self.assertTrue(math.isinf(rows[0].threshold))


class ReportTests(SimpleTestCase):

    def scored(self, did, gt, score, label='dog'):
        return ScoredDetection(did, 'a.png', label, gt,
                               SimilarityTriplet(0.5, 0.5, 0.5), score,
                               'class_wise', 'fp', 0)

    def test_histogram_counts_everything(self):
        s = ScoreSet([0.1, 0.2, 0.9], [0.05, 0.5])
        bins = histogram(s, bins=4)
        self.assertEqual(len(bins), 4)
        self.assertEqual(sum(b.id_count for b in bins), 3)
        self.assertEqual(sum(b.ood_count for b in bins), 2)

    def test_evaluate(self):
        report = evaluate(ScoreSet([0.9, 0.8], [0.2, 0.1]))
        self.assertEqual(report.auroc, 1.0)
        self.assertEqual(report.fpr_at_95, 0.0)
        self.assertEqual(report.threshold_used, 0.8)
        self.assertEqual((report.n_id, report.n_ood), (2, 2))
        self.assertEqual(report.recall.recall, 1.0)

    def test_label_table(self):
        rows = label_table([self.scored('a', 'id', 0.8),
                            self.scored('b', 'ood', 0.2),
                            self.scored('c', 'id', 0.5, 'cat')])
        self.assertEqual([r['label'] for r in rows], ['cat', 'dog'])
        self.assertEqual(rows[1]['n_ood'], 1)
        self.assertAlmostEqual(rows[1]['mean_score'], 0.5)

    def test_read_scores(self):
        records = [self.scored('a', 'id', 0.8), self.scored('b', 'ood', 0.2)]
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'scores.jsonl'
            path.write_text(''.join(json.dumps(r.to_dict()) + '\n' for r in records))
            self.assertEqual(read_scores(path), records)
            path.write_text('{"id": "a"}\n')
            with self.assertRaises(EvaluationError):
                read_scores(path)

    def test_read_scores_rejects_nan_similarity(self):
        record = self.scored('a', 'id', 0.8).to_dict()
        record['s_ori_y'] = float('nan')
        with tempfile.TemporaryDirectory() as tmp:
            path = Path(tmp) / 'scores.jsonl'
            path.write_text(json.dumps(record) + '\n')
            with self.assertRaises(EvaluationError):
                read_scores(path)
