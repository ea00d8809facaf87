import math
import random

import numpy as np
from django.test import SimpleTestCase

from embeddings.encoders import build_encoders
from inpainting.backends import label_color
from prompting.prompts import PromptTemplate
from .triplet import ScoredDetection, ScoreParams, SimilarityTriplet, \
                     ablated_score, mcm_score, triplet_score, \
                     triplet_similarities

TEMPLATE = PromptTemplate('a photo of a {label}')
COS10 = math.cos(math.radians(10))


def solid(color, size=(16, 16)):
    raster = np.empty((size[1], size[0], 3), dtype=np.uint8)
    raster[...] = color
    return raster


def inpainted(planted, label, size=16, inner=12):
    """A planted object whose centre was filled by the mock inpainter."""
    raster = solid(planted, (size, size))
    offset = (size - inner) // 2
    raster[offset:offset + inner, offset:offset + inner] = label_color(label)
    return raster


class TripletScoreTests(SimpleTestCase):

    def setUp(self):
        self.params = ScoreParams(alpha=2, beta=1)
        self.example = SimilarityTriplet(s_ori_y=0.3, s_inp_y=0.25, s_ori_inp=0.8)

    def test_unit_fixed_point(self):
        self.assertEqual(triplet_score(SimilarityTriplet(1, 1, 1), self.params), 1.0)

    def test_worked_example(self):
        self.assertAlmostEqual(triplet_score(self.example, self.params), 0.288,
                               delta=1e-12)

    def test_cancellation(self):
        params = ScoreParams(alpha=1, beta=1)
        t = SimilarityTriplet(s_ori_y=0.6, s_inp_y=0.6, s_ori_inp=0.35)
        self.assertAlmostEqual(triplet_score(t, params), 0.35, delta=1e-12)

    def test_hand_enumerable_cases(self):
        grid = (0.1, 0.25, 0.5, 0.75, 1.0)
        params = ScoreParams(alpha=2, beta=1)
        count = 0
        for a in grid:
            for b in grid:
                for c in grid[:2]:
                    t = SimilarityTriplet(s_ori_y=a, s_inp_y=c, s_ori_inp=b)
                    self.assertAlmostEqual(triplet_score(t, params),
                                           a * a * b / c, delta=1e-12)
                    self.assertAlmostEqual(ablated_score(t, params, 's_inp_y'),
                                           a * a * b, delta=1e-12)
                    self.assertAlmostEqual(ablated_score(t, params, 's_ori_inp'),
                                           a * a / c, delta=1e-12)
                    self.assertAlmostEqual(ablated_score(t, params, 's_ori_y'),
                                           b / c, delta=1e-12)
                    count += 1
        self.assertEqual(count, 50)

    def test_ablations(self):
        self.assertAlmostEqual(ablated_score(self.example, self.params, 's_inp_y'),
                               0.072, delta=1e-12)
        self.assertAlmostEqual(ablated_score(self.example, self.params, 's_ori_inp'),
                               0.36, delta=1e-12)
        self.assertEqual(ablated_score(self.example, self.params, 'none'),
                         triplet_score(self.example, self.params))
        with self.assertRaises(ValueError):
            ablated_score(self.example, self.params, 'everything')

    def test_clamp_keeps_score_positive(self):
        t = SimilarityTriplet(s_ori_y=-0.4, s_inp_y=0.0, s_ori_inp=-1.0)
        score = triplet_score(t, self.params)
        self.assertGreater(score, 0)
        self.assertTrue(math.isfinite(score))

    def test_monotonicity(self):
        rng = random.Random(11)
        step = 1e-3
        for _ in range(500):
            t = SimilarityTriplet(rng.uniform(0.01, 0.99), rng.uniform(0.01, 0.99),
                                  rng.uniform(0.01, 0.99))
            base = triplet_score(t, self.params)
            self.assertGreater(triplet_score(SimilarityTriplet(
                t.s_ori_y + step, t.s_inp_y, t.s_ori_inp), self.params), base)
            self.assertGreater(triplet_score(SimilarityTriplet(
                t.s_ori_y, t.s_inp_y, t.s_ori_inp + step), self.params), base)
            self.assertLess(triplet_score(SimilarityTriplet(
                t.s_ori_y, t.s_inp_y + step, t.s_ori_inp), self.params), base)

    def test_ranking_invariant_under_epsilon(self):
        rng = random.Random(12)
        triplets = [SimilarityTriplet(rng.uniform(0.01, 1), rng.uniform(0.01, 1),
                                      rng.uniform(0.01, 1)) for _ in range(200)]
        rankings = []
        for epsilon in (1e-6, 1e-4):
            params = ScoreParams(2, 1, epsilon)
            scores = [triplet_score(t, params) for t in triplets]
            rankings.append(sorted(range(len(scores)), key=scores.__getitem__))
        self.assertEqual(rankings[0], rankings[1])

    def test_params_validation(self):
        with self.assertRaises(ValueError):
            ScoreParams(alpha=-1)
        with self.assertRaises(ValueError):
            ScoreParams(epsilon=0)

    def test_scored_detection_record(self):
        scored = ScoredDetection('d1', 'a.png', 'dog', 'id', self.example, 0.288,
                                 'class_wise', 'abc', 42)
        record = scored.to_dict()
        self.assertNotIn('mcm', record)
        self.assertEqual(record['s_ori_inp'], 0.8)
        self.assertEqual(ScoredDetection.from_dict(record), scored)


class MockTripletTests(SimpleTestCase):

    def setUp(self):
        self.encoders = build_encoders('mock', 'mock')
        self.encoders.prepare(['dog', 'horse'], TEMPLATE)

    def test_identical_crops(self):
        ori = solid(label_color('dog'))
        t = triplet_similarities(ori, ori.copy(), 'dog', self.encoders, TEMPLATE)
        self.assertAlmostEqual(t.s_ori_inp, 1.0, places=12)

    def test_id_case(self):
        ori = solid(label_color('dog'))
        t = triplet_similarities(ori, inpainted(label_color('dog'), 'dog'), 'dog',
                                 self.encoders, TEMPLATE)
        self.assertAlmostEqual(t.s_inp_y, COS10, delta=1e-6)
        self.assertAlmostEqual(t.s_ori_y, COS10, delta=1e-6)

    def test_ood_case(self):
        zebra = label_color('zebra')
        t = triplet_similarities(solid(zebra), inpainted(zebra, 'horse'), 'horse',
                                 self.encoders, TEMPLATE)
        self.assertAlmostEqual(t.s_inp_y, COS10, delta=1e-6)
        self.assertLess(t.s_ori_y, 0.5)


class McmScoreTests(SimpleTestCase):

    def setUp(self):
        self.encoders = build_encoders('mock', 'mock')
        self.encoders.prepare(['dog', 'cat'], TEMPLATE)

    def test_single_label(self):
        crop = solid(label_color('dog'))
        self.assertAlmostEqual(mcm_score(crop, ['dog'], 0.01, self.encoders, TEMPLATE),
                               1.0, places=12)

    def test_softmax_arithmetic(self):
        # two text directions with cosines 0.4 and 0.2 against the image
        image = np.array([1.0, 0.0, 0.0])
        texts = {
            'a photo of a dog': np.array([0.4, math.sqrt(1 - 0.16), 0.0]),
            'a photo of a cat': np.array([0.2, 0.0, math.sqrt(1 - 0.04)]),
        }

        class Stub:
            def vl_image(self, crop):
                return image

            def vl_text(self, text):
                return texts[text]

        score = mcm_score(solid((0, 0, 0)), ['dog', 'cat'], 0.1, Stub(), TEMPLATE)
        self.assertAlmostEqual(score, 1 / (1 + math.exp(-2)), delta=1e-9)

    def test_equal_cosines(self):
        class Stub:
            def vl_image(self, crop):
                return np.array([1.0, 0.0])

            def vl_text(self, text):
                return np.array([0.0, 1.0])

        self.assertAlmostEqual(mcm_score(solid((0, 0, 0)), ['dog', 'cat'], 0.01,
                                         Stub(), TEMPLATE), 0.5, places=12)

    def test_needs_labels(self):
        with self.assertRaises(ValueError):
            mcm_score(solid((0, 0, 0)), [], 0.01, self.encoders, TEMPLATE)
