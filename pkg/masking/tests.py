import json
import random
import tempfile
from pathlib import Path

import numpy as np
from django.test import SimpleTestCase

from detections.manifest import BoundingBox, Detection, ImageRecord
from .plan import CLASS_WISE, OBJECT_WISE, InpaintPass, MaskRect, \
                  build_plan, center_mask, rasterize, round_half_up, save_plans


def image_with(*specs, size=(200, 200)):
    detections = tuple(Detection(did, BoundingBox(*box), label, 0.9, 'id')
                       for did, box, label in specs)
    return ImageRecord('scene.png', size[0], size[1], detections)


class CenterMaskTests(SimpleTestCase):

    def test_examples(self):
        box = BoundingBox(10, 20, 100, 50)
        self.assertEqual(center_mask(box, 0.9).as_list(), [15, 22, 90, 45])
        self.assertEqual(center_mask(box, 1.0).as_list(), [10, 20, 100, 50])
        self.assertEqual(center_mask(BoundingBox(0, 0, 1, 1), 0.25).as_list(),
                         [0, 0, 1, 1])

    def test_round_half_up(self):
        self.assertEqual(round_half_up(2.5), 3)
        self.assertEqual(round_half_up(3.5), 4)
        self.assertEqual(round_half_up(2.49), 2)

    def test_containment_and_monotonicity(self):
        rng = random.Random(1234)
        for _ in range(10000):
            box = BoundingBox(rng.randint(0, 50), rng.randint(0, 50),
                              rng.randint(1, 120), rng.randint(1, 120))
            r1, r2 = sorted((rng.uniform(0.01, 1.0), rng.uniform(0.01, 1.0)))
            small, large = center_mask(box, r1), center_mask(box, r2)
            self.assertTrue(box.contains(small), (box, r1, small))
            self.assertTrue(box.contains(large), (box, r2, large))
            self.assertTrue(large.contains(small), (box, r1, r2))
            self.assertGreaterEqual(small.w, 1)
            self.assertGreaterEqual(small.h, 1)


class BuildPlanTests(SimpleTestCase):

    def setUp(self):
        self.image = image_with(('a', (0, 0, 20, 20), 'dog'),
                                ('b', (30, 0, 20, 20), 'dog'),
                                ('c', (60, 0, 20, 20), 'cat'))

    def test_class_wise_groups_by_label(self):
        plan = build_plan(self.image, CLASS_WISE, 0.9)
        self.assertEqual([(p.prompt_label, len(p.mask_rects)) for p in plan.passes],
                         [('cat', 1), ('dog', 2)])
        self.assertEqual(plan.passes[1].member_ids, ('a', 'b'))

    def test_object_wise_one_pass_per_detection(self):
        plan = build_plan(self.image, OBJECT_WISE, 0.9)
        self.assertEqual(len(plan.passes), 3)
        self.assertTrue(all(len(p.member_ids) == 1 for p in plan.passes))

    def test_empty_image(self):
        plan = build_plan(image_with(), CLASS_WISE, 0.9)
        self.assertEqual(plan.passes, ())

    def test_partition_in_both_modes(self):
        rng = random.Random(3)
        for _ in range(50):
            specs = [(f'd{i}', (rng.randint(0, 100), rng.randint(0, 100), 10, 10),
                      rng.choice(['cat', 'dog', 'horse']))
                     for i in range(rng.randint(0, 12))]
            image = image_with(*specs)
            ids = sorted(s[0] for s in specs)
            for mode in (CLASS_WISE, OBJECT_WISE):
                plan = build_plan(image, mode, 0.5)
                self.assertEqual(sorted(plan.member_ids()), ids)
            labels = {s[2] for s in specs}
            self.assertEqual(len(build_plan(image, CLASS_WISE, 0.5).passes),
                             len(labels))

    def test_unknown_mode(self):
        with self.assertRaises(ValueError):
            build_plan(self.image, 'pixel_wise', 0.9)

    def test_save_plans(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = save_plans([build_plan(self.image, CLASS_WISE, 0.9)],
                              Path(tmp) / 'plans.jsonl')
            lines = path.read_text().splitlines()
        self.assertEqual(len(lines), 1)
        self.assertEqual(json.loads(lines[0])['passes'][0]['label'], 'cat')


class RasterizeTests(SimpleTestCase):

    def make_pass(self, *rects):
        return InpaintPass('scene.png', 'dog', tuple(f'd{i}' for i in range(len(rects))),
                           tuple(MaskRect(*r) for r in rects))

    def test_examples(self):
        self.assertEqual(int(rasterize(self.make_pass((0, 0, 2, 2)), 4, 4).sum()), 4)
        mask = rasterize(self.make_pass((0, 0, 3, 2), (5, 5, 2, 2)), 10, 10)
        self.assertEqual(int(mask.sum()), 10)
        once = rasterize(self.make_pass((1, 1, 3, 3)), 6, 6)
        twice = rasterize(self.make_pass((1, 1, 3, 3), (1, 1, 3, 3)), 6, 6)
        np.testing.assert_array_equal(once, twice)

    def test_popcount_matches_pixel_oracle(self):
        rng = random.Random(99)
        for _ in range(60):
            width, height = rng.randint(1, 64), rng.randint(1, 64)
            rects = []
            for _ in range(rng.randint(1, 4)):
                x, y = rng.randrange(width), rng.randrange(height)
                rects.append((x, y, rng.randint(1, width - x),
                              rng.randint(1, height - y)))
            mask = rasterize(self.make_pass(*rects), width, height)
            self.assertEqual(mask.shape, (height, width))
            expected = sum(
                1 for py in range(height) for px in range(width)
                if any(x <= px < x + w and y <= py < y + h
                       for x, y, w, h in rects))
            self.assertEqual(int(mask.sum()), expected)
