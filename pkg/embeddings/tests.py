import math

import numpy as np
from django.test import SimpleTestCase

from core.exceptions import ConfigError, EncoderError
from core.hashing import fnv1a_64
from inpainting.backends import label_color
from prompting.prompts import PromptTemplate
from .encoders import EncoderSet, MockVisionLanguageEncoder, \
                      MockVisualEncoder, build_encoders, cosine, \
                      embed_image_visual, embed_image_vl, embed_text, \
                      get_encoder, seeded_unit_vector

TEMPLATE = PromptTemplate('a photo of a {label}')


def solid(color, size=(12, 10)):
    raster = np.empty((size[1], size[0], 3), dtype=np.uint8)
    raster[...] = color
    return raster


class CosineTests(SimpleTestCase):

    def test_examples(self):
        u = np.array([0.3, -1.2, 2.0])
        self.assertAlmostEqual(cosine(u, u), 1.0, places=12)
        self.assertAlmostEqual(cosine(u, -u), -1.0, places=12)
        self.assertEqual(cosine([1, 0], [0, 1]), 0.0)

    def test_symmetry(self):
        rng = np.random.default_rng(5)
        for _ in range(100):
            u, v = rng.standard_normal(16), rng.standard_normal(16)
            self.assertEqual(cosine(u, v), cosine(v, u))

    def test_dimension_mismatch(self):
        with self.assertRaises(ValueError):
            cosine([1, 0], [1, 0, 0])

    def test_zero_vector(self):
        with self.assertRaises(ValueError):
            cosine([0, 0], [1, 0])


class MockEncoderTests(SimpleTestCase):

    def setUp(self):
        self.encoders = build_encoders('mock', 'mock')
        self.encoders.prepare(['dog', 'cat', 'horse'], TEMPLATE)

    def test_text_vector_is_seeded_by_fnv(self):
        vector = embed_text('dog', TEMPLATE, self.encoders)
        expected = seeded_unit_vector(fnv1a_64('a photo of a dog'),
                                      self.encoders.vl.dim)
        np.testing.assert_array_equal(vector, expected)
        np.testing.assert_array_equal(vector, embed_text('dog', TEMPLATE,
                                                         self.encoders))

    def test_distinct_labels_nearly_orthogonal(self):
        dog = embed_text('dog', TEMPLATE, self.encoders)
        cat = embed_text('cat', TEMPLATE, self.encoders)
        self.assertLess(cosine(dog, cat), 0.5)

    def test_closed_loop_angle(self):
        for label in ('dog', 'cat', 'horse'):
            image = embed_image_vl(solid(label_color(label)), self.encoders)
            text = embed_text(label, TEMPLATE, self.encoders)
            self.assertAlmostEqual(cosine(image, text),
                                   math.cos(math.radians(10)), delta=1e-6)

    def test_unregistered_color(self):
        color = label_color('zebra')
        image = embed_image_vl(solid(color), self.encoders)
        expected = seeded_unit_vector(fnv1a_64(bytes(color)), self.encoders.vl.dim)
        np.testing.assert_allclose(image, expected, atol=1e-12)
        self.assertLess(cosine(image, embed_text('horse', TEMPLATE,
                                                 self.encoders)), 0.5)

    def test_visual_encoder_is_content_addressed(self):
        a = solid((1, 2, 3))
        first = embed_image_visual(a, self.encoders)
        np.testing.assert_array_equal(first, embed_image_visual(a.copy(),
                                                                self.encoders))
        other = embed_image_visual(solid((1, 2, 4)), self.encoders)
        self.assertLess(cosine(first, other), 0.5)

    def test_unit_norm(self):
        vectors = [embed_text('dog', TEMPLATE, self.encoders),
                   embed_image_vl(solid((9, 9, 9)), self.encoders),
                   embed_image_visual(solid((9, 9, 9)), self.encoders)]
        for vector in vectors:
            self.assertAlmostEqual(float(np.linalg.norm(vector)), 1.0, delta=1e-6)

    def test_degenerate_crop(self):
        with self.assertRaises(EncoderError):
            embed_image_visual(np.zeros((0, 4, 3), dtype=np.uint8), self.encoders)

    def test_empty_text(self):
        with self.assertRaises(EncoderError):
            self.encoders.vl.embed_text('')


class EncoderSetTests(SimpleTestCase):

    def test_visual_encoder_cannot_serve_text(self):
        with self.assertRaises(ConfigError):
            EncoderSet(vl=MockVisualEncoder(), visual=MockVisualEncoder())

    def test_unknown_selector(self):
        with self.assertRaises(ConfigError):
            get_encoder('clip', 'vl')

    def test_mock_role(self):
        self.assertIsInstance(get_encoder('mock', 'vl'), MockVisionLanguageEncoder)
        self.assertIsInstance(get_encoder('mock', 'visual'), MockVisualEncoder)

    def test_describe_carries_preprocessing(self):
        described = build_encoders('mock', 'mock').describe()
        self.assertEqual(described['vl']['preprocess'], 'dominant-color')
        self.assertEqual(described['visual']['backend_id'], 'mock-visual')
