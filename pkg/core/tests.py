from django.test import SimpleTestCase

from .exceptions import ManifestParseError, ManifestValidationError
from .hashing import fnv1a_32, fnv1a_64, pass_seed


class HashingTests(SimpleTestCase):

    def test_fnv1a_32_reference_values(self):
        self.assertEqual(fnv1a_32(''), 0x811C9DC5)
        self.assertEqual(fnv1a_32('a'), 0xE40C292C)
        self.assertEqual(fnv1a_32('foobar'), 0xBF9CF968)

    def test_fnv1a_64_reference_values(self):
        self.assertEqual(fnv1a_64(''), 0xCBF29CE484222325)
        self.assertEqual(fnv1a_64('a'), 0xAF63DC4C8601EC8C)
        self.assertEqual(fnv1a_64('foobar'), 0x85944171F73967E8)

    def test_str_and_bytes_agree(self):
        self.assertEqual(fnv1a_64('zebra'), fnv1a_64(b'zebra'))

    def test_pass_seed_depends_on_every_part(self):
        seed = pass_seed(0, 'a.png', 'dog')
        self.assertEqual(seed, pass_seed(0, 'a.png', 'dog'))
        self.assertNotEqual(seed, pass_seed(1, 'a.png', 'dog'))
        self.assertNotEqual(seed, pass_seed(0, 'b.png', 'dog'))
        self.assertNotEqual(seed, pass_seed(0, 'a.png', 'cat'))


class ExceptionTests(SimpleTestCase):

    def test_parse_error_names_the_line(self):
        error = ManifestParseError('malformed JSON', 7)
        self.assertEqual(error.line, 7)
        self.assertIn('line 7', str(error))

    def test_validation_error_keeps_violations(self):
        error = ManifestValidationError(['a', 'b'])
        self.assertEqual(error.violations, ['a', 'b'])
