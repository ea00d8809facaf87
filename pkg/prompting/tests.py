import json
import tempfile
from pathlib import Path

from django.test import SimpleTestCase

from core.exceptions import ConfigError, ExclusionError
from .prompts import ConceptClient, ExclusionMap, PromptBuilder, \
                     PromptTemplate, load_exclusions, refined_prompt, \
                     render_exclusions, scoring_template, simple_prompt

HORSE = ['donkey', 'zebra', 'mule', 'pony', 'camel']


class TemplateTests(SimpleTestCase):

    def test_simple_prompts(self):
        self.assertEqual(simple_prompt('dog', '{label}'), 'dog')
        self.assertEqual(simple_prompt('horse', 'a photo of a {label}'),
                         'a photo of a horse')
        self.assertEqual(simple_prompt('tv monitor', '{label}'), 'tv monitor')

    def test_label_placeholder_required_once(self):
        for pattern in ('a photo', '{label} and {label}', '{label} {color}', '{label'):
            with self.assertRaises(ConfigError):
                PromptTemplate(pattern)

    def test_scoring_template_from_settings(self):
        self.assertEqual(scoring_template().render('cat'), 'a photo of a cat')


class RefinedPromptTests(SimpleTestCase):

    def setUp(self):
        self.exclusions = ExclusionMap({'horse': tuple(HORSE)})

    def test_horse(self):
        self.assertEqual(
            refined_prompt('horse', self.exclusions, '{label}{exclusions}'),
            'horse, not a donkey, not a zebra, not a mule, not a pony, not a camel')

    def test_absent_label_falls_back(self):
        self.assertEqual(refined_prompt('dog', self.exclusions, '{label}{exclusions}',
                                        fallback='{label}'), 'dog')

    def test_empty_map_equals_simple_prompt(self):
        empty = ExclusionMap()
        for label in ('dog', 'horse', 'tv monitor', 'potted plant'):
            self.assertEqual(refined_prompt(label, empty, '{label}{exclusions}'),
                             simple_prompt(label, '{label}'))

    def test_custom_negation(self):
        self.assertEqual(render_exclusions(['a', 'b'], '; no {concept}'),
                         '; no a; no b')

    def test_builder_falls_back_without_entry(self):
        builder = PromptBuilder('{label}', '{label}{exclusions}', self.exclusions)
        self.assertTrue(builder.refined)
        self.assertTrue(builder.build('horse').startswith('horse, not a donkey'))
        self.assertFalse(builder.falls_back('horse'))
        self.assertEqual(builder.build('cat'), 'cat')
        self.assertTrue(builder.falls_back('cat'))

    def test_builder_without_exclusions(self):
        builder = PromptBuilder('{label}')
        self.assertFalse(builder.refined)
        self.assertFalse(builder.falls_back('horse'))
        self.assertEqual(builder.build('horse'), 'horse')

    def test_concept_client_is_a_stub(self):
        with self.assertRaises(NotImplementedError):
            ConceptClient().nearest_concepts('horse')


class LoadExclusionsTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()

    def tearDown(self):
        self.tmp.cleanup()

    def write(self, data):
        path = Path(self.tmp.name) / 'exclusions.json'
        path.write_text(data if isinstance(data, str) else json.dumps(data))
        return path

    def test_horse_entry(self):
        exclusions = load_exclusions(self.write({'Horse': HORSE}))
        self.assertEqual(len(exclusions), 1)
        self.assertEqual(exclusions.get('horse'), tuple(HORSE))

    def test_empty_map(self):
        self.assertEqual(len(load_exclusions(self.write({}))), 0)

    def test_self_reference(self):
        with self.assertRaises(ExclusionError):
            load_exclusions(self.write({'dog': ['dog']}))

    def test_duplicate_after_normalization(self):
        with self.assertRaises(ExclusionError):
            load_exclusions(self.write('{"Dog": ["wolf"], "dog": ["fox"]}'))

    def test_empty_list(self):
        with self.assertRaises(ExclusionError):
            load_exclusions(self.write({'dog': []}))

    def test_malformed(self):
        with self.assertRaises(ExclusionError):
            load_exclusions(self.write('{"dog": '))

    def test_digest_tracks_content(self):
        first = load_exclusions(self.write({'horse': HORSE}))
        second = load_exclusions(self.write({'horse': HORSE[:4]}))
        self.assertNotEqual(first.digest(), second.digest())
