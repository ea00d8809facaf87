import json
import random
import string
import tempfile
from pathlib import Path

from django.test import SimpleTestCase, override_settings
from PIL import Image

from core.exceptions import LabelError, ManifestError, ManifestParseError, \
                            ManifestValidationError
from .labels import alias_table, expand_labels, normalize_label
from .manifest import BoundingBox, Detection, ImageRecord, Manifest, \
                      filter_confidence, load_manifest, save_manifest, \
                      validate_manifest


def write_manifest(root, header, images):
    path = Path(root) / 'manifest.jsonl'
    with open(path, 'w', encoding='utf-8') as fh:
        fh.write(json.dumps(header) + '\n')
        for image in images:
            fh.write(json.dumps(image) + '\n')
    return path


def detection(did, box, label, gt='id', confidence=0.9):
    return {'id': did, 'box': box, 'label': label,
            'confidence': confidence, 'gt': gt}


class NormalizeLabelTests(SimpleTestCase):

    def test_british_spellings(self):
        self.assertEqual(normalize_label('Aeroplane'), 'airplane')
        self.assertEqual(normalize_label('Couch'), 'sofa')

    def test_identity(self):
        self.assertEqual(normalize_label('dog'), 'dog')

    def test_whitespace_collapses(self):
        self.assertEqual(normalize_label('  TV   Monitor '), 'tv monitor')

    def test_empty_label(self):
        with self.assertRaises(LabelError):
            normalize_label('   ')

    def test_idempotent(self):
        rng = random.Random(7)
        alphabet = string.ascii_letters + '  '
        samples = ['Aeroplane', 'COUCH', 'tv monitor', 'Dining  Table']
        samples += [''.join(rng.choice(alphabet) for _ in range(rng.randint(1, 12)))
                    for _ in range(300)]
        for raw in samples:
            try:
                once = normalize_label(raw)
            except LabelError:
                continue
            self.assertEqual(normalize_label(once), once)

    @override_settings(RONIN_LABEL_ALIASES={'motorbike': 'motorcycle'})
    def test_configured_aliases(self):
        self.assertEqual(normalize_label('Motorbike'), 'motorcycle')

    def test_alias_chains_resolve(self):
        table = alias_table({'plane': 'aeroplane'})
        self.assertEqual(table['plane'], 'airplane')

    def test_alias_cycle(self):
        with self.assertRaises(LabelError):
            alias_table({'a': 'b', 'b': 'a'})

    def test_presets(self):
        voc = expand_labels('voc')
        self.assertEqual(len(voc), 20)
        self.assertIn('airplane', voc)
        self.assertIn('sofa', voc)
        self.assertEqual(len(expand_labels('BDD')), 10)

    def test_expand_keeps_first_order(self):
        self.assertEqual(expand_labels(['Dog', 'cat', 'DOG']), ['dog', 'cat'])


class LoadManifestTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        for name in ('a.png', 'b.png'):
            Image.new('RGB', (64, 48), (10, 20, 30)).save(self.root / name)

    def tearDown(self):
        self.tmp.cleanup()

    def test_two_images(self):
        path = write_manifest(self.root, {'id_labels': ['Dog', 'Aeroplane']}, [
            {'image_path': 'a.png', 'width': 64, 'height': 48,
             'detections': [detection('d1', [1, 2, 10, 10], 'DOG')]},
            {'image_path': 'b.png',
             'detections': [detection('d2', [0, 0, 64, 48], 'Aeroplane', 'ood')]},
        ])
        manifest = load_manifest(path)
        self.assertEqual(len(manifest.images), 2)
        self.assertEqual(manifest.id_labels, ('dog', 'airplane'))
        first, second = manifest.images
        self.assertEqual(first.detections[0].label, 'dog')
        self.assertEqual(second.detections[0].label, 'airplane')
        # size read from the image header
        self.assertEqual((second.width, second.height), (64, 48))
        self.assertEqual(manifest.resolve(first), self.root / 'a.png')

    def test_box_out_of_bounds_names_detection(self):
        path = write_manifest(self.root, {'id_labels': ['dog']}, [
            {'image_path': 'a.png', 'width': 64, 'height': 48,
             'detections': [detection('wide', [60, 0, 10, 10], 'dog')]},
        ])
        with self.assertRaises(ManifestValidationError) as ctx:
            load_manifest(path)
        self.assertIn('wide', str(ctx.exception))
        self.assertEqual(ctx.exception.violations[0].rule, 'box bounds')

    def test_malformed_line_reports_line_number(self):
        path = self.root / 'manifest.jsonl'
        path.write_text('{"id_labels": ["dog"]}\n{"image_path": \n')
        with self.assertRaises(ManifestParseError) as ctx:
            load_manifest(path)
        self.assertEqual(ctx.exception.line, 2)

    def test_missing_header(self):
        path = self.root / 'manifest.jsonl'
        path.write_text('\n')
        with self.assertRaises(ManifestParseError):
            load_manifest(path)

    def test_missing_image(self):
        path = write_manifest(self.root, {'id_labels': ['dog']}, [
            {'image_path': 'nope.png', 'width': 64, 'height': 48,
             'detections': []},
        ])
        with self.assertRaises(ManifestError):
            load_manifest(path)

    def test_schema_rejects_bad_gt(self):
        path = write_manifest(self.root, {'id_labels': ['dog']}, [
            {'image_path': 'a.png', 'width': 64, 'height': 48,
             'detections': [detection('d1', [0, 0, 4, 4], 'dog', gt='maybe')]},
        ])
        with self.assertRaises(ManifestParseError):
            load_manifest(path)

    def test_round_trip(self):
        manifest = Manifest(
            id_labels=('dog', 'tv monitor'),
            images=(ImageRecord('a.png', 64, 48, (
                Detection('d1', BoundingBox(1, 2, 3, 4), 'dog', 0.125, 'id'),
                Detection('d2', BoundingBox(0, 0, 64, 48), 'tv monitor',
                          0.7000000000000001, 'ood'),
            )),),
            metadata={'source': 'unit'},
            root=self.root)
        path = save_manifest(manifest, self.root / 'copy.jsonl')
        self.assertEqual(load_manifest(path), manifest)


class ValidateManifestTests(SimpleTestCase):

    def manifest(self, *detections, labels=('dog', 'cat')):
        return Manifest(id_labels=labels,
                        images=(ImageRecord('a.png', 100, 100, detections),))

    def test_valid(self):
        m = self.manifest(Detection('d1', BoundingBox(0, 0, 10, 10), 'dog', 0.5, 'id'))
        self.assertEqual(validate_manifest(m), [])

    def test_duplicate_id(self):
        m = self.manifest(
            Detection('d1', BoundingBox(0, 0, 10, 10), 'dog', 0.5, 'id'),
            Detection('d1', BoundingBox(20, 0, 10, 10), 'cat', 0.5, 'id'))
        rules = [v.rule for v in validate_manifest(m)]
        self.assertEqual(rules, ['duplicate id'])

    def test_unknown_label(self):
        m = self.manifest(Detection('d1', BoundingBox(0, 0, 10, 10), 'zebra', 0.5, 'ood'))
        violations = validate_manifest(m)
        self.assertEqual([v.rule for v in violations], ['unknown label'])
        self.assertEqual(violations[0].detection_id, 'd1')

    def test_zero_extent_and_confidence(self):
        m = self.manifest(Detection('d1', BoundingBox(0, 0, 0, 10), 'dog', 1.5, 'id'))
        rules = {v.rule for v in validate_manifest(m)}
        self.assertEqual(rules, {'box size', 'confidence range'})

    def test_non_canonical_label(self):
        m = self.manifest(Detection('d1', BoundingBox(0, 0, 5, 5), 'Dog', 0.5, 'id'))
        self.assertIn('label form', [v.rule for v in validate_manifest(m)])


class FilterConfidenceTests(SimpleTestCase):

    def test_drops_low_confidence(self):
        m = Manifest(id_labels=('dog',), images=(ImageRecord('a.png', 50, 50, (
            Detection('lo', BoundingBox(0, 0, 5, 5), 'dog', 0.2, 'id'),
            Detection('hi', BoundingBox(10, 0, 5, 5), 'dog', 0.8, 'id'),
        )),))
        kept, dropped = filter_confidence(m, 0.5)
        self.assertEqual(dropped, ['lo'])
        self.assertEqual([d.detection_id for d in kept.detections()], ['hi'])

    def test_none_keeps_everything(self):
        m = Manifest(id_labels=('dog',))
        self.assertEqual(filter_confidence(m, None), (m, []))
