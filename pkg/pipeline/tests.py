import csv
import json
import tempfile
from dataclasses import replace
from io import StringIO
from pathlib import Path

from django.contrib.admin.sites import AdminSite
from django.core.management import call_command
from django.core.management.base import CommandError
from django.test import SimpleTestCase, TestCase
from PIL import Image

from core.celery import app as celery_app
from core.exceptions import ConfigError
from detections.manifest import BoundingBox, Detection, ImageRecord, \
                                Manifest, save_manifest
from inpainting.backends import label_color
from .admin import RunAdmin, export_to_csv
from .config import RunConfig, load_config_file
from .forms import RunConfigForm, build_config, parse_resolution
from .mockdata import generate_mock_manifest, grid_boxes, paint_scene
from .models import Run, Sweep
from .reports import report
from .runner import NO_DATA, apply_axis, run, sweep


def scene_manifest(root, labels, size=(200, 200), gts=None, name='scene.png'):
    """One image with one planted ID object per label, on a grid."""
    boxes = grid_boxes(len(labels), size)
    gts = gts or ['id'] * len(labels)
    objects = [(box, label_color(label)) for box, label in zip(boxes, labels)]
    Image.fromarray(paint_scene(size, objects), mode='RGB').save(Path(root) / name)
    detections = tuple(Detection(f'd{i:02d}', box, label, 0.9, gt)
                       for i, (box, label, gt) in enumerate(zip(boxes, labels, gts)))
    manifest = Manifest(id_labels=tuple(sorted(set(labels))),
                        images=(ImageRecord(name, size[0], size[1], detections),))
    return save_manifest(manifest, Path(root) / 'manifest.jsonl')


def scores_by_id(result):
    return {s.detection_id: s.score for s in result.scored}


class PipelineTestCase(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)

    def tearDown(self):
        self.tmp.cleanup()

    def config(self, manifest, out='out', **kwargs):
        return RunConfig(manifest=str(manifest), out_dir=str(self.root / out),
                         **kwargs)


class MockSeparationTests(PipelineTestCase):

    def test_perfect_separation_and_determinism(self):
        manifest = generate_mock_manifest(self.root / 'data', n_id=25, n_ood=25)
        first = run(self.config(manifest, 'first'))
        second = run(self.config(manifest, 'second', workers=4))
        self.assertEqual(len(first.scored), 50)
        self.assertEqual(first.errors, [])
        self.assertEqual(first.report.auroc, 1.0)
        self.assertEqual(first.report.fpr_at_95, 0.0)
        ids = [s.score for s in first.scored if s.gt == 'id']
        oods = [s.score for s in first.scored if s.gt == 'ood']
        self.assertGreater(min(ids), max(oods))
        self.assertEqual(first.scores_path.read_bytes(),
                         second.scores_path.read_bytes())

    def test_scores_follow_manifest_order(self):
        manifest = generate_mock_manifest(self.root / 'data', n_id=6, n_ood=6,
                                          per_image=4)
        result = run(self.config(manifest, workers=3))
        ids = [json.loads(line)['id']
               for line in result.scores_path.read_text().splitlines()]
        self.assertEqual(ids, sorted(ids))

    def test_mcm_baseline(self):
        manifest = generate_mock_manifest(self.root / 'data', n_id=5, n_ood=5)
        result = run(self.config(manifest, mcm=True))
        self.assertIsNotNone(result.baseline)
        self.assertTrue(all(s.mcm is not None for s in result.scored))


class CallCountTests(PipelineTestCase):

    labels = ['cat'] * 3 + ['dog'] * 3 + ['horse'] * 4

    def test_class_wise_vs_object_wise(self):
        manifest = scene_manifest(self.root, self.labels)
        class_wise = run(self.config(manifest, 'cw', mode='class_wise'))
        object_wise = run(self.config(manifest, 'ow', mode='object_wise'))
        self.assertEqual(class_wise.inpaint_calls, 3)
        self.assertEqual(object_wise.inpaint_calls, 10)
        self.assertEqual(len(class_wise.scored), 10)
        self.assertEqual(scores_by_id(class_wise), scores_by_id(object_wise))

    def test_two_labels_two_calls(self):
        manifest = scene_manifest(self.root, ['cat', 'dog', 'dog'])
        result = run(self.config(manifest))
        self.assertEqual(result.inpaint_calls, 2)
        self.assertEqual(len(result.scored), 3)

    def test_prompt_fallbacks_are_reported(self):
        manifest = scene_manifest(self.root, ['cat', 'horse', 'cat'])
        exclusions = self.root / 'exclusions.json'
        exclusions.write_text(json.dumps({'horse': ['donkey', 'zebra']}))
        result = run(self.config(manifest, exclusions=str(exclusions), workers=2))
        self.assertEqual(result.prompt_fallbacks, ['cat'])
        report(result)
        data = json.loads((self.root / 'out' / 'report.json').read_text())
        self.assertEqual(data['prompt_fallbacks'], ['cat'])

    def test_dump_plans(self):
        manifest = scene_manifest(self.root, ['cat', 'dog'])
        run(self.config(manifest, dump_plans=True))
        plans = (self.root / 'out' / 'plans.jsonl').read_text().splitlines()
        self.assertEqual(len(json.loads(plans[0])['passes']), 2)


class ConservationTests(PipelineTestCase):

    def test_failures_go_to_the_ledger(self):
        Image.new('RGB', (160, 160), (128, 128, 128)).save(self.root / 'scene.png')
        detections = (
            Detection('tiny', BoundingBox(0, 0, 1, 1), 'dog', 0.9, 'id'),
            Detection('big', BoundingBox(40, 40, 80, 80), 'dog', 0.9, 'id'),
            Detection('low', BoundingBox(0, 100, 20, 20), 'cat', 0.1, 'ood'),
        )
        manifest = save_manifest(Manifest(('cat', 'dog'), (
            ImageRecord('scene.png', 160, 160, detections),)),
            self.root / 'manifest.jsonl')
        result = run(self.config(manifest, target_resolution=(16, 16),
                                 min_confidence=0.5))
        self.assertEqual([e['id'] for e in result.errors], ['tiny'])
        self.assertEqual(result.errors[0]['error'], 'DegenerateCrop')
        self.assertEqual([s.detection_id for s in result.scored], ['big'])
        self.assertEqual(result.filtered, ['low'])
        self.assertEqual(result.n_detections, 3)
        written = report(result)
        self.assertIn(self.root / 'out' / 'errors.jsonl', written)
        data = json.loads((self.root / 'out' / 'report.json').read_text())
        self.assertEqual(data['errors_file'], 'errors.jsonl')
        self.assertEqual(data['counts']['n_filtered'], 1)
        self.assertEqual(data['note'], NO_DATA)

    def test_empty_manifest(self):
        manifest = save_manifest(Manifest(('dog',)), self.root / 'manifest.jsonl')
        result = run(self.config(manifest))
        self.assertEqual(result.scored, [])
        self.assertIsNone(result.report)
        self.assertEqual(result.note, NO_DATA)
        self.assertEqual(result.scores_path.read_text(), '')
        report(result)
        data = json.loads((self.root / 'out' / 'report.json').read_text())
        self.assertIsNone(data['eval'])


class SweepTests(PipelineTestCase):

    def setUp(self):
        super().setUp()
        self.manifest = generate_mock_manifest(self.root / 'data', n_id=4, n_ood=4)

    def test_steps_are_neutral_under_mocks(self):
        outcome = sweep(self.config(self.manifest, 'sweep'), 'steps',
                        ['5', '10', '15', '20'])
        self.assertEqual([e.label for e in outcome.entries], ['5', '10', '15', '20'])
        scores = [scores_by_id(r) for r in outcome.results]
        self.assertTrue(all(s == scores[0] for s in scores))
        written = report(outcome)
        with open(self.root / 'sweep' / 'sweep.csv', newline='') as fh:
            rows = list(csv.DictReader(fh))
        self.assertEqual(len(rows), 4)
        self.assertIn(self.root / 'sweep' / 'steps=5' / 'report.json', written)

    def test_singleton_matches_run(self):
        base = self.config(self.manifest, 'single')
        outcome = sweep(base, 'mask_ratio', ['0.9'])
        plain = run(replace(base, out_dir=str(self.root / 'plain')))
        self.assertEqual(outcome.results[0].scores_path.read_bytes(),
                         plain.scores_path.read_bytes())

    def test_mask_ratio_grid(self):
        values = ['0.25', '0.5', '0.75', '0.8', '0.9', '1.0']
        outcome = sweep(self.config(self.manifest, 'ratios'), 'mask_ratio', values)
        self.assertEqual(len(outcome.results), 6)

    def test_failing_run_is_isolated(self):
        outcome = sweep(self.config(self.manifest, 'backends'), 'inpaint_backend',
                        ['mock', 'adapter:/nonexistent/ronin-adapter'])
        self.assertIsNotNone(outcome.entries[0].result)
        self.assertIsNone(outcome.entries[1].result)
        self.assertIn('BackendUnavailable', outcome.entries[1].error)

    def test_axis_values(self):
        base = self.config(self.manifest)
        config = apply_axis(base, 'alpha_beta', (1.0, 0.5))
        self.assertEqual((config.alpha, config.beta), (1.0, 0.5))
        self.assertTrue(config.out_dir.endswith('alpha_beta=1:0.5'))
        config = apply_axis(base, 'resolution', (64, 64))
        self.assertEqual(config.target_resolution, (64, 64))
        with self.assertRaises(ConfigError):
            sweep(base, 'temperature', ['1'])
        with self.assertRaises(ConfigError):
            sweep(base, 'steps', ['many'])
        with self.assertRaises(ConfigError):
            sweep(base, 'prompting', ['refined'])


class CeleryExecutorTests(PipelineTestCase):

    def setUp(self):
        super().setUp()
        self.eager = celery_app.conf.task_always_eager
        celery_app.conf.task_always_eager = True

    def tearDown(self):
        celery_app.conf.task_always_eager = self.eager
        super().tearDown()

    def test_matches_local_executor(self):
        manifest = generate_mock_manifest(self.root / 'data', n_id=5, n_ood=5)
        local = run(self.config(manifest, 'local'))
        remote = run(self.config(manifest, 'celery', executor='celery'))
        self.assertEqual(local.scores_path.read_bytes(),
                         remote.scores_path.read_bytes())
        self.assertEqual(local.inpaint_calls, remote.inpaint_calls)


class ConfigTests(PipelineTestCase):

    def test_defaults_come_from_settings(self):
        config = build_config({'manifest': 'm.jsonl'})
        self.assertEqual((config.mask_ratio, config.steps, config.alpha, config.beta),
                         (0.9, 20, 2.0, 1.0))
        self.assertEqual(config.mode, 'class_wise')

    def test_file_then_flags(self):
        path = self.root / 'run.toml'
        path.write_text('[run]\nmanifest = "m.jsonl"\nsteps = 10\n'
                        'mask_ratio = 0.5\ntarget_resolution = [64, 48]\n')
        config = build_config({'steps': 5, 'mode': 'object-wise'}, path)
        self.assertEqual(config.steps, 5)
        self.assertEqual(config.mask_ratio, 0.5)
        self.assertEqual(config.mode, 'object_wise')
        self.assertEqual(config.target_resolution, (64, 48))

    def test_unknown_file_key(self):
        path = self.root / 'run.json'
        path.write_text(json.dumps({'manifest': 'm.jsonl', 'colour': 'red'}))
        with self.assertRaises(ConfigError):
            build_config({}, path)
        self.assertEqual(load_config_file(path)['colour'], 'red')

    def test_invalid_values(self):
        for bad in ({'mask_ratio': 0}, {'mask_ratio': 1.5}, {'steps': 0},
                    {'alpha': -1}, {'mode': 'pixel'}, {'resolution': '12by4'},
                    {'scoring_template': 'a photo'}, {'negation': 'not'}):
            with self.assertRaises(ConfigError, msg=bad):
                build_config({'manifest': 'm.jsonl', **bad})

    def test_form_errors_are_kept(self):
        with self.assertRaises(ConfigError) as ctx:
            build_config({'manifest': 'm.jsonl', 'steps': 0})
        self.assertIn('steps', ctx.exception.errors)

    def test_parse_resolution(self):
        self.assertEqual(parse_resolution('512x384'), (512, 384))
        self.assertIsNone(parse_resolution('native'))

    def test_fingerprint(self):
        base = RunConfig(manifest='m.jsonl')
        self.assertEqual(base.fingerprint(), replace(base, out_dir='elsewhere',
                                                     workers=8).fingerprint())
        self.assertNotEqual(base.fingerprint(), replace(base, steps=10).fingerprint())
        self.assertNotEqual(base.fingerprint({'inpaint': {'backend_id': 'a'}}),
                            base.fingerprint({'inpaint': {'backend_id': 'b'}}))
        self.assertEqual(len(base.fingerprint()), 16)

    def test_config_round_trip(self):
        config = RunConfig(manifest='m.jsonl', target_resolution=(64, 64))
        self.assertEqual(RunConfig.from_dict(json.loads(json.dumps(config.to_dict()))),
                         config)

    def test_form_accepts_hyphenated_mode(self):
        data = build_config({'manifest': 'm.jsonl'}).to_dict()
        data['mode'] = 'object-wise'
        form = RunConfigForm(data=data)
        self.assertTrue(form.is_valid(), form.errors)
        self.assertEqual(form.cleaned_data['mode'], 'object_wise')


class CommandTests(TestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        self.root = Path(self.tmp.name)
        self.manifest = generate_mock_manifest(self.root / 'data', n_id=5, n_ood=5)

    def tearDown(self):
        self.tmp.cleanup()

    def test_run_writes_reports_and_records(self):
        out = StringIO()
        call_command('run', manifest=str(self.manifest), out=str(self.root / 'out'),
                     mode='class-wise', verbosity=0, stdout=out)
        for name in ('scores.jsonl', 'report.json', 'roc.csv', 'hist.csv',
                     'labels.csv'):
            self.assertTrue((self.root / 'out' / name).is_file(), name)
        self.assertFalse((self.root / 'out' / 'errors.jsonl').exists())
        self.assertIn('auroc=1.0000', out.getvalue())
        run_record = Run.objects.get()
        self.assertEqual(run_record.status, Run.STATUS_OK)
        self.assertEqual(run_record.auroc, 1.0)
        self.assertEqual(run_record.n_scored, 10)

    def test_no_record(self):
        call_command('run', manifest=str(self.manifest), out=str(self.root / 'out'),
                     no_record=True, verbosity=0, stdout=StringIO())
        self.assertFalse(Run.objects.exists())

    def test_config_error_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('run', manifest=str(self.manifest), mask_ratio=1.5,
                         out=str(self.root / 'out'), verbosity=0)
        self.assertEqual(ctx.exception.returncode, 1)

    def test_missing_manifest_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('run', manifest=str(self.root / 'missing.jsonl'),
                         out=str(self.root / 'out'), verbosity=0)
        self.assertEqual(ctx.exception.returncode, 1)

    def test_backend_unavailable_exit_code(self):
        with self.assertRaises(CommandError) as ctx:
            call_command('run', manifest=str(self.manifest),
                         inpaint_backend='adapter:/nonexistent/ronin-adapter',
                         out=str(self.root / 'out'), verbosity=0)
        self.assertEqual(ctx.exception.returncode, 2)

    def test_partial_run_exit_codes(self):
        Image.new('RGB', (160, 160)).save(self.root / 'scene.png')
        manifest = save_manifest(Manifest(('dog',), (ImageRecord(
            'scene.png', 160, 160,
            (Detection('tiny', BoundingBox(0, 0, 1, 1), 'dog', 0.9, 'id'),)),)),
            self.root / 'partial.jsonl')
        options = dict(manifest=str(manifest), out=str(self.root / 'partial'),
                       resolution='16x16', verbosity=0, stdout=StringIO(),
                       stderr=StringIO())
        call_command('run', **options)
        self.assertEqual(Run.objects.get().status, Run.STATUS_PARTIAL)
        with self.assertRaises(CommandError) as ctx:
            call_command('run', strict=True, **options)
        self.assertEqual(ctx.exception.returncode, 3)

    def test_sweep_command(self):
        call_command('sweep', manifest=str(self.manifest),
                     out=str(self.root / 'sweep'), axis='steps',
                     values=['5,10'], verbosity=0, stdout=StringIO())
        record = Sweep.objects.get()
        self.assertEqual(record.values, ['5', '10'])
        self.assertEqual(record.runs.count(), 2)
        self.assertTrue((self.root / 'sweep' / 'sweep.csv').is_file())

    def test_eval_command(self):
        call_command('run', manifest=str(self.manifest), out=str(self.root / 'out'),
                     verbosity=0, no_record=True, stdout=StringIO())
        out = StringIO()
        call_command('eval', scores=str(self.root / 'out' / 'scores.jsonl'),
                     out=str(self.root / 'again'), stdout=out)
        self.assertIn('auroc=1.0000', out.getvalue())
        data = json.loads((self.root / 'again' / 'report.json').read_text())
        self.assertEqual(data['eval']['fpr_at_95'], 0.0)

    def test_eval_command_bad_scores_exit_code(self):
        path = self.root / 'scores.jsonl'
        path.write_text('{"id": "a", "image_path": "a.png", "label": "dog", '
                        '"gt": "id", "s_ori_y": NaN, "s_inp_y": 0.5, '
                        '"s_ori_inp": 0.5, "score": 0.5, "mode": "class_wise", '
                        '"fingerprint": "fp", "seed": 0}\n')
        with self.assertRaises(CommandError) as ctx:
            call_command('eval', scores=str(path), out=str(self.root / 'eval'),
                         stdout=StringIO())
        self.assertEqual(ctx.exception.returncode, 1)

    def test_mockdata_command(self):
        call_command('mockdata', out=str(self.root / 'mock'), n_id=3, n_ood=2,
                     stdout=StringIO())
        lines = (self.root / 'mock' / 'manifest.jsonl').read_text().splitlines()
        self.assertEqual(len(lines), 2)

    def test_admin_csv_export(self):
        call_command('run', manifest=str(self.manifest), out=str(self.root / 'out'),
                     verbosity=0, stdout=StringIO())
        admin = RunAdmin(Run, AdminSite())
        response = export_to_csv(admin, None, Run.objects.all())
        rows = list(csv.reader(StringIO(response.content.decode())))
        self.assertEqual(len(rows), 2)
        self.assertIn('fingerprint', rows[0])
