import sys
import tempfile
from pathlib import Path

import numpy as np
from django.conf import settings
from django.test import SimpleTestCase

from core.exceptions import BackendError, BackendTimeout, BackendUnavailable, \
                            ConfigError, DegenerateCrop, ResolutionUnsupported
from core.hashing import fnv1a_32, pass_seed
from detections.manifest import BoundingBox, Detection, ImageRecord
from masking.plan import CLASS_WISE, OBJECT_WISE, build_plan, rasterize
from prompting.prompts import PromptBuilder
from .adapter import AdapterProcess
from .backends import AdapterInpainter, InpaintBackend, InpaintRequest, \
                      MockInpainter, get_inpaint_backend, label_color
from .passes import run_pass
from .raster import crop, decode_png, dominant_color, encode_png, \
                    outside_mask_delta, resize_image, size_of


def gradient(width=40, height=30):
    ys, xs = np.mgrid[0:height, 0:width]
    return np.stack([xs * 6 % 256, ys * 8 % 256, (xs + ys) % 256],
                    axis=-1).astype(np.uint8)


class NoisyBackend(InpaintBackend):
    """Generates noise everywhere, the mask has to keep it inside."""
    backend_id = 'noisy'

    def _generate(self, image, mask, request):
        rng = np.random.default_rng(request.seed)
        return rng.integers(0, 256, image.shape, dtype=np.uint8)


class ShrinkingBackend(InpaintBackend):
    backend_id = 'shrinking'

    def _generate(self, image, mask, request):
        return image[:-1]


class MockInpainterTests(SimpleTestCase):

    def setUp(self):
        self.image = gradient()
        self.mask = np.zeros((30, 40), dtype=np.uint8)
        self.mask[5:15, 10:30] = 1

    def test_fill_color_is_fnv_of_label(self):
        h = fnv1a_32('dog')
        self.assertEqual(label_color('dog'),
                         ((h >> 16) & 0xFF, (h >> 8) & 0xFF, h & 0xFF))
        result = MockInpainter().inpaint(InpaintRequest(self.image, self.mask, 'dog'))
        inside = result.image[self.mask == 1]
        self.assertTrue((inside == label_color('dog')).all())

    def test_prompt_first_segment_is_the_label(self):
        request = InpaintRequest(self.image, self.mask, 'horse, not a zebra')
        self.assertEqual(request.condition_label, 'horse')
        out = MockInpainter().inpaint(request).image
        self.assertEqual(tuple(out[10, 20]), label_color('horse'))

    def test_deterministic(self):
        backend = MockInpainter()
        first = backend.inpaint(InpaintRequest(self.image, self.mask, 'cat', seed=1))
        second = backend.inpaint(InpaintRequest(self.image, self.mask, 'cat', seed=2,
                                                steps=5))
        self.assertEqual(first.image.tobytes(), second.image.tobytes())

    def test_all_zero_mask_is_identity_without_call(self):
        backend = MockInpainter()
        empty = np.zeros_like(self.mask)
        result = backend.inpaint(InpaintRequest(self.image, empty, 'dog'))
        np.testing.assert_array_equal(result.image, self.image)
        self.assertEqual(backend.calls, 0)

    def test_outside_mask_preserved(self):
        for backend in (MockInpainter(), NoisyBackend()):
            out = backend.inpaint(InpaintRequest(self.image, self.mask, 'dog', seed=3))
            self.assertLessEqual(outside_mask_delta(self.image, out.image, self.mask),
                                 settings.RONIN_TAU_OUT)

    def test_target_resolution(self):
        out = MockInpainter().inpaint(InpaintRequest(self.image, self.mask, 'dog',
                                                     target_resolution=(80, 60)))
        self.assertEqual(size_of(out.image), (80, 60))

    def test_wrong_shape_from_backend(self):
        with self.assertRaises(BackendError):
            ShrinkingBackend().inpaint(InpaintRequest(self.image, self.mask, 'dog'))

    def test_request_validation(self):
        with self.assertRaises(ValueError):
            InpaintRequest(self.image, self.mask[:-1], 'dog')
        with self.assertRaises(ValueError):
            InpaintRequest(self.image, self.mask, '  ')
        with self.assertRaises(ValueError):
            InpaintRequest(self.image, self.mask, 'dog', steps=0)

    def test_selectors(self):
        self.assertIsInstance(get_inpaint_backend('mock'), MockInpainter)
        self.assertIs(get_inpaint_backend('mock'), get_inpaint_backend('mock'))
        with self.assertRaises(ConfigError):
            get_inpaint_backend('stable-diffusion')


class ResolutionCheckTests(SimpleTestCase):

    def test_backend_may_refuse_resolution(self):
        class EightOnly(MockInpainter):
            def check_resolution(self, size):
                if size[0] % 8:
                    raise ResolutionUnsupported(f'{size}')
        image = gradient()
        mask = np.ones((30, 40), dtype=np.uint8)
        with self.assertRaises(ResolutionUnsupported):
            EightOnly().inpaint(InpaintRequest(image, mask, 'dog',
                                               target_resolution=(33, 30)))


ECHO_ADAPTER = '''\
import json, sys
for line in sys.stdin:
    request = json.loads(line)
    if request['op'] == 'hello':
        answer = {'ok': True, 'backend_id': 'echo', 'max_concurrent': 2}
    elif request['prompt'] == 'refuse':
        answer = {'ok': False, 'kind': 'resolution', 'error': 'too large'}
    elif request['prompt'] == 'break':
        answer = {'ok': False, 'error': 'model crashed'}
    else:
        answer = {'ok': True, 'image': request['image']}
    print(json.dumps(answer), flush=True)
'''


class AdapterTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        script = Path(self.tmp.name) / 'echo_adapter.py'
        script.write_text(ECHO_ADAPTER)
        self.backend = AdapterInpainter(f'{sys.executable} {script}', timeout=30)
        self.image = gradient()
        self.mask = np.zeros((30, 40), dtype=np.uint8)
        self.mask[5:15, 10:30] = 1

    def tearDown(self):
        self.backend.process.close()
        self.tmp.cleanup()

    def test_hello(self):
        self.assertEqual(self.backend.backend_id, 'echo')
        self.assertEqual(self.backend.capabilities.max_concurrent, 2)

    def test_inpaint_round_trip(self):
        result = self.backend.inpaint(InpaintRequest(self.image, self.mask, 'dog'))
        np.testing.assert_array_equal(result.image, self.image)
        self.assertEqual(self.backend.calls, 1)

    def test_error_kinds(self):
        with self.assertRaises(ResolutionUnsupported):
            self.backend.inpaint(InpaintRequest(self.image, self.mask, 'refuse'))
        with self.assertRaises(BackendError):
            self.backend.inpaint(InpaintRequest(self.image, self.mask, 'break'))

    def test_missing_program(self):
        with self.assertRaises(BackendUnavailable):
            AdapterInpainter('/nonexistent/ronin-adapter')


SLOW_ADAPTER = '''\
import json, sys, time
for line in sys.stdin:
    request = json.loads(line)
    if request.get('prompt') == 'slow':
        time.sleep(10)
    print(json.dumps({'ok': True, 'answer_for': request.get('prompt')}),
          flush=True)
'''


class AdapterTimeoutTests(SimpleTestCase):

    def setUp(self):
        self.tmp = tempfile.TemporaryDirectory()
        script = Path(self.tmp.name) / 'slow_adapter.py'
        script.write_text(SLOW_ADAPTER)
        self.process = AdapterProcess(f'{sys.executable} {script}', timeout=1.0)

    def tearDown(self):
        self.process.close()
        self.tmp.cleanup()

    def test_late_answer_is_not_read_by_the_next_request(self):
        self.process.hello()
        with self.assertRaises(BackendTimeout):
            self.process.request({'op': 'inpaint', 'prompt': 'slow'})
        answer = self.process.request({'op': 'inpaint', 'prompt': 'dog'})
        self.assertEqual(answer['answer_for'], 'dog')


class RunPassTests(SimpleTestCase):

    def setUp(self):
        detections = (
            Detection('a', BoundingBox(0, 0, 10, 10), 'dog', 0.9, 'id'),
            Detection('b', BoundingBox(20, 0, 10, 10), 'dog', 0.9, 'id'),
            Detection('c', BoundingBox(0, 15, 10, 10), 'cat', 0.9, 'id'),
        )
        self.image = ImageRecord('scene.png', 40, 30, detections)
        self.raster = gradient()
        self.prompts = PromptBuilder('{label}')

    def run_plan(self, mode):
        backend = MockInpainter()
        plan = build_plan(self.image, mode, 0.9)
        outputs = [run_pass(self.raster, p, backend, self.prompts, steps=20)
                   for p in plan.passes]
        return backend, plan, outputs

    def test_class_wise_one_call_per_label(self):
        backend, plan, outputs = self.run_plan(CLASS_WISE)
        self.assertEqual(backend.calls, 2)
        dog = outputs[1]
        self.assertEqual(dog.member_ids, ('a', 'b'))
        mask = rasterize(plan.passes[1], 40, 30)
        self.assertTrue((dog.image[mask == 1] == label_color('dog')).all())
        # the other label's object stays untouched in this pass
        np.testing.assert_array_equal(dog.image[15:25, 0:10],
                                      self.raster[15:25, 0:10])

    def test_object_wise_one_call_per_detection(self):
        backend, _, _ = self.run_plan(OBJECT_WISE)
        self.assertEqual(backend.calls, 3)

    def test_seed_policy(self):
        _, plan, outputs = self.run_plan(CLASS_WISE)
        self.assertEqual(outputs[0].seed, pass_seed(0, 'scene.png', 'cat'))

    def test_empty_plan(self):
        backend = MockInpainter()
        plan = build_plan(ImageRecord('empty.png', 40, 30), CLASS_WISE, 0.9)
        for p in plan.passes:
            run_pass(self.raster, p, backend, self.prompts, steps=20)
        self.assertEqual(backend.calls, 0)


class RasterTests(SimpleTestCase):

    def test_crop_whole_image(self):
        raster = gradient()
        np.testing.assert_array_equal(crop(raster, BoundingBox(0, 0, 40, 30)), raster)

    def test_crop_unresized(self):
        raster = gradient(200, 100)
        out = crop(raster, BoundingBox(10, 20, 100, 50))
        self.assertEqual(out.shape, (50, 100, 3))
        np.testing.assert_array_equal(out, raster[20:70, 10:110])

    def test_crop_scaled(self):
        raster = gradient(400, 200)
        out = crop(raster, BoundingBox(10, 20, 100, 50), scale=(2.0, 2.0))
        self.assertEqual(out.shape, (100, 200, 3))
        np.testing.assert_array_equal(out, raster[40:140, 20:220])

    def test_degenerate_crop(self):
        with self.assertRaises(DegenerateCrop) as ctx:
            crop(gradient(), BoundingBox(0, 0, 1, 1), scale=(0.2, 0.2),
                 detection_id='tiny')
        self.assertEqual(ctx.exception.detection_id, 'tiny')

    def test_dominant_color(self):
        raster = np.zeros((4, 4, 3), dtype=np.uint8)
        raster[:3] = (1, 2, 3)
        self.assertEqual(dominant_color(raster), (1, 2, 3))

    def test_png_codec(self):
        raster = gradient()
        np.testing.assert_array_equal(decode_png(encode_png(raster)), raster)

    def test_resize_is_noop_at_same_size(self):
        raster = gradient()
        self.assertIs(resize_image(raster, (40, 30)), raster)
