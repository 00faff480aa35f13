# -*- coding: utf-8 -*-

from pcnet_registration.synth import *
from pcnet_registration.imgcore import AffineParams, GrayImage

import math
import unittest

import numpy as np
from numpy.testing import assert_allclose, assert_array_equal

import logging
import logzero


class TestGrating(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)

    def test_fundamental_peak(self):
        img = grating(GratingSpec(width=64, height=1, n_harmonics=1, phase_range=(0.0, 0.0)))
        self.assertEqual(int(np.argmax(img.data[0])), 8)

    def test_period(self):
        spec = GratingSpec(width=128, height=8)
        x = spec.abscissae()
        for phi in spec.row_phases():
            assert_allclose(grating_profile(x[:64], phi, 4), grating_profile(x[64:], phi, 4), atol=1e-9)

    def test_profile_matches_scalar_sum(self):
        spec = GratingSpec(width=32, height=1, phase_range=(0.0, 0.0))
        raw = [sum(math.sin((2 * s + 1) * (4 * math.pi * c / 32) + 0.0) / (2 * s + 1) for s in range(4))
               for c in range(32)]
        lo, hi = min(raw), max(raw)
        expected = [(v - lo) / (hi - lo) for v in raw]
        assert_allclose(grating(spec).data[0], expected, atol=1e-12)

    def test_row_phases(self):
        spec = GratingSpec(height=5, phase_range=(0.0, 1.0))
        assert_allclose(spec.row_phases(), [0.0, 0.25, 0.5, 0.75, 1.0])
        self.assertEqual(GratingSpec(width=128).congruent_columns(), [0.0, 32.0, 64.0, 96.0])
        with self.assertRaises(ValueError):
            GratingSpec(n_harmonics=0)

    def test_target_keeps_grating_inside_disc(self):
        img = grating_target(128)
        bare = grating(GratingSpec(width=128, height=128)).data
        self.assertAlmostEqual(img.data[0, 0], 0.5, places=9)
        self.assertAlmostEqual(img.data[127, 64], 0.5, places=9)
        assert_allclose(img.data[64, 40:90], bare[64, 40:90], atol=1e-6)
        self.assertIs(type(make_base('grating', 128, np.random.default_rng(0))), GrayImage)


class TestModalities(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)
        self.base = GrayImage(np.random.default_rng(0).uniform(size=(32, 32)))

    def test_identity_pair_is_exact(self):
        ref, flt, a_gt = make_pair(self.base, ModalitySpec(), AffineParams.identity())
        assert_array_equal(ref.data, flt.data)
        self.assertEqual(a_gt, AffineParams.identity())

    def test_invert(self):
        _, flt, _ = make_pair(self.base, ModalitySpec('invert'), AffineParams.identity())
        assert_allclose(flt.data + self.base.data, 1.0, atol=1e-12)

    def test_gamma_on_constant(self):
        remapped = ModalitySpec('gamma', gamma=2.2).remap(np.full((4, 4), 0.5))
        assert_allclose(remapped, 0.5 ** 2.2)

    def test_piecewise_and_posterize(self):
        v = np.array([0.0, 0.3, 0.6, 0.8, 1.0])
        assert_allclose(ModalitySpec('piecewise').remap(v), [0.0, 0.5, 1.0, 0.5, 0.0])
        assert_allclose(ModalitySpec('posterize', levels=4).remap(v), [0.0, 1 / 3.0, 2 / 3.0, 1.0, 1.0])

    def test_unknown_kind(self):
        with self.assertRaises(ValueError):
            ModalitySpec('thermal')

    def test_noise_is_seeded(self):
        spec = ModalitySpec('identity', noise_sigma=0.05)
        _, a, _ = make_pair(self.base, spec, AffineParams.identity(), np.random.default_rng(1))
        _, b, _ = make_pair(self.base, spec, AffineParams.identity(), np.random.default_rng(1))
        assert_array_equal(a.data, b.data)
        self.assertGreater(np.abs(a.data - self.base.data).max(), 0.0)


class TestSuite(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)

    def test_builtin_suite(self):
        cases = builtin_suite(seed=3, size=64)
        self.assertEqual(len(cases), 36)
        self.assertEqual(len({c.case_id for c in cases}), 36)
        for case in cases:
            self.assertEqual(case.a_gt, GRADES[case.grade])
            self.assertGreater(np.sum((case.ref.data - case.flt.data) ** 2), 0.0)
            self.assertEqual(AffineParams.from_json_dict(case.a_gt.to_json_dict()), case.a_gt)

    def test_suite_is_deterministic(self):
        first = builtin_suite(seed=3, size=64, grades=('s',))
        second = builtin_suite(seed=3, size=64, grades=('s',))
        self.assertEqual(len(first), 12)
        for a, b in zip(first, second):
            self.assertEqual(a.case_id, b.case_id)
            assert_array_equal(a.flt.data, b.flt.data)

    def test_aligned_pairs(self):
        cases = aligned_pairs(seed=1, count=4, size=48)
        self.assertEqual([c.base for c in cases], ['texture', 'blobs', 'texture', 'blobs'])
        for case in cases:
            self.assertEqual(case.a_gt, AffineParams.identity())
            self.assertEqual(case.ref.shape, (48, 48))
