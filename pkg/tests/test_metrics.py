# -*- coding: utf-8 -*-

from pcnet_registration.metrics import *
from pcnet_registration.exceptions import ShapeMismatchError
from pcnet_registration.imgcore import AffineParams
from pcnet_registration.pcnet import FeatureStack

import math
import unittest

import numpy as np

import logging
import logzero

SMALL = AffineParams(1.1, 0.1, -10.0, -0.1, 1.1, 10.0)


def checkerboard(size=32, cell=4):
    ys, xs = np.mgrid[0:size, 0:size]
    return (((xs // cell) + (ys // cell)) % 2).astype(float)


def loop_gradient_mass(channel):
    h, w = channel.shape
    total = 0.0
    for y in range(h):
        for x in range(w):
            if x == 0:
                gx = channel[y, 1] - channel[y, 0]
            elif x == w - 1:
                gx = channel[y, w - 1] - channel[y, w - 2]
            else:
                gx = (channel[y, x + 1] - channel[y, x - 1]) / 2.0
            if y == 0:
                gy = channel[1, x] - channel[0, x]
            elif y == h - 1:
                gy = channel[h - 1, x] - channel[h - 2, x]
            else:
                gy = (channel[y + 1, x] - channel[y - 1, x]) / 2.0
            total += abs(gx) + abs(gy)
    return total


class TestSSIM(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)

    def test_self_similarity(self):
        x = np.random.default_rng(0).uniform(size=(24, 24))
        self.assertAlmostEqual(ssim(x, x), 1.0, places=12)
        self.assertAlmostEqual(ssim(np.full((16, 16), 0.5), np.full((16, 16), 0.5)), 1.0, places=12)

    def test_inverted_checkerboard(self):
        x = checkerboard()
        self.assertLess(ssim(x, 1.0 - x), 0.0)

    def test_symmetry(self):
        rng = np.random.default_rng(1)
        a, b = rng.uniform(size=(20, 20)), rng.uniform(size=(20, 20))
        self.assertAlmostEqual(ssim(a, b), ssim(b, a), places=12)

    def test_errors(self):
        with self.assertRaises(ShapeMismatchError):
            ssim(np.zeros((4, 4)), np.zeros((4, 5)))
        with self.assertRaises(ValueError):
            LossConfig(ssim_window=4)
        with self.assertRaises(ValueError):
            LossConfig(c=0.0)


class TestSimilarityLoss(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)

    def test_identical_stacks(self):
        p = FeatureStack(np.random.default_rng(2).uniform(size=(3, 16, 16)))
        self.assertEqual(similarity_loss(p, p), 0.0)
        blank = FeatureStack(np.zeros((2, 8, 8)))
        self.assertEqual(similarity_loss(blank, blank), 0.0)

    def test_matches_direct_evaluation(self):
        rng = np.random.default_rng(3)
        p1 = FeatureStack(rng.uniform(size=(2, 8, 8)))
        p2 = FeatureStack(rng.uniform(size=(2, 8, 8)))
        cfg = LossConfig()
        numerator = 1.0 - (ssim(p1[0], p2[0]) + ssim(p1[1], p2[1])) / 2.0
        mass = sum(loop_gradient_mass(c) for c in list(p1) + list(p2)) / 2.0
        expected = numerator / (abs(mass) ** 0.7 + 1e-12)
        self.assertAlmostEqual(similarity_loss(p1, p2, cfg), expected, delta=1e-9 * max(1.0, expected))

    def test_symmetric_and_positive(self):
        rng = np.random.default_rng(4)
        p1 = FeatureStack(rng.uniform(size=(2, 12, 12)))
        p2 = FeatureStack(rng.uniform(size=(2, 12, 12)))
        self.assertGreater(similarity_loss(p1, p2), 0.0)
        self.assertAlmostEqual(similarity_loss(p1, p2), similarity_loss(p2, p1), places=12)

    def test_exponent_monotonicity(self):
        rng = np.random.default_rng(5)
        p1 = FeatureStack(rng.uniform(size=(2, 16, 16)))
        p2 = FeatureStack(rng.uniform(size=(2, 16, 16)))
        # gradient mass is far above 1 here
        self.assertLessEqual(similarity_loss(p1, p2, LossConfig(c=0.7)), similarity_loss(p1, p2, LossConfig(c=0.5)))

    def test_shape_mismatch(self):
        with self.assertRaises(ShapeMismatchError):
            similarity_loss(FeatureStack(np.zeros((2, 8, 8))), FeatureStack(np.zeros((3, 8, 8))))


class TestRegistrationErrors(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)

    def test_translation(self):
        shift = AffineParams.translation(3.0, 4.0)
        self.assertEqual(aee(AffineParams.identity(), shift, 64, 48), 5.0)
        self.assertEqual(ace(AffineParams.identity(), shift, 64, 48), 5.0)
        self.assertEqual(aee(SMALL, SMALL, 64, 64), 0.0)
        self.assertEqual(ace(SMALL, SMALL, 64, 64), 0.0)

    def test_aee_matches_loop(self):
        ident = AffineParams.identity()
        total = 0.0
        for y in range(256):
            for x in range(256):
                gx, gy = SMALL.apply(x, y)
                total += math.hypot(float(gx) - x, float(gy) - y)
        self.assertAlmostEqual(aee(SMALL, ident, 256, 256), total / (256 * 256), delta=1e-9)

    def test_ace_matches_corners(self):
        ident = AffineParams.identity()
        corners = [(0, 0), (127, 0), (0, 127), (127, 127)]
        expected = sum(math.hypot(float(SMALL.apply(x, y)[0]) - x, float(SMALL.apply(x, y)[1]) - y)
                       for x, y in corners) / 4.0
        self.assertAlmostEqual(ace(SMALL, ident, 128, 128), expected, places=12)

    def test_symmetry_and_triangle(self):
        a = AffineParams(1.02, 0.01, 2.0, -0.01, 0.98, -1.0)
        b = AffineParams.translation(-1.5, 0.5)
        c = SMALL
        for metric in (aee, ace):
            self.assertAlmostEqual(metric(a, b, 40, 30), metric(b, a, 40, 30), places=12)
            self.assertLessEqual(metric(a, c, 40, 30), metric(a, b, 40, 30) + metric(b, c, 40, 30) + 1e-12)
