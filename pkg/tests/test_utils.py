# -*- coding: utf-8 -*-

from pcnet_registration.utils import *

import json
import os
import tempfile
import unittest

import logging
import logzero


class TestUtils(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.DEBUG)

    def test_confined_path(self):
        with tempfile.TemporaryDirectory() as tmp:
            root = os.path.realpath(tmp)
            self.assertEqual(confined_path(tmp, 'a', 'b.png'), os.path.join(root, 'a', 'b.png'))
            self.assertEqual(confined_path(tmp, 'a/../c.png'), os.path.join(root, 'c.png'))
            for parts in (('..', 'x.json'), ('/etc/passwd',), ('a/../../x',)):
                with self.assertRaises(ValueError):
                    confined_path(tmp, *parts)

    def test_confined_path_symlink(self):
        with tempfile.TemporaryDirectory() as tmp, tempfile.TemporaryDirectory() as outside:
            os.symlink(outside, os.path.join(tmp, 'link'))
            with self.assertRaises(ValueError):
                confined_path(tmp, 'link', 'x.png')

    def test_safe_name(self):
        self.assertEqual(safe_name('texture-gamma-s'), 'texture-gamma-s')
        self.assertEqual(safe_name('a/b c'), 'a_b_c')
        self.assertEqual(safe_name('..'), 'job')

    def test_write_json_is_stable(self):
        with tempfile.TemporaryDirectory() as tmp:
            path = os.path.join(tmp, 'x.json')
            write_json(path, {'b': 1, 'a': [1.5, 2]})
            with open(path) as f:
                text = f.read()
            self.assertTrue(text.endswith('}\n'))
            self.assertLess(text.index('"a"'), text.index('"b"'))
            with open(path) as f:
                self.assertEqual(json.load(f), {'a': [1.5, 2], 'b': 1})
