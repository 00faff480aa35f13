# -*- coding: utf-8 -*-

from pcnet_registration.manifest import *
from pcnet_registration.exceptions import ManifestError
from pcnet_registration.imgcore import AffineParams

import json
import os
import tempfile
import unittest

import logging
import logzero


class TestManifest(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)
        self.tmp = tempfile.TemporaryDirectory()
        self.root = self.tmp.name
        os.makedirs(os.path.join(self.root, 'images'))
        for name in ('a.png', 'b.png'):
            open(os.path.join(self.root, 'images', name), 'wb').close()

    def tearDown(self):
        self.tmp.cleanup()

    def _write(self, data, name='manifest.json'):
        path = os.path.join(self.root, name)
        with open(path, 'w') as f:
            json.dump(data, f)
        return path

    def test_relative_paths(self):
        path = self._write({'jobs': [{'id': 'one', 'ref': 'images/a.png', 'flt': 'images/b.png',
                                      'affine': [1, 0, 2, 0, 1, 3]}],
                            'output_dir': 'results'})
        manifest = RunManifest.load(path)
        job = manifest.jobs[0]
        self.assertEqual(job.ref, os.path.join(self.root, 'images', 'a.png'))
        self.assertEqual(job.affine, AffineParams.translation(2.0, 3.0))
        self.assertEqual(manifest.output_dir, 'results')

    def test_default_ids_and_no_ground_truth(self):
        manifest = RunManifest.load(self._write({'jobs': [{'ref': 'images/a.png', 'flt': 'images/b.png'}]}))
        self.assertEqual(manifest.jobs[0].job_id, 'job-000')
        self.assertIsNone(manifest.jobs[0].affine)

    def test_missing_file(self):
        path = self._write({'jobs': [{'ref': 'images/a.png', 'flt': 'images/missing.png'}]})
        with self.assertRaises(ManifestError):
            RunManifest.load(path)
        self.assertEqual(len(RunManifest.load(path, check_paths=False)), 1)

    def test_invalid_documents(self):
        for text in ('{', '{"version": "pcnet-manifest-v1"}', '{"jobs": [{"ref": "images/a.png"}]}',
                     '{"version": "other", "jobs": []}'):
            with self.assertRaises(ManifestError):
                RunManifest.from_json_text(text, self.root)
        with self.assertRaises(ManifestError):
            RunManifest.from_json_text(json.dumps({'jobs': [
                {'id': 'x', 'ref': 'images/a.png', 'flt': 'images/b.png'},
                {'id': 'x', 'ref': 'images/b.png', 'flt': 'images/a.png'}]}), self.root)
        with self.assertRaises(ManifestError):
            RunManifest.from_json_text(json.dumps({'jobs': [], 'output_dir': 5}), self.root)

    def test_dump_round_trip(self):
        job = Job('one', os.path.join(self.root, 'images', 'a.png'), os.path.join(self.root, 'images', 'b.png'),
                  AffineParams(1.1, 0.1, -10.0, -0.1, 1.1, 10.0), {'register': {'levels': 2}})
        path = os.path.join(self.root, 'out.json')
        RunManifest([job]).dump(path)
        with open(path) as f:
            self.assertEqual(json.load(f)['jobs'][0]['ref'], os.path.join('images', 'a.png'))
        loaded = RunManifest.load(path).jobs[0]
        self.assertEqual(loaded.ref, job.ref)
        self.assertEqual(loaded.affine, job.affine)
        self.assertEqual(loaded.config, job.config)
