# -*- coding: utf-8 -*-

from pcnet_registration.cli import *
from pcnet_registration.manifest import Job, RunManifest
from pcnet_registration.report import read_rows, write_report

import glob
import json
import os
import tempfile
import unittest
from concurrent.futures import ThreadPoolExecutor
from unittest import mock

import logging
import logzero

CLEAN_ENV = {'PCNET_WEIGHTS': '', 'PCNET_OUT': '', 'PCNET_THREADS': '', 'PCNET_LOGLEVEL': ''}


class CliTestCase(unittest.TestCase):
    def setUp(self):
        logzero.loglevel(logging.INFO)
        self.tmp = tempfile.TemporaryDirectory()
        self.root = self.tmp.name
        self.env = mock.patch.dict(os.environ, CLEAN_ENV)
        self.env.start()

    def tearDown(self):
        self.env.stop()
        self.tmp.cleanup()

    def run_cli(self, *argv):
        return main(list(argv))

    def out(self, name):
        return os.path.join(self.root, name)


class TestSynthAndEnhance(CliTestCase):
    def setUp(self):
        super(TestSynthAndEnhance, self).setUp()
        self.assertEqual(self.run_cli('synth', '--size', '64', '--grades', 's', '--out', self.out('data')), 0)
        self.image = os.path.join(self.out('data'), 'suite', 'texture-gamma-s_ref.png')

    def test_synth_writes_manifest(self):
        manifest = RunManifest.load(os.path.join(self.out('data'), 'suite', 'manifest.json'))
        self.assertEqual(len(manifest), 12)
        self.assertTrue(all(job.affine is not None for job in manifest))

    def test_enhance_writes_one_map_per_orientation(self):
        self.assertEqual(self.run_cli('enhance', '--image', self.image, '--out', self.out('six')), 0)
        self.assertEqual(len(glob.glob(os.path.join(self.out('six'), '*.png'))), 7)
        self.assertEqual(self.run_cli('enhance', '--image', self.image, '--orientations', '3',
                                      '--out', self.out('three')), 0)
        self.assertEqual(len(glob.glob(os.path.join(self.out('three'), '*.png'))), 4)

    def test_missing_weights(self):
        status = self.run_cli('enhance', '--image', self.image, '--weights', self.out('none.json'),
                              '--out', self.out('maps'))
        self.assertEqual(status, 1)
        self.assertEqual(glob.glob(os.path.join(self.out('maps'), '*.png')), [])

    def test_usage_error(self):
        with self.assertRaises(SystemExit) as ctx:
            self.run_cli('register', '--ref', self.image, '--flt', self.image, '--levels', '0')
        self.assertEqual(ctx.exception.code, 2)

    def test_register_is_deterministic(self):
        flt = os.path.join(self.out('data'), 'suite', 'texture-gamma-s_flt.png')
        outputs = []
        for name in ('first', 'second'):
            status = self.run_cli('register', '--ref', self.image, '--flt', flt, '--max-iters', '20',
                                  '--out', self.out(name), '--out-overlay', 'overlay.png')
            self.assertEqual(status, 0)
            self.assertTrue(os.path.isfile(os.path.join(self.out(name), 'overlay.png')))
            with open(os.path.join(self.out(name), 'transform.json'), 'rb') as f:
                outputs.append(f.read())
        self.assertEqual(outputs[0], outputs[1])
        self.assertEqual(len(json.loads(outputs[0].decode('utf-8'))['affine']), 6)

    def test_refuses_paths_outside_out(self):
        status = self.run_cli('register', '--ref', self.image, '--flt', self.image,
                              '--out', self.out('reg'), '--out-transform', '../x.json')
        self.assertEqual(status, 1)
        self.assertFalse(os.path.exists(self.out('x.json')))


class TestTuneAndReport(CliTestCase):
    def test_tune_then_enhance_with_weights(self):
        self.assertEqual(self.run_cli('synth', '--aligned', '2', '--size', '64', '--out', self.out('data')), 0)
        manifest = os.path.join(self.out('data'), 'aligned', 'manifest.json')
        status = self.run_cli('tune', '--data', manifest, '--iters', '1', '--patch-size', '48',
                              '--batch-size', '1', '--out', self.out('tuned'))
        self.assertEqual(status, 0)
        weights = os.path.join(self.out('tuned'), 'weights.json')
        with open(os.path.join(self.out('tuned'), 'loss_history.csv')) as f:
            lines = f.read().splitlines()
        self.assertEqual(lines[0], '# ' + TUNE_HISTORY_VERSION)
        self.assertEqual(len(lines), 4)
        image = os.path.join(self.out('data'), 'aligned', 'aligned-00_ref.png')
        self.assertEqual(self.run_cli('enhance', '--image', image, '--weights', weights, '--out', self.out('maps')), 0)

    def test_report_from_results(self):
        results = self.out('eval.csv')
        write_report(results, [
            {'id': 'a', 'aee': 0.5, 'ace': 0.5, 'loss': 0.1, 'status': 'ok'},
            {'id': 'b', 'aee': 4.0, 'ace': 3.0, 'loss': 0.2, 'status': 'ok'},
        ])
        self.assertEqual(self.run_cli('report', '--results', results, '--out', self.out('rep')), 0)
        with open(os.path.join(self.out('rep'), 'report.csv')) as f:
            text = f.read()
        self.assertIn('below1px,0.500000,0.500000', text)


class TestEvalAndReport(CliTestCase):
    def setUp(self):
        super(TestEvalAndReport, self).setUp()
        self.assertEqual(self.run_cli('synth', '--size', '64', '--grades', 's', '--out', self.out('data')), 0)
        suite = RunManifest.load(os.path.join(self.out('data'), 'suite', 'manifest.json'))
        first, second = suite.jobs[:2]
        self.labelled = [first.job_id, second.job_id]
        self.manifest = os.path.join(self.out('data'), 'suite', 'subset.json')
        jobs = [first, second, Job('unlabelled', first.ref, first.flt)]
        RunManifest(jobs, output_dir='results').dump(self.manifest)

    def read_csv(self, *parts):
        path = os.path.join(self.out('runs'), *parts)
        with open(path) as f:
            lines = f.read().splitlines()
        return lines, read_rows(path)

    def test_eval_scores_every_job(self):
        with mock.patch('pcnet_registration.cli.ThreadPoolExecutor', wraps=ThreadPoolExecutor) as pool:
            status = self.run_cli('eval', '--manifest', self.manifest, '--max-iters', '5', '--threads', '2',
                                  '--out', self.out('runs'))
        self.assertEqual(status, 0)
        pool.assert_called_once_with(max_workers=2)
        lines, rows = self.read_csv('results', 'eval.csv')
        self.assertEqual(lines[1], 'id,aee,ace,loss,status')
        self.assertEqual([r['id'] for r in rows], self.labelled + ['unlabelled'])
        for row in rows[:2]:
            self.assertEqual(row['status'], 'ok')
            self.assertGreaterEqual(row['aee'], 0.0)
            self.assertGreaterEqual(row['ace'], 0.0)
            self.assertGreaterEqual(row['loss'], 0.0)
        self.assertEqual((rows[2]['status'], rows[2]['aee']), ('no-ground-truth', None))
        transforms = glob.glob(os.path.join(self.out('runs'), 'results', 'transforms', '*.json'))
        self.assertEqual(len(transforms), 3)

    def test_report_skips_jobs_without_ground_truth(self):
        with self.assertLogs(logger, level='WARNING') as logs:
            status = self.run_cli('report', '--manifest', self.manifest, '--max-iters', '5',
                                  '--out', self.out('runs'))
        self.assertEqual(status, 0)
        self.assertTrue(any('unlabelled: no ground truth transform, job skipped' in line for line in logs.output))
        lines, rows = self.read_csv('results', 'report.csv')
        self.assertEqual([r['id'] for r in rows], self.labelled)
        self.assertIn('statistic,aee,ace', lines)

    def test_output_dir_stays_under_out(self):
        escaping = os.path.join(self.out('data'), 'escaping.json')
        RunManifest(RunManifest.load(self.manifest).jobs[:1], output_dir='../elsewhere').dump(escaping)
        status = self.run_cli('eval', '--manifest', escaping, '--max-iters', '5', '--out', self.out('runs'))
        self.assertEqual(status, 1)
        self.assertFalse(os.path.exists(self.out('elsewhere')))

    def test_register_with_classical_features(self):
        job = RunManifest.load(self.manifest).jobs[0]
        status = self.run_cli('register', '--ref', job.ref, '--flt', job.flt, '--features', 'classical',
                              '--max-iters', '5', '--out', self.out('classical'))
        self.assertEqual(status, 0)
        with open(os.path.join(self.out('classical'), 'transform.json')) as f:
            self.assertEqual(len(json.load(f)['affine']), 6)
