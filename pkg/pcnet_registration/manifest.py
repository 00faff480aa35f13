# -*- coding: utf-8 -*-

import json
import os
from dataclasses import dataclass, field
from typing import Optional

from pcnet_registration.exceptions import ManifestError
from pcnet_registration.imgcore import AffineParams

MANIFEST_VERSION = 'pcnet-manifest-v1'


@dataclass
class Job:
    job_id: str
    ref: str
    flt: str
    affine: Optional[AffineParams] = None
    config: dict = field(default_factory=dict)

    def to_json_dict(self, base_dir=None):
        def rel(path):
            return os.path.relpath(path, base_dir) if base_dir else path
        d = {'id': self.job_id, 'ref': rel(self.ref), 'flt': rel(self.flt)}
        if self.affine is not None:
            d['affine'] = list(self.affine.values)
        if self.config:
            d['config'] = self.config
        return d


class RunManifest(object):
    """Jobs to run plus an output directory.

    Image paths are resolved against the manifest's folder. ``output_dir`` is
    kept as written: it names a folder under the run's --out.
    """

    def __init__(self, jobs, output_dir=None):
        self._jobs = list(jobs)
        self._output_dir = output_dir
        ids = [job.job_id for job in self._jobs]
        if len(set(ids)) != len(ids):
            raise ManifestError('Job ids must be unique')

    @property
    def jobs(self):
        return list(self._jobs)

    @property
    def output_dir(self):
        return self._output_dir

    def __iter__(self):
        return iter(self._jobs)

    def __len__(self):
        return len(self._jobs)

    @staticmethod
    def parse_job(json_data, base_dir, index, check_paths=True):
        try:
            ref = json_data['ref']
            flt = json_data['flt']
        except (KeyError, TypeError):
            raise ManifestError('Job {0} needs "ref" and "flt" entries'.format(index))
        job_id = str(json_data.get('id', 'job-{0:03d}'.format(index)))
        ref = os.path.normpath(os.path.join(base_dir, ref))
        flt = os.path.normpath(os.path.join(base_dir, flt))
        if check_paths:
            for path in (ref, flt):
                if not os.path.isfile(path):
                    raise ManifestError('Job {0}: file not found: {1}'.format(job_id, path))
        affine = None
        if json_data.get('affine') is not None:
            try:
                affine = AffineParams.from_sequence(json_data['affine'])
            except (TypeError, ValueError) as e:
                raise ManifestError('Job {0}: invalid affine transform: {1}'.format(job_id, e))
        config = json_data.get('config') or {}
        if not isinstance(config, dict):
            raise ManifestError('Job {0}: "config" must be an object'.format(job_id))
        return Job(job_id, ref, flt, affine, config)

    @staticmethod
    def from_json_text(json_text, base_dir='.', check_paths=True):
        try:
            json_data = json.loads(json_text)
        except ValueError as e:
            raise ManifestError('Manifest is not valid JSON: {0}'.format(e))
        if not isinstance(json_data, dict) or 'jobs' not in json_data:
            raise ManifestError('Manifest has no "jobs" entry')
        version = json_data.get('version', MANIFEST_VERSION)
        if version != MANIFEST_VERSION:
            raise ManifestError('Unsupported manifest version {0}, expected {1}'.format(version, MANIFEST_VERSION))
        jobs = [RunManifest.parse_job(job, base_dir, i, check_paths) for i, job in enumerate(json_data['jobs'])]
        output_dir = json_data.get('output_dir')
        if output_dir is not None and not isinstance(output_dir, str):
            raise ManifestError('"output_dir" must be a string')
        return RunManifest(jobs, output_dir)

    @staticmethod
    def load(path, check_paths=True):
        with open(str(path)) as f:
            return RunManifest.from_json_text(f.read(), os.path.dirname(os.path.abspath(str(path))), check_paths)

    def to_json_dict(self, base_dir=None):
        d = {'version': MANIFEST_VERSION, 'jobs': [job.to_json_dict(base_dir) for job in self._jobs]}
        if self._output_dir is not None:
            d['output_dir'] = self._output_dir
        return d

    def dump(self, path):
        """Writes the manifest with paths relative to its own folder."""
        base_dir = os.path.dirname(os.path.abspath(str(path)))
        with open(str(path), 'w') as f:
            json.dump(self.to_json_dict(base_dir), f, indent=2)
