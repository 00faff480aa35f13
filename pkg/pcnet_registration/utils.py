# -*- coding: utf-8 -*-

import json
import os


def confined_path(root, *parts):
    """
    Joins ``parts`` under ``root`` and refuses any result that escapes it
    (absolute parts, ``..`` segments, symlinked parents).
    """
    root_real = os.path.realpath(str(root))
    candidate = os.path.realpath(os.path.join(root_real, *[str(p) for p in parts]))
    if os.path.commonpath([root_real, candidate]) != root_real:
        raise ValueError('Refusing to write outside the output directory: {0}'.format(os.path.join(*map(str, parts))))
    return candidate


def ensure_dir(path):
    os.makedirs(str(path), exist_ok=True)
    return path


def write_json(path, data):
    """Sorted keys and a trailing newline so reruns give byte-identical files."""
    with open(str(path), 'w') as f:
        json.dump(data, f, indent=2, sort_keys=True)
        f.write('\n')


def safe_name(text):
    """File-name friendly version of a job id."""
    return ''.join(c if c.isalnum() or c in '-_.' else '_' for c in str(text)).strip('.') or 'job'
