# -*- coding: utf-8 -*-
"""JSON overrides for the configuration dataclasses, and the environment defaults.

An override document may hold the sections ``bank``, ``params``, ``loss``,
``register`` and ``train``; each maps field names to values.
"""

import dataclasses
import json
import logging
import os

from dotenv import load_dotenv, find_dotenv

SECTIONS = ('bank', 'params', 'loss', 'register', 'train')
LOG_LEVELS = {
    'DEBUG': logging.DEBUG,
    'INFO': logging.INFO,
    'WARNING': logging.WARNING,
    'ERROR': logging.ERROR,
}


def load_environment():
    """Inflates os.environ from the nearest .env file; existing variables win."""
    load_dotenv(find_dotenv(usecwd=True))
    return {
        'weights': os.environ.get('PCNET_WEIGHTS'),
        'out': os.environ.get('PCNET_OUT'),
        'threads': _int_or_none(os.environ.get('PCNET_THREADS'), 'PCNET_THREADS'),
        'loglevel': _loglevel(os.environ.get('PCNET_LOGLEVEL')),
    }


def _int_or_none(value, name):
    if value in (None, ''):
        return None
    try:
        return int(value)
    except ValueError:
        raise ValueError('{0} must be an integer, got {1!r}'.format(name, value))


def _loglevel(value):
    if value in (None, ''):
        return None
    try:
        return LOG_LEVELS[value.upper()]
    except KeyError:
        raise ValueError('PCNET_LOGLEVEL must be one of {0}, got {1!r}'.format(', '.join(LOG_LEVELS), value))


def parse_overrides(json_data):
    if not isinstance(json_data, dict):
        raise ValueError('Configuration overrides must be a JSON object')
    unknown = set(json_data) - set(SECTIONS)
    if unknown:
        raise ValueError('Unknown configuration sections: {0}'.format(', '.join(sorted(unknown))))
    for name, section in json_data.items():
        if not isinstance(section, dict):
            raise ValueError('Configuration section {0} must be an object'.format(name))
    return {name: dict(json_data.get(name, {})) for name in SECTIONS}


def load_overrides(path):
    if path is None:
        return {name: {} for name in SECTIONS}
    with open(str(path)) as f:
        try:
            json_data = json.load(f)
        except ValueError as e:
            raise ValueError('Configuration file {0} is not valid JSON: {1}'.format(path, e))
    return parse_overrides(json_data)


def merge_overrides(base, extra):
    """Section-wise merge; ``extra`` wins."""
    merged = {name: dict(base.get(name, {})) for name in SECTIONS}
    for name, section in parse_overrides(extra or {}).items():
        merged[name].update(section)
    return merged


def apply_overrides(cfg, section):
    """dataclasses.replace with a check on the field names."""
    if not section:
        return cfg
    names = {f.name for f in dataclasses.fields(cfg)}
    unknown = set(section) - names
    if unknown:
        raise ValueError('Unknown {0} fields: {1}'.format(type(cfg).__name__, ', '.join(sorted(unknown))))
    values = {k: tuple(v) if isinstance(v, list) else v for k, v in section.items()}
    return dataclasses.replace(cfg, **values)
