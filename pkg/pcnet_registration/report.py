# -*- coding: utf-8 -*-
"""Error statistics over a batch of registrations, and the report CSV."""

import csv

import numpy as np

REPORT_VERSION = 'pcnet-report-v1'
THRESHOLDS = (1.0, 5.0, 10.0)
BEST_PERCENTILES = (25, 50, 75, 95)
FIELDS = ('id', 'aee', 'ace', 'loss', 'status')


def trimean(errors):
    q1, q2, q3 = np.percentile(errors, [25, 50, 75])
    return float((q1 + 2.0 * q2 + q3) / 4.0)


def best_mean(errors, percentile):
    """Mean of the errors at or below the given percentile."""
    errors = np.asarray(errors, dtype=np.float64)
    cut = np.percentile(errors, percentile)
    return float(errors[errors <= cut].mean())


def fraction_below(errors, thresholds=THRESHOLDS):
    errors = np.asarray(errors, dtype=np.float64)
    return {t: float(np.mean(errors < t)) for t in thresholds}


def summarize(errors, thresholds=THRESHOLDS):
    errors = np.asarray(list(errors), dtype=np.float64)
    if errors.size == 0:
        raise ValueError('Cannot summarize an empty error list')
    summary = {
        'mean': float(errors.mean()),
        'median': float(np.median(errors)),
        'trimean': trimean(errors),
    }
    for p in BEST_PERCENTILES:
        summary['best{0}'.format(p)] = best_mean(errors, p)
    for t, fraction in fraction_below(errors, thresholds).items():
        summary['below{0:g}px'.format(t)] = fraction
    return summary


def _fmt(value):
    return '' if value is None else '{0:.6f}'.format(value)


def write_report(path, rows, thresholds=THRESHOLDS):
    """``rows`` are dicts keyed by FIELDS; summary rows cover the successful jobs."""
    rows = list(rows)
    ok = [r for r in rows if r.get('status') == 'ok' and r.get('aee') is not None]
    with open(str(path), 'w', newline='') as f:
        f.write('# {0}\n'.format(REPORT_VERSION))
        writer = csv.writer(f)
        writer.writerow(FIELDS)
        for r in rows:
            writer.writerow([r['id'], _fmt(r.get('aee')), _fmt(r.get('ace')), _fmt(r.get('loss')), r.get('status', '')])
        if not ok:
            return {}
        summaries = {
            'aee': summarize([r['aee'] for r in ok], thresholds),
            'ace': summarize([r['ace'] for r in ok], thresholds),
        }
        writer.writerow([])
        writer.writerow(['statistic', 'aee', 'ace'])
        for key in summaries['aee']:
            writer.writerow([key, _fmt(summaries['aee'][key]), _fmt(summaries['ace'][key])])
    return summaries


def read_rows(path):
    """Per-job rows of a report written by write_report."""
    rows = []
    with open(str(path), newline='') as f:
        lines = [line for line in f if not line.startswith('#')]
    for record in csv.DictReader(lines):
        if not record.get('id') or record.get('status') is None:
            break
        rows.append({
            'id': record['id'],
            'aee': float(record['aee']) if record['aee'] else None,
            'ace': float(record['ace']) if record['ace'] else None,
            'loss': float(record['loss']) if record['loss'] else None,
            'status': record['status'],
        })
    return rows
