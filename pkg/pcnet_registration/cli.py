# -*- coding: utf-8 -*-
"""pcnet-reg: enhance, register, eval, tune, synth and report from the command line.

Every file a subcommand writes lands under --out. The exit status is 0 when
every job succeeded, 1 when a job failed and 2 for usage errors.
"""

import argparse
import csv
import glob
import logging
import os
import sys
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import logzero
from logzero import logger

from pcnet_registration import config
from pcnet_registration.exceptions import PCNetError, TuningAbortedError
from pcnet_registration.gaborbank import BankConfig, make_bank
from pcnet_registration.imgcore import AffineParams, load_image, resample_affine, save_image, save_rgb
from pcnet_registration.manifest import Job, RunManifest
from pcnet_registration.metrics import LossConfig, aee, ace, similarity_loss
from pcnet_registration.pcnet import ClassicalPC, PCNet, PCParams
from pcnet_registration.register import IntensityEnhancer, RegConfig, register
from pcnet_registration.report import THRESHOLDS, read_rows, write_report
from pcnet_registration.synth import aligned_pairs, builtin_suite
from pcnet_registration.tuner import TrainConfig, tune
from pcnet_registration.utils import confined_path, ensure_dir, safe_name, write_json
from pcnet_registration.weights import load_weights, save_weights

DEFAULT_OUT = 'pcnet-out'
TUNE_HISTORY_VERSION = 'pcnet-tune-v1'
EXIT_OK = 0
EXIT_FAILURE = 1
FEATURES = ('pcnet', 'classical', 'intensity')


def _positive_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('expected a positive integer, got {0!r}'.format(text))
    if value < 1:
        raise argparse.ArgumentTypeError('expected a positive integer, got {0}'.format(value))
    return value


def _non_negative_int(text):
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError('expected a non-negative integer, got {0!r}'.format(text))
    if value < 0:
        raise argparse.ArgumentTypeError('expected a non-negative integer, got {0}'.format(value))
    return value


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument('--weights', help='pcnet-weights-v1 file (default: $PCNET_WEIGHTS, else untrained kernels)')
    common.add_argument('--out', help='output directory (default: $PCNET_OUT or {0})'.format(DEFAULT_OUT))
    common.add_argument('--seed', type=int, default=0)
    common.add_argument('--threads', type=_positive_int, help='worker threads (default: $PCNET_THREADS)')
    common.add_argument('--config', help='JSON overrides with sections bank, params, loss, register, train')
    verbosity = common.add_mutually_exclusive_group()
    verbosity.add_argument('-v', '--verbose', action='store_true')
    verbosity.add_argument('-q', '--quiet', action='store_true')
    common.add_argument('--log-file', action='store_true', help='mirror the log into <out>/pcnet.log')

    # global flags go after the subcommand name
    parser = argparse.ArgumentParser(prog='pcnet-reg',
                                     description='Phase-congruency feature enhancement and affine registration')
    sub = parser.add_subparsers(dest='command', metavar='command')
    sub.required = True

    p = sub.add_parser('enhance', parents=[common], help='write per-orientation feature maps')
    p.add_argument('--image', required=True)
    p.add_argument('--orientations', type=_positive_int)
    p.set_defaults(handler=cmd_enhance)

    p = sub.add_parser('register', parents=[common], help='register a floating image onto a reference')
    p.add_argument('--ref', required=True)
    p.add_argument('--flt', required=True)
    p.add_argument('--levels', type=_positive_int)
    p.add_argument('--max-iters', type=_positive_int)
    p.add_argument('--features', choices=FEATURES, default='pcnet')
    p.add_argument('--out-transform', default='transform.json')
    p.add_argument('--out-overlay')
    p.set_defaults(handler=cmd_register)

    for name, handler, text in (('eval', cmd_eval, 'register every job of a manifest and score it'),
                                ('report', cmd_report, 'error statistics over a manifest or an eval CSV')):
        p = sub.add_parser(name, parents=[common], help=text)
        if name == 'report':
            source = p.add_mutually_exclusive_group(required=True)
            source.add_argument('--manifest')
            source.add_argument('--results', help='eval CSV to summarize without re-registering')
        else:
            p.add_argument('--manifest', required=True)
        p.add_argument('--levels', type=_positive_int)
        p.add_argument('--max-iters', type=_positive_int)
        p.add_argument('--features', choices=FEATURES, default='pcnet')
        p.set_defaults(handler=handler)

    p = sub.add_parser('tune', parents=[common], help='fit alpha, beta and W on aligned pairs')
    p.add_argument('--data', required=True, help='manifest file, or directory of manifests, of aligned pairs')
    p.add_argument('--init-weights')
    p.add_argument('--out-weights', default='weights.json')
    p.add_argument('--iters', type=_non_negative_int)
    p.add_argument('--patch-size', type=_positive_int)
    p.add_argument('--batch-size', type=_positive_int)
    p.set_defaults(handler=cmd_tune)

    p = sub.add_parser('synth', parents=[common], help='write the synthetic registration suite')
    p.add_argument('--size', type=_positive_int, default=256)
    p.add_argument('--noise', type=float, help='noise sigma (default: 0 for the suite, 0.02 for aligned pairs)')
    p.add_argument('--grades', default='s,m,l')
    p.add_argument('--aligned', type=_positive_int, metavar='N', help='write N aligned training pairs instead')
    p.add_argument('--bit-depth', type=int, choices=(8, 16), default=16)
    p.set_defaults(handler=cmd_synth)
    return parser


class Context(object):
    """Parsed flags merged with the environment and the override file."""

    def __init__(self, args, env):
        self.args = args
        self.out = os.path.abspath(args.out or env['out'] or DEFAULT_OUT)
        self.threads = args.threads or env['threads']
        self.weights = args.weights or env['weights']
        self.overrides = config.load_overrides(args.config)

    def path(self, *parts):
        return confined_path(self.out, *parts)

    def section(self, name, job=None):
        if job is None or not job.config:
            return self.overrides[name]
        return config.merge_overrides(self.overrides, job.config)[name]

    def model(self, job=None, weights=None, orientations=None, workers=None):
        bank_section = dict(self.section('bank', job))
        if orientations is not None:
            bank_section['n_orientations'] = orientations
        weights = weights or self.weights
        if weights:
            model = load_weights(weights, workers=workers)
            bank_cfg = config.apply_overrides(model.bank.config, bank_section)
            bank = model.bank
            if bank_cfg != model.bank.config:
                logger.warning('bank overrides change the geometry of {0}; its modulation kernels are dropped'
                               .format(weights))
                bank = make_bank(bank_cfg)
            params = config.apply_overrides(model.params, self.section('params', job))
        else:
            bank = make_bank(config.apply_overrides(BankConfig(), bank_section))
            params = config.apply_overrides(PCParams(), self.section('params', job))
        return PCNet(bank, params, workers=workers)

    def reg_config(self, job=None):
        cfg = config.apply_overrides(RegConfig(), self.section('register', job))
        extra = {}
        if getattr(self.args, 'levels', None):
            extra['levels'] = self.args.levels
        if getattr(self.args, 'max_iters', None):
            extra['max_iters'] = self.args.max_iters
        return config.apply_overrides(cfg, extra)

    def results_dir(self, manifest):
        """--out, or the manifest's output_dir confined under it."""
        if manifest.output_dir:
            return ensure_dir(self.path(manifest.output_dir))
        return ensure_dir(self.out)

    def loss_config(self, job=None):
        return config.apply_overrides(LossConfig(), self.section('loss', job))

    def enhancer(self, job=None, workers=None):
        features = getattr(self.args, 'features', 'pcnet')
        if features == 'intensity':
            return IntensityEnhancer()
        if features == 'classical':
            bank_cfg = config.apply_overrides(BankConfig(), self.section('bank', job))
            return ClassicalPC(bank_cfg, workers=workers)
        return self.model(job, workers=workers)


def _stem(path):
    return safe_name(os.path.splitext(os.path.basename(path))[0])


def cmd_enhance(ctx):
    args = ctx.args
    model = ctx.model(orientations=args.orientations, workers=ctx.threads)
    img = load_image(args.image)
    stack = model.enhance(img)
    stem = _stem(args.image)
    targets = [(ctx.path('{0}_o{1}.png'.format(stem, k)), channel) for k, channel in enumerate(stack)]
    targets.append((ctx.path('{0}_composite.png'.format(stem)), stack.composite()))
    ensure_dir(ctx.out)
    for path, data in targets:
        save_image(data, path)
    logger.info('{0}: {1} feature maps and a composite written to {2}'.format(args.image, stack.n_channels, ctx.out))
    return EXIT_OK


def _register_images(ctx, ref, flt, job=None, workers=None):
    enhancer = ctx.enhancer(job, workers=workers)
    return register(ref, flt, cfg=ctx.reg_config(job), enhancer=enhancer), enhancer


def cmd_register(ctx):
    args = ctx.args
    transform_path = ctx.path(args.out_transform)
    overlay_path = ctx.path(args.out_overlay) if args.out_overlay else None
    ref, flt = load_image(args.ref), load_image(args.flt)
    result, _ = _register_images(ctx, ref, flt, workers=ctx.threads)
    ensure_dir(os.path.dirname(transform_path))
    write_json(transform_path, result.a_hat.to_json_dict())
    logger.info('transform {0} written to {1}'.format(result.a_hat, transform_path))
    if overlay_path:
        ensure_dir(os.path.dirname(overlay_path))
        registered, _ = resample_affine(flt, result.a_hat)
        save_rgb(ref, registered, np.zeros(ref.shape), overlay_path)
    return EXIT_OK


def evaluate_job(ctx, job, folder, workers=None):
    """Registers one job and returns its report row."""
    row = {'id': job.job_id, 'aee': None, 'ace': None, 'loss': None, 'status': 'ok'}
    try:
        ref, flt = load_image(job.ref), load_image(job.flt)
        result, enhancer = _register_images(ctx, ref, flt, job, workers)
        registered, _ = resample_affine(flt, result.a_hat)
        row['loss'] = similarity_loss(enhancer.enhance(ref), enhancer.enhance(registered), ctx.loss_config(job))
        transforms_dir = ensure_dir(confined_path(folder, 'transforms'))
        write_json(confined_path(transforms_dir, safe_name(job.job_id) + '.json'), result.a_hat.to_json_dict())
        if job.affine is None:
            row['status'] = 'no-ground-truth'
        else:
            row['aee'] = aee(job.affine, result.a_hat, ref.width, ref.height)
            row['ace'] = ace(job.affine, result.a_hat, ref.width, ref.height)
        logger.info('{0}: aee={1} ace={2}'.format(job.job_id, row['aee'], row['ace']))
    except (PCNetError, OSError, ValueError) as e:
        logger.error('{0}: {1}'.format(job.job_id, e))
        row['status'] = 'failed'
    return row


def run_manifest(ctx, manifest, folder):
    if ctx.threads and ctx.threads > 1 and len(manifest) > 1:
        with ThreadPoolExecutor(max_workers=ctx.threads) as pool:
            return list(pool.map(lambda job: evaluate_job(ctx, job, folder, workers=1), manifest))
    return [evaluate_job(ctx, job, folder, workers=ctx.threads) for job in manifest]


def _log_summary(summaries):
    for key in summaries['aee']:
        logger.info('{0:>10}: aee {1:10.4f}  ace {2:10.4f}'.format(key, summaries['aee'][key], summaries['ace'][key]))


def cmd_eval(ctx):
    manifest = RunManifest.load(ctx.args.manifest)
    folder = ctx.results_dir(manifest)
    rows = run_manifest(ctx, manifest, folder)
    write_report(confined_path(folder, 'eval.csv'), rows)
    failed = [r['id'] for r in rows if r['status'] == 'failed']
    if failed:
        logger.error('{0} of {1} jobs failed: {2}'.format(len(failed), len(rows), ', '.join(failed)))
        return EXIT_FAILURE
    return EXIT_OK


def cmd_report(ctx):
    args = ctx.args
    if args.results:
        folder = ensure_dir(ctx.out)
        rows = read_rows(args.results)
    else:
        manifest = RunManifest.load(args.manifest)
        folder = ctx.results_dir(manifest)
        skipped = [job.job_id for job in manifest if job.affine is None]
        for job_id in skipped:
            logger.warning('{0}: no ground truth transform, job skipped'.format(job_id))
        rows = run_manifest(ctx, RunManifest([job for job in manifest if job.affine is not None]), folder)
    summaries = write_report(confined_path(folder, 'report.csv'), rows, THRESHOLDS)
    if summaries:
        _log_summary(summaries)
    else:
        logger.warning('no successful job with a ground truth transform, no statistics written')
    return EXIT_FAILURE if any(r['status'] == 'failed' for r in rows) else EXIT_OK


def _manifest_paths(data):
    if os.path.isdir(data):
        return sorted(glob.glob(os.path.join(data, '*.json')))
    return [data]


def load_training_pairs(data):
    identity = AffineParams.identity()
    pairs = []
    for path in _manifest_paths(data):
        for job in RunManifest.load(path):
            if job.affine is not None and job.affine != identity:
                logger.warning('{0}: not an aligned pair, skipped for tuning'.format(job.job_id))
                continue
            pairs.append((load_image(job.ref), load_image(job.flt)))
    if not pairs:
        raise PCNetError('No aligned training pairs found in {0}'.format(data))
    logger.info('{0} aligned pairs loaded for tuning'.format(len(pairs)))
    return pairs


def _write_history(path, result_history, initial):
    with open(path, 'w', newline='') as f:
        f.write('# {0}\n'.format(TUNE_HISTORY_VERSION))
        writer = csv.writer(f)
        writer.writerow(('iteration', 'loss_plus', 'loss_minus', 'validation_loss', 'best_validation_loss', 'accepted'))
        if initial is not None:
            writer.writerow((0, '', '', repr(initial), repr(initial), 1))
        for step in result_history:
            writer.writerow((step.iteration, repr(step.loss_plus), repr(step.loss_minus), repr(step.validation_loss),
                             repr(step.best_validation_loss), int(step.accepted)))


def cmd_tune(ctx):
    args = ctx.args
    weights_path = ctx.path(args.out_weights)
    history_path = ctx.path('loss_history.csv')
    model = ctx.model(weights=args.init_weights, workers=1 if ctx.threads and ctx.threads > 1 else None)
    extra = {'seed': args.seed}
    for name in ('iters', 'patch_size', 'batch_size'):
        value = getattr(args, name)
        if value is not None:
            extra['iterations' if name == 'iters' else name] = value
    train_cfg = config.apply_overrides(config.apply_overrides(TrainConfig(), ctx.section('train')), extra)
    pairs = load_training_pairs(args.data)
    ensure_dir(ctx.out)
    try:
        result = tune(pairs, model, train_cfg, ctx.loss_config(), workers=ctx.threads)
    except TuningAbortedError as e:
        _write_history(history_path, e.history, None)
        logger.error('tuning aborted: {0}'.format(e))
        return EXIT_FAILURE
    ensure_dir(os.path.dirname(weights_path))
    save_weights(weights_path, result.model)
    _write_history(history_path, result.history, result.initial_validation_loss)
    logger.info('validation loss {0:.6g} -> {1:.6g}'
                .format(result.initial_validation_loss, result.best_validation_loss))
    return EXIT_OK


def _write_cases(ctx, folder, cases, bit_depth):
    target = ensure_dir(ctx.path(folder))
    jobs = []
    for case in cases:
        ref_path = confined_path(target, '{0}_ref.png'.format(case.case_id))
        flt_path = confined_path(target, '{0}_flt.png'.format(case.case_id))
        save_image(case.ref, ref_path, bit_depth=bit_depth)
        save_image(case.flt, flt_path, bit_depth=bit_depth)
        jobs.append(Job(case.case_id, ref_path, flt_path, case.a_gt))
    manifest_path = confined_path(target, 'manifest.json')
    RunManifest(jobs).dump(manifest_path)
    logger.info('{0} cases written, manifest {1}'.format(len(cases), manifest_path))


def cmd_synth(ctx):
    args = ctx.args
    if args.aligned:
        noise = 0.02 if args.noise is None else args.noise
        cases = aligned_pairs(seed=args.seed, count=args.aligned, size=args.size, noise_sigma=noise)
        _write_cases(ctx, 'aligned', cases, args.bit_depth)
    else:
        grades = tuple(g.strip() for g in args.grades.split(',') if g.strip())
        cases = builtin_suite(seed=args.seed, size=args.size, noise_sigma=args.noise or 0.0, grades=grades)
        _write_cases(ctx, 'suite', cases, args.bit_depth)
    return EXIT_OK


def _configure_logging(args, env, out):
    if args.verbose:
        level = logging.DEBUG
    elif args.quiet:
        level = logging.WARNING
    else:
        level = env['loglevel'] or logging.INFO
    logzero.loglevel(level)
    if args.log_file:
        ensure_dir(out)
        logzero.logfile(confined_path(out, 'pcnet.log'), loglevel=level)


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        env = config.load_environment()
        ctx = Context(args, env)
        _configure_logging(args, env, ctx.out)
        return args.handler(ctx)
    except (PCNetError, OSError, ValueError, KeyError) as e:
        logger.error('{0}: {1}'.format(args.command, e))
        return EXIT_FAILURE
    finally:
        if args.log_file:
            logzero.logfile(None)


if __name__ == '__main__':
    sys.exit(main())
