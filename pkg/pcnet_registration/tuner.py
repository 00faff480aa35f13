# -*- coding: utf-8 -*-
"""Unsupervised fitting of alpha, beta and the kernel modulation W.

Both patches of an aligned pair go through the same model and the
structure-protected similarity loss is minimized by simultaneous perturbation
stochastic approximation (two loss evaluations per step, whatever the number
of parameters).
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, asdict, field
from typing import List, Optional

import numpy as np

from logzero import logger

from pcnet_registration.exceptions import ShapeMismatchError, TuningAbortedError
from pcnet_registration.imgcore import GrayImage, as_array
from pcnet_registration.metrics import LossConfig, similarity_loss

ALPHA = 'alpha'
BETA = 'beta'
MODULATION = 'modulation'
GROUPS = (ALPHA, BETA, MODULATION)
ALPHA_FLOOR = 1.0 + 1e-3


@dataclass(frozen=True)
class TrainConfig:
    """SPSA schedules: a_k = a / (k + A)^alpha, c_k = c / k^gamma.

    Perturbations and steps are expressed in units of each group's scale.
    ``spsa_a=None`` calibrates a so the first step moves each coordinate by
    about ``initial_step`` scale units.
    """
    patch_size: int = 200
    batch_size: int = 8
    validation_size: Optional[int] = None
    validation_fraction: float = 0.2
    iterations: int = 200
    spsa_a: Optional[float] = None
    spsa_c: float = 1.0
    spsa_A: float = 20.0
    spsa_alpha: float = 0.602
    spsa_gamma: float = 0.101
    initial_step: float = 0.1
    calibration_steps: int = 4
    alpha_scale: float = 0.5
    beta_scale: float = 0.25
    modulation_scale: float = 0.05
    trainable: tuple = GROUPS
    brightness: float = 0.1
    contrast: float = 0.2
    gamma: float = 0.2
    max_rejections: int = 10
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, 'trainable', tuple(self.trainable))
        if self.patch_size < 1:
            raise ValueError('patch_size must be >= 1, {0} provided'.format(self.patch_size))
        if self.batch_size < 1:
            raise ValueError('batch_size must be >= 1, {0} provided'.format(self.batch_size))
        if self.validation_size is not None and self.validation_size < 1:
            raise ValueError('validation_size must be >= 1, {0} provided'.format(self.validation_size))
        if not 0 < self.validation_fraction < 1:
            raise ValueError('validation_fraction must lie in (0, 1), {0} provided'.format(self.validation_fraction))
        if self.iterations < 0:
            raise ValueError('iterations must be >= 0, {0} provided'.format(self.iterations))
        for name in self.trainable:
            if name not in GROUPS:
                raise ValueError('Unknown trainable group {0}, expected some of {1}'.format(name, GROUPS))
        for name in ('spsa_c', 'alpha_scale', 'beta_scale', 'modulation_scale', 'initial_step'):
            if not getattr(self, name) > 0:
                raise ValueError('{0} must be > 0, {1} provided'.format(name, getattr(self, name)))
        for name in ('brightness', 'contrast', 'gamma'):
            if not getattr(self, name) >= 0:
                raise ValueError('{0} jitter must be >= 0, {1} provided'.format(name, getattr(self, name)))
        if self.spsa_a is not None and not self.spsa_a > 0:
            raise ValueError('spsa_a must be > 0, {0} provided'.format(self.spsa_a))
        if self.max_rejections < 1:
            raise ValueError('max_rejections must be >= 1, {0} provided'.format(self.max_rejections))

    def group_scale(self, name):
        return getattr(self, '{0}_scale'.format(name))

    def to_dict(self):
        d = asdict(self)
        d['trainable'] = list(self.trainable)
        return d


class ParamVector(object):
    """Flat view of the trainable groups of a model, in the order alpha, beta, W."""

    def __init__(self, values, groups):
        self._values = np.array(values, dtype=np.float64)
        self._groups = list(groups)
        if self._groups and self._groups[-1][2] != self._values.size:
            raise ShapeMismatchError('Parameter groups cover {0} entries, vector has {1}'
                                     .format(self._groups[-1][2], self._values.size))

    @staticmethod
    def from_model(model, trainable=GROUPS, scales=None):
        alpha, beta, modulation = model.trainable_values()
        parts = {ALPHA: np.array([alpha]), BETA: np.array([beta]), MODULATION: np.asarray(modulation)}
        scales = scales or {}
        values, groups, start = [], [], 0
        for name in GROUPS:
            if name not in trainable:
                continue
            values.append(parts[name])
            groups.append((name, start, start + parts[name].size, scales.get(name, 1.0)))
            start += parts[name].size
        flat = np.concatenate(values) if values else np.zeros(0)
        return ParamVector(flat, groups)

    @property
    def values(self):
        return self._values.copy()

    @property
    def groups(self):
        return list(self._groups)

    @property
    def size(self):
        return self._values.size

    def group(self, name):
        for group_name, start, stop, _ in self._groups:
            if group_name == name:
                return self._values[start:stop].copy()
        return None

    def scales(self):
        s = np.empty(self._values.size)
        for _, start, stop, scale in self._groups:
            s[start:stop] = scale
        return s

    def with_values(self, values):
        return ParamVector(values, self._groups)

    def projected(self):
        values = self._values.copy()
        for name, start, stop, _ in self._groups:
            if name == ALPHA:
                values[start:stop] = np.maximum(values[start:stop], ALPHA_FLOOR)
            elif name == BETA:
                values[start:stop] = np.maximum(values[start:stop], 0.0)
        return ParamVector(values, self._groups)

    def apply_to(self, model):
        """New model with this vector's groups; frozen groups come from ``model``."""
        alpha, beta, modulation = model.trainable_values()
        alpha_part, beta_part, w_part = self.group(ALPHA), self.group(BETA), self.group(MODULATION)
        return model.with_trainable_values(
            alpha if alpha_part is None else alpha_part[0],
            beta if beta_part is None else beta_part[0],
            modulation if w_part is None else w_part)


@dataclass
class TuneStep:
    iteration: int
    loss_plus: float
    loss_minus: float
    validation_loss: float
    best_validation_loss: float
    accepted: bool


@dataclass
class TuneResult:
    model: object
    initial_validation_loss: float
    best_validation_loss: float
    history: List[TuneStep] = field(default_factory=list)

    @property
    def params(self):
        return self.model.params

    @property
    def bank(self):
        return self.model.bank


def _check_pair(pair):
    a, b = as_array(pair[0]), as_array(pair[1])
    if a.shape != b.shape:
        raise ShapeMismatchError('Aligned pair images differ in shape: {0} vs {1}'.format(a.shape, b.shape))
    return a, b


def augment(patch, rng, cfg):
    """Brightness, contrast and gamma jitter; a zero range leaves that step out."""
    g = math.exp(rng.uniform(-cfg.gamma, cfg.gamma)) if cfg.gamma > 0 else 1.0
    c = 1.0 + rng.uniform(-cfg.contrast, cfg.contrast) if cfg.contrast > 0 else 1.0
    b = rng.uniform(-cfg.brightness, cfg.brightness) if cfg.brightness > 0 else 0.0
    out = patch
    if g != 1.0:
        out = np.clip(out, 0.0, 1.0) ** g
    if c != 1.0:
        mean = out.mean()
        out = mean + c * (out - mean)
    if b != 0.0:
        out = out + b
    if out is not patch:
        out = np.clip(out, 0.0, 1.0)
    return out


def sample_batch(dataset, cfg, rng, size=None):
    """Co-located random crops, each side augmented independently."""
    if not dataset:
        raise ValueError('sample_batch needs at least one aligned pair')
    pairs = [_check_pair(p) for p in dataset]
    p = cfg.patch_size
    for a, _ in pairs:
        if a.shape[0] < p or a.shape[1] < p:
            raise ValueError('Patch of {0}x{0} is larger than a {1}x{2} training image'
                             .format(p, a.shape[1], a.shape[0]))
    batch = []
    for _ in range(size or cfg.batch_size):
        a, b = pairs[int(rng.integers(len(pairs)))]
        y = int(rng.integers(a.shape[0] - p + 1))
        x = int(rng.integers(a.shape[1] - p + 1))
        crop_a = a[y:y + p, x:x + p]
        crop_b = b[y:y + p, x:x + p]
        batch.append((GrayImage(augment(crop_a, rng, cfg)), GrayImage(augment(crop_b, rng, cfg))))
    return batch


def pair_loss(pair, model, loss_cfg=None):
    return similarity_loss(model.enhance(pair[0]), model.enhance(pair[1]), loss_cfg)


def batch_loss(pairs, model, loss_cfg=None, executor=None):
    """Mean pair loss; both sides go through the same model."""
    if not pairs:
        raise ValueError('batch_loss needs at least one pair')
    if executor is None:
        losses = [pair_loss(pair, model, loss_cfg) for pair in pairs]
    else:
        losses = list(executor.map(lambda pair: pair_loss(pair, model, loss_cfg), pairs))
    return float(sum(losses) / len(losses))


def _perturbation_losses(vec, model, batch, delta, c_k, loss_cfg, executor):
    shift = c_k * vec.scales() * delta
    plus = vec.with_values(vec.values + shift).projected().apply_to(model)
    minus = vec.with_values(vec.values - shift).projected().apply_to(model)
    return batch_loss(batch, plus, loss_cfg, executor), batch_loss(batch, minus, loss_cfg, executor)


def _rademacher(rng, size):
    return rng.choice(np.array([-1.0, 1.0]), size=size)


def calibrate_gain(vec, model, batch, cfg, rng, loss_cfg=None, executor=None):
    """Picks a so the first update moves coordinates by about ``initial_step`` scale units."""
    c_1 = cfg.spsa_c
    diffs = []
    for _ in range(cfg.calibration_steps):
        plus, minus = _perturbation_losses(vec, model, batch, _rademacher(rng, vec.size), c_1, loss_cfg, executor)
        if math.isfinite(plus) and math.isfinite(minus):
            diffs.append(abs(plus - minus) / (2.0 * c_1))
    magnitude = float(np.mean(diffs)) if diffs else 0.0
    if magnitude <= 0:
        logger.warning('SPSA calibration saw no loss change, using a = {0}'.format(cfg.initial_step))
        return cfg.initial_step
    a = cfg.initial_step * (1.0 + cfg.spsa_A) ** cfg.spsa_alpha / magnitude
    logger.debug('SPSA gain calibrated: a = {0:.4g}'.format(a))
    return a


def split_pairs(dataset, cfg):
    """(training, validation) by index: the last ``validation_fraction`` of the pairs are held out.

    A single pair serves both roles.
    """
    dataset = list(dataset)
    if len(dataset) < 2:
        logger.warning('only {0} aligned pair, validating on the training data'.format(len(dataset)))
        return dataset, dataset
    held_out = min(max(1, int(round(cfg.validation_fraction * len(dataset)))), len(dataset) - 1)
    return dataset[:-held_out], dataset[-held_out:]


def tune(dataset, model, cfg=None, loss_cfg=None, workers=None):
    """Returns a TuneResult holding the best model seen on the fixed, held-out validation batch."""
    cfg = cfg or TrainConfig()
    dataset, held_out = split_pairs(dataset, cfg)
    train_seed, validation_seed = np.random.SeedSequence(cfg.seed).spawn(2)
    rng = np.random.default_rng(train_seed)
    executor = ThreadPoolExecutor(max_workers=workers) if workers and workers > 1 else None
    try:
        validation = sample_batch(held_out, cfg, np.random.default_rng(validation_seed),
                                  size=cfg.validation_size or cfg.batch_size)
        initial = batch_loss(validation, model, loss_cfg, executor)
        result = TuneResult(model=model, initial_validation_loss=initial, best_validation_loss=initial)
        logger.info('initial validation loss {0:.6g}'.format(initial))
        if cfg.iterations == 0:
            return result

        vec = ParamVector.from_model(model, cfg.trainable,
                                     {name: cfg.group_scale(name) for name in GROUPS})
        if vec.size == 0:
            logger.warning('No trainable groups selected, nothing to tune')
            return result
        scales = vec.scales()
        a = cfg.spsa_a
        if a is None:
            a = calibrate_gain(vec, model, sample_batch(dataset, cfg, rng), cfg, rng, loss_cfg, executor)

        shrink = 1.0
        rejections = 0
        for k in range(1, cfg.iterations + 1):
            batch = sample_batch(dataset, cfg, rng)
            a_k = a / (k + cfg.spsa_A) ** cfg.spsa_alpha
            c_k = shrink * cfg.spsa_c / k ** cfg.spsa_gamma
            delta = _rademacher(rng, vec.size)
            plus, minus = _perturbation_losses(vec, model, batch, delta, c_k, loss_cfg, executor)

            validation_loss = float('nan')
            candidate = None
            if math.isfinite(plus) and math.isfinite(minus):
                estimate = (plus - minus) / (2.0 * c_k * scales * delta)
                candidate = vec.with_values(vec.values - a_k * scales ** 2 * estimate).projected()
                if np.all(np.isfinite(candidate.values)):
                    candidate_model = candidate.apply_to(model)
                    validation_loss = batch_loss(validation, candidate_model, loss_cfg, executor)

            if not math.isfinite(validation_loss):
                rejections += 1
                shrink *= 0.5
                logger.warning('step {0}: non-finite loss, step rejected, perturbation halved'.format(k))
                result.history.append(TuneStep(k, plus, minus, validation_loss, result.best_validation_loss, False))
                if rejections >= cfg.max_rejections:
                    raise TuningAbortedError('{0} consecutive non-finite steps, giving up at step {1}'
                                             .format(rejections, k), history=result.history)
                continue

            rejections = 0
            vec = candidate
            if validation_loss < result.best_validation_loss:
                result.best_validation_loss = validation_loss
                result.model = candidate_model
            result.history.append(TuneStep(k, plus, minus, validation_loss, result.best_validation_loss, True))
            logger.debug('step {0}: L+={1:.6g} L-={2:.6g} val={3:.6g} best={4:.6g}'
                         .format(k, plus, minus, validation_loss, result.best_validation_loss))
        logger.info('best validation loss {0:.6g} (initial {1:.6g}) after {2} steps'
                    .format(result.best_validation_loss, initial, cfg.iterations))
        return result
    finally:
        if executor is not None:
            executor.shutdown()
