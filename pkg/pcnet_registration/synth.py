# -*- coding: utf-8 -*-
"""Synthetic fixtures: phase-congruent gratings, procedural bases and pseudo-multimodal pairs."""

import math
from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

from logzero import logger

from pcnet_registration.imgcore import AffineParams, GrayImage, as_array, warp_affine

GRADES = {
    's': AffineParams(1.1, 0.1, -10.0, -0.1, 1.1, 10.0),
    'm': AffineParams(1.15, 0.15, -15.0, -0.15, 1.15, 15.0),
    'l': AffineParams(1.2, 0.2, -20.0, -0.2, 1.2, 20.0),
}
MODALITY_KINDS = ('identity', 'gamma', 'invert', 'piecewise', 'posterize')
BASE_KINDS = ('texture', 'grating', 'blobs')


@dataclass(frozen=True)
class GratingSpec:
    """x spans [0, 4 pi) across the columns; the phase offset varies linearly down the rows."""
    width: int = 128
    height: int = 128
    n_harmonics: int = 4
    phase_range: tuple = (0.0, math.pi / 2.0)

    def __post_init__(self):
        if self.n_harmonics < 1:
            raise ValueError('n_harmonics must be >= 1, {0} provided'.format(self.n_harmonics))
        if self.width < 1 or self.height < 1:
            raise ValueError('Grating needs a positive size, {0}x{1} provided'.format(self.width, self.height))

    def abscissae(self):
        return 4.0 * math.pi * np.arange(self.width) / self.width

    def row_phases(self):
        lo, hi = self.phase_range
        if self.height == 1:
            return np.array([float(lo)])
        return lo + (hi - lo) * np.arange(self.height) / (self.height - 1.0)

    def congruent_columns(self):
        """Columns where every harmonic shares its phase: x = k pi."""
        return [k * self.width / 4.0 for k in range(4)]


def grating_profile(x, phi, n_harmonics):
    """sum_s sin((2s+1) x + phi) / (2s+1), unscaled."""
    x = np.asarray(x, dtype=np.float64)
    return sum(np.sin((2 * s + 1) * x + phi) / (2 * s + 1) for s in range(n_harmonics))


def _rescale(data):
    lo, hi = data.min(), data.max()
    if hi == lo:
        return np.zeros_like(data)
    return (data - lo) / (hi - lo)


def grating(spec=None):
    spec = spec or GratingSpec()
    x = spec.abscissae()[None, :]
    phi = spec.row_phases()[:, None]
    return GrayImage(_rescale(grating_profile(x, phi, spec.n_harmonics)))


def grating_target(size, radius=0.36, background=0.5):
    """Grating seen through a soft-edged disc on a flat background.

    The bare grating only varies along x, so it cannot pin down the
    parameters acting along its lines; the rim of the disc can.
    """
    pattern = grating(GratingSpec(width=size, height=size)).data
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    centre = (size - 1) / 2.0
    disc = ((xs - centre) ** 2 + (ys - centre) ** 2 <= (radius * size) ** 2).astype(np.float64)
    window = ndimage.gaussian_filter(disc, sigma=max(size / 128.0, 0.5), mode='reflect')
    return GrayImage(window * pattern + (1.0 - window) * background)


@dataclass(frozen=True)
class ModalitySpec:
    """Intensity remap of [0, 1] onto itself followed by additive Gaussian noise.

    ``piecewise`` is a tent peaking at ``breakpoint`` (not monotone);
    ``posterize`` quantizes to ``levels`` gray levels.
    """
    kind: str = 'identity'
    gamma: float = 2.2
    breakpoint: float = 0.6
    levels: int = 4
    noise_sigma: float = 0.0

    def __post_init__(self):
        if self.kind not in MODALITY_KINDS:
            raise ValueError('Unknown modality {0}, expected one of {1}'.format(self.kind, ', '.join(MODALITY_KINDS)))
        if not self.gamma > 0:
            raise ValueError('gamma must be > 0, {0} provided'.format(self.gamma))
        if not 0 < self.breakpoint < 1:
            raise ValueError('breakpoint must lie in (0, 1), {0} provided'.format(self.breakpoint))
        if self.levels < 2:
            raise ValueError('levels must be >= 2, {0} provided'.format(self.levels))
        if not self.noise_sigma >= 0:
            raise ValueError('noise_sigma must be >= 0, {0} provided'.format(self.noise_sigma))

    def remap(self, data):
        v = np.clip(as_array(data), 0.0, 1.0)
        if self.kind == 'identity':
            return v.copy()
        if self.kind == 'gamma':
            return v ** self.gamma
        if self.kind == 'invert':
            return 1.0 - v
        if self.kind == 'piecewise':
            b = self.breakpoint
            return np.where(v <= b, v / b, (1.0 - v) / (1.0 - b))
        return np.minimum(np.floor(v * self.levels), self.levels - 1) / (self.levels - 1.0)

    def to_dict(self):
        return asdict(self)


def make_pair(base, modality, a_gt, rng=None):
    """Returns (I_ref, I_flt, a_gt) with I_flt = warp(remap(base), a_gt) + noise."""
    ref = base if isinstance(base, GrayImage) else GrayImage(base)
    warped, _ = warp_affine(GrayImage(modality.remap(ref.data)), a_gt)
    flt = warped.data
    if modality.noise_sigma > 0:
        rng = rng if rng is not None else np.random.default_rng(0)
        flt = flt + rng.normal(0.0, modality.noise_sigma, flt.shape)
    return ref, GrayImage(np.clip(flt, 0.0, 1.0)), a_gt


def texture_base(size, rng):
    """Smoothed random field with a few flat geometric shapes on top."""
    field = _rescale(ndimage.gaussian_filter(rng.normal(size=(size, size)), sigma=size / 48.0, mode='reflect'))
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    for _ in range(4):
        cx, cy = rng.uniform(0.2, 0.8, size=2) * size
        value = rng.uniform(0.0, 1.0)
        if rng.uniform() < 0.5:
            r = rng.uniform(0.06, 0.14) * size
            inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= r * r
        else:
            hw, hh = rng.uniform(0.05, 0.15, size=2) * size
            inside = (np.abs(xs - cx) <= hw) & (np.abs(ys - cy) <= hh)
        field = np.where(inside, 0.3 * field + 0.7 * value, field)
    return GrayImage(ndimage.gaussian_filter(field, sigma=0.7, mode='reflect'))


def blobs_base(size, rng, count=12):
    ys, xs = np.mgrid[0:size, 0:size].astype(np.float64)
    out = np.zeros((size, size))
    for _ in range(count):
        cx, cy = rng.uniform(0.1, 0.9, size=2) * size
        s = rng.uniform(0.03, 0.08) * size
        out += rng.uniform(0.3, 1.0) * np.exp(-((xs - cx) ** 2 + (ys - cy) ** 2) / (2.0 * s * s))
    return GrayImage(_rescale(out))


def make_base(kind, size, rng):
    if kind == 'texture':
        return texture_base(size, rng)
    if kind == 'blobs':
        return blobs_base(size, rng)
    if kind == 'grating':
        return grating_target(size)
    raise ValueError('Unknown base {0}, expected one of {1}'.format(kind, ', '.join(BASE_KINDS)))


@dataclass
class SynthCase:
    case_id: str
    ref: GrayImage
    flt: GrayImage
    a_gt: AffineParams
    base: str
    modality: ModalitySpec
    grade: str


def suite_modalities(noise_sigma=0.0):
    return [
        ModalitySpec('gamma', gamma=1.0 / 2.2, noise_sigma=noise_sigma),
        ModalitySpec('invert', noise_sigma=noise_sigma),
        ModalitySpec('piecewise', noise_sigma=noise_sigma),
        ModalitySpec('posterize', noise_sigma=noise_sigma),
    ]


def builtin_suite(seed=0, size=256, noise_sigma=0.0, grades=('s', 'm', 'l')):
    """Every base crossed with every modality and deformation grade."""
    rng = np.random.default_rng(seed)
    bases = [(kind, make_base(kind, size, rng)) for kind in BASE_KINDS]
    cases = []
    for base_name, base in bases:
        for modality in suite_modalities(noise_sigma):
            for grade in grades:
                ref, flt, a_gt = make_pair(base, modality, GRADES[grade], rng)
                case_id = '{0}-{1}-{2}'.format(base_name, modality.kind, grade)
                cases.append(SynthCase(case_id, ref, flt, a_gt, base_name, modality, grade))
    logger.debug('built {0} synthetic cases (seed {1}, {2}x{2})'.format(len(cases), seed, size))
    return cases


def aligned_pairs(seed=0, count=10, size=256, noise_sigma=0.02):
    """Same-scene pairs under different remaps with identity ground truth, for tuning."""
    rng = np.random.default_rng(seed)
    modalities = suite_modalities(noise_sigma)
    cases = []
    for i in range(count):
        kind = ('texture', 'blobs')[i % 2]
        base = make_base(kind, size, rng)
        modality = modalities[i % len(modalities)]
        noisy_ref = GrayImage(np.clip(base.data + rng.normal(0.0, noise_sigma, base.shape), 0.0, 1.0)) \
            if noise_sigma > 0 else base
        ref, flt, a_gt = make_pair(noisy_ref, modality, AffineParams.identity(), rng)
        cases.append(SynthCase('aligned-{0:02d}'.format(i), ref, flt, a_gt, kind, modality, 'aligned'))
    return cases
