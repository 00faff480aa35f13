# -*- coding: utf-8 -*-
"""SSIM, the structure-protected similarity loss, and the AEE / ACE registration errors."""

from dataclasses import dataclass, asdict

import numpy as np
from scipy import ndimage

from pcnet_registration.exceptions import ShapeMismatchError
from pcnet_registration.imgcore import as_array, gaussian_taps, gradients

SSIM_K1 = 0.01
SSIM_K2 = 0.03
LOSS_DENOMINATOR_GUARD = 1e-12


@dataclass(frozen=True)
class LossConfig:
    c: float = 0.7
    ssim_window: int = 11
    ssim_sigma: float = 1.5
    data_range: float = 1.0

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError('c must be > 0, {0} provided'.format(self.c))
        if self.ssim_window < 3 or self.ssim_window % 2 == 0:
            raise ValueError('ssim_window must be odd and >= 3, {0} provided'.format(self.ssim_window))
        if not self.ssim_sigma > 0:
            raise ValueError('ssim_sigma must be > 0, {0} provided'.format(self.ssim_sigma))

    @property
    def ssim_constants(self):
        return (SSIM_K1 * self.data_range) ** 2, (SSIM_K2 * self.data_range) ** 2

    def to_dict(self):
        return asdict(self)


def _gaussian_filter(data, taps):
    out = ndimage.correlate1d(data, taps, axis=0, mode='reflect')
    return ndimage.correlate1d(out, taps, axis=1, mode='reflect')


def ssim_map(a, b, cfg=None):
    cfg = cfg or LossConfig()
    a = as_array(a)
    b = as_array(b)
    if a.shape != b.shape:
        raise ShapeMismatchError('SSIM inputs differ in shape: {0} vs {1}'.format(a.shape, b.shape))
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError('SSIM inputs must be finite')
    c1, c2 = cfg.ssim_constants
    taps = gaussian_taps(cfg.ssim_window, cfg.ssim_sigma)

    mu_a = _gaussian_filter(a, taps)
    mu_b = _gaussian_filter(b, taps)
    var_a = _gaussian_filter(a * a, taps) - mu_a ** 2
    var_b = _gaussian_filter(b * b, taps) - mu_b ** 2
    cov = _gaussian_filter(a * b, taps) - mu_a * mu_b

    return (((2.0 * mu_a * mu_b + c1) * (2.0 * cov + c2))
            / ((mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)))


def ssim(a, b, cfg=None):
    return float(np.mean(ssim_map(a, b, cfg)))


def gradient_mass(stack):
    """Sum over channels of the L1 norms of both gradient components."""
    total = 0.0
    for channel in stack:
        gx, gy = gradients(channel)
        total += np.abs(gx).sum() + np.abs(gy).sum()
    return total


def similarity_loss(p1, p2, cfg=None):
    cfg = cfg or LossConfig()
    if p1.n_channels != p2.n_channels or p1.shape != p2.shape:
        raise ShapeMismatchError('Feature stacks differ: {0} vs {1}'.format(p1, p2))
    n_o = p1.n_channels
    mean_ssim = sum(ssim(c1, c2, cfg) for c1, c2 in zip(p1, p2)) / n_o
    numerator = 1.0 - mean_ssim
    if numerator == 0.0:
        return 0.0
    mass = (gradient_mass(p1) + gradient_mass(p2)) / n_o
    return numerator / (abs(mass) ** cfg.c + LOSS_DENOMINATOR_GUARD)


def _displacements(a_gt, a_hat, xs, ys):
    gx, gy = a_gt.apply(xs, ys)
    hx, hy = a_hat.apply(xs, ys)
    return np.hypot(gx - hx, gy - hy)


def aee(a_gt, a_hat, width, height):
    """Average Euclidean error over every pixel of a width x height grid."""
    ys, xs = np.mgrid[0:height, 0:width].astype(np.float64)
    return float(np.mean(_displacements(a_gt, a_hat, xs, ys)))


def ace(a_gt, a_hat, width, height):
    """Average Euclidean error over the four corner pixels."""
    xs = np.array([0.0, width - 1.0, 0.0, width - 1.0])
    ys = np.array([0.0, 0.0, height - 1.0, height - 1.0])
    return float(np.mean(_displacements(a_gt, a_hat, xs, ys)))
