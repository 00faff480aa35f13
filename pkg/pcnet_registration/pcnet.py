# -*- coding: utf-8 -*-
"""Phase congruency network: quadrature responses to per-orientation feature maps.

For each orientation o:

    P_o = ReLU(sum_s A_so * dPhi'_so - T_o) / (sum_s A_so + guard_o)

with dPhi' = cos(Phi_s - mean Phi) - beta * |sin(Phi_s - mean Phi)| and T_o the
Rayleigh noise threshold controlled by alpha. ``guard_o`` is xi times the
orientation's mean amplitude sum, which keeps P invariant to contrast scaling.
"""

import dataclasses
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from logzero import logger

from pcnet_registration.exceptions import ShapeMismatchError
from pcnet_registration.gaborbank import BankConfig, make_bank, convolve_bank, convolve_bank_direct, check_size
from pcnet_registration.imgcore import as_array
from pcnet_registration.interfaces import FeatureEnhancerInterface, TrainableInterface

PC0 = 'PC0'
PC1 = 'PC1'
RAYLEIGH_MEDIAN_TO_SCALE = math.sqrt(math.log(4.0))
RAYLEIGH_MEAN_FACTOR = math.sqrt(math.pi / 2.0)
RAYLEIGH_SPREAD_FACTOR = math.sqrt((4.0 - math.pi) / 2.0)


@dataclass(frozen=True)
class PCParams:
    alpha: float = 2.0
    beta: float = 1.0
    xi: float = 1e-4
    fixed_tau: Optional[float] = None

    def __post_init__(self):
        if not self.alpha > 1:
            raise ValueError('alpha must be > 1, {0} provided'.format(self.alpha))
        if not self.beta >= 0:
            raise ValueError('beta must be >= 0, {0} provided'.format(self.beta))
        if not self.xi > 0:
            raise ValueError('xi must be > 0, {0} provided'.format(self.xi))
        if self.fixed_tau is not None and not self.fixed_tau >= 0:
            raise ValueError('fixed_tau must be >= 0, {0} provided'.format(self.fixed_tau))


@dataclass(frozen=True)
class NoiseEstimate:
    """Per-orientation scalars; the threshold T is constant over the image."""
    tau: float
    v_g: float
    m_r: float
    v_r: float
    threshold: float


class FeatureStack(object):
    """N_o feature maps of identical size."""

    def __init__(self, channels):
        arr = np.array(channels, dtype=np.float64)
        if arr.ndim == 2:
            arr = arr[None]
        if arr.ndim != 3 or arr.shape[0] < 1:
            raise ValueError('FeatureStack expects (channels, height, width), got {0}'.format(arr.shape))
        if not np.all(np.isfinite(arr)):
            raise ValueError('FeatureStack values must be finite')
        arr.setflags(write=False)
        self._channels = arr

    @property
    def channels(self):
        return self._channels

    @property
    def n_channels(self):
        return self._channels.shape[0]

    @property
    def shape(self):
        return self._channels.shape[1:]

    def __len__(self):
        return self.n_channels

    def __getitem__(self, index):
        return self._channels[index]

    def __iter__(self):
        return iter(self._channels)

    def composite(self):
        """Channel-wise maximum, for display."""
        return self._channels.max(axis=0)

    def __repr__(self):
        return 'FeatureStack({0} x {1}x{2})'.format(self.n_channels, self.shape[1], self.shape[0])


def _wrap_phase(phi):
    # atan2 returns -pi for (-0.0, negative); keep phases in (-pi, pi]
    return np.where(phi == -np.pi, np.pi, phi)


def amplitude_phase(e, o):
    e = np.asarray(e, dtype=np.float64)
    o = np.asarray(o, dtype=np.float64)
    if e.shape != o.shape:
        raise ShapeMismatchError('Even and odd maps differ: {0} vs {1}'.format(e.shape, o.shape))
    return np.hypot(e, o), _wrap_phase(np.arctan2(o, e))


def local_energy(even_scales, odd_scales):
    """Responses stacked along axis 0 (scales). Returns (E, mean phase)."""
    sum_e = np.sum(even_scales, axis=0)
    sum_o = np.sum(odd_scales, axis=0)
    return np.hypot(sum_e, sum_o), _wrap_phase(np.arctan2(sum_o, sum_e))


def phase_deviation(phi_s, mean_phi, beta):
    delta = np.asarray(phi_s) - np.asarray(mean_phi)
    return np.cos(delta) - beta * np.abs(np.sin(delta))


def weighted_deviation(e_s, o_s, sum_e, sum_o, beta):
    """A_s * dPhi'_s without trigonometry.

    cos = (e_s sum_e + o_s sum_o) / (A_s E), |sin| = |e_s sum_o - o_s sum_e| / (A_s E).
    Where E is 0 the mean phase is 0, giving e_s - beta |o_s|.
    """
    energy = np.hypot(sum_e, sum_o)
    dot = e_s * sum_e + o_s * sum_o
    cross = np.abs(e_s * sum_o - o_s * sum_e)
    safe = np.where(energy > 0, energy, 1.0)
    return np.where(energy > 0, (dot - beta * cross) / safe, e_s - beta * np.abs(o_s))


def rayleigh_threshold(tau, alpha, n_scales, xi):
    if not alpha > 1:
        raise ValueError('alpha must be > 1 for the geometric noise sum, {0} provided'.format(alpha))
    v_g = tau * (1.0 - (1.0 / alpha) ** n_scales) / (1.0 - 1.0 / alpha + xi)
    m_r = RAYLEIGH_MEAN_FACTOR * v_g
    v_r = RAYLEIGH_SPREAD_FACTOR * v_g
    return NoiseEstimate(tau=tau, v_g=v_g, m_r=m_r, v_r=v_r, threshold=m_r + v_r)


def estimate_tau(smallest_scale_amplitude):
    return float(np.median(smallest_scale_amplitude)) / RAYLEIGH_MEDIAN_TO_SCALE


def noise_threshold(amplitudes, params):
    """``amplitudes`` holds one orientation's A maps, smallest scale first."""
    amplitudes = np.asarray(amplitudes)
    tau = params.fixed_tau if params.fixed_tau is not None else estimate_tau(amplitudes[0])
    return rayleigh_threshold(tau, params.alpha, amplitudes.shape[0], params.xi)


def _ratio(numerator, denominator):
    out = np.zeros_like(numerator)
    np.divide(numerator, denominator, out=out, where=denominator > 0)
    return out


def features_from_responses(responses, params):
    channels = []
    for o in range(responses.n_orientations):
        e = responses.even[:, o]
        od = responses.odd[:, o]
        amplitude = np.hypot(e, od)
        sum_e, sum_o = e.sum(axis=0), od.sum(axis=0)
        weighted = weighted_deviation(e, od, sum_e, sum_o, params.beta).sum(axis=0)
        noise = noise_threshold(amplitude, params)
        total = amplitude.sum(axis=0)
        guard = params.xi * total.mean()
        p = _ratio(np.maximum(weighted - noise.threshold, 0.0), total + guard)
        channels.append(np.clip(p, 0.0, 1.0))
        logger.debug('orientation {0}: tau={1:.4g} T={2:.4g} max P={3:.3f}'
                     .format(o, noise.tau, noise.threshold, channels[-1].max()))
    return FeatureStack(np.stack(channels))


def forward(img, bank, params, workers=None):
    data = as_array(img)
    if data.size and data.max() == data.min():
        # only FFT rounding noise would survive the filters
        check_size(data, bank)
        return FeatureStack(np.zeros((bank.n_orientations,) + data.shape))
    return features_from_responses(convolve_bank(data, bank, workers=workers), params)


def reference_pc(img, bank, variant=PC1, xi=1e-4):
    """Pixel-by-pixel evaluation of the classical ratio, without noise thresholding.

    PC0 = E / (sum A + guard); PC1 = max(0, sum A (cos d - |sin d|)) / (sum A + guard).
    Responses come from spatial-domain convolution.
    """
    if variant not in (PC0, PC1):
        raise ValueError('variant must be {0} or {1}, {2} provided'.format(PC0, PC1, variant))
    responses = convolve_bank_direct(img, bank)
    n_s, n_o = responses.n_scales, responses.n_orientations
    h, w = responses.shape
    out = np.zeros((n_o, h, w))
    for o in range(n_o):
        totals = np.zeros((h, w))
        for y in range(h):
            for x in range(w):
                totals[y, x] = sum(math.hypot(responses.even[s, o, y, x], responses.odd[s, o, y, x])
                                   for s in range(n_s))
        guard = xi * sum(sum(row) for row in totals.tolist()) / (h * w)
        for y in range(h):
            for x in range(w):
                es = [responses.even[s, o, y, x] for s in range(n_s)]
                os_ = [responses.odd[s, o, y, x] for s in range(n_s)]
                denominator = totals[y, x] + guard
                if denominator <= 0:
                    continue
                sum_e, sum_o = sum(es), sum(os_)
                if variant == PC0:
                    numerator = math.hypot(sum_e, sum_o)
                else:
                    mean_phi = math.atan2(sum_o, sum_e)
                    numerator = 0.0
                    for e_s, o_s in zip(es, os_):
                        d = math.atan2(o_s, e_s) - mean_phi
                        numerator += math.hypot(e_s, o_s) * (math.cos(d) - abs(math.sin(d)))
                    numerator = max(numerator, 0.0)
                out[o, y, x] = numerator / denominator
    return out


class PCNet(FeatureEnhancerInterface, TrainableInterface):
    """A Gabor bank plus the trainable scalars; the unit shared by both siamese branches."""

    def __init__(self, bank=None, params=None, workers=None):
        self._bank = bank or make_bank()
        self._params = params or PCParams()
        self._workers = workers

    @property
    def bank(self):
        return self._bank

    @property
    def params(self):
        return self._params

    @property
    def n_orientations(self):
        return self._bank.n_orientations

    def enhance(self, img):
        return forward(img, self._bank, self._params, workers=self._workers)

    def trainable_values(self):
        return self._params.alpha, self._params.beta, self._bank.modulation_vector()

    def with_trainable_values(self, alpha, beta, modulation):
        params = PCParams(alpha=float(alpha), beta=float(beta), xi=self._params.xi,
                          fixed_tau=self._params.fixed_tau)
        return PCNet(self._bank.with_modulation_vector(modulation), params, workers=self._workers)

    def __repr__(self):
        return 'PCNet(alpha={0:.4g}, beta={1:.4g}, {2} scales x {3} orientations)'.format(
            self._params.alpha, self._params.beta, self._bank.n_scales, self._bank.n_orientations)


class ClassicalPC(FeatureEnhancerInterface):
    """Phase congruency from the unmodified Gabor bank with fixed alpha and beta; nothing is learned."""

    def __init__(self, bank_config=None, params=None, workers=None):
        self._bank = make_bank(dataclasses.replace(bank_config or BankConfig(), modified=False))
        self._params = params or PCParams()
        self._workers = workers

    @property
    def bank(self):
        return self._bank

    @property
    def params(self):
        return self._params

    @property
    def n_orientations(self):
        return self._bank.n_orientations

    def enhance(self, img):
        return forward(img, self._bank, self._params, workers=self._workers)

    def __repr__(self):
        return 'ClassicalPC(alpha={0:.4g}, beta={1:.4g}, {2} scales x {3} orientations)'.format(
            self._params.alpha, self._params.beta, self._bank.n_scales, self._bank.n_orientations)
