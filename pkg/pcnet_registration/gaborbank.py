# -*- coding: utf-8 -*-
"""Modified learnable Gabor kernels.

Fixed quadrature Gabor wavelets, each with its own mean removed, modulated
elementwise by learnable kernels W of the same size. The effective kernels are
re-centered to zero mean every time W changes so that no choice of W brings
back a response to the DC component.
"""

import math
from dataclasses import dataclass, asdict

import numpy as np
import scipy.fft
from scipy import ndimage

from logzero import logger

from pcnet_registration.exceptions import ShapeMismatchError
from pcnet_registration.imgcore import as_array


@dataclass(frozen=True)
class BankConfig:
    """Scales are listed from the smallest wavelength to the largest.

    Defaults: wavelengths 3, 6, 12, 24 px and an envelope standard deviation of
    half a wavelength (sigma = pi in the wavelet formula). With ``modified``
    off the wavelets keep their sampled DC response and no kernel is
    re-centered, which gives the classical Gabor bank.
    """
    n_orientations: int = 6
    kernel_sizes: tuple = (7, 13, 19, 25)
    min_wavelength: float = 3.0
    scale_factor: float = 2.0
    sigma: float = math.pi
    modified: bool = True

    def __post_init__(self):
        object.__setattr__(self, 'kernel_sizes', tuple(int(k) for k in self.kernel_sizes))
        if not self.kernel_sizes:
            raise ValueError('BankConfig needs at least one scale')
        for k in self.kernel_sizes:
            if k < 1 or k % 2 == 0:
                raise ValueError('Kernel sizes must be odd and positive, {0} provided'.format(k))
        if any(b <= a for a, b in zip(self.kernel_sizes, self.kernel_sizes[1:])):
            raise ValueError('Kernel sizes must be strictly increasing: {0}'.format(self.kernel_sizes))
        if self.n_orientations < 1:
            raise ValueError('n_orientations must be >= 1, {0} provided'.format(self.n_orientations))
        if not self.sigma > 0:
            raise ValueError('sigma must be positive, {0} provided'.format(self.sigma))
        if not self.min_wavelength > 0 or not self.scale_factor > 0:
            raise ValueError('min_wavelength and scale_factor must be positive')

    @property
    def n_scales(self):
        return len(self.kernel_sizes)

    @property
    def wavelengths(self):
        return tuple(self.min_wavelength * self.scale_factor ** s for s in range(self.n_scales))

    @property
    def wavevector_magnitudes(self):
        return tuple(2.0 * math.pi / lam for lam in self.wavelengths)

    @property
    def orientations(self):
        return tuple(o * math.pi / self.n_orientations for o in range(self.n_orientations))

    @property
    def max_kernel_size(self):
        return self.kernel_sizes[-1]

    def to_dict(self):
        d = asdict(self)
        d['kernel_sizes'] = list(self.kernel_sizes)
        return d

    @staticmethod
    def from_dict(data):
        return BankConfig(**data)


def gabor_wavelet(size, k, theta, sigma):
    """Complex Gabor wavelet sampled on the integer grid centred on the kernel midpoint.

    (|k|^2 / sigma^2) exp(-|k|^2 |z|^2 / (2 sigma^2)) (exp(i k.z) - exp(-sigma^2 / 2))
    """
    r = size // 2
    ys, xs = np.mgrid[-r:r + 1, -r:r + 1].astype(np.float64)
    kx, ky = k * math.cos(theta), k * math.sin(theta)
    envelope = (k ** 2 / sigma ** 2) * np.exp(-(k ** 2) * (xs ** 2 + ys ** 2) / (2.0 * sigma ** 2))
    phase = kx * xs + ky * ys
    return envelope * (np.cos(phase) - math.exp(-sigma ** 2 / 2.0)) + 1j * envelope * np.sin(phase)


def _recenter(kernels, enabled=True):
    if not enabled:
        return np.array(kernels, dtype=np.float64)
    return kernels - kernels.mean(axis=(-2, -1), keepdims=True)


def _frozen(arr):
    arr = np.array(arr, dtype=np.float64)
    arr.setflags(write=False)
    return arr


class FilterBank(object):
    """Per scale s: arrays of shape (n_orientations, k_s, k_s).

    ``even``/``odd`` are the effective kernels (wavelet times W, re-centered
    unless the bank is classical);
    ``base_even``/``base_odd`` the modified fixed wavelets.
    """

    def __init__(self, config, base_even, base_odd, modulation):
        self._config = config
        self._base_even = [_frozen(b) for b in base_even]
        self._base_odd = [_frozen(b) for b in base_odd]
        self._modulation = [_frozen(w) for w in modulation]
        for s, (be, w) in enumerate(zip(self._base_even, self._modulation)):
            if be.shape != w.shape:
                raise ShapeMismatchError('Modulation for scale {0} has shape {1}, expected {2}'
                                         .format(s, w.shape, be.shape))
        self._even = [_frozen(_recenter(be * w, config.modified))
                      for be, w in zip(self._base_even, self._modulation)]
        self._odd = [_frozen(_recenter(bo * w, config.modified))
                     for bo, w in zip(self._base_odd, self._modulation)]

    @property
    def config(self):
        return self._config

    @property
    def n_scales(self):
        return self._config.n_scales

    @property
    def n_orientations(self):
        return self._config.n_orientations

    @property
    def even(self):
        return list(self._even)

    @property
    def odd(self):
        return list(self._odd)

    @property
    def base_even(self):
        return list(self._base_even)

    @property
    def base_odd(self):
        return list(self._base_odd)

    @property
    def modulation(self):
        return list(self._modulation)

    @property
    def modulation_size(self):
        return sum(w.size for w in self._modulation)

    def modulation_vector(self):
        return np.concatenate([w.ravel() for w in self._modulation])

    def with_modulation(self, modulation):
        return set_modulation(self, modulation)

    def with_modulation_vector(self, vector):
        vector = np.asarray(vector, dtype=np.float64)
        if vector.size != self.modulation_size:
            raise ShapeMismatchError('Modulation vector has {0} entries, expected {1}'
                                     .format(vector.size, self.modulation_size))
        parts, start = [], 0
        for w in self._modulation:
            parts.append(vector[start:start + w.size].reshape(w.shape))
            start += w.size
        return set_modulation(self, parts)


def make_bank(cfg=None):
    cfg = cfg or BankConfig()
    base_even, base_odd, modulation = [], [], []
    for size, k in zip(cfg.kernel_sizes, cfg.wavevector_magnitudes):
        wavelets = np.stack([gabor_wavelet(size, k, theta, cfg.sigma) for theta in cfg.orientations])
        base_even.append(_recenter(wavelets.real, cfg.modified))
        base_odd.append(_recenter(wavelets.imag, cfg.modified))
        modulation.append(np.ones(wavelets.shape))
    logger.debug('{3} Gabor bank: wavelengths {0}, sizes {1}, {2} orientations'
                 .format(cfg.wavelengths, cfg.kernel_sizes, cfg.n_orientations,
                         'modified' if cfg.modified else 'classical'))
    return FilterBank(cfg, base_even, base_odd, modulation)


def set_modulation(bank, modulation):
    """Returns a new bank whose effective kernels are wavelet * W, re-centered."""
    modulation = [np.asarray(w, dtype=np.float64) for w in modulation]
    if len(modulation) != bank.n_scales:
        raise ShapeMismatchError('Expected modulation for {0} scales, got {1}'
                                 .format(bank.n_scales, len(modulation)))
    return FilterBank(bank.config, bank.base_even, bank.base_odd, modulation)


class QuadratureResponses(object):
    """``even`` and ``odd`` of shape (n_scales, n_orientations, height, width)."""

    def __init__(self, even, odd):
        if even.shape != odd.shape:
            raise ShapeMismatchError('Even and odd responses differ: {0} vs {1}'.format(even.shape, odd.shape))
        self.even = even
        self.odd = odd

    @property
    def n_scales(self):
        return self.even.shape[0]

    @property
    def n_orientations(self):
        return self.even.shape[1]

    @property
    def shape(self):
        return self.even.shape[2:]

    def amplitude(self):
        return np.hypot(self.even, self.odd)


def check_size(data, bank):
    k = bank.config.max_kernel_size
    if data.shape[0] < k or data.shape[1] < k:
        raise ValueError('Image of {0}x{1} is smaller than the largest kernel ({2}x{2})'
                         .format(data.shape[1], data.shape[0], k))


def convolve_bank(img, bank, workers=None):
    """Convolution (stride 1, symmetric padding) through one FFT of the padded image."""
    data = as_array(img)
    check_size(data, bank)
    h, w = data.shape
    pad = bank.config.max_kernel_size // 2
    padded = np.pad(data, pad, mode='symmetric')
    spectrum = scipy.fft.fft2(padded, workers=workers)

    n_s, n_o = bank.n_scales, bank.n_orientations
    even = np.empty((n_s, n_o, h, w))
    odd = np.empty((n_s, n_o, h, w))
    for s in range(n_s):
        kernels = bank.even[s] + 1j * bank.odd[s]
        r = kernels.shape[-1] // 2
        kf = scipy.fft.fft2(kernels, s=padded.shape, axes=(-2, -1), workers=workers)
        out = scipy.fft.ifft2(spectrum[None, :, :] * kf, axes=(-2, -1), workers=workers)
        out = out[:, pad + r:pad + r + h, pad + r:pad + r + w]
        even[s] = out.real
        odd[s] = out.imag
    return QuadratureResponses(even, odd)


def convolve_bank_direct(img, bank):
    """Spatial-domain reference for convolve_bank."""
    data = as_array(img)
    check_size(data, bank)
    h, w = data.shape
    even = np.empty((bank.n_scales, bank.n_orientations, h, w))
    odd = np.empty_like(even)
    for s in range(bank.n_scales):
        for o in range(bank.n_orientations):
            even[s, o] = ndimage.convolve(data, bank.even[s][o], mode='reflect')
            odd[s, o] = ndimage.convolve(data, bank.odd[s][o], mode='reflect')
    return QuadratureResponses(even, odd)
