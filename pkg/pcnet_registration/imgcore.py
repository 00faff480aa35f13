# -*- coding: utf-8 -*-
"""Gray rasters, affine transforms, bilinear warping, gradients and Gaussian pyramids.

Coordinates: origin at the top-left pixel centre (0, 0), x grows to the right
(columns), y grows downward (rows). Arrays are indexed ``data[y, x]``.
"""

import math
import os

import numpy as np
from PIL import Image
from scipy import ndimage

from logzero import logger

from pcnet_registration.exceptions import ImageFormatError, ShapeMismatchError, SingularTransformError

LUMA_WEIGHTS = (0.299, 0.587, 0.114)
PYRAMID_FACTOR = 2
PYRAMID_TAPS = 5
PYRAMID_SIGMA = 1.0
MIN_PYRAMID_SIDE = 16
SUPPORTED_EXTENSIONS = ('.png', '.pgm')


class GrayImage(object):
    """Immutable 2-D raster of finite intensities, nominally in [0, 1]."""

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64)
        if arr.ndim != 2:
            raise ValueError('GrayImage expects a 2-D array, got shape {0}'.format(arr.shape))
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError('GrayImage needs at least one pixel, got shape {0}'.format(arr.shape))
        if not np.all(np.isfinite(arr)):
            raise ValueError('GrayImage values must be finite')
        arr.setflags(write=False)
        self._data = arr

    @property
    def data(self):
        return self._data

    @property
    def width(self):
        return self._data.shape[1]

    @property
    def height(self):
        return self._data.shape[0]

    @property
    def shape(self):
        return self._data.shape

    def __repr__(self):
        return 'GrayImage({0}x{1})'.format(self.width, self.height)


class AffineParams(object):
    """x' = a1*x + a2*y + a3, y' = a4*x + a5*y + a6 (a3, a6 in pixels)."""

    def __init__(self, a1, a2, a3, a4, a5, a6):
        values = tuple(float(v) for v in (a1, a2, a3, a4, a5, a6))
        if not all(math.isfinite(v) for v in values):
            raise ValueError('Affine parameters must be finite: {0}'.format(values))
        self._values = values

    @classmethod
    def identity(cls):
        return cls(1.0, 0.0, 0.0, 0.0, 1.0, 0.0)

    @classmethod
    def translation(cls, tx, ty):
        return cls(1.0, 0.0, tx, 0.0, 1.0, ty)

    @classmethod
    def from_sequence(cls, values):
        values = list(values)
        if len(values) != 6:
            raise ValueError('An affine transform has 6 parameters, {0} provided'.format(len(values)))
        return cls(*values)

    @classmethod
    def from_matrix(cls, m):
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[0, 2], m[1, 0], m[1, 1], m[1, 2])

    @property
    def values(self):
        return self._values

    def as_array(self):
        return np.array(self._values, dtype=np.float64)

    def __iter__(self):
        return iter(self._values)

    def __getitem__(self, index):
        return self._values[index]

    def __len__(self):
        return 6

    def __eq__(self, other):
        if not isinstance(other, AffineParams):
            return NotImplemented
        return self._values == other._values

    def __hash__(self):
        return hash(self._values)

    def __repr__(self):
        return 'AffineParams({0})'.format(', '.join('{0:.6g}'.format(v) for v in self._values))

    def matrix(self):
        a1, a2, a3, a4, a5, a6 = self._values
        return np.array([[a1, a2, a3], [a4, a5, a6], [0.0, 0.0, 1.0]])

    @property
    def determinant(self):
        a1, a2, _, a4, a5, _ = self._values
        return a1 * a5 - a2 * a4

    def is_invertible(self):
        return self.determinant != 0.0

    def inverse(self):
        if not self.is_invertible():
            raise SingularTransformError('Affine transform {0} is singular'.format(self))
        a1, a2, a3, a4, a5, a6 = self._values
        det = self.determinant
        i1, i2 = a5 / det, -a2 / det
        i4, i5 = -a4 / det, a1 / det
        i3 = -(i1 * a3 + i2 * a6)
        i6 = -(i4 * a3 + i5 * a6)
        return AffineParams(i1, i2, i3, i4, i5, i6)

    def compose(self, other):
        """Transform applying ``other`` first, then ``self``."""
        return AffineParams.from_matrix(self.matrix() @ other.matrix())

    def apply(self, x, y):
        a1, a2, a3, a4, a5, a6 = self._values
        x = np.asarray(x, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        return a1 * x + a2 * y + a3, a4 * x + a5 * y + a6

    def scaled(self, ratio):
        """Same motion expressed on a grid ``ratio`` times finer (translations scale)."""
        a1, a2, a3, a4, a5, a6 = self._values
        return AffineParams(a1, a2, a3 * ratio, a4, a5, a6 * ratio)

    def to_json_dict(self):
        return {'affine': list(self._values)}

    @staticmethod
    def from_json_dict(json_data):
        try:
            values = json_data['affine']
        except (KeyError, TypeError):
            raise ValueError('Transform document has no "affine" entry: {0}'.format(json_data))
        return AffineParams.from_sequence(values)


class Pyramid(object):
    """Level 0 is full resolution; each further level is ``factor`` times smaller."""

    def __init__(self, levels, factor=PYRAMID_FACTOR):
        if not levels:
            raise ValueError('A pyramid needs at least one level')
        self._levels = list(levels)
        self._factor = factor

    @property
    def levels(self):
        return list(self._levels)

    @property
    def factor(self):
        return self._factor

    def __len__(self):
        return len(self._levels)

    def __getitem__(self, index):
        return self._levels[index]

    def __iter__(self):
        return iter(self._levels)


def as_array(img):
    if isinstance(img, GrayImage):
        return img.data
    return np.asarray(img, dtype=np.float64)


def load_image(path):
    """Reads a PNG or PGM (8- or 16-bit) file into a GrayImage scaled to [0, 1]."""
    try:
        with Image.open(path) as im:
            im.load()
            mode = im.mode
            if mode in ('P', 'PA'):
                im = im.convert('RGB')
                mode = 'RGB'
            arr = np.asarray(im)
    except (OSError, ValueError) as e:
        raise ImageFormatError('Cannot read image {0}: {1}'.format(path, e))

    logger.debug('{0}: mode {1}, shape {2}'.format(path, mode, arr.shape))
    if mode == 'L':
        data = arr.astype(np.float64) / 255.0
    elif mode == 'LA':
        data = arr[..., 0].astype(np.float64) / 255.0
    elif mode in ('RGB', 'RGBA'):
        rgb = arr[..., :3].astype(np.float64) / 255.0
        data = (LUMA_WEIGHTS[0] * rgb[..., 0] + LUMA_WEIGHTS[1] * rgb[..., 1]
                + LUMA_WEIGHTS[2] * rgb[..., 2])
    elif mode.startswith('I;16') or mode == 'I':
        raw = arr.astype(np.float64)
        if raw.min() < 0 or raw.max() > 65535:
            raise ImageFormatError('Unsupported bit depth in {0}: values outside 16-bit range'.format(path))
        data = raw / 65535.0
    else:
        raise ImageFormatError('Unsupported image mode {0} in {1}: expected 8- or 16-bit gray or RGB'
                               .format(mode, path))
    return GrayImage(data)


def _check_extension(path):
    ext = os.path.splitext(str(path))[1].lower()
    if ext not in SUPPORTED_EXTENSIONS:
        raise ImageFormatError('Unsupported output format {0}: expected one of {1}'
                               .format(ext, ', '.join(SUPPORTED_EXTENSIONS)))
    return ext


def quantize(data, bit_depth=8):
    """round(v * max) after clamping to [0, 1]."""
    if bit_depth == 8:
        return np.round(np.clip(data, 0.0, 1.0) * 255.0).astype(np.uint8)
    if bit_depth == 16:
        return np.round(np.clip(data, 0.0, 1.0) * 65535.0).astype(np.uint16)
    raise ValueError('bit_depth must be 8 or 16, {0} provided'.format(bit_depth))


def save_image(img, path, bit_depth=8):
    _check_extension(path)
    Image.fromarray(quantize(as_array(img), bit_depth)).save(str(path))
    logger.debug('wrote {0} ({1}-bit)'.format(path, bit_depth))


def save_rgb(red, green, blue, path):
    """8-bit false-colour PNG from three [0, 1] maps of equal shape."""
    channels = [as_array(c) for c in (red, green, blue)]
    if len({c.shape for c in channels}) != 1:
        raise ShapeMismatchError('Colour channels differ in shape: {0}'.format([c.shape for c in channels]))
    if _check_extension(path) != '.png':
        raise ImageFormatError('Colour output must be PNG: {0}'.format(path))
    Image.fromarray(np.dstack([quantize(c) for c in channels])).save(str(path))


def _pixel_grid(shape):
    ys, xs = np.mgrid[0:shape[0], 0:shape[1]]
    return xs.astype(np.float64), ys.astype(np.float64)


def bilinear_sample(data, xs, ys, derivatives=False):
    """Samples ``data`` at (xs, ys).

    Returns (values, mask) or (values, mask, d/dx, d/dy). A sample is valid when
    it lies inside [0, w-1] x [0, h-1]; invalid samples read 0. The derivatives
    are those of the bilinear interpolant itself.
    """
    h, w = data.shape
    valid = (xs >= 0) & (xs <= w - 1) & (ys >= 0) & (ys <= h - 1)
    xc = np.where(valid, xs, 0.0)
    yc = np.where(valid, ys, 0.0)
    x0 = np.clip(np.floor(xc).astype(np.intp), 0, max(w - 2, 0))
    y0 = np.clip(np.floor(yc).astype(np.intp), 0, max(h - 2, 0))
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = xc - x0
    fy = yc - y0

    v00 = data[y0, x0]
    v01 = data[y0, x1]
    v10 = data[y1, x0]
    v11 = data[y1, x1]
    top = v00 * (1.0 - fx) + v01 * fx
    bottom = v10 * (1.0 - fx) + v11 * fx
    values = np.where(valid, top * (1.0 - fy) + bottom * fy, 0.0)
    if not derivatives:
        return values, valid
    dx = np.where(valid, (1.0 - fy) * (v01 - v00) + fy * (v11 - v10), 0.0)
    dy = np.where(valid, (1.0 - fx) * (v10 - v00) + fx * (v11 - v01), 0.0)
    return values, valid, dx, dy


def resample_array(data, a, derivatives=False):
    """out(p) = data(a(p)) on the grid of ``data``."""
    if not a.is_invertible():
        raise SingularTransformError('Cannot resample with singular transform {0}'.format(a))
    xs, ys = _pixel_grid(data.shape)
    sx, sy = a.apply(xs, ys)
    return bilinear_sample(data, sx, sy, derivatives=derivatives)


def resample_affine(img, a):
    """Pull-back: output pixel p reads the input at a(p)."""
    values, mask = resample_array(as_array(img), a)
    mask.setflags(write=False)
    return GrayImage(values), mask


def warp_affine(img, a):
    """Push-forward: input content at p lands on a(p) in the output.

    Each output pixel is sampled bilinearly at the inverse-mapped source
    location; the mask marks samples lying inside the source image.
    """
    if not a.is_invertible():
        raise SingularTransformError('Cannot warp with singular transform {0}'.format(a))
    return resample_affine(img, a.inverse())


def gradients(img):
    """Central differences inside, one-sided differences on the border."""
    data = as_array(img)
    if data.ndim != 2 or data.shape[0] < 2 or data.shape[1] < 2:
        raise ValueError('gradients needs at least 2x2 pixels, got shape {0}'.format(data.shape))
    return np.gradient(data, axis=1), np.gradient(data, axis=0)


def gaussian_taps(taps, sigma):
    if taps < 1 or taps % 2 == 0:
        raise ValueError('Gaussian window needs an odd tap count, {0} provided'.format(taps))
    if sigma <= 0:
        raise ValueError('Gaussian sigma must be positive, {0} provided'.format(sigma))
    x = np.arange(taps, dtype=np.float64) - taps // 2
    w = np.exp(-0.5 * (x / sigma) ** 2)
    return w / w.sum()


def pyramid_reduce(data):
    """Blur with the 5-tap Gaussian then keep every second row and column."""
    taps = gaussian_taps(PYRAMID_TAPS, PYRAMID_SIGMA)
    blurred = ndimage.correlate1d(data, taps, axis=0, mode='reflect')
    blurred = ndimage.correlate1d(blurred, taps, axis=1, mode='reflect')
    return blurred[::PYRAMID_FACTOR, ::PYRAMID_FACTOR]


def pyramid_shapes(shape, levels):
    shapes = [tuple(shape)]
    for _ in range(levels - 1):
        h, w = shapes[-1]
        shapes.append((int(math.ceil(h / PYRAMID_FACTOR)), int(math.ceil(w / PYRAMID_FACTOR))))
    return shapes


def build_pyramid(img, levels):
    if levels < 1:
        raise ValueError('A pyramid needs at least one level, {0} requested'.format(levels))
    data = as_array(img)
    if levels > 1:
        coarsest = pyramid_shapes(data.shape, levels)[-1]
        if min(coarsest) < MIN_PYRAMID_SIDE:
            raise ValueError('{0} levels are too deep for a {1}x{2} image: coarsest level would be {3}x{4}'
                             .format(levels, data.shape[1], data.shape[0], coarsest[1], coarsest[0]))
    result = [img if isinstance(img, GrayImage) else GrayImage(data)]
    for _ in range(levels - 1):
        result.append(GrayImage(pyramid_reduce(result[-1].data)))
    return Pyramid(result)
