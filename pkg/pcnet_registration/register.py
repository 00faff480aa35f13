# -*- coding: utf-8 -*-
"""Hierarchical affine registration of feature stacks.

The objective at a pyramid level is the mean squared difference between the
reference features F_ref(p) and the floating features sampled at a(p), over the
pixels whose sample lands inside the floating image. For
``I_flt = warp_affine(I_ref, a_gt)`` the minimizer is ``a_gt``.

A ``margin`` restricts both p and a(p) to the image interior, away from the
band where filter responses depend on the border padding.
"""

import math
from dataclasses import dataclass, field, asdict
from typing import List, Optional

import numpy as np
import scipy.fft

from logzero import logger

from pcnet_registration.exceptions import DivergenceError, ShapeMismatchError, SingularTransformError
from pcnet_registration.imgcore import AffineParams, PYRAMID_FACTOR, as_array, bilinear_sample, build_pyramid, \
    resample_array
from pcnet_registration.interfaces import FeatureEnhancerInterface
from pcnet_registration.pcnet import ClassicalPC, FeatureStack, PCNet

GAUSS_NEWTON = 'gauss-newton'
DIAGONAL = 'diagonal'
PRECONDITIONERS = (GAUSS_NEWTON, DIAGONAL)
MIN_LEVEL_SIDE = 64
LOWEST_LEVEL_SIDE = 32


@dataclass(frozen=True)
class RegConfig:
    """``levels=None`` picks the depth from the image size, down to ``min_level_side``.

    ``eta`` is the first trial step of the line search. ``margin=None`` uses
    the radius of the largest filter kernel for PCNet features and 0 for
    intensities. With ``search`` on, the coarsest level starts from the best
    rotation-scale-shift found on a grid (see :func:`coarse_search`).
    """
    levels: Optional[int] = None
    eta: float = 1.0
    max_iters: int = 300
    tol: float = 1e-7
    preconditioner: str = GAUSS_NEWTON
    damping: float = 1e-3
    armijo: float = 1e-4
    max_backtracks: int = 20
    min_level_side: int = MIN_LEVEL_SIDE
    margin: Optional[int] = None
    search: bool = True
    search_max_scale: float = 1.3
    search_scale_step: float = 0.05
    search_max_angle: float = 15.0
    search_angle_step: float = 2.5
    min_overlap: float = 0.5

    def __post_init__(self):
        if self.levels is not None and (isinstance(self.levels, bool) or int(self.levels) != self.levels
                                        or self.levels < 1):
            raise ValueError('levels must be a positive integer, {0} provided'.format(self.levels))
        if self.max_iters < 1:
            raise ValueError('max_iters must be >= 1, {0} provided'.format(self.max_iters))
        if not self.eta > 0:
            raise ValueError('eta must be > 0, {0} provided'.format(self.eta))
        if not self.tol >= 0:
            raise ValueError('tol must be >= 0, {0} provided'.format(self.tol))
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError('preconditioner must be one of {0}, {1} provided'
                             .format(', '.join(PRECONDITIONERS), self.preconditioner))
        if not self.damping >= 0:
            raise ValueError('damping must be >= 0, {0} provided'.format(self.damping))
        if not 0 < self.armijo < 1:
            raise ValueError('armijo must lie in (0, 1), {0} provided'.format(self.armijo))
        if self.max_backtracks < 1:
            raise ValueError('max_backtracks must be >= 1, {0} provided'.format(self.max_backtracks))
        if self.min_level_side < LOWEST_LEVEL_SIDE:
            raise ValueError('min_level_side must be >= {0}, {1} provided'
                             .format(LOWEST_LEVEL_SIDE, self.min_level_side))
        if self.margin is not None and self.margin < 0:
            raise ValueError('margin must be >= 0, {0} provided'.format(self.margin))
        if not self.search_max_scale >= 1:
            raise ValueError('search_max_scale must be >= 1, {0} provided'.format(self.search_max_scale))
        if not (self.search_scale_step > 0 and self.search_angle_step > 0):
            raise ValueError('search steps must be > 0')
        if not self.search_max_angle >= 0:
            raise ValueError('search_max_angle must be >= 0, {0} provided'.format(self.search_max_angle))
        if not 0 < self.min_overlap <= 1:
            raise ValueError('min_overlap must lie in (0, 1], {0} provided'.format(self.min_overlap))

    def to_dict(self):
        return asdict(self)


@dataclass
class LevelSummary:
    level: int
    shape: tuple
    iterations: int
    initial_objective: float
    final_objective: float
    converged: bool
    objective_trace: List[float] = field(default_factory=list)


@dataclass
class RegResult:
    """``objective_trace`` is the finest level's; every level keeps its own in ``level_summaries``."""
    a_hat: AffineParams
    objective_trace: List[float]
    converged: bool
    level_summaries: List[LevelSummary]


class IntensityEnhancer(FeatureEnhancerInterface):
    """Raw intensities as a one-channel stack: the plain SSD baseline."""

    def enhance(self, img):
        return FeatureStack(as_array(img)[None])

    def __repr__(self):
        return 'IntensityEnhancer()'


def _check_stacks(f_ref, f_flt):
    if f_ref.n_channels != f_flt.n_channels:
        raise ShapeMismatchError('Feature stacks have {0} and {1} channels'
                                 .format(f_ref.n_channels, f_flt.n_channels))
    if f_ref.shape != f_flt.shape:
        raise ShapeMismatchError('Feature maps differ in size: {0} vs {1}'.format(f_ref.shape, f_flt.shape))


def interior_mask(shape, margin):
    """Pixels at least ``margin`` away from every border."""
    h, w = shape
    mask = np.zeros(shape, dtype=bool)
    if h > 2 * margin and w > 2 * margin:
        mask[margin:h - margin, margin:w - margin] = True
    return mask


def overlap_mask(shape, a, margin):
    """Pixels p such that p and a(p) both lie ``margin`` or more inside the image."""
    h, w = shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    sx, sy = a.apply(xs, ys)
    lo = float(margin)
    return (interior_mask(shape, margin)
            & (sx >= lo) & (sx <= w - 1 - lo) & (sy >= lo) & (sy <= h - 1 - lo))


def _evaluate(f_ref, f_flt, a, derivatives, margin=0):
    _check_stacks(f_ref, f_flt)
    if not a.is_invertible():
        raise SingularTransformError('Transform {0} is singular'.format(a))
    samples = [resample_array(channel, a, derivatives=derivatives) for channel in f_flt]
    mask = samples[0][1]
    if margin > 0:
        mask = mask & overlap_mask(f_ref.shape, a, margin)
    count = int(mask.sum())
    if count == 0:
        raise DivergenceError('Transform {0} leaves no overlap between the images'.format(a))
    n = count * f_ref.n_channels
    residuals = [np.where(mask, s[0] - ref, 0.0) for s, ref in zip(samples, f_ref)]
    objective = sum(float(np.sum(r * r)) for r in residuals) / n
    if not math.isfinite(objective):
        raise DivergenceError('Non-finite objective for transform {0}'.format(a))
    if not derivatives:
        return objective, count, None, None

    h, w = f_ref.shape
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    xs, ys = xs[mask], ys[mask]
    gradient = np.zeros(6)
    hessian = np.zeros((6, 6))
    for (_, _, dx, dy), r in zip(samples, residuals):
        dx, dy, r = dx[mask], dy[mask], r[mask]
        jac = np.stack([dx * xs, dx * ys, dx, dy * xs, dy * ys, dy], axis=1)
        gradient += jac.T @ r
        hessian += jac.T @ jac
    return objective, count, 2.0 * gradient / n, 2.0 * hessian / n


def ssd_objective(f_ref, f_flt, a, margin=0):
    """Returns (mean squared difference, number of valid pixels)."""
    objective, count, _, _ = _evaluate(f_ref, f_flt, a, derivatives=False, margin=margin)
    return objective, count


def ssd_gradient(f_ref, f_flt, a, margin=0):
    """dJ/da with the valid region held fixed."""
    return _evaluate(f_ref, f_flt, a, derivatives=True, margin=margin)[2]


def linearize(f_ref, f_flt, a, margin=0):
    """Returns (objective, count, gradient, Gauss-Newton matrix)."""
    return _evaluate(f_ref, f_flt, a, derivatives=True, margin=margin)


def diagonal_scaling(shape):
    """Parameter scaling: translations are measured in image diagonals."""
    diagonal = math.hypot(shape[0], shape[1])
    return np.array([1.0, 1.0, 1.0 / diagonal, 1.0, 1.0, 1.0 / diagonal])


def descent_direction(gradient, hessian, shape, cfg):
    """Newton-type direction, or a gradient step in the scaled parameters.

    In the scaled parameters b = S a the gradient is S^-1 g, so the step back
    in a is -S^-2 g.
    """
    if cfg.preconditioner == GAUSS_NEWTON:
        system = hessian + cfg.damping * np.diag(np.diag(hessian))
        try:
            direction = -np.linalg.solve(system, gradient)
            if np.all(np.isfinite(direction)) and direction @ gradient < 0:
                return direction
        except np.linalg.LinAlgError:
            pass
        logger.debug('Gauss-Newton system unusable, falling back to diagonal scaling')
    return -gradient / diagonal_scaling(shape) ** 2


def auto_levels(shape, max_kernel_size=0, min_side=MIN_LEVEL_SIDE):
    """Deepest pyramid whose coarsest side stays >= ``min_side`` and above the largest kernel."""
    floor = max(min_side, max_kernel_size + 1)
    side = min(shape)
    levels = 1
    while math.ceil(side / float(PYRAMID_FACTOR ** levels)) >= floor:
        levels += 1
    return levels


def search_grid(cfg):
    """Rotation-scale matrices on a log-scale by angle grid; identity is always included."""
    n_scales = int(math.floor(math.log(cfg.search_max_scale) / cfg.search_scale_step + 1e-9))
    n_angles = int(math.floor(cfg.search_max_angle / cfg.search_angle_step + 1e-9))
    grid = []
    for scale in np.exp(cfg.search_scale_step * np.arange(-n_scales, n_scales + 1)):
        for angle in np.radians(cfg.search_angle_step * np.arange(-n_angles, n_angles + 1)):
            c, s = math.cos(angle), math.sin(angle)
            grid.append(np.array([[scale * c, -scale * s], [scale * s, scale * c]]))
    return grid


def _grid_box(linear, bounds):
    """Integer box of q whose image L q can reach the floating interior."""
    lo_x, hi_x, lo_y, hi_y = bounds
    corners = np.linalg.inv(linear) @ np.array([[lo_x, hi_x, lo_x, hi_x], [lo_y, lo_y, hi_y, hi_y]], dtype=float)
    x0, y0 = np.floor(corners.min(axis=1)).astype(int)
    x1, y1 = np.ceil(corners.max(axis=1)).astype(int)
    return int(x0), int(y0), int(x1), int(y1)


def _resample_grid(f_flt, linear, box, bounds):
    lo_x, hi_x, lo_y, hi_y = bounds
    x0, y0, x1, y1 = box
    qy, qx = np.mgrid[y0:y1 + 1, x0:x1 + 1].astype(np.float64)
    sx = linear[0, 0] * qx + linear[0, 1] * qy
    sy = linear[1, 0] * qx + linear[1, 1] * qy
    valid = (sx >= lo_x) & (sx <= hi_x) & (sy >= lo_y) & (sy <= hi_y)
    samples = np.stack([bilinear_sample(channel, sx, sy)[0] for channel in f_flt]) * valid
    return samples, valid.astype(np.float64)


def coarse_search(f_ref, f_flt, cfg=None, margin=0):
    """Best start for the descent over rotation, scale and every integer shift.

    For each matrix L of :func:`search_grid` the floating stack is resampled as
    G(q) = F_flt(L q). The masked mean squared difference against F_ref for a
    shift u, a(p) = L (p + u), is read off FFT cross-correlations for all u at
    once. Shifts overlapping less than ``min_overlap`` of the smaller support
    are ignored. Returns (transform, objective), or None when nothing qualifies.
    """
    cfg = cfg or RegConfig()
    _check_stacks(f_ref, f_flt)
    h, w = f_ref.shape
    ref_mask = interior_mask(f_ref.shape, margin)
    n_ref = int(ref_mask.sum())
    if n_ref == 0:
        return None
    bounds = (margin, w - 1 - margin, margin, h - 1 - margin)
    grid = [(linear, _grid_box(linear, bounds)) for linear in search_grid(cfg)]
    box_h = max(box[3] - box[1] + 1 for _, box in grid)
    box_w = max(box[2] - box[0] + 1 for _, box in grid)
    shape = (scipy.fft.next_fast_len(h + box_h - 1, real=True),
             scipy.fft.next_fast_len(w + box_w - 1, real=True))

    weights = ref_mask.astype(np.float64)
    masked = f_ref.channels * weights
    spec_mask = np.conj(scipy.fft.rfft2(weights, s=shape))
    spec_ref = np.conj(scipy.fft.rfft2(masked, s=shape, axes=(-2, -1)))
    spec_ref2 = np.conj(scipy.fft.rfft2((masked * masked).sum(axis=0), s=shape))

    best = None
    for linear, box in grid:
        samples, valid = _resample_grid(f_flt, linear, box, bounds)
        n_valid = int(valid.sum())
        if n_valid == 0:
            continue
        spec_valid = scipy.fft.rfft2(valid, s=shape)
        spec_flt = scipy.fft.rfft2(samples, s=shape, axes=(-2, -1))
        spec_flt2 = scipy.fft.rfft2((samples * samples).sum(axis=0), s=shape)
        total = scipy.fft.irfft2(spec_ref2 * spec_valid - 2.0 * (spec_ref * spec_flt).sum(axis=0)
                                 + spec_mask * spec_flt2, s=shape)
        count = np.rint(scipy.fft.irfft2(spec_mask * spec_valid, s=shape))
        needed = max(1.0, cfg.min_overlap * min(n_ref, n_valid))
        score = np.where(count >= needed, total / (np.maximum(count, 1.0) * f_ref.n_channels), np.inf)
        iy, ix = np.unravel_index(int(np.argmin(score)), shape)
        value = float(score[iy, ix])
        if not math.isfinite(value) or (best is not None and value >= best[1]):
            continue
        vy = iy if iy < box[3] - box[1] + 1 else iy - shape[0]
        vx = ix if ix < box[2] - box[0] + 1 else ix - shape[1]
        t = linear @ np.array([vx + box[0], vy + box[1]], dtype=float)
        best = (AffineParams(linear[0, 0], linear[0, 1], t[0], linear[1, 0], linear[1, 1], t[1]), max(value, 0.0))
    return best


def _search_start(f_ref, f_flt, a, cfg, margin):
    found = coarse_search(f_ref, f_flt, cfg, margin)
    if found is None:
        logger.warning('coarse search found no shift with enough overlap, starting from {0}'.format(a))
        return a
    candidate, value = found
    try:
        current, _ = ssd_objective(f_ref, f_flt, a, margin)
    except (DivergenceError, SingularTransformError):
        current = math.inf
    if current <= value:
        return a
    logger.info('coarse search start {0} (J {1:.6g}, was {2:.6g})'.format(candidate, value, current))
    return candidate


def _optimize_level(f_ref, f_flt, a, cfg, level, margin=0):
    objective, _, gradient, hessian = linearize(f_ref, f_flt, a, margin)
    trace = [objective]
    converged = False
    iterations = 0
    last_step = cfg.eta
    while iterations < cfg.max_iters:
        if objective == 0.0 or not np.any(gradient):
            converged = True
            break
        direction = descent_direction(gradient, hessian, f_ref.shape, cfg)
        slope = float(direction @ gradient)
        step = min(cfg.eta, 2.0 * last_step)
        accepted = None
        for _ in range(cfg.max_backtracks):
            candidate = AffineParams.from_sequence(a.as_array() + step * direction)
            try:
                value, _ = ssd_objective(f_ref, f_flt, candidate, margin)
            except (DivergenceError, SingularTransformError):
                step *= 0.5
                continue
            if value <= objective + cfg.armijo * step * slope and value < objective:
                accepted = (candidate, value)
                break
            step *= 0.5
        iterations += 1
        if accepted is None:
            logger.debug('level {0}: line search found no decrease after {1} iterations'.format(level, iterations))
            converged = True
            break
        a, value = accepted
        last_step = step
        decrease = (objective - value) / max(objective, np.finfo(float).tiny)
        objective = value
        trace.append(objective)
        logger.debug('level {0} iter {1}: J={2:.6g} step={3:.3g} a={4}'.format(level, iterations, objective, step, a))
        if decrease < cfg.tol:
            converged = True
            break
        objective, _, gradient, hessian = linearize(f_ref, f_flt, a, margin)
    return a, trace, iterations, converged


def register(img_ref, img_flt, bank=None, params=None, cfg=None, enhancer=None, init=None):
    """Coarse-to-fine registration; returns the full-resolution transform.

    Features are recomputed from each pyramid level. The transform found at a
    level seeds the next finer one with its translations doubled. ``init`` is
    a full-resolution starting transform (identity by default); the coarse
    search replaces it only when it finds a lower objective.
    """
    cfg = cfg or RegConfig()
    enhancer = enhancer or PCNet(bank, params)
    max_kernel = enhancer.bank.config.max_kernel_size if isinstance(enhancer, (PCNet, ClassicalPC)) else 0
    margin = cfg.margin if cfg.margin is not None else max_kernel // 2
    ref, flt = as_array(img_ref), as_array(img_flt)
    if ref.shape != flt.shape:
        raise ShapeMismatchError('Images differ in size: {0} vs {1}'.format(ref.shape, flt.shape))
    levels = cfg.levels or auto_levels(ref.shape, max_kernel, cfg.min_level_side)
    pyr_ref = build_pyramid(img_ref, levels)
    pyr_flt = build_pyramid(img_flt, levels)

    a = (init or AffineParams.identity()).scaled(1.0 / PYRAMID_FACTOR ** (levels - 1))
    summaries = []
    for level in reversed(range(levels)):
        f_ref = enhancer.enhance(pyr_ref[level])
        f_flt = enhancer.enhance(pyr_flt[level])
        if cfg.search and level == levels - 1:
            a = _search_start(f_ref, f_flt, a, cfg, margin)
        a, trace, iterations, converged = _optimize_level(f_ref, f_flt, a, cfg, level, margin)
        summaries.append(LevelSummary(level=level, shape=f_ref.shape, iterations=iterations,
                                      initial_objective=trace[0], final_objective=trace[-1],
                                      converged=converged, objective_trace=trace))
        logger.info('level {0} ({1}x{2}): J {3:.6g} -> {4:.6g} in {5} iterations{6}'.format(
            level, f_ref.shape[1], f_ref.shape[0], trace[0], trace[-1], iterations,
            '' if converged else ' (iteration limit)'))
        if level > 0:
            a = a.scaled(PYRAMID_FACTOR)
    return RegResult(a_hat=a, objective_trace=list(summaries[-1].objective_trace),
                     converged=summaries[-1].converged, level_summaries=summaries)
