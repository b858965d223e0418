"""Kernel models, their discretization on a weighted grid and the maximal
operators built from them.

A DiscreteOperator stores the dense matrix A[i, j] = K(x_i, x_j) w_j restricted
to pairs with d(x_i, x_j) > r_cut; applying T is a matrix-vector product.
Ball families for the maximal operators are all pairs (grid point, radius
from `ball_radii`), which keeps them comparable with brute-force oracles."""

import logging
import math

import numpy as np

from . import config
from .errors import OperatorError, ParameterError
from .measure import inflate, model_ball_measure, unit_ball_volume

LOGGER = logging.getLogger(__name__)

# name -> factory(grid) returning a KernelModel
KERNELS = {}


def register_kernel(name):
    """Register a kernel factory under `custom:<name>`."""
    def decorator(factory):
        KERNELS[name] = factory
        return factory
    return decorator


class KernelModel:
    """A kernel K(x, y). `evaluate(X, Y)` returns the matrix K(X_i, Y_j) and
    must be finite whenever X_i != Y_j."""

    def __init__(self, kind, name, evaluate, epsilon=config.KERNEL_EPS, axis=None):
        if not 0 < epsilon <= 1:
            raise ParameterError("Hölder exponent must lie in (0, 1], got %r" % epsilon)
        self.kind = kind
        self.name = name
        self.epsilon = epsilon
        self.axis = axis
        self._evaluate = evaluate

    def matrix(self, xs, ys):
        xs = np.atleast_2d(np.asarray(xs, dtype=float))
        ys = np.atleast_2d(np.asarray(ys, dtype=float))
        with np.errstate(divide='ignore', invalid='ignore'):
            values = self._evaluate(xs, ys)
        coincide = np.all(xs[:, None, :] == ys[None, :, :], axis=2)
        return np.where(coincide, 0.0, values)

    def __call__(self, x, y):
        return float(self.matrix(x, y)[0, 0])

    def __repr__(self):
        return 'KernelModel(%s:%s, eps=%g)' % (self.kind, self.name, self.epsilon)


def make_riesz_model(grid, j):
    """K(x,y) = (x_j - y_j) / (|x - y| V(x, |x - y|)) with V the closed-form
    ball volume of the measure module; `j` counts from 1."""
    rs = grid.rs
    if not 1 <= j <= rs.dimension:
        raise ParameterError("Riesz direction %d outside 1..%d" % (j, rs.dimension))
    axis = j - 1

    def evaluate(xs, ys):
        diff = xs[:, None, :] - ys[None, :, :]
        norm = np.linalg.norm(diff, axis=2)
        volume = model_ball_measure(rs, np.repeat(xs, len(ys), axis=0),
                norm.ravel()).reshape(norm.shape)
        return diff[:, :, axis] / (norm * volume)

    return KernelModel('riesz', 'riesz:%d' % j, evaluate, axis=axis)


@register_kernel('zero')
def zero_kernel(grid):
    return KernelModel('custom', 'custom:zero',
            lambda xs, ys: np.zeros((len(xs), len(ys))))


@register_kernel('hilbert')
def hilbert_kernel(grid):
    """(x_1 - y_1) / (v_N |x - y|^(N+1)); the Hilbert kernel 1/(2(x - y)) on
    the line. Multiplicities are ignored."""
    dimension = grid.dimension
    volume = unit_ball_volume(dimension)

    def evaluate(xs, ys):
        diff = xs[:, None, :] - ys[None, :, :]
        norm = np.linalg.norm(diff, axis=2)
        return diff[:, :, 0] / (volume * norm ** (dimension + 1))

    return KernelModel('custom', 'custom:hilbert', evaluate, axis=0)


def kernel_from_key(grid, key):
    """Resolve `riesz:j` or `custom:<name>`."""
    kind, _, arg = key.partition(':')
    if kind == 'riesz':
        try:
            return make_riesz_model(grid, int(arg))
        except ValueError:
            raise ParameterError("invalid Riesz direction in %r" % key) from None
    if kind == 'custom' and arg in KERNELS:
        return KERNELS[arg](grid)
    raise ParameterError("unknown kernel %r; known: riesz:j, %s" % (key,
        ', '.join('custom:' + k for k in sorted(KERNELS))))


class DiscreteOperator:
    """Matrix realization of T_{r_cut} on a grid."""

    def __init__(self, grid, kernel, r_cut=None):
        self.grid = grid
        self.kernel = kernel
        self.r_cut = grid.cell_diagonal if r_cut is None else float(r_cut)
        if self.r_cut < 0:
            raise ParameterError("r_cut must be nonnegative")
        distances = grid.dunkl_distances()
        values = kernel.matrix(grid.points, grid.points)
        bad = ~np.isfinite(values) & (grid.euclidean_distances() > 0)
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            raise OperatorError("kernel %s is not finite at x=%s, y=%s" % (
                kernel.name, grid.points[i].tolist(), grid.points[j].tolist()))
        self.weighted = np.nan_to_num(values) * grid.weights[None, :]
        self.matrix = np.where(distances > self.r_cut, self.weighted, 0.0)
        LOGGER.debug("assembled %s on %d points, r_cut %g", kernel.name, grid.n,
                self.r_cut)

    @classmethod
    def from_matrix(cls, grid, matrix, r_cut=0.0):
        """Wrap a precomputed matrix (already multiplied by the weights)."""
        op = cls.__new__(cls)
        op.grid = grid
        op.kernel = KernelModel('custom', 'custom:matrix',
                lambda xs, ys: np.zeros((len(xs), len(ys))))
        op.r_cut = r_cut
        op.weighted = np.asarray(matrix, dtype=float)
        op.matrix = op.weighted
        return op

    def apply(self, f):
        return self.matrix @ np.asarray(f, dtype=float)

    def truncated(self, f, eps):
        """T_eps f: only pairs with d(x, y) > eps contribute."""
        mask = self.grid.dunkl_distances() > eps
        return np.where(mask, self.weighted, 0.0) @ np.asarray(f, dtype=float)


def apply(op, f):
    return op.apply(f)


def commutator(op, b, f):
    """[b, T] f = b T(f) - T(b f)."""
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ParameterError("b must be finite")
    return b * op.apply(f) - op.apply(b * f)


def truncation_ladder(grid):
    """cell diagonal * 2^m for m = 0, 1, ... up to the first value beyond the
    diameter."""
    ladder = [grid.cell_diagonal]
    while ladder[-1] <= grid.diameter:
        ladder.append(2 * ladder[-1])
    return ladder


def maximal_truncation(op, f, eps_ladder=None):
    """T* f = max over the ladder of |T_eps f|."""
    ladder = truncation_ladder(op.grid) if eps_ladder is None else list(eps_ladder)
    if not ladder:
        raise ParameterError("empty truncation ladder")
    if any(b <= a for a, b in zip(ladder, ladder[1:])):
        raise ParameterError("truncation ladder must be strictly ascending")
    result = np.zeros(op.grid.n)
    for eps in ladder:
        np.maximum(result, np.abs(op.truncated(f, eps)), out=result)
    return result


def ball_radii(grid):
    """Half the smallest spacing times 2^m, up to the first radius beyond the
    diameter; the smallest balls are single points or single orbits."""
    radii = [float(np.min(grid.spacing)) / 2]
    while radii[-1] <= grid.diameter:
        radii.append(2 * radii[-1])
    return radii


def _ball_maximal(distances, weights, f, radii):
    """sup over balls {y : dist(c, y) <= r} containing x of the average of |f|."""
    absf = np.abs(np.asarray(f, dtype=float)) * weights
    result = np.zeros(len(weights))
    for radius in radii:
        inside = distances <= inflate(radius)
        mass = inside @ weights
        with np.errstate(divide='ignore', invalid='ignore'):
            avg = np.where(mass > 0, (inside @ absf) / mass, 0.0)
        np.maximum(result, np.where(inside, avg[:, None], 0.0).max(axis=0), out=result)
    return result


def hl_maximal(grid, f, radii=None):
    """Hardy-Littlewood maximal function over Euclidean balls."""
    radii = ball_radii(grid) if radii is None else radii
    return _ball_maximal(grid.euclidean_distances(), grid.weights, f, radii)


def dunkl_maximal(grid, f, radii=None):
    """Maximal function over orbit balls O(B(c, r))."""
    radii = ball_radii(grid) if radii is None else radii
    return _ball_maximal(grid.dunkl_distances(), grid.weights, f, radii)


def weighted_dyadic_maximal(system, grid, u, f):
    """M_u^d f(x) = max over cubes Q containing x of u(Q)^-1 int_Q |f| u."""
    u = np.asarray(u, dtype=float)
    if np.any(u <= 0):
        raise ParameterError("weights must be positive")
    mass = u * grid.weights
    integrand = np.abs(np.asarray(f, dtype=float)) * mass
    result = np.zeros(grid.n)
    for k in system.scales:
        labels = system.labels[k]
        count = len(system.centers[k])
        avg = np.bincount(labels, weights=integrand, minlength=count) / \
                np.bincount(labels, weights=mass, minlength=count)
        np.maximum(result, avg[labels], out=result)
    return result


def _grand(op, f, ctilde0, radii, centers_for):
    """Shared core of the grand maximal operators.

    For every radius s and every admissible ball center c, the operator is
    applied to f cut off to {y : d(y, c) > ctilde0 s}; the largest modulus
    inside the ball is spread over the ball's points."""
    grid = op.grid
    distances = grid.dunkl_distances()
    f = np.asarray(f, dtype=float)
    support = np.flatnonzero(f)
    result = np.zeros(grid.n)
    if support.size == 0:
        return result
    reach = distances[support].max()
    columns = op.matrix[:, support]
    for radius in radii:
        if ctilde0 * radius >= reach:
            continue
        centers = centers_for(radius)
        if centers.size == 0:
            continue
        cut = distances[np.ix_(support, centers)] > ctilde0 * radius
        if not cut.any():
            continue
        values = np.abs(columns @ (f[support, None] * cut))
        inside = distances[:, centers] <= inflate(radius)
        peak = np.where(inside, values, 0.0).max(axis=0)
        np.maximum(result, np.where(inside, peak[None, :], 0.0).max(axis=1), out=result)
    return result


def _check_ctilde0(ctilde0):
    if ctilde0 < 4:
        raise ParameterError("C~0 must be at least 4, got %r" % ctilde0)


def grand_maximal(op, f, ctilde0, radii=None):
    """M_T f over all orbit balls of the canonical family."""
    _check_ctilde0(ctilde0)
    radii = ball_radii(op.grid) if radii is None else radii
    everything = np.arange(op.grid.n)
    return _grand(op, f, ctilde0, radii, lambda radius: everything)


def local_grand_maximal(op, f, ctilde0, base_center, base_radius, dilate=None,
        radii=None):
    """M_{T,O(B0)} f with B0 = B(x_base_center, base_radius): only balls inside
    O(B0) are used and f is first restricted to `dilate` (default the orbit
    ball of radius ctilde0 * base_radius)."""
    _check_ctilde0(ctilde0)
    grid = op.grid
    radii = ball_radii(grid) if radii is None else radii
    from_base = grid.dunkl_distances()[base_center]
    if dilate is None:
        dilate = from_base <= inflate(ctilde0 * base_radius)
    restricted = np.where(dilate, np.asarray(f, dtype=float), 0.0)

    def centers_for(radius):
        return np.flatnonzero(from_base + radius <= inflate(base_radius))

    return _grand(op, restricted, ctilde0, radii, centers_for)


def verify_grand_maximal_control(op, f, ctilde0, region=None):
    """sup over `region` (default all points) of
    M_T f / (sum_g Mf o g + sum_g T*f o g)."""
    grid = op.grid
    numerator = grand_maximal(op, f, ctilde0)
    denominator = grid.orbit_sum(hl_maximal(grid, f)) + \
            grid.orbit_sum(maximal_truncation(op, f))
    region = np.arange(grid.n) if region is None else np.asarray(region)
    num, den = numerator[region], denominator[region]
    positive = den > 0
    uncontrolled = int(np.sum((num > 0) & ~positive))
    ratio = float(np.max(num[positive] / den[positive])) if positive.any() else 0.0
    return {'ratio': ratio, 'uncontrolled_points': uncontrolled,
            'passed': uncontrolled == 0 and math.isfinite(ratio)}


def l2_opnorm(op, iterations=100, seed=0, history=None):
    """Power iteration for the norm of T on L^2(omega). Successive estimates
    are appended to `history` when a list is given."""
    if iterations < 50:
        raise ParameterError("l2_opnorm needs at least 50 iterations")
    weights = op.grid.weights
    active = np.flatnonzero(weights > 0)
    root = np.sqrt(weights[active])
    scaled = op.matrix[np.ix_(active, active)] * root[:, None] / root[None, :]
    rng = np.random.default_rng(seed)
    vector = rng.normal(size=len(active))
    vector /= np.linalg.norm(vector)
    estimate = 0.0
    for _ in range(iterations):
        image = scaled @ vector
        estimate = float(np.linalg.norm(image))
        if history is not None:
            history.append(estimate)
        if estimate == 0.0:
            break
        vector = scaled.T @ image
        norm = np.linalg.norm(vector)
        if norm == 0.0:
            break
        vector /= norm
    return estimate


def _sample_pairs(grid, rng, samples):
    """Grid-point pairs with positive Dunkl distance."""
    distances = grid.dunkl_distances()
    pairs = []
    attempts = 0
    while len(pairs) < samples and attempts < 100 * samples:
        attempts += 1
        i, j = rng.integers(grid.n, size=2)
        if distances[i, j] > grid.cell_diagonal:
            pairs.append((int(i), int(j)))
    return pairs


def _perturb(rng, point, limit):
    direction = rng.normal(size=point.size)
    direction /= np.linalg.norm(direction)
    return point + rng.uniform(0.05, 1.0) * limit * direction


def cz_check(kernel, grid, samples=200, seed=0, explosion_cap=config.EXPLOSION_CAP):
    """Empirical size and smoothness constants of `kernel`, plain and Riesz
    type, together with the samples exceeding `explosion_cap`."""
    if samples < 100:
        raise ParameterError("cz_check needs at least 100 samples")
    rng = np.random.default_rng(seed)
    distances = grid.dunkl_distances()
    eps = kernel.epsilon
    names = ('size', 'holder_y', 'holder_x', 'riesz_size', 'riesz_holder_y',
            'riesz_holder_x')
    constants = dict.fromkeys(names, 0.0)
    exploded = []
    for i, j in _sample_pairs(grid, rng, samples):
        x, y = grid.points[i], grid.points[j]
        d = float(distances[i, j])
        euclid = float(np.linalg.norm(x - y))
        y2 = _perturb(rng, y, d / 2)
        x2 = _perturb(rng, x, d / 2)
        kxy, kxy2, kx2y = kernel(x, y), kernel(x, y2), kernel(x2, y)
        for value, other in ((kxy, y), (kxy2, y2), (kx2y, x2)):
            if not math.isfinite(value):
                raise OperatorError("kernel %s not finite at x=%s, y=%s" % (
                    kernel.name, x.tolist(), np.asarray(other).tolist()))
        volume = float(model_ball_measure(grid.rs, x, d))
        dy, dx = float(np.linalg.norm(y - y2)), float(np.linalg.norm(x - x2))
        sample = {
            'size': abs(kxy) * volume,
            'holder_y': abs(kxy - kxy2) * volume * (d / dy) ** eps,
            'holder_x': abs(kx2y - kxy) * volume * (d / dx) ** eps,
            'riesz_size': abs(kxy) * volume * (euclid / d) ** eps,
            'riesz_holder_y': abs(kxy - kxy2) * volume * (euclid / dy) ** eps,
            'riesz_holder_x': abs(kx2y - kxy) * volume * (euclid / dx) ** eps,
        }
        for name, value in sample.items():
            constants[name] = max(constants[name], value)
        if max(sample.values()) > explosion_cap:
            exploded.append({'x': x.tolist(), 'y': y.tolist(),
                'worst': max(sample.values())})
    if exploded:
        LOGGER.warning("kernel %s: %d samples above the explosion cap", kernel.name,
                len(exploded))
    return {'kernel': kernel.name, 'epsilon': eps, 'samples': samples,
            'constants': constants, 'exploded': exploded,
            'passed': not exploded}
