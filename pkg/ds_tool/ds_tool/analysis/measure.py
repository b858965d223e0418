"""The Dunkl density h(x) = prod |<v,x>|^kappa(v), quadrature grids realizing
the measure h(x) dx on a box, measures of Euclidean and orbit balls and the
empirical checks of scaling, comparison and doubling."""

import dataclasses
import logging
import math

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from scipy.special import gamma

from . import config
from .errors import GridError
from .reflection import homogeneous_dimension

LOGGER = logging.getLogger(__name__)

METRICS = ('euclidean', 'dunkl')


def inflate(radius):
    """Radius used for closed-ball membership tests."""
    return radius * (1.0 + 1e-12)


def density(rs, x):
    """Evaluate h at a point or at every row of an (n, N) array. 0^0 = 1."""
    x = np.asarray(x, dtype=float)
    pts = np.atleast_2d(x)
    if len(rs.roots) == 0:
        values = np.ones(len(pts))
    else:
        values = np.prod(np.power(np.abs(pts @ rs.roots.T), rs.kappa), axis=1)
    return float(values[0]) if x.ndim == 1 else values


def unit_ball_volume(dimension):
    return math.pi ** (dimension / 2.0) / gamma(dimension / 2.0 + 1.0)


def model_ball_measure(rs, x, radius):
    """v_N r^N prod (|<v,x>| + r)^kappa(v), the closed-form surrogate of the
    measure of B(x, r). Broadcasts over rows of `x` and over `radius`."""
    pts = np.atleast_2d(np.asarray(x, dtype=float))
    radius = np.asarray(radius, dtype=float)
    value = unit_ball_volume(rs.dimension) * radius ** rs.dimension
    if len(rs.roots):
        factors = np.abs(pts @ rs.roots.T)
        if radius.ndim:
            factors = factors + radius[..., None]
        else:
            factors = factors + radius
        value = value * np.prod(np.power(factors, rs.kappa), axis=-1)
    if np.asarray(x).ndim == 1 and np.ndim(value) == 1 and len(value) == 1:
        return float(value[0])
    return value


@dataclasses.dataclass(frozen=True)
class BallSpec:
    center: np.ndarray
    radius: float
    metric: str = 'dunkl'

    def __post_init__(self):
        if not self.radius > 0:
            raise GridError("ball radius must be positive, got %r" % self.radius)
        if self.metric not in METRICS:
            raise GridError("unknown metric %r" % self.metric)
        object.__setattr__(self, 'center', np.asarray(self.center, dtype=float))


def parse_box(box, dimension):
    """Accept (lo, hi) for every axis or one (lo, hi) pair per axis."""
    arr = np.asarray(box, dtype=float)
    if arr.shape == (2,):
        arr = np.tile(arr, (dimension, 1))
    if arr.shape != (dimension, 2) or np.any(arr[:, 1] <= arr[:, 0]):
        raise GridError("invalid box %r for dimension %d" % (box, dimension))
    return arr


def _symmetric_centers(lo, hi, count):
    step = (hi - lo) / count
    centers = lo + (np.arange(count) + 0.5) * step
    if lo == -hi:
        centers = (centers - centers[::-1]) / 2.0
    return centers, step


class WeightedGrid:
    """Cell centers of a uniform grid on a G-invariant box together with the
    quadrature weights w_i = (mean of h over s^N subsamples) * cell volume.

    Besides points and weights the grid knows, for every group element g, the
    permutation of point indices induced by g (`perms[g][i]` is the index of
    g(x_i))."""

    def __init__(self, rs, box, resolution, subsamples=config.SUBSAMPLES, weights=None):
        if resolution < config.MIN_RESOLUTION:
            raise GridError("resolution must be at least %d, got %d" % (
                config.MIN_RESOLUTION, resolution))
        if subsamples < 1:
            raise GridError("need at least one subsample per axis")
        self.rs = rs
        self.group = rs.group
        self.dimension = rs.dimension
        self.box = parse_box(box, self.dimension)
        self.resolution = int(resolution)
        self.subsamples = int(subsamples)
        self._check_box_invariance()

        axes, steps = zip(*(_symmetric_centers(lo, hi, self.resolution)
            for lo, hi in self.box))
        self.axes = list(axes)
        self.spacing = np.array(steps)
        self.cell_volume = float(np.prod(self.spacing))
        self.cell_diagonal = float(np.linalg.norm(self.spacing))
        mesh = np.meshgrid(*self.axes, indexing='ij')
        self.points = np.stack([m.ravel() for m in mesh], axis=1)
        self.n = len(self.points)
        self.diameter = float(np.linalg.norm(self.box[:, 1] - self.box[:, 0]))
        if weights is None:
            weights = self._cell_weights()
        elif np.shape(weights) != (self.n,):
            raise GridError("%d stored weights for %d grid points" % (
                np.size(weights), self.n))
        self.weights = np.asarray(weights, dtype=float)
        self.__tree = None
        self.__euclidean = None
        self.__dunkl = None
        self.perms = self._permutations()
        LOGGER.debug("grid %s: %d points, total mass %g", rs.name, self.n,
                self.weights.sum())

    def _check_box_invariance(self):
        corners = np.array(np.meshgrid(*self.box, indexing='ij')).reshape(
                self.dimension, -1).T
        for element in self.group.elements:
            images = corners @ element.T
            if np.any(images < self.box[:, 0] - config.EQ_TOL) or \
                    np.any(images > self.box[:, 1] + config.EQ_TOL):
                raise GridError("box %s is not invariant under the group of %s" % (
                    self.box.tolist(), self.rs.name))

    def _cell_weights(self):
        base = (np.arange(self.subsamples) + 0.5) / self.subsamples - 0.5
        base = (base - base[::-1]) / 2.0
        offsets = np.meshgrid(*[base * h for h in self.spacing], indexing='ij')
        offsets = np.stack([o.ravel() for o in offsets], axis=1)
        weights = np.empty(self.n)
        # chunked to bound the temporary (points x subsamples x N) array
        chunk = max(1, 200000 // len(offsets))
        for start in range(0, self.n, chunk):
            pts = self.points[start:start + chunk]
            sub = (pts[:, None, :] + offsets[None, :, :]).reshape(-1, self.dimension)
            values = density(self.rs, sub).reshape(len(pts), len(offsets))
            weights[start:start + chunk] = values.mean(axis=1) * self.cell_volume
        return weights

    def _permutations(self):
        perms = np.empty((self.group.order, self.n), dtype=np.int64)
        for idx, element in enumerate(self.group.elements):
            dist, target = self.tree.query(self.points @ element.T)
            if np.any(dist > 1e-6 * self.cell_diagonal):
                raise GridError("grid points are not mapped onto grid points by "
                    "the group; use equal axes and resolutions")
            perms[idx] = target
        return perms

    @property
    def tree(self):
        if self.__tree is None:
            self.__tree = cKDTree(self.points)
        return self.__tree

    def euclidean_ball(self, center, radius):
        """Sorted indices of the points within Euclidean distance `radius`."""
        members = self.tree.query_ball_point(np.asarray(center, dtype=float),
                inflate(radius))
        return np.array(sorted(members), dtype=np.int64)

    def dunkl_ball(self, center, radius):
        """Sorted indices of the points of the orbit ball O(B(center, radius))."""
        images = self.group.images(center)
        members = set()
        for hits in self.tree.query_ball_point(images, inflate(radius)):
            members.update(hits)
        return np.array(sorted(members), dtype=np.int64)

    def ball_members(self, ball):
        if ball.metric == 'euclidean':
            return self.euclidean_ball(ball.center, ball.radius)
        return self.dunkl_ball(ball.center, ball.radius)

    def dunkl_distances_from(self, center):
        """d(x_i, center) for every grid point."""
        images = self.group.images(center)
        return cdist(self.points, images).min(axis=1)

    def _dense_guard(self):
        if self.n > config.DENSE_LIMIT:
            raise GridError("%d points exceed the dense-matrix limit %d" % (
                self.n, config.DENSE_LIMIT))

    def euclidean_distances(self):
        if self.__euclidean is None:
            self._dense_guard()
            self.__euclidean = cdist(self.points, self.points)
        return self.__euclidean

    def dunkl_distances(self):
        """Dense matrix of d(x_i, x_j) = min over g of |x_i - g(x_j)|."""
        if self.__dunkl is None:
            euclid = self.euclidean_distances()
            result = euclid.copy()
            for perm in self.perms:
                np.minimum(result, euclid[:, perm], out=result)
            self.__dunkl = result
        return self.__dunkl

    def orbit_sum(self, values):
        """x -> sum over g in G of values(g(x))."""
        values = np.asarray(values, dtype=float)
        return values[self.perms].sum(axis=0)

    def measure(self, members):
        return float(self.weights[members].sum())

    def average(self, values, members):
        """omega-average of `values` over the index set `members`."""
        mass = self.measure(members)
        if mass <= 0:
            raise GridError("average over a set of measure zero")
        return float(np.dot(np.asarray(values, dtype=float)[members],
            self.weights[members]) / mass)

    def contains_ball(self, center, radius):
        """True iff the Euclidean ball B(center, radius) lies inside the box."""
        center = np.asarray(center, dtype=float)
        return bool(np.all(center - radius >= self.box[:, 0] - 1e-12) and
                np.all(center + radius <= self.box[:, 1] + 1e-12))

    def describe(self):
        return {'root_system': self.rs.name, 'kappa': self.rs.kappa.tolist(),
                'box': self.box.tolist(), 'resolution': self.resolution,
                'subsamples': self.subsamples}


def build_grid(box, resolution, rs, subsamples=config.SUBSAMPLES):
    return WeightedGrid(rs, box, resolution, subsamples)


def ball_measure(grid, ball):
    """omega of the ball's grid points; 0 for an empty intersection."""
    members = grid.ball_members(ball)
    return grid.measure(members) if members.size else 0.0


def _random_balls(grid, rng, count, factor=1.0, fixed_center=None):
    """Seeded (x, r) pairs with B(x, factor*r) inside the box and r log-uniform
    in [4 cells, box/8]."""
    width = float(np.min(grid.box[:, 1] - grid.box[:, 0]))
    lo_r = 4 * float(np.max(grid.spacing))
    hi_r = max(lo_r, width / 8.0)
    samples = []
    while len(samples) < count:
        radius = float(np.exp(rng.uniform(np.log(lo_r), np.log(hi_r))))
        if fixed_center is not None:
            center = np.asarray(fixed_center, dtype=float)
        else:
            center = rng.uniform(grid.box[:, 0] + factor * radius,
                    grid.box[:, 1] - factor * radius)
        samples.append((center, radius))
    return samples


def verify_scaling(grid, trials=200, seed=0, samples=None):
    """Compare omega(B(tx, tr)) / omega(B(x, r)) with t^N_hom.

    `samples` may list explicit (x, r, t) triples; otherwise `trials` triples
    with t in [1, 2] are drawn so that both balls fit into the box."""
    if not np.all(grid.box[:, 0] < 0) or not np.all(grid.box[:, 1] > 0):
        raise GridError("scaling checks need the origin inside the box")
    exponent = homogeneous_dimension(grid.rs)
    if samples is None:
        rng = np.random.default_rng(seed)
        samples = []
        for center, radius in _random_balls(grid, rng, 10 * trials, factor=2.0):
            t = float(rng.uniform(1.0, 2.0))
            if grid.contains_ball(t * center, t * radius):
                samples.append((center, radius, t))
            if len(samples) == trials:
                break
    worst, deviations = None, []
    for center, radius, t in samples:
        center = np.asarray(center, dtype=float)
        if not grid.contains_ball(t * center, t * radius):
            raise GridError("scaled ball B(%s, %g) leaves the box" % (t * center, t * radius))
        small = ball_measure(grid, BallSpec(center, radius, 'euclidean'))
        large = ball_measure(grid, BallSpec(t * center, t * radius, 'euclidean'))
        ratio = large / small
        deviation = abs(ratio / t ** exponent - 1.0)
        deviations.append(deviation)
        if worst is None or deviation > worst['deviation']:
            worst = {'center': center.tolist(), 'radius': radius, 't': t,
                    'ratio': ratio, 'deviation': deviation}
    return {'exponent': exponent, 'samples': len(deviations),
            'max_deviation': max(deviations) if deviations else 0.0,
            'worst': worst}


def verify_comparison(grid, samples=200, seed=0):
    """Ratios omega(B(x,r)) / (r^N prod(|<v,x>| + r)^kappa), the neighbour
    ratio omega(B(x,r)) / omega(B(y,r)) for |x - y| <= r and the orbit-ball
    bounds omega(B) <= omega(O(B)) <= |G| max omega(B(gx, r))."""
    rng = np.random.default_rng(seed)
    rs = grid.rs
    ratios, neighbour, orbit_violations = [], [], 0
    for center, radius in _random_balls(grid, rng, samples):
        mass = ball_measure(grid, BallSpec(center, radius, 'euclidean'))
        model = model_ball_measure(rs, center, radius) / unit_ball_volume(rs.dimension)
        ratios.append(mass / model)

        direction = rng.normal(size=grid.dimension)
        direction /= np.linalg.norm(direction)
        other = center + rng.uniform(0.0, 1.0) * radius * direction
        if grid.contains_ball(other, radius):
            neighbour.append(mass / ball_measure(grid, BallSpec(other, radius, 'euclidean')))

        orbit_mass = ball_measure(grid, BallSpec(center, radius, 'dunkl'))
        translates = max(ball_measure(grid, BallSpec(image, radius, 'euclidean'))
                for image in grid.group.images(center))
        if not mass <= orbit_mass * (1 + 1e-12) or \
                not orbit_mass <= grid.group.order * translates * (1 + 1e-12):
            orbit_violations += 1
    ratios = np.array(ratios)
    report = {'samples': len(ratios), 'min_ratio': float(ratios.min()),
            'max_ratio': float(ratios.max()),
            'spread': float(ratios.max() / ratios.min()),
            'orbit_bound_violations': orbit_violations}
    if neighbour:
        report['neighbour_min'] = float(min(neighbour))
        report['neighbour_max'] = float(max(neighbour))
    return report


def doubling_and_growth(grid, samples=200, seed=0, balls=None):
    """Empirical doubling constant C_d and the smallest C with
    C^-1 (r1/r2)^N <= omega(B(x,r1)) / omega(B(x,r2)) <= C (r1/r2)^N_hom."""
    rng = np.random.default_rng(seed)
    if balls is None:
        balls = _random_balls(grid, rng, samples, factor=2.0)
    dimension = grid.dimension
    exponent = homogeneous_dimension(grid.rs)
    doubling, growth = 0.0, 1.0
    for center, radius in balls:
        center = np.asarray(center, dtype=float)
        mass = ball_measure(grid, BallSpec(center, radius, 'euclidean'))
        double = ball_measure(grid, BallSpec(center, 2 * radius, 'euclidean'))
        doubling = max(doubling, double / mass)
        scale = float(rng.uniform(0.25, 1.0))
        inner = ball_measure(grid, BallSpec(center, scale * radius, 'euclidean'))
        if inner <= 0:
            continue
        quotient = inner / mass
        growth = max(growth, scale ** dimension / quotient,
                quotient / scale ** exponent)
    return {'samples': len(balls), 'doubling_constant': doubling,
            'growth_constant': growth, 'exponent': exponent,
            'lebesgue_exponent': dimension}
