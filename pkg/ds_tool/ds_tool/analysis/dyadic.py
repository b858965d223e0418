"""Dyadic cube systems on the orbit space of a weighted grid.

A system is built from nested greedy nets in the Dunkl metric: the scale-k net
is seeded with the scale-(k-1) centers, every grid point joins the nearest
finest-scale center and every cube joins the nearest center one scale up. The
result is checked against separation, covering, partition, nesting and the
outer sandwich; the inner sandwich constant is recorded.

A bundle of independently seeded systems replaces the adjacent systems of the
continuous theory: `containing_cube` looks for the smallest cube containing a
given orbit ball in any of them."""

import dataclasses
import logging
import math

import numpy as np
from scipy.spatial.distance import cdist

from . import config
from .errors import DyadicError, ParameterError
from .measure import BallSpec

LOGGER = logging.getLogger(__name__)

# rows per block when distances to all centers are computed
ROW_CHUNK = 512


@dataclasses.dataclass(eq=False)
class Cube:
    """A dyadic cube: members are sorted grid-point indices."""
    key: tuple
    scale: int
    index: int
    center: int
    sidelength: float
    members: np.ndarray
    measure: float
    parent: 'Cube' = dataclasses.field(default=None, repr=False)
    children: list = dataclasses.field(default_factory=list, repr=False)
    system: 'DyadicSystem' = dataclasses.field(default=None, repr=False)

    def __len__(self):
        return len(self.members)

    def contains(self, other):
        """True iff `other`'s members are a subset of this cube's members."""
        return bool(np.all(np.isin(other.members, self.members, assume_unique=True)))


def center_distances(grid, centers, rows=None):
    """Yield (row indices, block) with block[i, a] = d(x_row_i, x_centers[a])."""
    centers = np.asarray(centers, dtype=np.int64)
    rows = np.arange(grid.n) if rows is None else np.asarray(rows, dtype=np.int64)
    for start in range(0, len(rows), ROW_CHUNK):
        chunk = rows[start:start + ROW_CHUNK]
        block = None
        for perm in grid.perms:
            part = cdist(grid.points[chunk], grid.points[perm[centers]])
            block = part if block is None else np.minimum(block, part)
        yield chunk, block


def _nearest(block, tolerance):
    """Index of the nearest column per row; near-ties go to the smaller index."""
    best = block.min(axis=1)
    return np.argmax(block <= (best + tolerance)[:, None], axis=1)


def finest_admissible_scale(grid, delta):
    """Largest k with delta^k >= 2 * cell diagonal."""
    floor = 2 * grid.cell_diagonal
    k = int(math.floor(math.log(floor) / math.log(delta)))
    while delta ** k < floor:
        k -= 1
    while delta ** (k + 1) >= floor:
        k += 1
    return k


def coarsest_scale(grid, delta, k_max):
    """Largest k <= k_max with delta^k > diameter of the box, so that the net
    at this scale consists of one center."""
    k = k_max
    while delta ** k <= grid.diameter:
        k -= 1
    return k


def build_net(grid, delta, k, order_seed, seed_centers=None):
    """Greedy maximal delta^k-separated set in the Dunkl metric.

    Points are visited in the order of a permutation drawn from `order_seed`;
    a point is admitted iff its distance to all centers admitted so far
    (including `seed_centers`) is at least delta^k. Returns sorted indices."""
    radius = delta ** k
    if radius < 2 * grid.cell_diagonal:
        raise DyadicError(("scale %d too fine: delta^k = %g below twice the cell "
            "diagonal %g") % (k, radius, grid.cell_diagonal), prop='scale')
    rng = np.random.default_rng(order_seed)
    order = rng.permutation(grid.n)
    centers = [int(c) for c in (seed_centers if seed_centers is not None else [])]
    closest = np.full(grid.n, np.inf)
    for center in centers:
        np.minimum(closest, grid.dunkl_distances_from(grid.points[center]), out=closest)
    for idx in order:
        if closest[idx] >= radius:
            centers.append(int(idx))
            np.minimum(closest, grid.dunkl_distances_from(grid.points[idx]), out=closest)
    LOGGER.debug("net at scale %d: %d centers", k, len(centers))
    return sorted(centers)


class DyadicSystem:
    """Nested partitions of the grid points, one per scale k_min..k_max.

    `centers[k]` lists the center indices at scale k (ascending), `labels[k]`
    maps every grid point to the index of its scale-k cube, `cubes[(k, a)]`
    is the Cube object."""

    def __init__(self, grid, delta, k_min, k_max, centers, tag='S0', seed=None):
        self.grid = grid
        self.delta = delta
        self.k_min = k_min
        self.k_max = k_max
        self.tag = tag
        self.seed = seed
        self.centers = {k: np.asarray(centers[k], dtype=np.int64) for k in self.scales}
        self.labels = {}
        self.cubes = {}
        self.c_in = None
        self.largest_child_ratio = None
        self.child_ratio = None

    @property
    def scales(self):
        return range(self.k_min, self.k_max + 1)

    def cubes_at(self, k):
        return [self.cubes[(k, a)] for a in range(len(self.centers[k]))]

    def all_cubes(self):
        return [cube for k in self.scales for cube in self.cubes_at(k)]

    def roots(self):
        return self.cubes_at(self.k_min)

    def cube_of(self, point, k):
        return self.cubes[(k, int(self.labels[k][point]))]

    def tower(self, point):
        """Cubes containing `point`, coarsest first."""
        return [self.cube_of(point, k) for k in self.scales]

    def descendants(self, cube):
        result, stack = [], list(cube.children)
        while stack:
            current = stack.pop()
            result.append(current)
            stack.extend(current.children)
        return result

    def describe(self):
        return {'tag': self.tag, 'delta': self.delta, 'k_min': self.k_min,
                'k_max': self.k_max, 'seed': self.seed,
                'cubes': {str(k): len(self.centers[k]) for k in self.scales}}


def _assign(system):
    grid = system.grid
    tolerance = 1e-12 * grid.diameter
    finest = system.centers[system.k_max]
    labels = np.empty(grid.n, dtype=np.int64)
    for rows, block in center_distances(grid, finest):
        labels[rows] = _nearest(block, tolerance)
    system.labels[system.k_max] = labels
    for k in range(system.k_max - 1, system.k_min - 1, -1):
        child_centers = system.centers[k + 1]
        parent_of_child = np.empty(len(child_centers), dtype=np.int64)
        for rows, block in center_distances(grid, system.centers[k], rows=child_centers):
            parent_of_child[np.searchsorted(child_centers, rows)] = _nearest(block, tolerance)
        system.labels[k] = parent_of_child[system.labels[k + 1]]


def _make_cubes(system):
    grid = system.grid
    for k in system.scales:
        labels = system.labels[k]
        count = len(system.centers[k])
        sizes = np.bincount(labels, minlength=count)
        if np.any(sizes == 0):
            empty = int(np.flatnonzero(sizes == 0)[0])
            raise DyadicError("cube (%d, %d) is empty" % (k, empty), prop='partition')
        order = np.argsort(labels, kind='stable')
        groups = np.split(order, np.cumsum(sizes)[:-1])
        for alpha, members in enumerate(groups):
            mass = float(grid.weights[members].sum())
            if mass <= 0:
                raise DyadicError("cube (%d, %d) has measure zero" % (k, alpha),
                        prop='partition')
            system.cubes[(k, alpha)] = Cube(key=(system.tag, k, alpha), scale=k,
                    index=alpha, center=int(system.centers[k][alpha]),
                    sidelength=system.delta ** k, members=members, measure=mass,
                    system=system)
    for k in range(system.k_min, system.k_max):
        for child in system.cubes_at(k + 1):
            parent = system.cubes[(k, int(system.labels[k][child.members[0]]))]
            child.parent = parent
            parent.children.append(child)


def scale_geometry(system, k):
    """Measure separation, covering, outer radius and inner constant at
    scale k, all relative to delta^k."""
    grid = system.grid
    radius = system.delta ** k
    centers = system.centers[k]
    labels = system.labels[k]
    covering, outer = 0.0, 0.0
    inner = np.full(len(centers), np.inf)
    separation = np.inf
    center_pos = {int(c): a for a, c in enumerate(centers)}
    for rows, block in center_distances(grid, centers):
        covering = max(covering, float(block.min(axis=1).max()))
        own = block[np.arange(len(rows)), labels[rows]]
        outer = max(outer, float(own.max()))
        foreign = block.copy()
        foreign[np.arange(len(rows)), labels[rows]] = np.inf
        inner = np.minimum(inner, foreign.min(axis=0))
        for local, row in enumerate(rows):
            alpha = center_pos.get(int(row))
            if alpha is not None:
                others = np.delete(block[local], alpha)
                if others.size:
                    separation = min(separation, float(others.min()))
    members_everything = np.bincount(labels, minlength=len(centers)) == grid.n
    inner[members_everything] = np.inf
    c_in = float(inner.min()) / radius if np.isfinite(inner.min()) else math.inf
    return {'separation': separation / radius, 'covering': covering / radius,
            'outer': outer / radius, 'c_in': c_in}


def _check_structure(system):
    grid = system.grid
    for k in system.scales:
        labels = system.labels[k]
        if labels.shape != (grid.n,) or labels.min() < 0 or \
                labels.max() >= len(system.centers[k]):
            raise DyadicError("labels at scale %d do not partition the grid" % k,
                    prop='partition')
        for alpha, center in enumerate(system.centers[k]):
            if labels[center] != alpha:
                raise DyadicError("center of cube (%d, %d) is not a member" % (k, alpha),
                        prop='center')
    for k in range(system.k_min, system.k_max):
        pairs = np.unique(system.labels[k + 1] * len(system.centers[k]) +
                system.labels[k])
        if len(pairs) != len(system.centers[k + 1]):
            raise DyadicError("a scale-%d cube meets several scale-%d cubes" % (
                k + 1, k), prop='nesting')


def _record_doubling(system):
    largest, everything = 1.0, 1.0
    for cube in system.all_cubes():
        if cube.children:
            sizes = [child.measure for child in cube.children]
            largest = max(largest, cube.measure / max(sizes))
            everything = max(everything, cube.measure / min(sizes))
    system.largest_child_ratio = largest
    system.child_ratio = everything


def _finish(system, strict_sandwich=False):
    _assign(system)
    _make_cubes(system)
    _check_structure(system)
    c_in = math.inf
    for k in system.scales:
        geometry = scale_geometry(system, k)
        if geometry['separation'] < 1 - 1e-12:
            raise DyadicError("centers at scale %d closer than delta^k (ratio %g)" % (
                k, geometry['separation']), prop='separation')
        if geometry['covering'] > 1 + 1e-12:
            raise DyadicError("a point is farther than delta^k from all centers at "
                "scale %d (ratio %g)" % (k, geometry['covering']), prop='covering')
        if geometry['outer'] > 2 + 1e-12:
            raise DyadicError("a member of a scale-%d cube lies outside the outer "
                "ball (ratio %g)" % (k, geometry['outer']), prop='sandwich')
        c_in = min(c_in, geometry['c_in'])
    system.c_in = c_in
    if c_in < config.SANDWICH_TARGET:
        LOGGER.warning("system %s: inner sandwich constant %.4g below 1/6", system.tag, c_in)
        if strict_sandwich and c_in < config.SANDWICH_FLOOR:
            raise DyadicError("inner sandwich constant %g below 1/24" % c_in,
                    prop='sandwich')
    _record_doubling(system)
    LOGGER.debug("system %s built: scales %d..%d, c_in %.4g, child ratio %.4g",
            system.tag, system.k_min, system.k_max, c_in, system.child_ratio)
    return system


def _check_delta(delta):
    if not 0 < delta <= 0.5:
        raise ParameterError("delta must lie in (0, 1/2], got %r" % delta)


def build_dyadic_system(grid, delta=0.5, k_min=None, k_max=None, seed=0,
        tag=None, strict_sandwich=False):
    """Construct a system from nested seeded nets; see the module docstring."""
    _check_delta(delta)
    if seed < 0:
        raise ParameterError("seeds must be nonnegative")
    finest = finest_admissible_scale(grid, delta)
    k_max = finest if k_max is None else k_max
    if k_max > finest:
        raise DyadicError("k_max = %d is finer than the grid allows (%d)" % (
            k_max, finest), prop='scale')
    k_min = coarsest_scale(grid, delta, k_max) if k_min is None else k_min
    if k_min > k_max:
        raise ParameterError("k_min = %d exceeds k_max = %d" % (k_min, k_max))
    centers, previous = {}, None
    for k in range(k_min, k_max + 1):
        previous = build_net(grid, delta, k, (seed, k - k_min), previous)
        centers[k] = previous
    system = DyadicSystem(grid, delta, k_min, k_max, centers,
            tag=tag or 'S%d' % seed, seed=seed)
    return _finish(system, strict_sandwich)


def build_from_centers(grid, delta, centers, tag='explicit', strict_sandwich=False):
    """Build a system from explicitly given per-scale centers (a dict k ->
    indices); only the assignment and the checks run."""
    _check_delta(delta)
    scales = sorted(centers)
    if scales != list(range(scales[0], scales[-1] + 1)):
        raise ParameterError("centers must be given for a contiguous scale range")
    system = DyadicSystem(grid, delta, scales[0], scales[-1],
            {k: sorted(int(c) for c in centers[k]) for k in scales}, tag=tag)
    return _finish(system, strict_sandwich)


def verify_dyadic_properties(system):
    """Re-check every defining property from scratch and report the empirical
    constants."""
    report = {'tag': system.tag, 'scales': [system.k_min, system.k_max]}
    try:
        _check_structure(system)
        structure_ok, structure_msg = True, None
    except DyadicError as err:
        structure_ok, structure_msg = False, str(err)
    grid = system.grid
    partition_ok = all(np.array_equal(np.sort(np.concatenate(
        [c.members for c in system.cubes_at(k)])), np.arange(grid.n))
        for k in system.scales)
    separation, covering, outer, c_in = math.inf, 0.0, 0.0, math.inf
    for k in system.scales:
        geometry = scale_geometry(system, k)
        separation = min(separation, geometry['separation'])
        covering = max(covering, geometry['covering'])
        outer = max(outer, geometry['outer'])
        c_in = min(c_in, geometry['c_in'])
    _record_doubling(system)
    report['separation'] = {'passed': separation >= 1 - 1e-12, 'ratio': separation}
    report['covering'] = {'passed': covering <= 1 + 1e-12, 'ratio': covering}
    report['partition'] = {'passed': partition_ok and structure_ok}
    report['nesting'] = {'passed': structure_ok, 'message': structure_msg}
    report['sandwich'] = {'passed': outer <= 2 + 1e-12 and
            c_in >= config.SANDWICH_FLOOR, 'outer_ratio': outer, 'c_in': c_in,
            'target_met': c_in >= config.SANDWICH_TARGET}
    report['doubling'] = {'largest_child': system.largest_child_ratio,
            'all_children': system.child_ratio}
    report['passed'] = all(report[name]['passed'] for name in
            ('separation', 'covering', 'partition', 'nesting', 'sandwich'))
    return report


class DyadicBundle:
    """Independently seeded systems on one grid plus the calibrated
    containing-cube constant c0 (None until calibrated)."""

    def __init__(self, systems, c0=None):
        if not systems:
            raise ParameterError("a bundle needs at least one system")
        self.systems = list(systems)
        self.grid = systems[0].grid
        self.c0 = c0

    @property
    def primary(self):
        return self.systems[0]

    @property
    def child_ratio(self):
        return max(system.child_ratio for system in self.systems)

    def containing_cube(self, ball, cap=config.C0_CAP):
        return containing_cube(self, ball, cap)

    def describe(self):
        return {'systems': [s.describe() for s in self.systems], 'c0': self.c0}


def build_bundle(grid, delta=0.5, size=config.BUNDLE_SIZE, seed=0, k_min=None,
        k_max=None):
    """Systems seeded with seed, seed+1, ... seed+size-1."""
    systems = [build_dyadic_system(grid, delta, k_min, k_max, seed + i,
        tag='S%d' % i) for i in range(size)]
    return DyadicBundle(systems)


def finest_common_cube(system, members):
    """Finest cube of `system` containing all `members`, None if the members
    are spread over several roots."""
    for k in range(system.k_max, system.k_min - 1, -1):
        labels = system.labels[k][members]
        if np.all(labels == labels[0]):
            return system.cubes[(k, int(labels[0]))]
    return None


def containing_cube(bundle, ball, cap=config.C0_CAP):
    """Find Q with O(B) ∩ grid ⊆ Q ⊆ O(B(x, C r)) and the smallest C over the
    bundle. Returns (cube, inflation). `cap=None` disables the cap."""
    if isinstance(bundle, DyadicSystem):
        bundle = DyadicBundle([bundle])
    grid = bundle.grid
    ball = BallSpec(ball.center, ball.radius, 'dunkl')
    members = grid.ball_members(ball)
    if members.size == 0:
        raise DyadicError("ball B(%s, %g) contains no grid point" % (
            ball.center.tolist(), ball.radius), prop='containing')
    distances = grid.dunkl_distances_from(ball.center)
    best, best_inflation = None, math.inf
    for system in bundle.systems:
        cube = finest_common_cube(system, members)
        if cube is None:
            continue
        inflation = float(distances[cube.members].max()) / ball.radius
        if inflation < best_inflation:
            best, best_inflation = cube, inflation
    if best is None or (cap is not None and best_inflation > cap):
        raise DyadicError(("no cube of the bundle contains the ball B(%s, %g) within "
            "inflation cap %s (best %g)") % (ball.center.tolist(), ball.radius, cap,
                best_inflation), prop='containing')
    return best, max(best_inflation, 1.0)


def calibrate_c0(bundle, balls=200, seed=0):
    """Largest containing-cube inflation over seeded random orbit balls,
    rounded up; stored in the bundle."""
    grid = bundle.grid
    rng = np.random.default_rng(seed)
    width = float(np.min(grid.box[:, 1] - grid.box[:, 0]))
    lo_r = 2 * grid.cell_diagonal
    hi_r = max(lo_r, width / 4.0)
    worst = 1.0
    for _ in range(balls):
        center = grid.points[rng.integers(grid.n)]
        radius = float(np.exp(rng.uniform(np.log(lo_r), np.log(hi_r))))
        _, inflation = containing_cube(bundle, BallSpec(center, radius), cap=None)
        worst = max(worst, inflation)
    bundle.c0 = float(math.ceil(worst))
    LOGGER.debug("calibrated C0 = %g over %d balls", bundle.c0, balls)
    return bundle.c0


@dataclasses.dataclass
class SparseFamily:
    """Cubes with witness sets; witnesses[i] belongs to cubes[i]."""
    cubes: list
    witnesses: list
    theta: float = 0.5
    overlap: int = 1

    def __len__(self):
        return len(self.cubes)


def verify_sparse(family, grid):
    """Check E(Q) ⊆ Q, omega(E(Q)) >= theta omega(Q) and the overlap bound."""
    if len(family.cubes) != len(family.witnesses):
        raise ParameterError("every cube needs exactly one witness set")
    worst_ratio, subset_ok = math.inf, True
    counts = np.zeros(grid.n, dtype=np.int64)
    for cube, witness in zip(family.cubes, family.witnesses):
        witness = np.asarray(witness, dtype=np.int64)
        if witness.size and not np.all(np.isin(witness, cube.members)):
            subset_ok = False
        ratio = float(grid.weights[witness].sum()) / cube.measure if witness.size else 0.0
        worst_ratio = min(worst_ratio, ratio)
        counts[np.unique(witness)] += 1
    overlap = int(counts.max()) if len(family.cubes) else 0
    ok = subset_ok and overlap <= family.overlap and \
            worst_ratio >= family.theta * (1 - 1e-12)
    return ok, {'cubes': len(family.cubes), 'theta': family.theta,
            'min_ratio': worst_ratio if len(family.cubes) else None,
            'overlap': overlap, 'declared_overlap': family.overlap,
            'witness_in_cube': subset_ok}


