"""Weights on a grid: the weight catalog, Muckenhoupt constants over finite
ball and cube families, weighted BMO norms, median values, oscillations,
reverse Hölder exponents and the Rubio de Francia iteration.

All suprema are taken over a finite seeded family of point sets, so every
estimate is a lower bound of the corresponding continuous quantity."""

import dataclasses
import logging
import math

import numpy as np

from . import config
from .errors import ParameterError, WeightError
from .measure import BallSpec
from .operators import dunkl_maximal

LOGGER = logging.getLogger(__name__)

METRICS = {'dunkl_orbit': 'dunkl', 'euclidean': 'euclidean'}


def _radial_spread(grid, values):
    """Largest relative spread of `values` on a sphere |x| = const."""
    keys = np.rint(np.linalg.norm(grid.points, axis=1) / config.EQ_TOL).astype(np.int64)
    _, bins = np.unique(keys, return_inverse=True)
    high = np.full(bins.max() + 1, -np.inf)
    low = np.full(bins.max() + 1, np.inf)
    np.maximum.at(high, bins, values)
    np.minimum.at(low, bins, values)
    return float(np.max((high - low) / high))


class Weight:
    """Positive grid function; `radial` promises dependence on d(x, 0) only."""

    def __init__(self, grid, values, radial=False, tag='custom'):
        values = np.asarray(values, dtype=float)
        if values.shape != (grid.n,):
            raise WeightError("weight %s has %d values for %d grid points" % (
                tag, values.size, grid.n))
        if not np.all(np.isfinite(values)) or np.any(values <= 0):
            raise WeightError("weight %s is not positive and finite" % tag)
        if radial:
            spread = _radial_spread(grid, values)
            if spread > config.EQ_TOL:
                raise WeightError("weight %s declared radial but varies by %g on a "
                        "sphere" % (tag, spread))
        self.values = values
        self.radial = radial
        self.tag = tag

    def __repr__(self):
        return 'Weight(%s)' % self.tag


def _values(u):
    return u.values if isinstance(u, Weight) else np.asarray(u, dtype=float)


def make_weight(grid, expr, p=2.0):
    """Build a catalog weight from `const:c`, `dunkl_power:g`,
    `euclid_power:g[@a1,...,aN]` or `rdf:one|<seed>`."""
    kind, _, arg = expr.partition(':')
    norms = np.linalg.norm(grid.points, axis=1)
    try:
        if kind == 'const':
            return Weight(grid, np.full(grid.n, float(arg or 1.0)), True, expr)
        if kind == 'dunkl_power':
            clamped = np.maximum(norms, grid.cell_diagonal)
            return Weight(grid, clamped ** float(arg), True, expr)
        if kind == 'euclid_power':
            exponent, _, anchor = arg.partition('@')
            if anchor:
                anchor = np.array([float(a) for a in anchor.split(',')])
            else:
                anchor = grid.box.mean(axis=1)
                anchor[0] += (grid.box[0, 1] - grid.box[0, 0]) / 4
            if anchor.shape != (grid.dimension,):
                raise ParameterError("anchor of %r has the wrong dimension" % expr)
            distance = np.linalg.norm(grid.points - anchor, axis=1)
            values = np.maximum(distance, grid.cell_diagonal) ** float(exponent)
            return Weight(grid, values, False, expr)
    except ValueError:
        raise ParameterError("invalid weight expression %r" % expr) from None
    if kind == 'rdf':
        if arg == 'one':
            g = np.ones(grid.n)
        else:
            try:
                g = np.abs(np.random.default_rng(int(arg)).normal(size=grid.n))
            except ValueError:
                raise ParameterError("invalid weight expression %r" % expr) from None
        weight, _ = rubio_de_francia(grid, g, p)
        weight.tag = expr
        return weight
    raise ParameterError("unknown weight %r; known kinds: const, dunkl_power, "
            "euclid_power, rdf" % expr)


@dataclasses.dataclass
class Family:
    """Finite test family: `members[i]` are the sorted point indices of the
    i-th ball or cube."""
    kind: str
    members: list
    description: dict

    def __len__(self):
        return len(self.members)

    def __add__(self, other):
        return Family('mixed', self.members + other.members,
                {'parts': [self.description, other.description]})


def ball_family(grid, count=config.FAMILY_BALLS, seed=0, metric='dunkl_orbit',
        centers=None, radii=None):
    """Seeded balls with centers at grid points and log-uniform radii between
    two cell diagonals and half the box width. Explicit `centers` (points)
    and `radii` replace the random draw; they are paired up elementwise."""
    if metric not in METRICS:
        raise ParameterError("unknown ball metric %r" % metric)
    if centers is None or radii is None:
        rng = np.random.default_rng(seed)
        width = float(np.min(grid.box[:, 1] - grid.box[:, 0]))
        lo_r, hi_r = 2 * grid.cell_diagonal, max(2 * grid.cell_diagonal, width / 2)
        centers = grid.points[rng.integers(grid.n, size=count)]
        radii = np.exp(rng.uniform(np.log(lo_r), np.log(hi_r), size=count))
    members = []
    for center, radius in zip(centers, radii):
        ball = grid.ball_members(BallSpec(center, float(radius), METRICS[metric]))
        if ball.size and grid.measure(ball) > 0:
            members.append(ball)
    if not members:
        raise WeightError("ball family is empty")
    return Family('balls', members, {'kind': 'balls', 'metric': metric,
        'count': len(members), 'seed': seed,
        'radii': [float(np.min(radii)), float(np.max(radii))]})


def cube_family(system):
    return Family('cubes', [cube.members for cube in system.all_cubes()],
            {'kind': 'cubes', 'system': system.tag, 'count': len(system.cubes)})


def default_family(grid, system=None, count=config.FAMILY_BALLS, seed=0):
    """Orbit balls plus, if a system is given, all of its cubes."""
    family = ball_family(grid, count, seed)
    return family + cube_family(system) if system is not None else family


def _averages(grid, values, family):
    values = np.asarray(values, dtype=float)
    return np.array([grid.average(values, members) for members in family.members])


@dataclasses.dataclass
class ApReport:
    p: float
    estimate: float
    family: dict
    worst: int
    per_member: np.ndarray = dataclasses.field(repr=False)

    def as_dict(self):
        return {'p': self.p, 'estimate': self.estimate, 'family': self.family,
                'worst_member': self.worst}


def ap_constant(grid, u, p, family):
    """sup over the family of (avg u)(avg u^(-1/(p-1)))^(p-1)."""
    if not p > 1:
        raise ParameterError("A_p constants need p > 1, got %r" % p)
    if not len(family):
        raise WeightError("empty test family")
    values = _values(u)
    per_member = _averages(grid, values, family) * \
            _averages(grid, values ** (-1.0 / (p - 1)), family) ** (p - 1)
    worst = int(np.argmax(per_member))
    return ApReport(p, float(per_member[worst]), family.description, worst, per_member)


def a1_constant(grid, u, radii=None):
    """max of M_d u / u over the grid."""
    values = _values(u)
    if np.any(values <= 0):
        raise WeightError("A_1 constants need a positive weight")
    return float(np.max(dunkl_maximal(grid, values, radii) / values))


def orbit_closure(grid, indices):
    """Smallest orbit-closed index set containing `indices`."""
    indices = np.asarray(indices, dtype=np.int64)
    if indices.size == 0:
        return indices
    return np.unique(grid.perms[:, indices].ravel())


def verify_wp(grid, u, p, cube, subset, estimate=None):
    """(omega(E)/omega(Q))^p <= [u] u(E)/u(Q) for E ⊆ Q. `cube` is a member
    index array. Without `estimate` the constant of Q alone is used, which is
    what the family supremum reduces to when Q is a family member."""
    cube = np.asarray(cube, dtype=np.int64)
    subset = np.asarray(subset, dtype=np.int64)
    if not np.all(np.isin(subset, cube)):
        raise WeightError("E is not contained in Q")
    values = _values(u)
    local = ap_constant(grid, values, p, Family('cubes', [cube], {})).estimate
    constant = local if estimate is None else max(local, estimate)
    mass = grid.weights * values
    lhs = (grid.measure(subset) / grid.measure(cube)) ** p
    rhs = constant * float(mass[subset].sum()) / float(mass[cube].sum())
    holds = lhs <= rhs * (1 + config.NORM_TOL) + config.NORM_TOL
    return holds, {'lhs': lhs, 'rhs': rhs, 'constant': constant, 'local': local}


def verify_inclusion(grid, u, p, q, family):
    """[u]_{A_q} <= [u]_{A_p} on the same family for 1 < p < q."""
    if not 1 < p < q:
        raise ParameterError("need 1 < p < q, got p=%r, q=%r" % (p, q))
    small = ap_constant(grid, u, p, family).estimate
    large = ap_constant(grid, u, q, family).estimate
    holds = large <= small * (1 + config.NORM_TOL)
    return holds, {'p': p, 'q': q, 'estimate_p': small, 'estimate_q': large}


def reverse_holder(grid, u, family, cap=config.RH_CAP):
    """Largest gamma of the ladder 2^-1 ... 2^-8 with
    (avg u^(1+gamma))^(1/(1+gamma)) <= C avg u on every family member and
    C <= cap. Returns (gamma, C, report)."""
    if not isinstance(u, Weight) or not u.radial:
        raise WeightError("reverse Hölder estimates need a radial weight")
    mean = _averages(grid, u.values, family)
    ladder = []
    for gamma in config.RH_EXPONENTS:
        power = _averages(grid, u.values ** (1 + gamma), family) ** (1 / (1 + gamma))
        ratios = power / mean
        worst = int(np.argmax(ratios))
        ladder.append({'gamma': gamma, 'constant': float(ratios[worst]),
            'worst_member': worst})
    report = {'weight': u.tag, 'cap': cap, 'ladder': ladder, 'family': family.description}
    for entry in ladder:
        if entry['constant'] <= cap:
            return entry['gamma'], entry['constant'], report
    best = min(ladder, key=lambda entry: entry['constant'])
    err = WeightError("no exponent of the ladder reaches C <= %g; best gamma %g with "
            "C = %g" % (cap, best['gamma'], best['constant']))
    err.best = (best['gamma'], best['constant'])
    raise err


def oscillation(grid, b, region):
    """Omega(b, B) = avg over B of |b - b_B|."""
    b = np.asarray(b, dtype=float)
    region = np.asarray(region, dtype=np.int64)
    mean = grid.average(b, region)
    return grid.average(np.abs(b - mean), region)


def bmo_norm(grid, b, u, metric='dunkl_orbit', family=None):
    """sup over balls of u(B)^-1 int_B |b - b_B| domega; orbit balls for
    `dunkl_orbit`, Euclidean balls for `euclidean`."""
    if metric not in METRICS:
        raise ParameterError("unknown BMO metric %r" % metric)
    family = ball_family(grid, metric=metric) if family is None else family
    b = np.asarray(b, dtype=float)
    mass = grid.weights * _values(u)
    best = 0.0
    for members in family.members:
        deviation = oscillation(grid, b, members) * grid.measure(members)
        best = max(best, deviation / float(mass[members].sum()))
    return best


def median_value(grid, b, region):
    """Weighted median of b on `region`: the smallest value whose lower mass
    reaches half; on an exact half split the midpoint of the two straddling
    values."""
    region = np.asarray(region, dtype=np.int64)
    weights = grid.weights[region]
    total = float(weights.sum())
    if total <= 0:
        raise WeightError("median over a set of measure zero")
    values = np.asarray(b, dtype=float)[region]
    order = np.argsort(values, kind='stable')
    values, cumulative = values[order], np.cumsum(weights[order])
    half = total / 2
    k = int(np.searchsorted(cumulative, half * (1 - 1e-12)))
    k = min(k, len(values) - 1)
    # last occurrence of the same value
    k = int(np.searchsorted(values, values[k], side='right')) - 1
    if abs(cumulative[k] - half) <= 1e-12 * total and k + 1 < len(values):
        return float((values[k] + values[k + 1]) / 2)
    return float(values[k])


def _lp_norm(grid, f, exponent):
    return float(np.sum(np.abs(f) ** exponent * grid.weights) ** (1 / exponent))


def rubio_de_francia(grid, g, p, mdnorm=None, terms=20, probes=8, seed=0,
        radii=None):
    """phi(g) = sum_{k <= terms} M_d^k g / (2 mdnorm)^k on X = L^(p')(omega).

    `mdnorm` must dominate the empirical norm of M_d over seeded random
    probes, g and its iterates; if omitted that empirical value (at least 1)
    is used. Returns (Weight, report)."""
    if not p > 1:
        raise ParameterError("p must exceed 1, got %r" % p)
    if terms < 8:
        raise ParameterError("the iteration needs at least 8 terms, got %d" % terms)
    g = np.abs(np.asarray(g, dtype=float))
    if not np.any(g > 0):
        raise ParameterError("g vanishes identically")
    exponent = p / (p - 1)
    iterates = [g]
    for _ in range(terms + 1):
        iterates.append(dunkl_maximal(grid, iterates[-1], radii))
    empirical = max(_lp_norm(grid, iterates[k + 1], exponent) /
            _lp_norm(grid, iterates[k], exponent) for k in range(terms + 1))
    rng = np.random.default_rng(seed)
    for _ in range(probes):
        f = np.abs(rng.normal(size=grid.n))
        empirical = max(empirical, _lp_norm(grid, dunkl_maximal(grid, f, radii),
            exponent) / _lp_norm(grid, f, exponent))
    if mdnorm is None:
        mdnorm = max(1.0, empirical)
    elif mdnorm < empirical * (1 - config.NORM_TOL):
        raise ParameterError("mdnorm %g is below the empirical norm %g of M_d" % (
            mdnorm, empirical))
    scale = 2 * mdnorm
    phi = sum(iterates[k] / scale ** k for k in range(terms + 1))
    tail = iterates[terms + 1] / scale ** terms
    slack = float(np.max(tail / phi))
    maximal = dunkl_maximal(grid, phi, radii)
    norm_ratio = _lp_norm(grid, phi, exponent) / _lp_norm(grid, g, exponent)
    report = {
        'p': p, 'terms': terms, 'mdnorm': mdnorm, 'empirical_mdnorm': empirical,
        'norm_ratio': norm_ratio, 'norm_bound': norm_ratio <= 2 * (1 + config.NORM_TOL),
        'majorant': bool(np.all(g <= phi * (1 + config.NORM_TOL))),
        'a1_ratio': float(np.max(maximal / phi)), 'slack': slack,
        'a1_bound': bool(np.all(maximal <= (scale + slack) * phi * (1 + 1e-9))),
    }
    report['passed'] = report['norm_bound'] and report['majorant'] and report['a1_bound']
    if not report['passed']:
        LOGGER.warning("Rubio de Francia properties fail: %s", report)
    return Weight(grid, phi, False, 'rdf'), report
