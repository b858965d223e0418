"""Weighted norm inequalities measured on seeded trials: the sparse operator
and T on L^p(u), the two-weight commutator bound, the median-value lower
bound chain for commutators and the Rubio de Francia transfer estimate."""

import dataclasses
import logging
import math
import statistics

import numpy as np

from . import config
from .errors import BoundsError, ParameterError
from .operators import commutator, dunkl_maximal, l2_opnorm
from .probes import trial_functions
from .sparse import sparse_family_commutator, sparse_family_T, sparse_operator
from .weights import Family, Weight, a1_constant, ap_constant, ball_family, \
        bmo_norm, median_value, oscillation, rubio_de_francia

LOGGER = logging.getLogger(__name__)


def weighted_norm(grid, u, p, f):
    """(sum |f_i|^p u_i w_i)^(1/p)."""
    if p < 1:
        raise ParameterError("weighted norms need p >= 1, got %r" % p)
    u = u.values if isinstance(u, Weight) else np.asarray(u, dtype=float)
    f = np.asarray(f, dtype=float)
    return float(np.sum(np.abs(f) ** p * u * grid.weights) ** (1.0 / p))


def ap_exponent(p):
    """max(p'/p, 1) = max(1/(p-1), 1)."""
    return max(1.0, 1.0 / (p - 1))


def batch_maxima(rows, batches=config.SEED_BATCHES):
    """Maximum ratio per batch: the distinct trial seeds (row positions for
    rows without a seed) are split into at most `batches` consecutive groups,
    rows sharing a seed land in the same batch."""
    seeds = [row.get('seed', index) for index, row in enumerate(rows)]
    distinct = sorted(set(seeds))
    if not distinct:
        return []
    groups = np.array_split(np.arange(len(distinct)), min(batches, len(distinct)))
    batch_of = {distinct[i]: k for k, group in enumerate(groups) for i in group}
    highs = [0.0] * len(groups)
    for seed, row in zip(seeds, rows):
        highs[batch_of[seed]] = max(highs[batch_of[seed]], float(row['ratio']))
    return highs


def seed_spread(rows, batches=config.SEED_BATCHES):
    """max / min of the batch maxima; 1 for a single batch, None without rows
    or when every ratio vanishes, inf when only some batches vanish."""
    highs = batch_maxima(rows, batches)
    if not highs or max(highs) <= 0:
        return None
    return max(highs) / min(highs) if min(highs) > 0 else math.inf


def stability(rows, resolution_factor=None, batches=config.SEED_BATCHES):
    return {'resolution_factor': resolution_factor, 'seed_spread': seed_spread(rows,
        batches), 'batches': len(batch_maxima(rows, batches))}


def is_stable(summary, factor=config.STABILITY_FACTOR, batches=config.SEED_BATCHES):
    """The seed spread is bounded by `factor` once all `batches` batches are
    populated; the resolution factor, when measured, lies in [1/factor, factor]."""
    spread = summary.get('seed_spread')
    if summary.get('batches', 0) >= batches and spread is not None and spread > factor:
        return False
    change = summary.get('resolution_factor')
    return change is None or 1.0 / factor <= change <= factor


@dataclasses.dataclass
class NormReport:
    """Per-trial ratios of one experiment together with every constant used."""
    experiment: str
    p: float
    weights: dict
    trials: list
    constants: dict
    extras: dict = dataclasses.field(default_factory=dict)
    resolution_factor: float = None

    @property
    def ratios(self):
        return [trial['ratio'] for trial in self.trials]

    @property
    def max_ratio(self):
        return max(self.ratios, default=0.0)

    @property
    def median_ratio(self):
        return statistics.median(self.ratios) if self.trials else 0.0

    def seed_spread(self, batches=config.SEED_BATCHES):
        return seed_spread(self.trials, batches)

    def stability(self):
        return stability(self.trials, self.resolution_factor)

    @property
    def passed(self):
        return bool(np.all(np.isfinite(self.ratios))) and \
                all(trial.get('holds', True) for trial in self.trials) and \
                self.extras.get('holds', True) and is_stable(self.stability())

    def as_dict(self):
        result = {'experiment': self.experiment, 'p': self.p, 'trials': len(self.trials),
                'max_ratio': self.max_ratio, 'median_ratio': self.median_ratio,
                'constants': self.constants, 'passed': self.passed, 'rows': self.trials,
                'stability': self.stability()}
        result.update(self.weights)
        result.update(self.extras)
        return result


def _cube_family(family):
    return Family('cubes', [cube.members for cube in family.cubes],
            {'kind': 'cubes', 'count': len(family)})


def _trial_inputs(grid, trials, seed, u, p):
    """Seeded trial functions followed by dual-weight probes
    u^(-1/(p-1)) 1_B on the trial supports."""
    base = trial_functions(grid, trials, seed)
    sigma = u.values ** (-1.0 / (p - 1))
    inputs = [(s, kind, f, ball) for s, f, ball, kind in base]
    for s, _, ball, _ in base:
        dual = np.zeros(grid.n)
        members = grid.ball_members(ball)
        dual[members] = sigma[members]
        inputs.append((s, 'dual', dual, ball))
    return inputs


def verify_sparse_weighted_bound(grid, family, u, p, trials=20, seed=0,
        ap_family=None):
    """sup over trials of |A f|_{L^p(u)} / |f|_{L^p(u)}, reported next to
    [u]_{A_p}^max(p'/p, 1)."""
    if not len(family):
        raise BoundsError("the sparse family is empty")
    ap_family = ap_family or (ball_family(grid, seed=seed) + _cube_family(family))
    estimate = ap_constant(grid, u, p, ap_family).estimate
    power = estimate ** ap_exponent(p)
    rows = []
    for trial_seed, kind, f, _ in _trial_inputs(grid, trials, seed, u, p):
        ratio = weighted_norm(grid, u, p, sparse_operator(family, grid, f)) / \
                weighted_norm(grid, u, p, f)
        rows.append({'seed': trial_seed, 'kind': kind, 'ratio': ratio,
            'normalized': ratio / power})
    return NormReport('sparse_weighted', p, {'u': u.tag}, rows,
            {'ap': estimate, 'exponent': ap_exponent(p), 'ap_power': power,
                'family_size': len(family)})


def verify_T_weighted(setting, u, p, trials=10, seed=0):  # pylint: disable=invalid-name
    """|T f|_{L^p(u)} / |f|_{L^p(u)} per trial, together with the literal
    composition |Tf| <= ratio A f  =>  |Tf|_p <= ratio |A f|_p + residual."""
    grid, op = setting.grid, setting.op
    rows, estimates = [], []
    for trial_seed, f, ball, kind in trial_functions(grid, trials, seed, setting.system):
        family, report = sparse_family_T(setting, f, ball, seed=trial_seed)
        tf = op.apply(f)
        dominator = sparse_operator(report.recubed, grid, f)
        residual = weighted_norm(grid, u, p, np.where(dominator > 0, 0.0, tf))
        norm_tf = weighted_norm(grid, u, p, tf)
        norm_af = weighted_norm(grid, u, p, dominator)
        norm_f = weighted_norm(grid, u, p, f)
        bound = report.ratio * norm_af + residual
        rows.append({'seed': trial_seed, 'kind': kind, 'ratio': norm_tf / norm_f,
            'sparse_ratio': report.ratio, 'dominator_ratio': norm_af / norm_f,
            'residual': residual, 'family_size': len(family),
            'holds': norm_tf <= bound * (1 + 1e-9) + 1e-300})
        estimates.append(report.constants)
    extras = {}
    constant = np.allclose(u.values, u.values[0], rtol=config.NORM_TOL)
    if constant and p == 2:
        opnorm = l2_opnorm(op)
        best = max(row['ratio'] for row in rows) if rows else 0.0
        extras['l2_opnorm'] = opnorm
        extras['l2_factor'] = opnorm / best if best > 0 else None
        if best > 0:
            extras['holds'] = 1.0 / config.L2_AGREEMENT <= extras['l2_factor'] <= \
                    config.L2_AGREEMENT
        else:
            # T f = 0 on every trial: only the zero operator agrees
            extras['holds'] = opnorm <= config.NORM_TOL
    return NormReport('T_weighted', p, {'u': u.tag, 'kernel': op.kernel.name}, rows,
            dict(setting.constants(), C_E=max((e['C_E'] or 0 for e in estimates),
                default=None)), extras)


def _commutator_pieces(grid, family, b, f):
    """sum_Q avg_Q|f| |b - b_Q| 1_Q and sum_Q avg_Q|(b - b_Q) f| 1_Q."""
    first, second = np.zeros(grid.n), np.zeros(grid.n)
    absf = np.abs(f)
    for cube in family.cubes:
        shifted = np.abs(b - grid.average(b, cube.members))
        first[cube.members] += grid.average(absf, cube.members) * shifted[cube.members]
        second[cube.members] += grid.average(shifted * absf, cube.members)
    return first, second


def verify_commutator_two_weight(setting, b, u, v, p, trials=10, seed=0,
        family=None, b_tag='custom'):
    """|[b,T] f|_{L^p(v)} / |f|_{L^p(u)} normalized by |b|_{BMO^d_theta},
    theta = (u/v)^(1/p); the two sparse pieces B1, B2 are reported per trial."""
    grid, op = setting.grid, setting.op
    b = np.asarray(b, dtype=float)
    theta = Weight(grid, (u.values / v.values) ** (1.0 / p), False,
            '(%s/%s)^(1/%g)' % (u.tag, v.tag, p))
    family = family or ball_family(grid, seed=seed)
    bmo = bmo_norm(grid, b, theta, 'dunkl_orbit', family)
    if bmo <= config.NORM_TOL * (1.0 + float(np.max(np.abs(b)))):
        raise BoundsError("b has vanishing BMO norm; the normalized ratio is undefined")
    rows = []
    for trial_seed, f, ball, kind in trial_functions(grid, trials, seed, setting.system):
        _, report = sparse_family_commutator(setting, b, f, ball, seed=trial_seed)
        value = commutator(op, b, f)
        norm_f = weighted_norm(grid, u, p, f)
        ratio = weighted_norm(grid, v, p, value) / norm_f
        first, second = _commutator_pieces(grid, report.recubed, b, f)
        b1 = weighted_norm(grid, v, p, first)
        b2 = weighted_norm(grid, v, p, second)
        rows.append({'seed': trial_seed, 'kind': kind, 'ratio': ratio,
            'normalized': ratio / bmo, 'B1': b1 / norm_f, 'B2': b2 / norm_f,
            'sparse_ratio': report.ratio,
            'splitting_holds': report.splitting['holds'] if report.splitting else True})
    constants = {'bmo_theta': bmo, 'ap_u': ap_constant(grid, u, p, family).estimate,
            'ap_v': ap_constant(grid, v, p, family).estimate,
            'exponent': ap_exponent(p)}
    constants.update(setting.constants())
    return NormReport('commutator_two_weight', p, {'u': u.tag, 'v': v.tag,
        'theta': theta.tag, 'b': b_tag}, rows, constants)


def _link(holds, constant, **details):
    return dict(details, holds=bool(holds), constant=float(constant))


def _quotient(lhs, rhs, noise):
    if lhs <= noise:
        return 0.0
    return lhs / rhs if rhs > 0 else float('inf')


def median_split(grid, b, region):
    """E1 = the longest prefix of `region` sorted by b with mass at most half,
    E2 = the rest; returns (E1, E2, median)."""
    region = np.asarray(region, dtype=np.int64)
    median = median_value(grid, b, region)
    order = region[np.lexsort((region, np.asarray(b, dtype=float)[region]))]
    cumulative = np.cumsum(grid.weights[order])
    half = grid.measure(region) / 2
    cut = int(np.searchsorted(cumulative, half * (1 + 1e-12), side='right'))
    return np.sort(order[:cut]), np.sort(order[cut:]), median


def lower_bound_experiment(grid, op, b, u, v, p, center, radius, family=None):
    """Evaluate every link of the median-value lower bound chain on the ball
    B0 = B(center, radius) and its shift by 5 radius along the kernel's
    direction. `u` must be radial."""
    if op.kernel.axis is None:
        raise BoundsError("the lower bound needs a kernel with a direction")
    if not isinstance(u, Weight) or not u.radial:
        raise BoundsError("the lower bound chain needs a radial weight u")
    b = np.asarray(b, dtype=float)
    center = np.asarray(center, dtype=float)
    shifted = center.copy()
    shifted[op.kernel.axis] += 5 * radius
    if not grid.contains_ball(center, radius) or not grid.contains_ball(shifted, radius):
        raise BoundsError("B0 = B(%s, %g) or its shift does not fit into the box" % (
            center.tolist(), radius))
    ball = grid.euclidean_ball(center, radius)
    far = grid.euclidean_ball(shifted, radius)
    if not ball.size or not far.size:
        raise BoundsError("B0 or its shift contains no grid point")
    noise = config.NORM_TOL * (1.0 + float(np.max(np.abs(b))))

    first, second, median = median_split(grid, b, far)
    cell = float(grid.weights[far].max())
    half = grid.measure(far) / 2
    deviation = max(abs(grid.measure(first) - half), abs(grid.measure(second) - half))
    split_ok = np.array_equal(np.union1d(first, second), far) and \
            not np.intersect1d(first, second).size and deviation <= cell * (1 + 1e-9) and \
            (not first.size or b[first].max() <= median) and \
            (not second.size or b[second].min() >= median)
    links = [_link(split_ok, deviation / cell, name='median_split', median=median)]

    osc = oscillation(grid, b, ball)
    to_median = grid.average(np.abs(b - median), ball)
    links.append(_link(osc <= 2 * to_median * (1 + 1e-12) + noise,
        _quotient(osc, 2 * to_median, noise), name='oscillation_by_median'))

    kernel = op.kernel.matrix(grid.points[ball], grid.points[far])
    lower = float(np.min(np.abs(kernel))) * grid.measure(ball)
    same_sign = bool(np.all(kernel > 0) or np.all(kernel < 0))
    links.append(_link(same_sign and lower > 0, lower, name='kernel_lower_bound'))

    tests = []
    for part in (first, second):
        indicator = np.zeros(grid.n)
        indicator[part] = 1.0
        tests.append(indicator)
    values = [commutator(op, b, f) for f in tests]
    mass = grid.measure(ball)
    averaged = sum(float(np.dot(np.abs(c[ball]), grid.weights[ball])) for c in values) / mass
    quotient = _quotient(osc, averaged, noise)
    links.append(_link(np.isfinite(quotient), quotient, name='oscillation_by_commutator'))

    theta = (u.values / v.values) ** (1.0 / p)
    avg_u = grid.average(u.values, ball)
    root = grid.average(u.values ** (1.0 / (p + 1)), ball) ** (p + 1)
    holder = grid.average(theta, ball) ** p * grid.average(v.values, ball)
    links.append(_link(root <= holder * (1 + 1e-9), root / holder, name='holder'))
    links.append(_link(np.isfinite(avg_u / root), avg_u / root, name='reverse_holder'))

    norm = max(weighted_norm(grid, v, p, c) / weighted_norm(grid, u, p, f)
            for c, f in zip(values, tests) if np.any(f))
    family = family or ball_family(grid)
    ap_v = ap_constant(grid, v, p, family).estimate
    lhs = osc * mass / float(np.dot(theta[ball], grid.weights[ball]))
    quotient = _quotient(lhs, norm * ap_v ** (1.0 / p), noise)
    links.append(_link(np.isfinite(quotient), quotient, name='bmo_by_operator_norm',
        operator_norm=norm, ap_v=ap_v))
    return {'experiment': 'lower_bound', 'p': p, 'center': center.tolist(),
            'radius': radius, 'shifted_center': shifted.tolist(),
            'measures': {'B0': mass, 'shifted': grid.measure(far),
                'E1': grid.measure(first), 'E2': grid.measure(second)},
            'links': links, 'passed': all(link['holds'] for link in links)}


def rdf_transfer_check(setting, p, trials=10, seed=0, terms=20):
    """int |T f| phi(g) <= C [phi(g)]_{A_1} int M_d f phi(g) with
    phi = rubio_de_francia(g); g = 1 is always the first probe."""
    grid, op = setting.grid, setting.op
    rows = []
    probes = trial_functions(grid, trials, seed, setting.system)
    for index, (trial_seed, f, _, kind) in enumerate(probes):
        if index == 0:
            g, tag = np.ones(grid.n), 'one'
        else:
            g = np.abs(np.random.default_rng(trial_seed).normal(size=grid.n))
            tag = 'seed:%d' % trial_seed
        phi, properties = rubio_de_francia(grid, g, p, terms=terms, seed=trial_seed)
        a1 = a1_constant(grid, phi)
        lhs = float(np.dot(np.abs(op.apply(f)) * phi.values, grid.weights))
        rhs = a1 * float(np.dot(dunkl_maximal(grid, f) * phi.values, grid.weights))
        ratio = lhs / rhs if rhs > 0 else (0.0 if lhs == 0 else float('inf'))
        rows.append({'seed': trial_seed, 'kind': kind, 'g': tag, 'ratio': ratio,
            'a1': a1, 'slack': properties['slack'], 'norm_ratio': properties['norm_ratio'],
            'holds': bool(properties['passed'] and np.isfinite(ratio))})
    constant = max((row['ratio'] for row in rows), default=0.0)
    return NormReport('rdf_transfer', p, {'kernel': op.kernel.name}, rows,
            {'C': constant, 'terms': terms})
