"""Sparse domination of a discrete Calderón-Zygmund operator and of its
commutators.

The construction follows the usual stopping-time argument on the primary
system of a dyadic bundle:

* the support ball of f is surrounded by annuli, each annulus is covered
  greedily by small orbit balls and every covering ball is placed in the
  finest cube containing it; the maximal ones among those cubes are the top
  cubes,
* on a cube Q with dilate D(Q) the exceptional set collects the points where
  the orbit sum of |f| or the local grand maximal function exceeds C_E times
  the average of |f| over D(Q); C_E is doubled until the set is small,
* the maximal subcubes which meet the exceptional set in a large proportion
  become the next generation and the recursion continues on them with f cut
  off to their own dilates.

Every cube P of the resulting tree owns the witness P minus its children,
which makes the family 1/2-sparse with disjoint witnesses. Finally every
dilate is placed in a cube of the bundle; those cubes carry the sparse
operator the domination ratios are measured against."""

import collections
import dataclasses
import logging
import math

import numpy as np

from . import config
from .dyadic import SparseFamily, calibrate_c0, containing_cube, \
        finest_common_cube, verify_sparse
from .errors import ParameterError, SparseError
from .measure import BallSpec, inflate
from .operators import commutator, local_grand_maximal
from .weights import oscillation

LOGGER = logging.getLogger(__name__)


def ctilde0_from(c0):
    return 4.0 * (math.floor(2 * c0) + 1)


@dataclasses.dataclass
class SparseSetting:
    """Everything the construction needs besides f (and b)."""
    grid: object
    op: object
    bundle: object
    ctilde0: float
    ctilde_d: float
    max_depth: int = config.MAX_DEPTH

    @property
    def system(self):
        return self.bundle.primary

    def constants(self):
        return {'C0': self.bundle.c0, 'Ctilde0': self.ctilde0,
                'Ctilde_d': self.ctilde_d}


def make_setting(op, bundle, ctilde0=None, max_depth=config.MAX_DEPTH,
        calibration_balls=200, seed=0):
    """Calibrate C0 on the bundle if needed and derive
    Ctilde0 = 4(floor(2 C0) + 1) and Ctilde_d from the primary system."""
    if bundle.c0 is None:
        calibrate_c0(bundle, calibration_balls, seed)
    ctilde0 = ctilde0_from(bundle.c0) if ctilde0 is None else float(ctilde0)
    if ctilde0 < 4:
        raise ParameterError("Ctilde0 must be at least 4, got %g" % ctilde0)
    if max_depth < 1:
        raise ParameterError("max_depth must be positive")
    LOGGER.debug("sparse setting: C0 %g, Ctilde0 %g, Ctilde_d %g", bundle.c0,
            ctilde0, bundle.primary.child_ratio)
    return SparseSetting(op.grid, op, bundle, ctilde0, bundle.primary.child_ratio,
            max_depth)


def dilate_radius(setting, cube):
    """Radius of Ctilde0 B(Q), B(Q) being the outer ball of radius 2 l(Q)."""
    return setting.ctilde0 * 2 * cube.sidelength


def _dilate(setting, center, radius):
    return setting.grid.dunkl_distances()[center] <= inflate(radius)


@dataclasses.dataclass
class _Field:
    average: float
    orbit: np.ndarray
    maximal: np.ndarray


def _field(setting, g, cube, dilate):
    grid = setting.grid
    g = np.asarray(g, dtype=float)
    average = grid.average(np.abs(g), np.flatnonzero(dilate))
    if average <= 0:
        return _Field(0.0, None, None)
    orbit = grid.orbit_sum(np.abs(g))[cube.members]
    maximal = local_grand_maximal(setting.op, g, setting.ctilde0, cube.center,
            2 * cube.sidelength, dilate)[cube.members]
    return _Field(average, orbit, maximal)


def _hits(cube, fields, c_e):
    orbit_hit = np.zeros(len(cube.members), dtype=bool)
    maximal_hit = np.zeros(len(cube.members), dtype=bool)
    for field in fields:
        if field.average > 0:
            orbit_hit |= field.orbit > c_e * field.average
            maximal_hit |= field.maximal > c_e * field.average
    return orbit_hit, maximal_hit


def _calibrate(grid, cube, fields, ctilde_d):
    bound = cube.measure / (4 * ctilde_d)
    c_e = 1.0
    while c_e <= config.CE_LIMIT:
        orbit_hit, maximal_hit = _hits(cube, fields, c_e)
        if grid.measure(cube.members[orbit_hit | maximal_hit]) <= bound:
            return c_e
        c_e *= 2
    raise SparseError("no C_E up to 2^40 makes the exceptional set of cube %s small;"
            " check the kernel" % (cube.key,))


@dataclasses.dataclass
class ExceptionalSet:
    cube: object
    points: np.ndarray
    c_e: float
    orbit_part: np.ndarray
    maximal_part: np.ndarray
    measure: float
    average: float


def _exceptional(grid, cube, fields, c_e):
    orbit_hit, maximal_hit = _hits(cube, fields, c_e)
    points = cube.members[orbit_hit | maximal_hit]
    return ExceptionalSet(cube, points, c_e, cube.members[orbit_hit],
            cube.members[maximal_hit], grid.measure(points),
            max(field.average for field in fields))


def _checked_field(setting, f, cube, dilate):
    dilate = _dilate(setting, cube.center, dilate_radius(setting, cube)) \
            if dilate is None else dilate
    field = _field(setting, f, cube, dilate)
    if field.average <= 0:
        raise SparseError("f vanishes on the dilate of cube %s" % (cube.key,),
                point=cube.center)
    return field


def exceptional_set(setting, f, cube, c_e, dilate=None):
    """E = points of `cube` with sum_g |f(g x)| > C_E a or
    M_{T,B(Q)} f(x) > C_E a, where a is the average of |f| over the dilate."""
    if not c_e > 0:
        raise ParameterError("C_E must be positive, got %r" % c_e)
    field = _checked_field(setting, f, cube, dilate)
    return _exceptional(setting.grid, cube, [field], c_e)


def calibrate_CE(setting, f, cube, dilate=None):  # pylint: disable=invalid-name
    """Smallest C_E = 2^m with omega(E) <= omega(Q) / (4 Ctilde_d)."""
    field = _checked_field(setting, f, cube, dilate)
    return _calibrate(setting.grid, cube, [field], setting.ctilde_d)


def _as_mask(n, points):
    points = np.asarray(points)
    if points.dtype == bool:
        return points
    mask = np.zeros(n, dtype=bool)
    mask[points.astype(np.int64)] = True
    return mask


def cz_select(system, exceptional, base, ctilde_d):
    """Maximal strict subcubes P of `base` with
    omega(P ∩ E) > omega(P) / (2 Ctilde_d), found top-down."""
    grid = system.grid
    mask = _as_mask(grid.n, exceptional)
    threshold = 1.0 / (2 * ctilde_d)

    def hit(cube):
        return grid.measure(cube.members[mask[cube.members]])

    if hit(base) > threshold * base.measure * (1 + 1e-12):
        raise SparseError("the base cube %s itself meets the exceptional set above "
                "height 1/(2 Ctilde_d); recalibrate C_E" % (base.key,))
    selected, stack = [], list(reversed(base.children))
    while stack:
        cube = stack.pop()
        if hit(cube) > threshold * cube.measure:
            selected.append(cube)
        else:
            stack.extend(reversed(cube.children))
    return sorted(selected, key=lambda cube: (cube.scale, cube.index))


def check_selection(system, exceptional, base, selected):
    """Upper half bound, disjointness and the exceptional mass missed by the
    selection (finest-scale leakage)."""
    grid = system.grid
    mask = _as_mask(grid.n, exceptional)
    covered = np.zeros(grid.n, dtype=bool)
    disjoint, upper = True, 0.0
    for cube in selected:
        if covered[cube.members].any():
            disjoint = False
        covered[cube.members] = True
        upper = max(upper, grid.measure(cube.members[mask[cube.members]]) / cube.measure)
    inside = np.zeros(grid.n, dtype=bool)
    inside[base.members] = True
    leakage = grid.measure(np.flatnonzero(mask & inside & ~covered))
    total = sum(cube.measure for cube in selected)
    return {'selected': len(selected), 'disjoint': disjoint,
            'upper_half': upper <= 0.5 * (1 + 1e-12), 'largest_fraction': upper,
            'leakage': leakage, 'total_measure': total,
            'half_bound': total <= 0.5 * base.measure * (1 + 1e-12)}


@dataclasses.dataclass(eq=False)
class ClaimNode:
    """One cube of the stopping tree together with its cut-off function."""
    cube: object
    radius: float
    dilate: np.ndarray = dataclasses.field(repr=False)
    function: np.ndarray = dataclasses.field(repr=False)
    generation: int
    average: float
    recube: object = None
    c_e: float = None
    exceptional_measure: float = 0.0
    children: list = dataclasses.field(default_factory=list)
    witness: np.ndarray = dataclasses.field(default=None, repr=False)
    selection: dict = None


def _recube(setting, cube, radius):
    ball = BallSpec(setting.grid.points[cube.center], radius)
    return containing_cube(setting.bundle, ball, cap=None)[0]


def _grow(setting, top, radius, f, parts):
    """Run the stopping-time recursion below `top`; `parts(F, node)` lists
    the functions whose exceptional sets are united."""
    grid = setting.grid
    nodes = []
    queue = collections.deque([(top, radius, f, 0)])
    while queue:
        cube, radius, parent_function, generation = queue.popleft()
        if generation > setting.max_depth:
            raise SparseError("stopping-time recursion deeper than %d" % setting.max_depth,
                    point=cube.center)
        dilate = _dilate(setting, cube.center, radius)
        function = np.where(dilate, parent_function, 0.0)
        average = grid.average(np.abs(function), np.flatnonzero(dilate))
        if average <= 0:
            continue
        node = ClaimNode(cube, radius, dilate, function, generation, average)
        node.recube = _recube(setting, cube, radius)
        nodes.append(node)
        if not cube.children:
            node.witness = cube.members
            continue
        fields = [_field(setting, g, cube, dilate) for g in parts(function, node)]
        fields = [field for field in fields if field.average > 0]
        node.c_e = _calibrate(grid, cube, fields, setting.ctilde_d)
        exceptional = _exceptional(grid, cube, fields, node.c_e)
        node.exceptional_measure = exceptional.measure
        node.children = cz_select(setting.system, exceptional.points, cube,
                setting.ctilde_d)
        node.selection = check_selection(setting.system, exceptional.points, cube,
                node.children)
        if node.children:
            covered = np.concatenate([child.members for child in node.children])
            node.witness = np.setdiff1d(cube.members, covered)
        else:
            node.witness = cube.members
        for child in node.children:
            queue.append((child, dilate_radius(setting, child), function, generation + 1))
    return nodes


def _support_ball(grid, f):
    support = grid.points[np.flatnonzero(f)]
    center = (support.min(axis=0) + support.max(axis=0)) / 2
    radius = float(np.max(np.linalg.norm(support - center, axis=1)))
    return BallSpec(center, max(radius, grid.cell_diagonal / 2), 'euclidean')


def top_cubes(setting, f, ball):
    """Cover the annuli around the support ball and return the maximal
    primary cubes containing the covering balls, plus the ball counts."""
    grid, system = setting.grid, setting.system
    distances = grid.dunkl_distances()
    from_center = grid.dunkl_distances_from(ball.center)
    found, annuli = {}, []
    i = -1
    while 2.0 ** i * ball.radius <= grid.diameter:
        outer = from_center <= inflate(2.0 ** (i + 1) * ball.radius)
        annulus = outer & (from_center > 2.0 ** i * ball.radius) if i >= 0 else outer
        radius = 2.0 ** (i + 2) * ball.radius / setting.ctilde0
        pending, count = annulus.copy(), 0
        while pending.any():
            point = int(np.argmax(pending))
            inside = distances[point] <= inflate(radius)
            pending &= ~inside
            count += 1
            cube = finest_common_cube(system, np.flatnonzero(inside))
            if cube is None:
                raise SparseError("no cube of %s contains the covering ball at point %d"
                        % (system.tag, point), point=point)
            found[(cube.scale, cube.index)] = cube
        annuli.append({'i': i, 'balls': count})
        i += 1
    kept, keys = [], set()
    for cube in sorted(found.values(), key=lambda cube: (cube.scale, cube.index)):
        ancestor = cube.parent
        while ancestor is not None and (ancestor.scale, ancestor.index) not in keys:
            ancestor = ancestor.parent
        if ancestor is None:
            kept.append(cube)
            keys.add((cube.scale, cube.index))
    return kept, annuli


def sparse_operator(family, grid, f):
    """A f = sum over the family of avg_Q |f| 1_Q."""
    absf = np.abs(np.asarray(f, dtype=float))
    result = np.zeros(grid.n)
    for cube in family.cubes:
        result[cube.members] += grid.average(absf, cube.members)
    return result


def _ratio(target, dominator):
    positive = dominator > 0
    if not positive.any():
        return 0.0
    return float(np.max(np.abs(target[positive]) / dominator[positive]))


def _check_coverage(target, dominator, what):
    scale = float(np.max(np.abs(target))) if target.size else 0.0
    uncovered = np.flatnonzero((np.abs(target) > config.COVERAGE_TOL * scale) &
            ~(dominator > 0))
    if uncovered.size:
        raise SparseError("%s does not cover point %d where the target is %g" % (
            what, uncovered[0], target[uncovered[0]]), point=int(uncovered[0]))


def _recubed_family(nodes):
    """Group nodes by the bundle cube their dilate lies in; witnesses of a
    group are united. Every witness keeps half of its tree cube, so the
    family is theta-sparse with theta = min omega(Q) / (2 omega(recube(Q)))."""
    cubes, witnesses, index = [], [], {}
    for node in nodes:
        key = node.recube.key
        if key not in index:
            index[key] = len(cubes)
            cubes.append(node.recube)
            witnesses.append(node.witness)
        else:
            witnesses[index[key]] = np.union1d(witnesses[index[key]], node.witness)
    theta = min((0.5 * node.cube.measure / node.recube.measure for node in nodes),
            default=0.5)
    return SparseFamily(cubes, witnesses, theta=theta * (1 - 1e-9), overlap=1)


@dataclasses.dataclass
class SparseDominationReport:
    kernel: str
    family: SparseFamily = dataclasses.field(repr=False)
    recubed: SparseFamily = dataclasses.field(repr=False)
    ratio: float
    claim_ratio: float
    coverage_ok: bool
    constants: dict
    depth: int
    generations: list
    annuli: list
    support_enlargements: list
    leakage: float
    sparse_check: dict
    recubed_check: dict
    splitting: dict = None
    seed: int = None

    def as_dict(self):
        return {'kernel': self.kernel, 'seed': self.seed,
                'family_size': len(self.family), 'recubed_size': len(self.recubed),
                'theta_verified': self.sparse_check.get('passed', True),
                'max_ratio': self.ratio, 'claim_ratio': self.claim_ratio,
                'coverage_ok': self.coverage_ok, 'constants': self.constants,
                'depth': self.depth, 'generations': self.generations,
                'annuli': self.annuli, 'support_enlargements': self.support_enlargements,
                'leakage': self.leakage, 'sparse': self.sparse_check,
                'recubed_sparse': self.recubed_check, 'splitting': self.splitting}


def _generations(nodes):
    totals = {}
    for node in nodes:
        count, mass = totals.get(node.generation, (0, 0.0))
        totals[node.generation] = (count + 1, mass + node.cube.measure)
    rows = [{'generation': g, 'cubes': c, 'measure': m}
            for g, (c, m) in sorted(totals.items())]
    bound = all(node.selection is None or node.selection['half_bound'] for node in nodes)
    return rows, bound


def _construct(setting, f, ball, parts):
    grid = setting.grid
    if ball is None:
        ball = _support_ball(grid, f)
    tops, annuli = top_cubes(setting, f, ball)
    support = np.flatnonzero(f)
    distances = grid.dunkl_distances()
    nodes, enlargements = [], []
    for top in tops:
        radius = dilate_radius(setting, top)
        reach = float(distances[top.center, support].max())
        if reach > radius:
            enlargements.append({'cube': list(top.key), 'radius': radius,
                'enlarged': reach})
            radius = reach
        nodes.extend(_grow(setting, top, radius, f, parts))
    family = SparseFamily([node.cube for node in nodes],
            [node.witness for node in nodes], theta=0.5, overlap=1)
    ok, sparse_check = verify_sparse(family, grid)
    sparse_check['passed'] = ok
    if not ok:
        raise SparseError("stopping tree is not 1/2-sparse: %s" % sparse_check)
    recubed = _recubed_family(nodes)
    ok, recubed_check = verify_sparse(recubed, grid)
    recubed_check['passed'] = ok
    if not ok:
        raise SparseError("recubed family is not %g-sparse: %s" % (recubed.theta,
            recubed_check))
    generations, bound = _generations(nodes)
    if not bound:
        raise SparseError("a generation exceeds half the measure of its parent")
    LOGGER.debug("sparse tree: %d top cubes, %d nodes, depth %d", len(tops), len(nodes),
            max((node.generation for node in nodes), default=0))
    return nodes, family, recubed, annuli, enlargements, generations, \
            sparse_check, recubed_check


def _empty_report(setting, seed):
    empty = SparseFamily([], [], theta=0.5, overlap=1)
    return empty, SparseDominationReport(setting.op.kernel.name, empty, empty, 0.0, 0.0,
            True, dict(setting.constants(), C_E=None), 0, [], [], [], 0.0,
            {'passed': True}, {'passed': True}, seed=seed)


def _report(setting, nodes, parts, target, dominator, claim, seed, splitting=None):
    family, recubed, annuli, enlargements, generations, sparse_check, \
            recubed_check = parts
    _check_coverage(target, claim, "claim dominator")
    _check_coverage(target, dominator, "sparse operator")
    constants = dict(setting.constants(),
            C_E=max((node.c_e for node in nodes if node.c_e is not None), default=None))
    return SparseDominationReport(setting.op.kernel.name, family, recubed,
            _ratio(target, dominator), _ratio(target, claim), True, constants,
            max(node.generation for node in nodes), generations, annuli, enlargements,
            sum(node.selection['leakage'] for node in nodes if node.selection),
            sparse_check, recubed_check, splitting=splitting, seed=seed)


def sparse_family_T(setting, f, ball=None, seed=None):  # pylint: disable=invalid-name
    """Sparse family dominating |T f|; `ball` is a ball containing the
    support of f (computed from f if omitted). Returns (family, report)."""
    grid = setting.grid
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(f)):
        raise ParameterError("f must be finite")
    if not np.any(f):
        return _empty_report(setting, seed)
    built = _construct(setting, f, ball, lambda function, node: [function])
    nodes = built[0]
    claim = np.zeros(grid.n)
    for node in nodes:
        claim[node.cube.members] += node.average
    dominator = sparse_operator(built[2], grid, f)
    target = setting.op.apply(f)
    report = _report(setting, nodes, built[1:], target, dominator, claim, seed)
    return built[1], report


def commutator_splitting(setting, node, b):
    """Compare |[b,T] F| 1_Q with the five-piece bound built from the
    children of `node`, F being the node's cut-off function."""
    op, grid = setting.op, setting.grid
    b = np.asarray(b, dtype=float)
    shifted = b - grid.average(b, node.recube.members)
    function = node.function
    inside = np.zeros(grid.n, dtype=bool)
    inside[node.cube.members] = True
    rest = inside.copy()
    for child in node.children:
        rest[child.members] = False
    pieces = [np.abs(shifted * op.apply(function)) * rest,
            np.abs(op.apply(shifted * function)) * rest,
            np.zeros(grid.n), np.zeros(grid.n), np.zeros(grid.n)]
    for child in node.children:
        near = _dilate(setting, child.center, dilate_radius(setting, child))
        far = np.where(near, 0.0, function)
        members = child.members
        pieces[2][members] += np.abs(shifted * op.apply(far))[members]
        pieces[3][members] += np.abs(op.apply(shifted * far))[members]
        pieces[4][members] += np.abs(commutator(op, b, np.where(near, function, 0.0)))[members]
    lhs = np.abs(commutator(op, b, function)) * inside
    total = sum(pieces)
    scale = max(float(lhs.max()), float(total.max()), np.finfo(float).tiny)
    excess = float(np.max(lhs - total))
    report = {'C%d' % (i + 1): float(piece.max()) for i, piece in enumerate(pieces)}
    report.update({'cube': list(node.cube.key), 'excess': excess,
        'holds': excess <= 1e-9 * scale})
    return report


def sparse_family_commutator(setting, b, f, ball=None, seed=None):
    """Sparse family dominating |[b,T] f| by
    sum_Q (avg_Q |f| |b - b_Q| + avg_Q |(b - b_Q) f|) 1_Q."""
    grid = setting.grid
    b = np.asarray(b, dtype=float)
    f = np.asarray(f, dtype=float)
    if not np.all(np.isfinite(b)) or not np.all(np.isfinite(f)):
        raise ParameterError("b and f must be finite")
    if not np.any(f):
        return _empty_report(setting, seed)

    def parts(function, node):
        return [function, (b - grid.average(b, node.recube.members)) * function]

    built = _construct(setting, f, ball, parts)
    nodes, recubed = built[0], built[2]
    absf = np.abs(f)
    dominator = np.zeros(grid.n)
    for cube in recubed.cubes:
        shifted = b - grid.average(b, cube.members)
        dominator[cube.members] += grid.average(absf, cube.members) * \
                np.abs(shifted[cube.members]) + grid.average(np.abs(shifted * f),
                        cube.members)
    claim = np.zeros(grid.n)
    for node in nodes:
        shifted = b - grid.average(b, node.recube.members)
        dilate = np.flatnonzero(node.dilate)
        claim[node.cube.members] += node.average * np.abs(shifted[node.cube.members]) + \
                grid.average(np.abs(shifted * node.function), dilate)
    plain, product = b * setting.op.apply(f), setting.op.apply(b * f)
    target = plain - product
    floor = 1e-10 * (float(np.max(np.abs(plain))) + float(np.max(np.abs(product))))
    target[np.abs(target) <= floor] = 0.0
    tops = [node for node in nodes if node.generation == 0 and node.children]
    splitting = [commutator_splitting(setting, node, b) for node in tops]
    summary = {'holds': all(s['holds'] for s in splitting), 'claims': splitting}
    report = _report(setting, nodes, built[1:], target, dominator, claim, seed,
            splitting=summary)
    return built[1], report


def _inside(system, small, large):
    """True iff cube `small` of `system` lies in cube `large`."""
    return small.scale >= large.scale and \
            system.labels[large.scale][small.members[0]] == large.index


def carleson_constant(system, cubes):
    """max over the cubes Q of sum_{P ⊆ Q} omega(P) / omega(Q), P running
    over `cubes`; a family with constant L is 1/L-sparse."""
    totals = {(cube.scale, cube.index): 0.0 for cube in cubes}
    scales = sorted({cube.scale for cube in cubes})
    for cube in cubes:
        point = cube.members[0]
        for k in scales:
            if k > cube.scale:
                break
            key = (k, int(system.labels[k][point]))
            if key in totals:
                totals[key] += cube.measure
    measures = {(cube.scale, cube.index): cube.measure for cube in cubes}
    return max((totals[key] / measures[key] for key in totals), default=1.0)


def augment_family(system, family, b, budget=config.AUGMENT_BUDGET):
    """Add the stopping cubes of b's oscillation below every family cube and
    measure the constant C in |b(x) - b_Q| <= C sum_{P ⊆ Q} Omega(b, P) 1_P(x).
    Returns (augmented family, report)."""
    grid = system.grid
    b = np.asarray(b, dtype=float)
    if not np.all(np.isfinite(b)):
        raise ParameterError("b must be finite")
    if any(cube.system is not system for cube in family.cubes):
        raise ParameterError("all family cubes must belong to system %s" % system.tag)
    noise = 1e-12 * (1.0 + float(np.max(np.abs(b))))
    keys = {(cube.scale, cube.index) for cube in family.cubes}
    cubes, queue = list(family.cubes), list(family.cubes)
    omega, added, half_ok = {}, 0, True
    while queue:
        cube = queue.pop()
        osc = oscillation(grid, b, cube.members)
        if osc <= noise:
            omega[(cube.scale, cube.index)] = 0.0
            continue
        omega[(cube.scale, cube.index)] = osc
        deviation = np.abs(b - grid.average(b, cube.members))
        stopping, stack = [], list(cube.children)
        while stack:
            current = stack.pop()
            if grid.average(deviation, current.members) > 2 * osc:
                stopping.append(current)
            else:
                stack.extend(current.children)
        if sum(p.measure for p in stopping) > 0.5 * cube.measure * (1 + 1e-12):
            half_ok = False
        for current in stopping:
            key = (current.scale, current.index)
            if key not in keys:
                keys.add(key)
                cubes.append(current)
                queue.append(current)
                added += 1
                if added > budget:
                    raise SparseError("augmentation exceeds the budget of %d cubes" % budget)

    owner = np.full(grid.n, -1, dtype=np.int64)
    for idx in sorted(range(len(cubes)), key=lambda i: cubes[i].scale):
        owner[cubes[idx].members] = idx
    witnesses = [np.flatnonzero(owner == idx) for idx in range(len(cubes))]
    # the finest-owner witnesses vanish once nested cubes cover a parent; the
    # Carleson constant is the sparseness measure that survives nesting
    owned = min((grid.measure(w) / c.measure for c, w in zip(cubes, witnesses)),
            default=0.5)
    augmented = SparseFamily(cubes, witnesses, theta=owned * (1 - 1e-12), overlap=1)
    carleson = carleson_constant(system, cubes)

    worst, uncontrolled = 0.0, 0
    for large in family.cubes:
        bound = np.zeros(grid.n)
        for small in cubes:
            if _inside(system, small, large):
                bound[small.members] += omega[(small.scale, small.index)]
        members = large.members
        lhs = np.abs(b[members] - grid.average(b, members))
        rhs = bound[members]
        positive = rhs > 0
        if positive.any():
            worst = max(worst, float(np.max(lhs[positive] / rhs[positive])))
        uncontrolled += int(np.sum((lhs > noise) & ~positive))
    ok, check = verify_sparse(augmented, grid)
    LOGGER.debug("augmented family by %d cubes, constant %g", added, worst)
    return augmented, {'added': added, 'family_size': len(cubes), 'carleson': carleson,
            'theta': 1.0 / carleson, 'witness_theta': owned, 'constant': worst,
            'uncontrolled': uncontrolled, 'half_bound': half_ok,
            'sparse': dict(check, passed=ok),
            'holds': uncontrolled == 0 and half_ok and ok}
