"""Seeded trial functions f and the catalog of symbols b.

Every trial function is supported in a Euclidean ball inside the box; the
ball is returned alongside so that callers know the support."""

import logging

import numpy as np

from .errors import ParameterError
from .measure import BallSpec

LOGGER = logging.getLogger(__name__)

TRIAL_KINDS = ('cells', 'bump', 'signs')


def support_ball(grid, rng):
    """A Euclidean ball of radius between 1/8 and 1/4 of the box width lying
    inside the box and containing at least one grid point."""
    width = float(np.min(grid.box[:, 1] - grid.box[:, 0]))
    while True:
        radius = float(rng.uniform(width / 8, width / 4))
        center = rng.uniform(grid.box[:, 0] + radius, grid.box[:, 1] - radius)
        ball = BallSpec(center, radius, 'euclidean')
        if grid.ball_members(ball).size:
            return ball


def cell_indicators(grid, rng, ball):
    """Indicator of a random nonempty subset of the ball's cells."""
    members = grid.ball_members(ball)
    count = int(rng.integers(1, len(members) + 1))
    f = np.zeros(grid.n)
    f[rng.choice(members, size=count, replace=False)] = 1.0
    return f


def cubic_bump(grid, rng, ball):
    """prod (1 - |t_i|)^3_+ with t = (x - c) / s, the cube of half side s
    inscribed in the ball; random amplitude in [1/2, 2]."""
    half = ball.radius / np.sqrt(grid.dimension)
    t = np.abs(grid.points - ball.center) / half
    f = np.prod(np.clip(1.0 - t, 0.0, None) ** 3, axis=1)
    if not np.any(f > 0):
        f[grid.ball_members(ball)] = 1.0
    return float(rng.uniform(0.5, 2.0)) * f


def random_signs(grid, rng, ball, system=None):
    """Independent random signs on the cubes of a mid scale of `system`
    intersected with the ball; cell-wise signs without a system."""
    members = grid.ball_members(ball)
    f = np.zeros(grid.n)
    if system is None:
        f[members] = rng.choice((-1.0, 1.0), size=len(members))
        return f
    k = (system.k_min + system.k_max + 1) // 2
    labels = system.labels[k]
    signs = rng.choice((-1.0, 1.0), size=len(system.centers[k]))
    f[members] = signs[labels[members]]
    return f


def trial_function(grid, seed, kind=None, system=None):
    """Return (f, support ball, kind) drawn from `seed`; the kind cycles with
    the seed unless given."""
    rng = np.random.default_rng(seed)
    kind = TRIAL_KINDS[seed % len(TRIAL_KINDS)] if kind is None else kind
    ball = support_ball(grid, rng)
    if kind == 'cells':
        f = cell_indicators(grid, rng, ball)
    elif kind == 'bump':
        f = cubic_bump(grid, rng, ball)
    elif kind == 'signs':
        f = random_signs(grid, rng, ball, system)
    else:
        raise ParameterError("unknown trial function kind %r" % kind)
    return f, ball, kind


def trial_functions(grid, count, seed=0, system=None):
    """`count` trials with seeds seed, seed+1, ..."""
    return [(seed + i,) + trial_function(grid, seed + i, system=system)
            for i in range(count)]


def dyadic_martingale(grid, system, seed):
    """Sum over the scales of normally distributed values per cube, damped
    by 2^-(k - k_min)/2 so that the increments stay bounded."""
    rng = np.random.default_rng(seed)
    b = np.zeros(grid.n)
    for k in system.scales:
        values = rng.normal(size=len(system.centers[k]))
        b += 2.0 ** (-(k - system.k_min) / 2) * values[system.labels[k]]
    return b


def make_b(grid, expr, system=None):
    """Build b from `const:c`, `coord:j` (1-based), `logd` (log d(x,0)
    clamped at the cell diagonal) or `martingale:<seed>`."""
    kind, _, arg = expr.partition(':')
    try:
        if kind == 'const':
            return np.full(grid.n, float(arg or 1.0))
        if kind == 'coord':
            j = int(arg)
            if not 1 <= j <= grid.dimension:
                raise ParameterError("coordinate %d outside 1..%d" % (j, grid.dimension))
            return grid.points[:, j - 1].copy()
        if kind == 'logd':
            return np.log(np.maximum(np.linalg.norm(grid.points, axis=1),
                grid.cell_diagonal))
        if kind == 'martingale':
            if system is None:
                raise ParameterError("martingale symbols need a dyadic system")
            return dyadic_martingale(grid, system, int(arg or 0))
    except ValueError:
        raise ParameterError("invalid symbol expression %r" % expr) from None
    raise ParameterError("unknown symbol %r; known: const, coord, logd, martingale"
            % expr)
