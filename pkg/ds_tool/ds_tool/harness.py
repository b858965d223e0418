"""Experiment orchestration: builds grid, dyadic bundle, operator and weights
once per run, executes the requested experiment blocks in dependency order and
assembles a versioned report. Wall-clock seconds go to the separate `timing`
map so that the numeric payload is reproducible."""

import functools
import logging
import math
import os
import time

import numpy as np

from . import config as runconfig
from .analysis import dyadic, measure, operators, probes, sparse, storage, \
        weighted_bounds, weights
from .analysis.errors import AnalysisError, DyadicError
from .analysis.jsonhandlers import trial_rows, write_report, write_rows
from .config import ConfigurationError

LOGGER = logging.getLogger(__name__)

# orbit-closed (Q, E) draws per weight and exponent
WP_DRAWS = 500
CALIBRATION_SEED_OFFSET = 7919


class Context:
    """Lazily built shared objects of one run."""

    def __init__(self, run, cache=None):
        self.run = run
        self.cache = cache or storage.Cache()

    @functools.cached_property
    def grid(self):
        run = self.run
        rs = run.root_system_object()
        box = run.box if len(run.box) == 2 else np.reshape(run.box, (-1, 2))
        params = dict(box=list(run.box), resolution=run.resolution,
                subsamples=run.subsamples, roots=rs.roots.tolist(),
                kappa=rs.kappa.tolist(), name=rs.name)
        return self.cache.grid(params, lambda: measure.build_grid(box, run.resolution,
            rs, run.subsamples))

    @functools.cached_property
    def bundle(self):
        run = self.run
        params = dict(storage.grid_params(self.grid), delta=run.delta, k_min=run.k_min,
                k_max=run.k_max, bundle=run.bundle, seed=run.seed)
        return self.cache.bundle(params, self.grid, lambda: dyadic.build_bundle(
            self.grid, run.delta, run.bundle, run.seed, run.k_min, run.k_max))

    @functools.cached_property
    def op(self):
        kernel = operators.kernel_from_key(self.grid, self.run.kernel)
        return operators.DiscreteOperator(self.grid, kernel, self.run.r_cut)

    @functools.cached_property
    def calibrated(self):
        """The bundle with C0 calibrated and checked against c0_cap."""
        run = self.run
        if self.bundle.c0 is None:
            dyadic.calibrate_c0(self.bundle, run.calibration_balls,
                    run.seed + CALIBRATION_SEED_OFFSET)
        if self.bundle.c0 > run.c0_cap:
            raise DyadicError("calibrated C0 = %g exceeds c0_cap = %g" % (
                self.bundle.c0, run.c0_cap), prop='containing')
        return self.bundle

    @functools.cached_property
    def setting(self):
        return sparse.make_setting(self.op, self.calibrated, self.run.ctilde0)

    @functools.cached_property
    def family(self):
        return weights.default_family(self.grid, self.bundle.primary,
                self.run.family_balls, self.run.seed)

    def weight(self, expr, p=2.0):
        return weights.make_weight(self.grid, expr, p)

    @functools.cached_property
    def b(self):
        return probes.make_b(self.grid, self.run.b, self.bundle.primary)

    @functools.cached_property
    def first_domination(self):
        """(family, report) of the sparse construction for the first trial."""
        seed, f, ball, _ = self.trials(self.setting.system)[0]
        return sparse.sparse_family_T(self.setting, f, ball, seed)

    def trials(self, system=None):
        return probes.trial_functions(self.grid, self.run.trials, self.run.seed, system)


def _finite(value):
    return value is not None and bool(np.isfinite(value))


def block_measure(ctx):
    grid, seed = ctx.grid, ctx.run.seed
    results = [dict(experiment='grid', total_mass=float(grid.weights.sum()),
        **grid.describe())]
    comparison = measure.verify_comparison(grid, seed=seed)
    doubling = measure.doubling_and_growth(grid, seed=seed)
    results += [dict(experiment='comparison', **comparison),
            dict(experiment='doubling', **doubling)]
    passed = comparison['orbit_bound_violations'] == 0 and \
            _finite(doubling['doubling_constant'])
    if np.all(grid.box[:, 0] < 0) and np.all(grid.box[:, 1] > 0):
        scaling = measure.verify_scaling(grid, seed=seed)
        results.append(dict(experiment='scaling', **scaling))
    return results, passed


def block_dyadic(ctx):
    results = [dyadic.verify_dyadic_properties(system) for system in ctx.bundle.systems]
    for result in results:
        result['experiment'] = 'dyadic'
    return results, all(result['passed'] for result in results)


def block_kernel(ctx):
    run = ctx.run
    result = operators.cz_check(ctx.op.kernel, ctx.grid, run.cz_samples, run.seed,
            run.explosion_cap)
    result.update(experiment='kernel', max_ratio=max(result['constants'].values()),
            stability=weighted_bounds.stability([]))
    rows = []
    for seed, f, _, kind in ctx.trials():
        control = operators.verify_grand_maximal_control(ctx.op, f, ctx.setting.ctilde0)
        rows.append({'seed': seed, 'kind': kind, 'ratio': control['ratio'],
            'uncontrolled_points': control['uncontrolled_points'],
            'holds': control['passed']})
    summary = weighted_bounds.stability(rows)
    control = {'experiment': 'grand_maximal_control', 'rows': rows, 'trials': len(rows),
            'max_ratio': max(row['ratio'] for row in rows), 'stability': summary,
            'Ctilde0': ctx.setting.ctilde0,
            'passed': all(row['holds'] for row in rows) and
            weighted_bounds.is_stable(summary)}
    return [result, control], result['passed'] and control['passed']


def block_weights_ap(ctx):
    grid, run, family = ctx.grid, ctx.run, ctx.family
    results, passed = [], True
    rng = np.random.default_rng(run.seed)
    cubes = [cube for cube in ctx.bundle.primary.all_cubes() if len(cube) > 1]
    for expr in ('const:1', run.u, run.v):
        for p in run.p:
            u = ctx.weight(expr, p)
            report = weights.ap_constant(grid, u, p, family)
            draws = []
            for _ in range(WP_DRAWS):
                members = cubes[rng.integers(len(cubes))].members
                pick = rng.choice(members, size=int(rng.integers(1, len(members) + 1)),
                        replace=False)
                cube = weights.orbit_closure(grid, members)
                subset = weights.orbit_closure(grid, pick)
                draws.append(weights.verify_wp(grid, u, p, cube, subset,
                    report.estimate)[0])
            results.append(dict(experiment='ap', weight=u.tag, wp_draws=len(draws),
                wp_holds=all(draws), **report.as_dict()))
            passed = passed and all(draws) and _finite(report.estimate)
        for p, q in zip(sorted(run.p), sorted(run.p)[1:]):
            holds, report = weights.verify_inclusion(grid, ctx.weight(expr, p), p, q,
                    family)
            results.append(dict(experiment='ap_inclusion', weight=expr, holds=holds,
                **report))
            passed = passed and holds
    return results, passed


def block_weights_rh(ctx):
    results, passed = [], True
    for expr in (ctx.run.u, ctx.run.v):
        u = ctx.weight(expr)
        if not u.radial:
            results.append({'experiment': 'reverse_holder', 'weight': expr,
                'skipped': 'weight is not radial'})
            continue
        try:
            gamma, constant, report = weights.reverse_holder(ctx.grid, u, ctx.family,
                    ctx.run.rh_cap)
            results.append(dict(report, experiment='reverse_holder', gamma=gamma,
                constant=constant))
        except AnalysisError as err:
            results.append({'experiment': 'reverse_holder', 'weight': expr,
                'error': str(err), 'best': list(getattr(err, 'best', ()))})
            passed = False
    return results, passed


def block_weights_bmo(ctx):
    grid, run = ctx.grid, ctx.run
    results = []
    for expr in (run.u, run.v):
        u = ctx.weight(expr)
        for metric in ('dunkl_orbit', 'euclidean'):
            family = ctx.family if metric == 'dunkl_orbit' else \
                    weights.ball_family(grid, run.family_balls, run.seed, metric)
            results.append({'experiment': 'bmo', 'b': run.b, 'weight': expr,
                'metric': metric, 'norm': weights.bmo_norm(grid, ctx.b, u, metric,
                    family)})
    return results, all(_finite(result['norm']) for result in results)


def block_weights_rdf(ctx):
    results, passed = [], True
    for p in ctx.run.p:
        for index, (seed, g, _, kind) in enumerate(ctx.trials()):
            g = np.ones(ctx.grid.n) if index == 0 else g
            _, report = weights.rubio_de_francia(ctx.grid, g, p, seed=seed)
            results.append(dict(report, experiment='rdf', seed=seed,
                g='one' if index == 0 else kind))
            passed = passed and report['passed']
    return results, passed


def block_weights(ctx):
    results, passed = [], True
    for block in (block_weights_ap, block_weights_rh, block_weights_bmo,
            block_weights_rdf):
        part, ok = block(ctx)
        results += part
        passed = passed and ok
    return results, passed


def _domination_rows(ctx, build):
    setting = ctx.setting
    rows, passed = [], True
    for seed, f, ball, kind in ctx.trials(setting.system):
        _, report = build(setting, f, ball, seed)
        summary = report.as_dict()
        row = {'seed': seed, 'kind': kind, 'ratio': report.ratio,
                'claim_ratio': report.claim_ratio, 'family_size': summary['family_size'],
                'recubed_size': summary['recubed_size'], 'depth': report.depth,
                'sparse_ok': report.sparse_check['passed'],
                'coverage_ok': report.coverage_ok, 'C_E': report.constants['C_E'],
                'leakage': report.leakage}
        if report.splitting is not None:
            row['splitting_holds'] = report.splitting['holds']
            passed = passed and report.splitting['holds']
        rows.append(row)
        passed = passed and row['sparse_ok'] and row['coverage_ok'] and \
                _finite(report.ratio)
    ratios = [row['ratio'] for row in rows]
    summary = weighted_bounds.stability(rows)
    passed = passed and weighted_bounds.is_stable(summary)
    return {'rows': rows, 'max_ratio': max(ratios), 'median_ratio':
            float(np.median(ratios)), 'trials': len(rows), 'stability': summary,
            'constants': setting.constants(), 'kernel': ctx.op.kernel.name,
            'passed': passed}, passed


def block_sparse(ctx):
    result, passed = _domination_rows(ctx, lambda setting, f, ball, seed:
            sparse.sparse_family_T(setting, f, ball, seed))
    result['experiment'] = 'sparse'
    return [result], passed


def block_commutator(ctx):
    b = ctx.b
    result, passed = _domination_rows(ctx, lambda setting, f, ball, seed:
            sparse.sparse_family_commutator(setting, b, f, ball, seed))
    result.update(experiment='commutator', b=ctx.run.b)
    _, augmentation = sparse.augment_family(ctx.bundle.primary,
            ctx.first_domination[0], b)
    result['augmentation'] = augmentation
    result['passed'] = passed and augmentation['holds']
    return [result], result['passed']


def block_weighted(ctx):
    run = ctx.run
    results, passed = [], True
    domination = ctx.first_domination[1]
    for p in run.p:
        u = ctx.weight(run.u, p)
        for report in (weighted_bounds.verify_sparse_weighted_bound(ctx.grid,
                domination.recubed, u, p, run.trials, run.seed, ctx.family),
                weighted_bounds.verify_T_weighted(ctx.setting, u, p, run.trials,
                    run.seed)):
            results.append(report.as_dict())
            passed = passed and report.passed
    return results, passed


def block_two_weight(ctx):
    run = ctx.run
    results, passed = [], True
    for p in run.p:
        report = weighted_bounds.verify_commutator_two_weight(ctx.setting, ctx.b,
                ctx.weight(run.u, p), ctx.weight(run.v, p), p, run.trials, run.seed,
                ctx.family, run.b)
        results.append(report.as_dict())
        passed = passed and report.passed
    return results, passed


def lower_bound_ball(grid, axis):
    """B0 = B(x0, r) with r = width/12 and x0 at distance 2r from the lower
    face along `axis`, centered otherwise; its 5r shift stays inside."""
    center = grid.box.mean(axis=1)
    width = float(grid.box[axis, 1] - grid.box[axis, 0])
    radius = width / 12
    center[axis] = grid.box[axis, 0] + 2 * radius
    return center, radius


def block_lower(ctx):
    run = ctx.run
    if ctx.op.kernel.axis is None:
        raise ConfigurationError("the lower bound needs a directional kernel, got %s"
                % run.kernel, run.path)
    center, radius = lower_bound_ball(ctx.grid, ctx.op.kernel.axis)
    results = []
    for p in run.p:
        results.append(weighted_bounds.lower_bound_experiment(ctx.grid, ctx.op, ctx.b,
            ctx.weight(run.u, p), ctx.weight(run.v, p), p, center, radius, ctx.family))
    return results, all(result['passed'] for result in results)


def block_rdf(ctx):
    reports = [weighted_bounds.rdf_transfer_check(ctx.setting, p, ctx.run.trials,
        ctx.run.seed) for p in ctx.run.p]
    return [report.as_dict() for report in reports], all(r.passed for r in reports)


BLOCKS = {
    'measure': block_measure,
    'dyadic': block_dyadic,
    'kernel': block_kernel,
    'weights': block_weights,
    'weights.ap': block_weights_ap,
    'weights.rh': block_weights_rh,
    'weights.bmo': block_weights_bmo,
    'weights.rdf': block_weights_rdf,
    'sparse': block_sparse,
    'commutator': block_commutator,
    'weighted': block_weighted,
    'two_weight': block_two_weight,
    'lower': block_lower,
    'rdf': block_rdf,
}


def _ordered(names):
    unknown = [name for name in names if name not in BLOCKS]
    if unknown:
        raise ConfigurationError("unknown experiment(s) %s, possible values are %s" % (
            ', '.join(unknown), ', '.join(BLOCKS)))
    return [name for name in BLOCKS if name in names]


def _failed(name, err):
    return {'name': name, 'passed': False, 'results': [],
            'error': {'type': type(err).__name__, 'message': str(err)}}


def run_block(ctx, name):
    """Execute one block; any error fails the block without aborting the
    run."""
    #pylint: disable=broad-except
    start = time.perf_counter()
    try:
        results, passed = BLOCKS[name](ctx)
        block = {'name': name, 'passed': bool(passed), 'results': results}
    except (AnalysisError, ConfigurationError) as err:
        LOGGER.warning("experiment %s failed: %s", name, err)
        block = _failed(name, err)
    except Exception as err:
        LOGGER.exception("experiment %s raised %s", name, type(err).__name__)
        block = _failed(name, err)
    return block, time.perf_counter() - start


def _change(coarse, fine):
    """fine / coarse for two max ratios; None when neither was measured."""
    if not coarse:
        return math.inf if fine else None
    return (fine or 0.0) / coarse


def _resolution_factors(run, cache, names, blocks):
    """Re-run the passed blocks at doubled resolution, store per result the
    quotient of the max ratios (fine over coarse) and fail every result and
    block whose max ratio is not stable under the doubling."""
    fine = Context(runconfig.RunConfig(**dict(run.echo(), resolution=2 * run.resolution,
        path=run.path)), cache)
    for name, block in zip(names, blocks):
        if not block['passed']:
            continue
        rerun, _ = run_block(fine, name)
        if 'error' in rerun:
            block['passed'] = False
            block['resolution_error'] = rerun['error']
            continue
        for coarse, refined in zip(block['results'], rerun['results']):
            if 'stability' not in coarse:
                continue
            coarse['stability']['resolution_factor'] = _change(coarse.get('max_ratio'),
                    refined.get('max_ratio'))
            stable = weighted_bounds.is_stable(coarse['stability'])
            coarse['passed'] = coarse.get('passed', True) and stable
            block['passed'] = block['passed'] and stable


def run(run_config, names=None, resolution_check=False, cache=None):
    """Execute the experiments `names` (default: those of the configuration)
    and return the report."""
    names = _ordered(run_config.experiments if names is None else names)
    ctx = Context(run_config, cache)
    report = dict(storage.format_tag(storage.REPORT_FORMAT), config=run_config.echo(),
            experiments=[], timing={})
    for name in names:
        print("Running experiment", name)
        block, seconds = run_block(ctx, name)
        report['experiments'].append(block)
        report['timing'][name] = seconds
    if resolution_check:
        _resolution_factors(run_config, ctx.cache, names, report['experiments'])
    report['passed'] = all(block['passed'] for block in report['experiments'])
    return report


def emit(report, out_dir, formats=('json', 'csv')):
    """Write report.json and/or trials.csv into `out_dir`; return the paths."""
    if not os.path.exists(out_dir):
        os.makedirs(out_dir)
    paths = []
    if 'json' in formats:
        paths.append(os.path.join(out_dir, 'report.json'))
        write_report(paths[-1], report)
    if 'csv' in formats:
        paths.append(os.path.join(out_dir, 'trials.csv'))
        write_rows(paths[-1], trial_rows(report))
    return paths
