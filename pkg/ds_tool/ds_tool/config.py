"""This file offers the configuration parsing facilities of the dunkl-sparse
experiment runner."""

import configparser
import dataclasses
import os
import re

from .analysis.errors import AnalysisError
from .analysis.operators import KERNELS
from .analysis.reflection import resolve_root_system

# in dependency order
EXPERIMENTS = ('measure', 'dyadic', 'kernel', 'weights', 'weights.ap', 'weights.rh',
        'weights.bmo', 'weights.rdf', 'sparse', 'commutator', 'weighted', 'two_weight',
        'lower', 'rdf')
FORMATS = ('json', 'csv')
WEIGHT_KINDS = ('const', 'dunkl_power', 'euclid_power', 'rdf')
SYMBOL_KINDS = ('const', 'coord', 'logd', 'martingale')

class ConfigurationError(Exception):
    def __init__(self, msg, path=None):
        super().__init__()
        self.path = path
        self.msg = msg
    def __repr__(self):
        if self.path:
            return 'error in configuration "%s": %s' % (self.path, self.msg)
        else:
            return self.msg

    def __str__(self):
        return repr(self)


@dataclasses.dataclass
class RunConfig:
    """Typed view on a validated configuration."""
    root_system: str
    kappa: list
    box: tuple
    resolution: int
    subsamples: int
    root_file: str
    delta: float
    k_min: int
    k_max: int
    bundle: int
    c0_cap: float
    calibration_balls: int
    kernel: str
    r_cut: float
    explosion_cap: float
    cz_samples: int
    ctilde0: float
    u: str
    v: str
    b: str
    p: list
    family_balls: int
    rh_cap: float
    experiments: list
    seed: int
    trials: int
    directory: str
    formats: list
    path: str = None

    def echo(self):
        return {k: v for k, v in dataclasses.asdict(self).items() if k != 'path'}

    def root_system_object(self):
        kappa = self.kappa[0] if len(self.kappa) == 1 else self.kappa
        return resolve_root_system(self.root_system, kappa, 1, self.root_file or None)


def default_configuration():
    """A ConfigParser holding every section with its default values."""
    config = configparser.ConfigParser()
    config['grid'] = {'root_system': 'A1', 'kappa': '1', 'box': '-1,1',
            'resolution': '64', 'subsamples': '3', 'root_file': ''}
    config['dyadic'] = {'delta': '0.5', 'k_min': 'auto', 'k_max': 'auto',
            'bundle': '3', 'c0_cap': '32', 'calibration_balls': '200'}
    config['kernel'] = {'key': 'riesz:1', 'r_cut': 'auto', 'explosion_cap': '1e6',
            'cz_samples': '200', 'ctilde0': 'auto'}
    config['weights'] = {'u': 'dunkl_power:1', 'v': 'dunkl_power:-1', 'b': 'logd',
            'p': '1.5,2,3', 'family_balls': '500', 'rh_cap': '10'}
    config['experiments'] = {'names': '', 'seed': '0', 'trials': '10'}
    config['output'] = {'directory': '.', 'formats': 'json,csv'}
    return config


def _floats(text):
    return [float(t) for t in text.split(',') if t.strip()]

def _names(text):
    return [t.strip() for t in text.split(',') if t.strip()]

def _optional(text, kind):
    return None if text.strip() == 'auto' else kind(text)


def _check_expression(value, kinds, what, conffile):
    kind = value.partition(':')[0]
    if kind not in kinds:
        raise ConfigurationError('%s "%s": unknown kind, possible values are %s' % (
            what, value, ', '.join(kinds)), conffile)


def _check_kernel(key, conffile):
    kind, _, arg = key.partition(':')
    if kind == 'riesz' and arg.isdigit():
        return
    if kind == 'custom' and arg in KERNELS:
        return
    raise ConfigurationError('section=kernel, key="%s": unknown kernel, possible '
            'values are riesz:<j> and %s' % (key, ', '.join('custom:' + k
                for k in sorted(KERNELS))), conffile)


def to_run_config(config, conffile=None):
    """Convert and validate a parsed configuration."""
    grid, dyadic, kernel = config['grid'], config['dyadic'], config['kernel']
    weights, experiments, output = config['weights'], config['experiments'], \
            config['output']
    try:
        box = tuple(_floats(grid['box']))
        run = RunConfig(grid['root_system'], _floats(grid['kappa']), box,
                grid.getint('resolution'), grid.getint('subsamples'),
                get_path(grid, 'root_file'), dyadic.getfloat('delta'),
                _optional(dyadic['k_min'], int), _optional(dyadic['k_max'], int),
                dyadic.getint('bundle'), dyadic.getfloat('c0_cap'),
                dyadic.getint('calibration_balls'), kernel['key'],
                _optional(kernel['r_cut'], float), kernel.getfloat('explosion_cap'),
                kernel.getint('cz_samples'), _optional(kernel['ctilde0'], float),
                weights['u'], weights['v'], weights['b'], _floats(weights['p']),
                weights.getint('family_balls'), weights.getfloat('rh_cap'),
                _names(experiments['names']), experiments.getint('seed'),
                experiments.getint('trials'), get_path(output, 'directory'),
                _names(output['formats']), conffile)
    except ValueError as err:
        raise ConfigurationError("invalid value: %s" % err, conffile) from None
    validate(run)
    return run


def validate(run):
    """Raise a ConfigurationError for values the analysis would reject."""
    conffile = run.path
    if len(run.box) % 2 or not run.box:
        raise ConfigurationError('section=grid, box="%s": expected lo,hi pairs'
                % (run.box,), conffile)
    if run.root_file and not os.path.isfile(run.root_file):
        raise ConfigurationError('root_file "%s" does not exist' % run.root_file,
                conffile)
    try:
        run.root_system_object()
    except (AnalysisError, OSError) as err:
        raise ConfigurationError('section=grid, root_system="%s": %s' % (
            run.root_system, err), conffile) from None
    if run.resolution < 8 or run.subsamples < 1:
        raise ConfigurationError('section=grid: resolution must be at least 8 and '
                'subsamples positive', conffile)
    if not 0 < run.delta <= 0.5:
        raise ConfigurationError('section=dyadic, delta=%g: expected a value in '
                '(0, 1/2]' % run.delta, conffile)
    if run.k_min is not None and run.k_max is not None and run.k_min > run.k_max:
        raise ConfigurationError('section=dyadic: k_min exceeds k_max', conffile)
    if run.bundle < 1:
        raise ConfigurationError('section=dyadic: bundle must be positive', conffile)
    _check_kernel(run.kernel, conffile)
    for name in ('u', 'v'):
        _check_expression(getattr(run, name), WEIGHT_KINDS, 'section=weights, ' + name,
                conffile)
    _check_expression(run.b, SYMBOL_KINDS, 'section=weights, b', conffile)
    if not run.p or any(p <= 1 for p in run.p):
        raise ConfigurationError('section=weights, p: every exponent must exceed 1',
                conffile)
    unknown = [name for name in run.experiments if name not in EXPERIMENTS]
    if unknown:
        raise ConfigurationError('section=experiments, names: unknown experiment(s) '
                '%s, possible values are %s' % (', '.join(unknown),
                    ', '.join(EXPERIMENTS)), conffile)
    if run.trials < 1:
        raise ConfigurationError('section=experiments: trials must be positive',
                conffile)
    bad = [f for f in run.formats if f not in FORMATS]
    if bad:
        raise ConfigurationError('section=output, formats: unknown format(s) %s'
                % ', '.join(bad), conffile)
    if os.path.isfile(run.directory):
        raise ConfigurationError("expected directory, found file", path=run.directory)


def load_configuration(conffile=None):
    """Load given `config` from given path. Default values are provided and
    invalid options will raise a ConfigurationError. Without a path, the
    defaults are returned."""
    config = default_configuration()
    if conffile:
        try:
            with open(conffile) as configfile:
                config.read_file(configfile)
        except configparser.Error as err:
            raise ConfigurationError(str(err), conffile) from None
    return to_run_config(config, conffile)


def candidate_paths():
    paths = [os.path.join(os.path.expanduser("~"), '.config/dunkl-sparse/dsrc')]
    if os.environ.get('LOCALAPPDATA'):
        paths.append(os.path.join(os.environ['LOCALAPPDATA'], 'dunkl-sparse/dsrc.ini'))
    return paths


def discover_and_load(explicit=None):
    """Load `explicit` if given, else the first configuration found at the
    usual places, else the defaults."""
    if explicit:
        if not os.path.exists(explicit):
            raise ConfigurationError("configuration file not found", explicit)
        return load_configuration(explicit)
    conffile = [path for path in candidate_paths() if os.path.exists(path)]
    return load_configuration(conffile[0] if conffile else None)


def get_path(section, key='directory'):
    """Return a path from a section with $HOME, ~/ or %HOME% replaced."""
    home = os.path.expanduser('~')
    path = section[key]
    for pattern in (r'\$HOME', '~', '%HOME%'):
        path = re.sub('^' + pattern, home, path)
    return path
