"""Root systems, the finite reflection groups they generate, orbits and the
Dunkl metric d(x,y) = min over the group of |x - g(y)|.

Roots are normalized, <v,v> = 2, so that the reflection along a root v is
x - <v,x> v. Set semantics for points and matrices use a fixed quantum of
`config.EQ_TOL`: coordinates are rounded to that grid before hashing."""

import collections
import logging
import math
import re

import numpy as np

from . import config
from .errors import ReflectionError

LOGGER = logging.getLogger(__name__)

SECTION_PATTERN = re.compile(r'^\[([^\]]+)\]$')
DIMENSION_PATTERN = re.compile(r'^dimension\s*=\s*(\d+)$')
ROOT_PATTERN = re.compile(r'^root\s*=\s*\[([^\]]*)\]\s*kappa\s*=\s*(\S+)$')
SQRT_PATTERN = re.compile(r'^([+-]?)sqrt\(([^)]+)\)$')
DIHEDRAL_PATTERN = re.compile(r'^I2\((\d+)\)$')
PRODUCT_PATTERN = re.compile(r'^A1\^(\d+)$')


def quantize(values):
    """Return a hashable key of `values` rounded to the equality quantum."""
    arr = np.asarray(values, dtype=float)
    return tuple(np.rint(arr / config.EQ_TOL).astype(np.int64).ravel().tolist())


def _find_row(rows, vector):
    """Index of the first row equal to `vector` within EQ_TOL, -1 if none."""
    if len(rows) == 0:
        return -1
    deviation = np.max(np.abs(rows - vector), axis=1)
    hits = np.flatnonzero(deviation <= config.EQ_TOL)
    return int(hits[0]) if hits.size else -1


def _check_root(root):
    norm2 = float(np.dot(root, root))
    if abs(norm2 - 2.0) > config.NORM_TOL:
        raise ReflectionError("root %s is not normalized: <v,v> = %r" % (
            np.array2string(np.asarray(root)), norm2))


def reflect(root, x):
    """Reflect `x` at the hyperplane orthogonal to the normalized `root`."""
    root = np.asarray(root, dtype=float)
    x = np.asarray(x, dtype=float)
    if root.shape != x.shape:
        raise ReflectionError("dimension mismatch: root %s, point %s" % (
            root.shape, x.shape))
    _check_root(root)
    return x - np.dot(root, x) * root


def reflection_matrix(root):
    root = np.asarray(root, dtype=float)
    _check_root(root)
    return np.eye(root.size) - np.outer(root, root)


class RootSystem:
    """A reduced, normalized root system with a multiplicity function.

    `roots` is an (m, N) array, `kappa` holds one nonnegative value per root.
    The constructor validates normalization, the +/- pairing, closure under
    the reflections and the invariance of kappa; a ReflectionError is raised
    otherwise."""

    def __init__(self, dimension, roots, kappa, name='custom'):
        self.dimension = int(dimension)
        if self.dimension < 1:
            raise ReflectionError("dimension must be positive, got %d" % self.dimension)
        self.roots = np.asarray(roots, dtype=float).reshape(-1, self.dimension)
        self.kappa = np.asarray(kappa, dtype=float).reshape(-1)
        self.name = name
        if self.kappa.size != len(self.roots):
            raise ReflectionError("%d roots but %d multiplicities" % (
                len(self.roots), self.kappa.size))
        if np.any(self.kappa < 0) or not np.all(np.isfinite(self.kappa)):
            raise ReflectionError("multiplicities must be finite and nonnegative")
        self.__group = None
        self._validate()

    def _validate(self):
        for root in self.roots:
            _check_root(root)
        for idx, root in enumerate(self.roots):
            if _find_row(self.roots, -root) < 0:
                raise ReflectionError("-v missing for root %s" % root)
            for other_idx, other in enumerate(self.roots):
                image = other - np.dot(root, other) * root
                target = _find_row(self.roots, image)
                if target < 0:
                    raise ReflectionError(("root system not closed: reflecting "
                        "%s at %s leaves the system") % (other, root))
                if abs(self.kappa[target] - self.kappa[other_idx]) > config.NORM_TOL:
                    raise ReflectionError(("multiplicity not invariant: kappa(%s)"
                        " != kappa(%s)") % (other, self.roots[target]))
            LOGGER.debug("root %d of %s validated", idx, self.name)

    @property
    def gamma(self):
        """Sum of the multiplicities over all roots."""
        return float(self.kappa.sum())

    @property
    def group(self):
        """The generated reflection group, computed on first access."""
        if self.__group is None:
            self.__group = generate_group(self)
        return self.__group

    def __repr__(self):
        return 'RootSystem(%s, N=%d, roots=%d, gamma=%g)' % (self.name,
                self.dimension, len(self.roots), self.gamma)


class ReflectionGroup:
    """Finite group of orthogonal N x N matrices, stored as an (order, N, N)
    array sorted by quantized entries."""

    def __init__(self, elements):
        self.elements = np.asarray(elements, dtype=float)
        self.order = len(self.elements)
        self.dimension = self.elements.shape[1]
        deviation = np.abs(np.einsum('kji,kjl->kil', self.elements,
                self.elements) - np.eye(self.dimension)).max()
        if deviation > config.EQ_TOL:
            raise ReflectionError("group element not orthogonal, deviation %g" % deviation)

    def images(self, x):
        """All images g(x), one row per group element (with repetitions)."""
        return self.elements @ np.asarray(x, dtype=float)

    def is_closed(self):
        """Check closure under products and inverses within EQ_TOL."""
        keys = {quantize(g) for g in self.elements}
        for g in self.elements:
            if quantize(g.T) not in keys:
                return False
            for h in self.elements:
                if quantize(g @ h) not in keys:
                    return False
        return True


class Orbit:
    """Deduplicated orbit of `base`, rows ordered by first appearance in the
    group's element order."""
    def __init__(self, base, points):
        self.base = np.asarray(base, dtype=float)
        self.points = np.asarray(points, dtype=float)

    def __len__(self):
        return len(self.points)


def generate_group(rs, cap=config.GROUP_CAP):
    """Breadth-first closure of the reflections of `rs`. A group growing beyond
    `cap` elements raises a ReflectionError."""
    identity = np.eye(rs.dimension)
    generators = []
    gen_keys = set()
    for root in rs.roots:
        matrix = reflection_matrix(root)
        key = quantize(matrix)
        if key not in gen_keys:
            gen_keys.add(key)
            generators.append(matrix)
    seen = {quantize(identity): identity}
    queue = collections.deque([identity])
    while queue:
        element = queue.popleft()
        for generator in generators:
            product = generator @ element
            key = quantize(product)
            if key in seen:
                continue
            if len(seen) >= cap:
                raise ReflectionError(("group generated by %s exceeds %d elements;"
                    " input is degenerate or not finite") % (rs.name, cap))
            seen[key] = product
            queue.append(product)
    elements = [seen[key] for key in sorted(seen)]
    LOGGER.debug("generated group of order %d for %s", len(elements), rs.name)
    return ReflectionGroup(elements)


def orbit(group, x):
    x = np.asarray(x, dtype=float)
    if x.shape != (group.dimension,):
        raise ReflectionError("point of shape %s for a group acting on R^%d" % (
            x.shape, group.dimension))
    points, keys = [], set()
    for image in group.images(x):
        key = quantize(image)
        if key not in keys:
            keys.add(key)
            points.append(image)
    return Orbit(x, points)


def dunkl_distance(group, x, y):
    """d(x,y) = min over g in G of |x - g(y)|."""
    images = group.images(y)
    return float(np.min(np.linalg.norm(images - np.asarray(x, dtype=float), axis=1)))


def homogeneous_dimension(rs):
    return rs.dimension + rs.gamma


def root_classes(roots):
    """Partition root indices into orbits under the generated group, i.e. the
    connected components of v -> s_u(v). Classes are ordered by their first
    root, indices inside a class ascending."""
    roots = np.asarray(roots, dtype=float)
    label = [-1] * len(roots)
    classes = []
    for start in range(len(roots)):
        if label[start] >= 0:
            continue
        label[start] = len(classes)
        members, queue = [start], collections.deque([start])
        while queue:
            current = roots[queue.popleft()]
            for root in roots:
                target = _find_row(roots, current - np.dot(root, current) * root)
                if target >= 0 and label[target] < 0:
                    label[target] = len(classes)
                    members.append(target)
                    queue.append(target)
        classes.append(sorted(members))
    return classes


def _expand_kappa(roots, kappa):
    """Turn a scalar or a per-class list of multiplicities into one value per
    root."""
    classes = root_classes(roots)
    if np.isscalar(kappa):
        values = [float(kappa)] * len(classes)
    else:
        values = [float(k) for k in kappa]
        if len(values) == 1:
            values = values * len(classes)
        if len(values) != len(classes):
            raise ReflectionError(("%d multiplicities given for %d conjugacy "
                "classes of roots") % (len(values), len(classes)))
    per_root = np.zeros(len(roots))
    for value, members in zip(values, classes):
        per_root[members] = value
    return per_root


def _axis_roots(dimension):
    roots = []
    for axis in range(dimension):
        unit = np.zeros(dimension)
        unit[axis] = math.sqrt(2)
        roots.extend([unit, -unit])
    return roots


def _dihedral_roots(k):
    return [math.sqrt(2) * np.array([math.cos(j * math.pi / k),
        math.sin(j * math.pi / k)]) for j in range(2 * k)]


def catalog_roots(key, dimension=1):
    """Return (dimension, roots) for a catalog key: trivial, A1, A1xA1, A1^n,
    B2 or I2(k)."""
    if key == 'trivial':
        return dimension, np.zeros((0, dimension))
    if key == 'A1':
        return 1, np.array(_axis_roots(1))
    if key == 'A1xA1':
        return 2, np.array(_axis_roots(2))
    if key == 'B2':
        diagonal = [np.array([1.0, 1.0]), np.array([-1.0, -1.0]),
                np.array([1.0, -1.0]), np.array([-1.0, 1.0])]
        return 2, np.array(_axis_roots(2) + diagonal)
    match = PRODUCT_PATTERN.match(key)
    if match:
        rank = int(match.group(1))
        if rank < 1:
            raise ReflectionError("A1^n needs n >= 1")
        return rank, np.array(_axis_roots(rank))
    match = DIHEDRAL_PATTERN.match(key)
    if match:
        k = int(match.group(1))
        if k < 2:
            raise ReflectionError("I2(k) needs k >= 2, got %d" % k)
        return 2, np.array(_dihedral_roots(k))
    raise ReflectionError("unknown root system %r" % key)


def make_root_system(key, kappa=1.0, dimension=1):
    """Build a catalog root system. `kappa` is a scalar or a list with one
    value per conjugacy class of roots."""
    if key.startswith('trivial:'):
        key, dimension = 'trivial', int(key.split(':', 1)[1])
    dim, roots = catalog_roots(key, dimension)
    per_root = _expand_kappa(roots, kappa) if len(roots) else np.zeros(0)
    return RootSystem(dim, roots, per_root, name=key)


def _parse_entry(token, path, lineno):
    token = token.strip()
    match = SQRT_PATTERN.match(token)
    try:
        if match:
            value = math.sqrt(float(match.group(2)))
            return -value if match.group(1) == '-' else value
        return float(token)
    except ValueError:
        raise ReflectionError("%s:%d: cannot parse vector entry %r" % (
            path, lineno, token)) from None


def load_root_systems(path):
    """Parse a root-system file and return a dict name -> RootSystem.

    Every section starts with `[name]`, followed by `dimension = N` and any
    number of `root = [v1, ..., vN] kappa = k` lines. Lines starting with `#`
    are ignored."""
    sections = collections.OrderedDict()
    current = None
    with open(path, encoding='utf-8') as fhandle:
        for lineno, line in enumerate(fhandle, 1):
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            match = SECTION_PATTERN.match(line)
            if match:
                current = match.group(1).strip()
                sections[current] = {'dimension': None, 'roots': [], 'kappa': []}
                continue
            if current is None:
                raise ReflectionError("%s:%d: entry outside of a section" % (path, lineno))
            match = DIMENSION_PATTERN.match(line)
            if match:
                sections[current]['dimension'] = int(match.group(1))
                continue
            match = ROOT_PATTERN.match(line)
            if match:
                entries = [_parse_entry(tok, path, lineno)
                        for tok in match.group(1).split(',') if tok.strip()]
                sections[current]['roots'].append(entries)
                sections[current]['kappa'].append(_parse_entry(match.group(2),
                    path, lineno))
                continue
            raise ReflectionError("%s:%d: unrecognized line %r" % (path, lineno, line))
    systems = collections.OrderedDict()
    for name, data in sections.items():
        if data['dimension'] is None:
            raise ReflectionError("%s: section [%s] lacks a dimension" % (path, name))
        if any(len(r) != data['dimension'] for r in data['roots']):
            raise ReflectionError("%s: section [%s] has roots of wrong length" % (
                path, name))
        systems[name] = RootSystem(data['dimension'],
                np.array(data['roots']).reshape(-1, data['dimension']),
                data['kappa'], name=name)
    return systems


def resolve_root_system(key, kappa=1.0, dimension=1, root_file=None):
    """Look `key` up in `root_file` first (if given), then in the catalog."""
    if root_file:
        systems = load_root_systems(root_file)
        if key in systems:
            return systems[key]
    return make_root_system(key, kappa, dimension)
