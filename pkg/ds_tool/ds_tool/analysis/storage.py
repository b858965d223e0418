"""Persistence of grids and dyadic systems plus the content-addressed cache.

Grids are written as
    b'DSGRID\\0' | uint32 header length | header JSON | float64 weights
(little endian). Dyadic systems are plain JSON files. Every artifact carries
a format tag and a semantic version; readers refuse other major versions."""

import hashlib
import json
import logging
import os
import struct

import numpy as np
import semver

from .dyadic import DyadicBundle, build_from_centers
from .measure import WeightedGrid
from .reflection import RootSystem

LOGGER = logging.getLogger(__name__)

GRID_MAGIC = b'DSGRID\0'
GRID_FORMAT = 'dunkl-sparse/grid'
DYADIC_FORMAT = 'dunkl-sparse/dyadic'
REPORT_FORMAT = 'dunkl-sparse/report'
FORMAT_VERSION = '1.0.0'
CACHE_VARIABLE = 'DUNKL_SPARSE_CACHE'


class FormatError(Exception):
    """Raised when a stored grid, dyadic system or report cannot be read: wrong
    magic, unknown format tag, incompatible version or truncated content."""


def format_tag(kind):
    return {'format': kind, 'version': FORMAT_VERSION}


def check_format(header, kind, path='<memory>'):
    """Accept `header` iff it names format `kind` with our major version."""
    if header.get('format') != kind:
        raise FormatError("%s: expected format %s, found %s" % (path, kind,
            header.get('format')))
    try:
        found = semver.VersionInfo.parse(header.get('version', ''))
    except (TypeError, ValueError):
        raise FormatError("%s: invalid format version %r" % (path,
            header.get('version'))) from None
    if found.major != semver.VersionInfo.parse(FORMAT_VERSION).major:
        raise FormatError("%s: format version %s is incompatible with %s" % (
            path, found, FORMAT_VERSION))


def cache_key(params):
    """SHA-256 of the canonical JSON of the generating parameters."""
    canonical = json.dumps(params, sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(canonical.encode('utf-8')).hexdigest()


def grid_params(grid):
    return {'root_system': grid.rs.name, 'dimension': grid.dimension,
            'roots': grid.rs.roots.tolist(), 'kappa': grid.rs.kappa.tolist(),
            'box': grid.box.tolist(), 'resolution': grid.resolution,
            'subsamples': grid.subsamples}


def write_grid(path, grid):
    header = dict(format_tag(GRID_FORMAT), **grid_params(grid))
    encoded = json.dumps(header, sort_keys=True).encode('utf-8')
    with open(path, 'wb') as fhandle:
        fhandle.write(GRID_MAGIC)
        fhandle.write(struct.pack('<I', len(encoded)))
        fhandle.write(encoded)
        fhandle.write(grid.weights.astype('<f8').tobytes())


def read_grid(path):
    """Rebuild a WeightedGrid from `path` without recomputing the quadrature."""
    with open(path, 'rb') as fhandle:
        data = fhandle.read()
    start = len(GRID_MAGIC)
    if not data.startswith(GRID_MAGIC) or len(data) < start + 4:
        raise FormatError("%s: not a grid file" % path)
    length = struct.unpack('<I', data[start:start + 4])[0]
    try:
        header = json.loads(data[start + 4:start + 4 + length].decode('utf-8'))
    except (UnicodeDecodeError, ValueError) as err:
        raise FormatError("%s: corrupt header: %s" % (path, err)) from None
    check_format(header, GRID_FORMAT, path)
    payload = data[start + 4 + length:]
    if len(payload) % 8:
        raise FormatError("%s: truncated weights" % path)
    weights = np.frombuffer(payload, dtype='<f8').astype(float)
    rs = RootSystem(header['dimension'], header['roots'], header['kappa'],
            header['root_system'])
    try:
        return WeightedGrid(rs, header['box'], header['resolution'],
                header['subsamples'], weights=weights)
    except Exception as err:
        raise FormatError("%s: %s" % (path, err)) from err


def dyadic_payload(system):
    return dict(format_tag(DYADIC_FORMAT), tag=system.tag, seed=system.seed,
            delta=system.delta, scales=[system.k_min, system.k_max],
            centers={str(k): system.centers[k].tolist() for k in system.scales})


def write_dyadic(path, systems, c0=None):
    """Store one system or the systems of a bundle (with its C0)."""
    if isinstance(systems, DyadicBundle):
        systems, c0 = systems.systems, systems.c0
    payload = dict(format_tag(DYADIC_FORMAT), c0=c0,
            systems=[dyadic_payload(system) for system in systems])
    with open(path, 'w', encoding='utf-8') as fhandle:
        json.dump(payload, fhandle, indent=2, sort_keys=True)


def read_dyadic(path, grid):
    """Rebuild the stored systems on `grid` as a DyadicBundle."""
    try:
        with open(path, encoding='utf-8') as fhandle:
            payload = json.load(fhandle)
    except ValueError as err:
        raise FormatError("%s: %s" % (path, err)) from None
    check_format(payload, DYADIC_FORMAT, path)
    systems = []
    for entry in payload['systems']:
        check_format(entry, DYADIC_FORMAT, path)
        centers = {int(k): v for k, v in entry['centers'].items()}
        if max(max(v) for v in centers.values() if v) >= grid.n:
            raise FormatError("%s: center index outside the grid" % path)
        system = build_from_centers(grid, entry['delta'], centers, tag=entry['tag'])
        system.seed = entry['seed']
        systems.append(system)
    return DyadicBundle(systems, payload.get('c0'))


class Cache:
    """Content-addressed artifact store in the directory named by
    DUNKL_SPARSE_CACHE; a cache without directory stores nothing."""

    def __init__(self, directory=None):
        if directory is None:
            directory = os.environ.get(CACHE_VARIABLE) or None
        self.directory = directory
        if directory:
            os.makedirs(directory, exist_ok=True)

    @property
    def enabled(self):
        return bool(self.directory)

    def path(self, kind, params):
        suffix = '.grid' if kind == 'grid' else '.json'
        return os.path.join(self.directory, '%s-%s%s' % (kind, cache_key(params),
            suffix))

    def grid(self, params, build):
        """Return the cached grid for `params` or build and store it."""
        if not self.enabled:
            return build()
        path = self.path('grid', params)
        if os.path.exists(path):
            try:
                LOGGER.debug("grid cache hit %s", path)
                return read_grid(path)
            except FormatError as err:
                LOGGER.warning("ignoring unusable cache entry: %s", err)
        grid = build()
        write_grid(path, grid)
        return grid

    def bundle(self, params, grid, build):
        """Return the cached dyadic bundle for `params` or build and store it."""
        if not self.enabled:
            return build()
        path = self.path('dyadic', params)
        if os.path.exists(path):
            try:
                LOGGER.debug("dyadic cache hit %s", path)
                return read_dyadic(path, grid)
            except FormatError as err:
                LOGGER.warning("ignoring unusable cache entry: %s", err)
        bundle = build()
        write_dyadic(path, bundle)
        return bundle
