"""Numeric constants shared by the analysis modules."""

# tolerance for matrix and vector equality, also the quantum used before
# hashing points or matrices
EQ_TOL = 1e-9
# normalization tolerance: every root satisfies |<v,v> - 2| <= NORM_TOL
NORM_TOL = 1e-12
# upper bound on the order of generated reflection groups
GROUP_CAP = 1024

# subsamples per axis for cell averages of the density
SUBSAMPLES = 3
# smallest admissible number of grid points per axis
MIN_RESOLUTION = 8
# dense n x n distance matrices are only built below this number of points
DENSE_LIMIT = 6000

# sandwich inner constant targeted by the dyadic construction and the lowest
# value which is still accepted
SANDWICH_TARGET = 1.0 / 6
SANDWICH_FLOOR = 1.0 / 24
# number of independently seeded systems in a bundle
BUNDLE_SIZE = 3
# default cap on the containing-cube inflation
C0_CAP = 32.0

# Hölder exponent declared for the shipped kernels
KERNEL_EPS = 1.0
# cz_check flags every sample whose constant exceeds this value
EXPLOSION_CAP = 1e6

# relative tolerance of the domination coverage check
COVERAGE_TOL = 1e-9
# recursion depth of the sparse claim
MAX_DEPTH = 30
# the calibration of C_E doubles up to this bound
CE_LIMIT = 2.0 ** 40
# budget of cubes added by the oscillation augmentation
AUGMENT_BUDGET = 50000

# reverse Hölder exponent ladder 2^-1 ... 2^-8 and the default constant cap
RH_EXPONENTS = tuple(2.0 ** -i for i in range(1, 9))
RH_CAP = 10.0

# number of orbit balls in the default A_p test family
FAMILY_BALLS = 500

# stability: the max ratio may change by at most STABILITY_FACTOR across
# SEED_BATCHES disjoint seed batches and under one resolution doubling
SEED_BATCHES = 5
STABILITY_FACTOR = 2.0
# the unweighted p = 2 ratio must lie within this factor of the power
# iteration estimate of the L^2 operator norm
L2_AGREEMENT = 1.5
