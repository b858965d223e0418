"""Exceptions raised by the analysis modules. All of them derive from
AnalysisError so that the harness can record a failed block and carry on."""


class AnalysisError(Exception):
    """Base class of all errors raised while building or verifying an analytic
    object."""


class ParameterError(AnalysisError):
    """A numeric parameter lies outside its admissible range (p ≤ 1, δ out of
    (0, 1/2], too few iterations, ...)."""


class ReflectionError(AnalysisError):
    """A root system is malformed: roots not normalized, missing negatives, not
    closed under its reflections, a non-invariant multiplicity or a group which
    does not close below the element cap."""


class GridError(AnalysisError):
    """The quadrature grid cannot be built or queried as requested."""


class DyadicError(AnalysisError):
    """A dyadic system violates one of its defining properties. `prop` names
    the property (separation, covering, partition, nesting, sandwich, ...)."""
    def __init__(self, msg, prop=None):
        super().__init__(msg)
        self.prop = prop


class OperatorError(AnalysisError):
    """A kernel produced non-finite values or an operator was asked for
    something it cannot provide."""


class WeightError(AnalysisError):
    """A weight is not positive, not radial although declared so, or a weight
    estimator failed its precondition."""


class SparseError(AnalysisError):
    """The sparse construction failed. If the failure is tied to a grid point,
    its index is available as `point`."""
    def __init__(self, msg, point=None):
        super().__init__(msg)
        self.point = point


class BoundsError(AnalysisError):
    """A weighted-bound experiment cannot be carried out for the given input,
    e.g. because b is degenerate or the geometry does not fit into the box."""
