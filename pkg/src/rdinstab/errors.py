"""Exception types raised by the certification routines."""


class RDInstabError(Exception):
    """Base class for all package errors."""


class InvalidParameters(RDInstabError, ValueError):
    """System parameters or configuration violate their invariants."""


class OutOfDomain(InvalidParameters):
    """An evaluation point lies outside the spatial interval."""


class NumericalFailure(RDInstabError, ArithmeticError):
    """Base class for failures of a numerical procedure."""


class PoleProximity(NumericalFailure):
    """Evaluation point is too close to a pole of the PDE transfer function."""


class Degenerate(NumericalFailure):
    """A boundary matrix or adjugate pairing is numerically singular."""


class DegenerateRoot(Degenerate):
    """The eigenvector construction breaks down at this root."""


class BoundaryZero(NumericalFailure):
    """The characteristic function vanishes on a contour that could not be moved."""


class ConvergenceFailure(NumericalFailure):
    """Newton polishing did not reach the residual target."""


class SingularParameters(NumericalFailure):
    """A closed-form kernel constant has a vanishing denominator."""


class SolverFailure(NumericalFailure):
    """The semidefinite backend broke down."""


class StepFailure(NumericalFailure):
    """The implicit time step could not be solved."""


class ZeroEnergy(NumericalFailure):
    """Energy is not positive on the window used for a growth-rate fit."""
