"""Exception hierarchy shared by all solver modules."""


class SolverError(Exception):
    """Base class for every error raised by this package."""

    code = "solver_error"

    def to_dict(self):
        return {"error": self.code, "type": type(self).__name__, "message": str(self)}


# numerics

class SingularMatrixError(SolverError):
    code = "singular_matrix"


class SingularM1(SingularMatrixError):
    code = "singular_m1"


class SingularSchur(SingularMatrixError):
    code = "singular_schur"


class Infeasible(SolverError):
    code = "infeasible"

    def __init__(self, message="problem is infeasible", solution=None):
        super().__init__(message)
        self.solution = solution


class Unbounded(SolverError):
    code = "unbounded"


class MaxIterations(SolverError):
    """Iteration cap reached; ``solution`` holds the best iterate."""

    code = "max_iter"

    def __init__(self, message, solution=None):
        super().__init__(message)
        self.solution = solution


class EvaluationFailure(SolverError):
    code = "evaluation_failure"


# game model

class DimensionMismatch(SolverError, ValueError):
    code = "dimension_mismatch"


class NotStronglyMonotone(SolverError):
    code = "not_strongly_monotone"

    def __init__(self, mu):
        super().__init__(f"pseudo-gradient is not strongly monotone (mu={mu:.6g})")
        self.mu = mu


class SingularS(SolverError):
    code = "singular_s"


# lower level

class NotConverged(SolverError):
    code = "not_converged"

    def __init__(self, residual, iterations, result=None):
        super().__init__(
            f"v-NE iteration did not converge: residual {residual:.3e} after {iterations} iterations"
        )
        self.residual = residual
        self.iterations = iterations
        self.result = result


# sensitivity

class InfeasiblePoint(SolverError):
    code = "infeasible_point"


class RankDeficientEqualities(SolverError):
    code = "rank_deficient_equalities"


class IftViolation(SolverError):
    """Implicit-function-theorem hypothesis failed.

    ``condition`` is one of ``gamma_nonempty``, ``hessian_not_pd``,
    ``rank_deficient`` or ``singular_schur``.
    """

    code = "ift_violation"

    def __init__(self, condition, message="", iteration=None):
        text = f"IFT condition failed: {condition}"
        if message:
            text += f" ({message})"
        if iteration is not None:
            text += f" at iteration {iteration}"
        super().__init__(text)
        self.condition = condition
        self.iteration = iteration


# leader

class BacktrackExhausted(SolverError):
    code = "backtrack_exhausted"

    def __init__(self, l_max):
        super().__init__(f"Armijo backtracking found no acceptable step in {l_max} trials")
        self.l_max = l_max


# warm start

class StructureViolation(SolverError):
    code = "structure_violation"


class NoInteriorEquilibrium(SolverError):
    code = "no_interior_equilibrium"


class NotConsensed(SolverError):
    code = "not_consensed"

    def __init__(self, residual, iterations):
        super().__init__(f"consensus residual {residual:.3e} after {iterations} ADMM iterations")
        self.residual = residual
        self.iterations = iterations


# scenario files

class ParseError(SolverError):
    code = "parse_error"

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line

    def to_dict(self):
        d = super().to_dict()
        d["field"] = self.field
        d["line"] = self.line
        return d


class ValidationError(SolverError):
    code = "validation_error"

    def __init__(self, message, assumption=None, field=None):
        super().__init__(message)
        self.assumption = assumption
        self.field = field

    def to_dict(self):
        d = super().to_dict()
        d["assumption"] = self.assumption
        d["field"] = self.field
        return d
