"""Error types.

Every error carries a short machine-readable ``code`` which the command
line front end writes into its JSON error object.
"""


class TermctlError(Exception):
    code = "ERROR"

    def to_dict(self):
        return {"error": self.code, "message": str(self)}


class PreconditionError(TermctlError, ValueError):
    code = "PRECONDITION"


class RegimeUnsupported(TermctlError):
    code = "REGIME_UNSUPPORTED"


class Degenerate(TermctlError):
    code = "DEGENERATE"


class UnstableBound(TermctlError):
    code = "UNSTABLE"


class TooFewBatches(TermctlError):
    code = "TOO_FEW_BATCHES"


class PlanInfeasible(TermctlError):
    code = "PLAN_INFEASIBLE"


class SingularSigma(TermctlError):
    code = "SINGULAR_SIGMA"


class NotTerminated(TermctlError):
    code = "NOT_TERMINATED"


class DensityViolation(TermctlError):
    code = "DENSITY_VIOLATION"


class TooFewCycles(TermctlError):
    code = "TOO_FEW_CYCLES"


class UnknownSigma(TermctlError):
    code = "UNKNOWN"
