"""Exception types shared across condlab."""


class CondlabError(Exception):
    """Base class for every error raised by condlab."""


class NotPositiveDefinite(CondlabError):
    def __init__(self, pivot_index, pivot_value=None):
        self.pivot_index = pivot_index
        self.pivot_value = pivot_value
        msg = f"matrix is not positive definite (pivot {pivot_index}"
        if pivot_value is not None:
            msg += f", value {pivot_value:.3e}"
        super().__init__(msg + ")")


class NoConvergence(CondlabError):
    def __init__(self, iterations):
        self.iterations = iterations
        super().__init__(f"Jacobi sweeps did not converge within {iterations} sweeps")


class InvalidExponent(CondlabError, ValueError):
    pass


class InvalidParameter(CondlabError, ValueError):
    pass


class DimensionMismatch(CondlabError, ValueError):
    pass


class UnsupportedPair(CondlabError, ValueError):
    pass


class IncompatibleOracles(CondlabError, ValueError):
    pass


class OddDimension(CondlabError, ValueError):
    pass


class BlockOverrun(CondlabError, ValueError):
    pass


class BudgetExceeded(CondlabError):
    def __init__(self, needed, cap, advice="use mode='heuristic'"):
        self.needed = needed
        self.cap = cap
        super().__init__(f"enumeration needs {needed} evaluations, cap is {cap}; {advice}")


class InsufficientData(CondlabError, ValueError):
    pass
