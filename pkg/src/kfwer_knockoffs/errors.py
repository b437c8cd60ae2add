"""Exception hierarchy shared across the package.

Errors are grouped by the CLI exit code they map to: input problems (2),
numerical failures (3), and configuration mistakes (4).
"""


class KfkoError(Exception):
    """Base class for all package errors."""


# ---- input errors (CLI exit code 2) ----

class ZeroColumn(KfkoError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"column {column} is all zeros")


class DimensionError(KfkoError):
    pass


class EmptyDataset(KfkoError):
    pass


class UnknownLabel(KfkoError):
    pass


class MissingGenotype(KfkoError):
    """Missing design cell in a retained sample; impute upstream."""


class MissingConstants(KfkoError):
    pass


class InsufficientDraws(KfkoError):
    pass


# ---- numerical failures (CLI exit code 3) ----

class RankDeficient(KfkoError):
    pass


class RankDeficientAfterCleaning(KfkoError):
    def __init__(self, columns):
        self.columns = list(columns)
        super().__init__(
            "design matrix rank-deficient after cleaning; offending columns: "
            + ", ".join(str(c) for c in self.columns)
        )


class NotPositiveDefinite(KfkoError):
    pass


class InfeasibleS(KfkoError):
    pass


class NoConvergence(KfkoError):
    def __init__(self, max_iters, lam=None):
        self.max_iters = max_iters
        self.lam = lam
        msg = f"coordinate descent did not converge in {max_iters} iterations"
        if lam is not None:
            msg += f" (lambda={lam:g})"
        super().__init__(msg)


class DegenerateFit(KfkoError):
    pass


# ---- configuration errors (CLI exit code 4) ----

class ConfigError(KfkoError):
    pass
