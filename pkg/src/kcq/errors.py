"""Exception types raised across the package."""


class KcqError(Exception):
    """Base class for all package errors."""


class UnsupportedDimensionError(KcqError, ValueError):
    pass


class DomainError(KcqError, ValueError):
    pass


class DuplicateSampleError(KcqError, ValueError):
    pass


class ShapeError(KcqError, ValueError):
    pass


class NonFiniteInputError(KcqError, ValueError):
    pass


class ConvergenceError(KcqError, RuntimeError):
    """Implicit step failed to converge.

    ``residual`` is the last residual infinity norm; ``step`` and ``samples``
    are filled in when the failure happened inside a multi-step integration.
    """

    def __init__(self, message, residual=float("nan"), step=None, samples=None):
        super().__init__(message)
        self.residual = residual
        self.step = step
        self.samples = samples


class ResolutionError(KcqError, ValueError):
    pass


class DegenerateFrequenciesError(KcqError, ValueError):
    pass


class RootBracketingError(KcqError, RuntimeError):
    def __init__(self, index):
        super().__init__(f"could not bracket eigenvalue root for index {index}")
        self.index = index


class ZeroVarianceResponseError(KcqError, ValueError):
    pass


class SizeError(KcqError, ValueError):
    pass


class NonPDCovarianceError(KcqError, ValueError):
    pass


class CoverageError(KcqError, KeyError):
    pass


class GridError(KcqError, ValueError):
    pass


class DegenerateLikelihoodError(KcqError, RuntimeError):
    """Likelihood-weighted ensemble collapsed below the effective-size floor."""

    def __init__(self, ess, ess_min, qoi=None, step=None):
        where = ""
        if qoi is not None:
            where = f" for {qoi} at step {step}"
        super().__init__(
            f"degenerate likelihood{where}: effective sample size {ess:.3g} < {ess_min:g}"
        )
        self.ess = ess
        self.ess_min = ess_min
        self.qoi = qoi
        self.step = step


class DegeneratePosteriorError(KcqError, RuntimeError):
    pass


class SampleFailureError(KcqError, RuntimeError):
    def __init__(self, failed, n, threshold):
        super().__init__(
            f"{len(failed)} of {n} samples failed to integrate "
            f"(allowed fraction {threshold:g}); first failures: {list(failed)[:5]}"
        )
        self.failed = list(failed)


class CorruptionError(KcqError, IOError):
    pass


class SchemaMigrationError(KcqError, IOError):
    def __init__(self, found, expected):
        super().__init__(
            f"database schema version {found} cannot be read by this version "
            f"(expects {expected}); migrate the database first"
        )
        self.found = found
        self.expected = expected


class ConfigError(KcqError, ValueError):
    """Invalid or missing configuration entry; ``key`` names the culprit."""

    def __init__(self, key, message):
        super().__init__(f"config key `{key}`: {message}")
        self.key = key
