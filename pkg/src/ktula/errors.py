"""Exception hierarchy shared by all modules."""


class KtulaError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(KtulaError):
    """Invalid dimension or dimension mismatch between arguments."""


class ParameterError(KtulaError):
    """A scalar parameter is outside its admissible range."""


class ConfigurationError(KtulaError):
    """Inconsistent configuration, e.g. taming parameters that do not
    match the potential's declared constants."""


class EvalOverflowError(KtulaError):
    """A potential evaluator produced a non-finite value."""

    def __init__(self, evaluator, detail=""):
        self.evaluator = evaluator
        msg = f"non-finite value in evaluator '{evaluator}'"
        if detail:
            msg += f": {detail}"
        super().__init__(msg)


class DivergenceError(KtulaError):
    """Every chain in a run diverged.  Carries the partial batch so the
    divergence flags and first divergent steps remain inspectable."""

    def __init__(self, batch):
        self.batch = batch
        n = len(batch.diverged)
        super().__init__(
            f"all {n} chains diverged "
            f"(first steps: {list(batch.first_divergent_step)})"
        )


class ExtentError(KtulaError):
    """A grid or histogram extent does not cover enough mass."""


class FitError(KtulaError):
    """Not enough (or degenerate) data for a rate fit."""


class MomentOrderError(KtulaError):
    """An initial-condition moment of the required order is unavailable."""

    def __init__(self, order):
        self.order = order
        super().__init__(f"initial-condition moment E|theta0|^{order} is required "
                         f"but not available")


class UsageError(KtulaError):
    """Command-line or config-file usage error (CLI exit code 1)."""
