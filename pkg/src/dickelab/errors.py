"""Exception hierarchy shared by all dickelab modules."""


class DickeLabError(Exception):
    """Base class for every error raised by this package."""


class CapacityError(DickeLabError):
    """A basis or density operator would exceed the configured size cap."""


class RepresentationError(DickeLabError):
    """An operator was requested in a basis reduction that cannot represent it."""


class BasisMismatchError(DickeLabError):
    """Operands live on different bases, or a label is unknown."""


class ModelError(DickeLabError):
    """A model specification is invalid or incompatible with its basis."""


class NumericalError(DickeLabError):
    """A propagation failed a numerical health check."""


class TruncationError(NumericalError):
    """Population leaked into the top retained Fock level of a boson mode."""

    def __init__(self, mode, leak, cutoff):
        self.mode = mode
        self.leak = leak
        self.cutoff = cutoff
        super().__init__(
            f"Fock truncation leak in mode {mode!r}: top-level population {leak:.3e} "
            f"exceeds 1e-6 at cutoff {cutoff}; increase fock_cutoff"
        )


class StepSizeError(NumericalError):
    """The adaptive integrator could not meet its tolerance."""


class MetricError(DickeLabError):
    """A scaling metric could not be extracted for one or more ensemble sizes."""

    def __init__(self, failures):
        self.failures = dict(failures)
        detail = "; ".join(f"N={n}: {msg}" for n, msg in sorted(self.failures.items()))
        super().__init__(f"metric undefined for N in {sorted(self.failures)} ({detail})")
