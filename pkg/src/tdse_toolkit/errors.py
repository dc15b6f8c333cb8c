"""Exception types raised by the solver suite."""


class ToolkitError(Exception):
    """Base class for all errors raised by :mod:`tdse_toolkit`."""


class DimensionError(ToolkitError, ValueError):
    pass


class HermiticityError(ToolkitError, ValueError):
    def __init__(self, defect, what="operator"):
        self.defect = float(defect)
        super().__init__(f"{what} is not Hermitian: max |H - H^dagger| = {self.defect:.3e}")


class SpectralError(ToolkitError, RuntimeError):
    """Eigensolver failure; ``residual`` is the reconstruction error when known."""

    def __init__(self, message, residual=float("nan")):
        self.residual = float(residual)
        super().__init__(f"{message} (residual {self.residual:.3e})")


class FieldBoundsError(ToolkitError, ValueError):
    """A field value lies outside the declared bounds [eps_min, eps_max]."""


class HorizonError(ToolkitError, ValueError):
    """A time lies outside the control horizon [0, T]."""


class ParseError(ToolkitError, ValueError):
    pass


class ReferenceNotConverged(ToolkitError, RuntimeError):
    def __init__(self, gap, n_ref, tol):
        self.gap = float(gap)
        self.n_ref = int(n_ref)
        self.tol = float(tol)
        super().__init__(
            f"reference solver did not reach tol={tol:.1e} by N_ref={n_ref}; "
            f"last Cauchy gap {gap:.3e}"
        )


class ConfigError(ToolkitError, ValueError):
    pass


class SweepError(ToolkitError, RuntimeError):
    """A convergence sweep produced results that cannot come from a correct run."""
