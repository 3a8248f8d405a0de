"""Exception types shared across the package."""


class EmcStabError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(EmcStabError):
    def __init__(self, what: str, expected, got):
        self.what = what
        self.expected = expected
        self.got = got
        super().__init__(f"{what}: expected {expected}, got {got}")


class GroupConstraintError(EmcStabError):
    """A matrix failed the group's defining constraints."""


class StructureConstantError(EmcStabError):
    """Structure constants are inconsistent (antisymmetry, Jacobi or basis)."""


class BasisExpansionError(EmcStabError):
    """A matrix could not be expanded in the algebra basis to tolerance."""


class InvariantInnerProductError(EmcStabError):
    """The algebra inner product is not invariant under the required subgroup."""


class StructuralError(EmcStabError):
    """A geometric consistency requirement failed (not a mere tolerance miss)."""


class NonConvergenceError(EmcStabError):
    def __init__(self, message: str, residual: float | None = None):
        self.residual = residual
        super().__init__(message)


class StepFailureError(EmcStabError):
    """An implicit integrator stage failed to converge."""


class BlowUpError(EmcStabError):
    def __init__(self, time: float, norm: float):
        self.time = time
        self.norm = norm
        super().__init__(f"state norm {norm:.3e} exceeded blow-up threshold at t={time:.6g}")


class OutOfNeighborhoodError(EmcStabError):
    """The point is too far from the group orbit for the velocity map."""


class SigmaCapError(EmcStabError):
    def __init__(self, sigma_max: float, min_eig: float):
        self.sigma_max = sigma_max
        self.min_eig = min_eig
        super().__init__(
            f"no penalty weight up to {sigma_max:g} makes the slice form definite "
            f"(min eigenvalue {min_eig:.3e})"
        )


class UnknownSystemError(EmcStabError):
    def __init__(self, name: str, admissible):
        self.name = name
        self.admissible = list(admissible)
        super().__init__(f"unknown system {name!r}; available: {', '.join(self.admissible)}")


class ParameterError(EmcStabError):
    """A system parameter is missing, unknown or out of range."""
