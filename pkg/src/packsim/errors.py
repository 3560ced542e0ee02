"""Exception types shared across the package."""


class PacksimError(Exception):
    """Base class for all package-specific errors."""


class ModelError(PacksimError):
    """Invalid job model."""


class NegativeRateError(ModelError):
    pass


class AbsorptionUnreachableError(ModelError):
    def __init__(self, phase):
        self.phase = phase
        super().__init__(f"no departure path from phase {phase}")


class NoArrivalsError(ModelError):
    pass


class SingularSystemError(PacksimError):
    """Defensive: a linear system that should be regular is singular."""


class SizeOverflowError(PacksimError):
    pass


class NegativeWeightError(PacksimError):
    pass


class CostTableError(PacksimError):
    """Cost table violates h(0)=0 or the claimed Lipschitz bound."""


class LpInfeasibleError(PacksimError):
    """The budget admits no solution with positive throughput."""


class LpUnboundedError(PacksimError):
    """Internal error: the assembled LP can never be unbounded."""


class ImpulseCycleError(PacksimError):
    """Following immediate-request actions can revisit a configuration."""


class MassOffRecurrentSupportError(PacksimError):
    pass


class DegeneratePolicyError(PacksimError):
    """Policy never serves; conditional quantities are undefined."""


class SingularGeneratorError(PacksimError):
    pass


class WindowEmptyError(PacksimError):
    pass


class DegenerateGridError(PacksimError):
    pass


class InvariantBreachError(PacksimError):
    """A hard simulator invariant failed; the run is aborted."""


class ConfigError(PacksimError):
    """Malformed or inconsistent experiment configuration."""
