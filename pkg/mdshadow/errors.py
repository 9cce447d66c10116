"""
Exception types raised by the mdshadow library.

Every error derives from MDShadowError and from the closest builtin, so a
caller catching ValueError or ArithmeticError keeps working.
"""

from typing import Optional, Sequence


class MDShadowError(Exception):
    """Base class for all library errors."""


# --- md_engine -------------------------------------------------------------

class InvalidSeparationError(MDShadowError, ValueError):
    """A pair separation r <= 0 was passed to the potential."""


class ParticleOverlapError(MDShadowError, ArithmeticError):
    """Two particles sit at exactly the same position."""

    def __init__(self, i: Optional[int] = None, j: Optional[int] = None):
        if i is None or j is None:
            super().__init__("Particle pair at zero separation")
        else:
            super().__init__(f"Particles {i} and {j} overlap (zero separation)")
        self.i = i
        self.j = j


class InstabilityError(MDShadowError, ArithmeticError):
    """The integrator produced non-finite coordinates."""

    def __init__(self, message: str, step: Optional[int] = None, dt: Optional[float] = None):
        super().__init__(message)
        self.step = step
        self.dt = dt


# --- canonical_sampler -----------------------------------------------------

class ThermostatInstabilityError(InstabilityError):
    """Langevin burn-in blew up; reduce langevin_dt."""


# --- trajectory_observables ------------------------------------------------

class GridMismatchError(MDShadowError, ValueError):
    """Two paths cannot be brought onto a common time grid."""


class DegenerateAngleError(MDShadowError, ArithmeticError):
    """F5 was evaluated on a path with a zero increment."""


# --- distribution_metrics --------------------------------------------------

class SampleSizeError(MDShadowError, ValueError):
    """Prokhorov computation requires equal sample sizes."""


class NonFiniteDistanceError(MDShadowError, ValueError):
    """A pairwise distance came out infinite or NaN."""


class MetricCompatibilityError(MDShadowError, ValueError):
    """Two samples declare different metrics."""


class ToleranceError(MDShadowError, ArithmeticError):
    """The bounded-Lipschitz program did not reach optimality."""

    def __init__(self, message: str, gap: float = float("nan")):
        super().__init__(message)
        self.gap = gap


class EdgeMismatchError(MDShadowError, ValueError):
    """Histograms with different bin edges cannot be compared."""


# --- shadow_coupler --------------------------------------------------------

class InfeasiblePartitionError(MDShadowError, ValueError):
    """No equal-count partition satisfies the cell conditions."""

    def __init__(self, message: str, constraint: str):
        super().__init__(f"{message} (violated: {constraint})")
        self.constraint = constraint


class NoPerfectMatchingError(MDShadowError, ValueError):
    """Hall's condition fails; carries a violating set as certificate."""

    def __init__(self, violating_set: Sequence[int], neighborhood: Sequence[int]):
        self.violating_set = sorted(int(i) for i in violating_set)
        self.neighborhood = sorted(int(j) for j in neighborhood)
        super().__init__(
            f"No perfect matching: {len(self.violating_set)} rows "
            f"reach only {len(self.neighborhood)} columns"
        )


# --- experiments -----------------------------------------------------------

class ConfigError(MDShadowError, ValueError):
    """An experiment configuration could not be parsed or validated."""

    def __init__(self, message: str, field: Optional[str] = None, line: Optional[int] = None):
        location = []
        if field is not None:
            location.append(f"field '{field}'")
        if line is not None:
            location.append(f"line {line}")
        suffix = f" ({', '.join(location)})" if location else ""
        super().__init__(f"{message}{suffix}")
        self.field = field
        self.line = line
