"""Exception hierarchy shared by all gcwaves modules."""


class GCWavesError(Exception):
    """Base class for all library errors."""


class RegimeAmbiguous(GCWavesError):
    """Bond number too close to critical; surface-tension regime undecidable."""


class DomainViolation(GCWavesError):
    """Surface profile violates the minimum-depth constraint 1 + min(eta) > h0."""


class SolveFailure(GCWavesError):
    """Iterative strip solve stagnated before reaching its residual target."""


class MeanNotZero(GCWavesError):
    """Neumann data must have zero mean on the periodic box."""


class ZeroProfile(GCWavesError):
    """Operation undefined for the identically-zero surface profile."""


class WrongRegime(GCWavesError):
    """Closed form requested in the wrong surface-tension regime."""


class NotFocusing(GCWavesError):
    """Cubic-quartic coefficient combination is not focusing (should never occur)."""


class InversionFailure(GCWavesError):
    """One-dimensional inversion of the momentum-versus-scale map failed."""


class OutsideBall(GCWavesError):
    """Penalty argument at or beyond the outer Sobolev-ball radius."""


class Diverged(GCWavesError):
    """Descent could not decrease the objective after line-search exhaustion."""


class CollapsedToZero(GCWavesError):
    """Descent iterate collapsed toward the excluded zero profile."""


class BadCutoff(GCWavesError):
    """Spectral-splitting cutoff outside its admissible range."""
