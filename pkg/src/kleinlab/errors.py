"""Exception types shared across the package."""


class KleinlabError(Exception):
    """Base class for all package errors."""


class CirclesOverlap(KleinlabError):
    """Two Schottky circles intersect or nest: invalid ping-pong configuration."""


class WordBudgetExceeded(KleinlabError):
    """A word enumeration would exceed the configured cap."""


class ReductionDepthExceeded(KleinlabError):
    """Fundamental-domain reduction did not terminate; the point is treated
    as lying on the limit set."""


class NonFiniteFactor(KleinlabError):
    """A conformal factor evaluated to inf/nan: the path entered the map's
    singular locus."""


class DegenerateProfile(KleinlabError):
    """A time-change profile is constant on an interval and cannot be inverted."""


class TooFewSamples(KleinlabError):
    """Not enough path samples for the requested statistic."""


class NoSharedBins(KleinlabError):
    """Two exit measures share no sufficiently populated address bin."""


class UnsupportedField(KleinlabError):
    """A torus direction needs arithmetic beyond rational multiples of
    square roots."""


class ConfigInvalid(KleinlabError):
    """Scenario config rejected; ``problems`` lists every offending key."""

    def __init__(self, problems):
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
