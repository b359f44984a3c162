"""Exception types raised across the pipeline."""


class PitchTrackError(Exception):
    """Base class for all pipeline errors."""


class ShapeError(PitchTrackError, ValueError):
    pass


class NoHistory(PitchTrackError):
    """A player has never had a single joint observed."""


class AllMissing(PitchTrackError, ValueError):
    pass


class InvalidCutoff(PitchTrackError, ValueError):
    pass


class Underdetermined(PitchTrackError, ValueError):
    pass


class InvalidMerge(PitchTrackError, ValueError):
    pass


class DegenerateTrack(PitchTrackError, ValueError):
    pass


class InvalidWindow(PitchTrackError, ValueError):
    pass


class InsufficientBaseline(PitchTrackError, ValueError):
    pass


class NoIntersection(PitchTrackError):
    pass


class InsufficientTrack(PitchTrackError, ValueError):
    pass


class NoSeed(PitchTrackError):
    """Bat fusion needs at least one detector box to start from."""


class InsufficientDetections(PitchTrackError, ValueError):
    pass


class MissingClass(PitchTrackError, ValueError):
    pass


class InvalidK(PitchTrackError, ValueError):
    pass


class ConfigError(PitchTrackError, ValueError):
    pass
