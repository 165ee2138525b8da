"""Exception types shared across the package."""


class TunekitError(Exception):
    """Base class for all errors raised by this package."""


class SpaceError(TunekitError, ValueError):
    """Invalid search-space definition or out-of-space configuration."""


class SchedulerError(TunekitError, ValueError):
    """An event the scheduler refuses to accept (state is left unchanged)."""


class OptimError(TunekitError, ValueError):
    """Invalid optimizer configuration or malformed update inputs."""


class ImageError(TunekitError, ValueError):
    """Image of the wrong dtype, shape, or value range."""


class PredictionError(TunekitError, ValueError):
    """Malformed prediction vectors or inconsistent prediction sets."""


class ProtocolError(TunekitError, ValueError):
    """A wire message that cannot be parsed or fails validation."""


class WorkerError(TunekitError, RuntimeError):
    """An external worker process misbehaved (crash, timeout, bad reply)."""


class TrialDiverged(TunekitError, RuntimeError):
    """Training produced a non-finite loss or metric."""


class EventLogError(TunekitError, ValueError):
    """Corrupt, truncated, or inconsistent campaign event log."""
