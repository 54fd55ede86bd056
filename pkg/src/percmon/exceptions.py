"""Exceptions and warnings raised by the monitor pipeline."""


class MonitorError(Exception):
    """Base class for all pipeline errors."""


class ZeroInterval(MonitorError, ValueError):
    """Two consecutive object states do not span a positive time interval."""


class MissingHistory(MonitorError):
    """An object has no previous state to verify its motion against."""


class FrameMismatch(MonitorError, ValueError):
    """Input streams disagree on the set of frames."""


class ConfigError(MonitorError, ValueError):
    """Unknown or invalid configuration key."""


class DegenerateGeometry(UserWarning):
    """An object coincides with the ego position; no radial direction exists."""
