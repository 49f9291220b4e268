from __future__ import annotations


class CrowdforgeError(Exception):
    """Base class for every error raised by the package."""


class InputError(CrowdforgeError):
    """A user-supplied file or parameter is malformed."""


class GenerationError(CrowdforgeError):
    """City, population or agenda generation could not complete."""


class SimulationError(CrowdforgeError):
    pass
