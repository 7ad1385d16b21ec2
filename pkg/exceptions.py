"""
Error hierarchy shared by the simulator modules and the exit codes the CLI maps them to.
"""


class NFSError(Exception):
    """Base class for simulator errors"""

    exit_code: int = 1


class NFSInputError(NFSError, ValueError):
    """Invalid physical input: projections, override tables, windows, switching order"""

    exit_code = 2


class ConfigError(NFSError):
    """Scenario file could not be parsed or failed schema validation"""

    exit_code = 2


class DesignError(NFSError):
    """No switching time satisfies the requested target in the search window"""

    exit_code = 3


class NoPhotonError(NFSError):
    """Both mode windows are empty, so there is no photon to share between them"""

    exit_code = 4
