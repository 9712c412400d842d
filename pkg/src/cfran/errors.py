"""Exception hierarchy shared by all modules."""


class CfranError(Exception):
    """Base class for library errors."""


class ConfigError(CfranError, ValueError):
    """Invalid or unparsable scenario configuration."""

    def __init__(self, message, field=None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DegenerateGeometryError(CfranError):
    """Geometry makes a closed-form quantity undefined (empty or singleton sets)."""

    def __init__(self, message, ue=None, edu=None):
        self.ue = ue
        self.edu = edu
        super().__init__(message)


class SingularChannelError(CfranError):
    """Per-EDU channel matrix is rank deficient or too ill-conditioned for ZF."""

    def __init__(self, message, edu=None):
        self.edu = edu
        super().__init__(message)


class InfeasibleColoringError(CfranError):
    """No conflict-graph threshold produced exactly the requested number of colors."""

    def __init__(self, message, target=None, nearest=None):
        self.target = target
        self.nearest = nearest
        super().__init__(message)


class UnsupportedConfigurationError(CfranError):
    """The requested combination of options is outside what a routine supports."""
