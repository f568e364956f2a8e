"""Exception types shared across the package."""


class ConfigError(ValueError):
    """A configuration value is invalid; the message names the offending field."""


class LifecycleError(RuntimeError):
    """An operation was called in the wrong phase of an episode's life."""


class TrainingDiverged(RuntimeError):
    """The DQN loss became non-finite; carries a diagnostic snapshot."""
