"""Exception types shared across the package."""


class InvalidScheduleError(ValueError):
    """A learning-rate or pacing schedule violated its constraints."""


class ConfigError(ValueError):
    """A run or dataset configuration failed validation."""
