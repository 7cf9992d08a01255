"""Exception types shared across the toolkit."""


class ConfigError(ValueError):
    """A configuration value is out of range or inconsistent."""


class ParseError(ValueError):
    """An input file does not conform to its declared format."""
