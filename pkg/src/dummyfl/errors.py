"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Shapes, architectures or rule parameters are inconsistent."""


class InputError(ValueError):
    """A caller passed data outside an operation's domain."""
