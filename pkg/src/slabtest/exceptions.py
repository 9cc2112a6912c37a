class DomainError(ValueError):
    """An argument falls outside the domain where a quantity is defined."""


class ConfigError(ValueError):
    """A run configuration failed validation."""

    def __init__(self, kind, message):
        super().__init__(f"{kind}: {message}")
        self.kind = kind
