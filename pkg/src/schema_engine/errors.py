"""Exception types shared across the engine."""


class ConfigError(ValueError):
    """A run configuration is malformed or names something that does not exist."""


class StructuralIntegrityError(RuntimeError):
    """The schema network violates a structural invariant (dims, dangling ids)."""


class SnapshotError(ValueError):
    """A snapshot byte stream cannot be decoded."""


class TraceFormatError(ValueError):
    """A trace file has an unknown header or an unsupported format version."""
