"""Exception types shared across the engine."""


class CanvoxError(Exception):
    """Base class for all engine errors."""


class PoolExhausted(CanvoxError):
    """The cell pools hit their configured capacity."""


class MaxDepthExceeded(CanvoxError):
    """Refinement was requested below the configured maximum depth."""


class ChildrenNotLeaves(CanvoxError):
    """Coarsening requires all eight children to be leaves."""


class OutOfCanvas(CanvoxError):
    """A point lies outside the canvas bounding box."""


class RayMissesCanvas(CanvoxError):
    """A ray never enters the canvas bounding box."""


class TraversalAbort(CanvoxError):
    """Ray traversal detected corrupt state or exceeded the step cap."""


class SnapshotError(CanvoxError):
    """Base class for snapshot load failures."""


class BadMagic(SnapshotError):
    pass


class VersionMismatch(SnapshotError):
    pass


class TruncatedFile(SnapshotError):
    pass


class InvariantViolation(SnapshotError):
    """A loaded canvas failed structural validation."""


class ParseError(CanvoxError):
    """A stroke-script line failed to parse or validate."""

    def __init__(self, line: int, reason: str):
        self.line = line
        self.reason = reason
        super().__init__(f"line {line}: {reason}")
