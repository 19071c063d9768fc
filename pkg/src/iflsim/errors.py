"""Exception hierarchy shared by all iflsim modules."""


class IflError(Exception):
    """Base class for every error raised by this package."""


class ValidationFailed(IflError):
    """A request or record violates a structural invariant."""


class UnresolvedReference(IflError):
    """An id points at a record that does not exist."""


class CycleDetected(IflError):
    def __init__(self, node_id: str):
        super().__init__(f"cycle detected at {node_id!r}")
        self.node_id = node_id


class TypeMismatch(IflError):
    def __init__(self, asset_id: str, reason: str = ""):
        msg = f"typed-parent mismatch for asset {asset_id!r}"
        super().__init__(f"{msg}: {reason}" if reason else msg)
        self.asset_id = asset_id


class SchemaMismatch(IflError):
    def __init__(self, sample_index: int, reason: str):
        super().__init__(f"sample {sample_index}: {reason}")
        self.sample_index = sample_index
        self.reason = reason


class ConflictingMetadata(IflError):
    """An id was re-registered with different content."""


class UnknownClient(IflError):
    def __init__(self, client_id: str):
        super().__init__(f"client {client_id!r} is not registered")
        self.client_id = client_id


class AllZeroMass(IflError):
    """Every contribution mass n_k * q_k is zero."""


class DimensionMismatch(IflError):
    """Vector lengths disagree."""


class EmptyDataset(IflError):
    """The operation needs at least one sample."""


class DivergenceDetected(IflError):
    """Training loss became non-finite."""


class NotNormalized(IflError):
    """Aggregation weights do not form a probability vector."""


class MissingParams(IflError):
    def __init__(self, task_id: str):
        super().__init__(f"no model params available for task {task_id!r}")
        self.task_id = task_id


class UnresolvedDevice(IflError):
    def __init__(self, device_id: str):
        super().__init__(f"plan names unknown device {device_id!r}")
        self.device_id = device_id


class IncompatibleAssignment(IflError):
    """An assignment groups tasks whose clients refuse to collaborate."""


class Infeasible(IflError):
    def __init__(self, task_id: str):
        super().__init__(f"task {task_id!r} has no feasible cohort")
        self.task_id = task_id


class MixedModelSpecs(IflError):
    """Tasks of one cohort reference different model specs."""


class PrivacyViolation(IflError):
    """Raw dataset samples reached a server-context operation."""
