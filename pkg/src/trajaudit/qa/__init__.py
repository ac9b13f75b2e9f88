from .store import (
    DECISIONS,
    FAILURE_TAGS,
    QaStore,
    QueueItem,
    ReviewRecord,
    validate_decision,
)

__all__ = [
    "DECISIONS",
    "FAILURE_TAGS",
    "QaStore",
    "QueueItem",
    "ReviewRecord",
    "validate_decision",
]
