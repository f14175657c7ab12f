"""Educational question generation at Bloom's-taxonomy levels, with rubric
evaluation, agreement statistics, and n-gram diversity scoring."""

from .model import (
    NA,
    AnnotationRecord,
    BloomLevel,
    CourseConfig,
    QuestionRecord,
    RubricItem,
    Strategy,
    Violation,
    validate_record,
)

__all__ = [
    "NA",
    "AnnotationRecord",
    "BloomLevel",
    "CourseConfig",
    "QuestionRecord",
    "RubricItem",
    "Strategy",
    "Violation",
    "validate_record",
]

__version__ = "0.1.0"
