"""regmap: maps techspec checks to regulation controls with a hybrid of
BM25 search and a multilabel text CNN, with SME feedback driving active
learning, plus evaluation and coverage reporting."""

from .corpus import (
    RegulationControl,
    TechspecCheck,
    TokenStream,
    build_specification_text,
    preprocess,
)
from .stopwords import DEFAULT_STOPWORDS, StopwordList
from .coverage import CoverageReport, coverage_report
from .engine import Engine, EngineConfig, SystemStatus
from .feedback import FeedbackConfig, FeedbackRecord, LearnerState
from .hybrid import MappingQuery, MappingResult, fuse, map_check
from .index import InvertedIndex, SearchHit, build_index

__version__ = "0.1.0"

__all__ = [
    "CoverageReport",
    "DEFAULT_STOPWORDS",
    "Engine",
    "EngineConfig",
    "FeedbackConfig",
    "FeedbackRecord",
    "InvertedIndex",
    "LearnerState",
    "MappingQuery",
    "MappingResult",
    "RegulationControl",
    "SearchHit",
    "StopwordList",
    "SystemStatus",
    "TechspecCheck",
    "TokenStream",
    "build_index",
    "build_specification_text",
    "coverage_report",
    "fuse",
    "map_check",
    "preprocess",
    "__version__",
]
