from .executor import ThreadPoolTaskExecutor
from .group_loader import load_group_file
from .reports import FileReportWriter, canonical_json, to_jsonable

__all__ = [
    "FileReportWriter",
    "ThreadPoolTaskExecutor",
    "canonical_json",
    "load_group_file",
    "to_jsonable",
]
