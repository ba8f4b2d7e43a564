"""File-based data management: content-addressed job workspaces, queries,
indexing and condition-driven workflows."""
from .core import canonicalize, compute_id, read_document, validate_statepoint, write_document_atomic
from .errors import (
    ConflictError,
    CorruptionError,
    DataspaceError,
    FilterParseError,
    NotAProjectError,
    StatePointError,
    UnknownIdError,
)
from .project import Job, Project, get_project, init_project, move_job, with_job_dir
from .query import matches, parse_cli_tokens, parse_filter

__version__ = "0.1.0"

__all__ = [
    "ConflictError",
    "CorruptionError",
    "DataspaceError",
    "FilterParseError",
    "Job",
    "NotAProjectError",
    "Project",
    "StatePointError",
    "UnknownIdError",
    "canonicalize",
    "compute_id",
    "get_project",
    "init_project",
    "matches",
    "move_job",
    "parse_cli_tokens",
    "parse_filter",
    "read_document",
    "validate_statepoint",
    "with_job_dir",
    "write_document_atomic",
]
