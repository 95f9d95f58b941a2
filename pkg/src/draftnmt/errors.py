"""Error classes shared across the toolkit.

Each class carries a short machine-parseable code used by the command-line
front end, which prints failures as one line: ERROR <code>: <message>.
"""

from __future__ import annotations


class ToolkitError(Exception):
    code = "internal"


class ConfigError(ToolkitError):
    code = "config"


class CorpusError(ToolkitError):
    code = "corpus"


class CheckpointError(ToolkitError):
    code = "checkpoint"


class VocabularyMismatch(ToolkitError):
    code = "vocab-mismatch"


class TrainingDiverged(ToolkitError):
    code = "diverged"


class PhaseError(ToolkitError):
    code = "phase"
