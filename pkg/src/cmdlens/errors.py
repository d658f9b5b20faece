"""Exception types shared across the package.

Every error the library can raise on purpose lives here, so callers
(CLI, HTTP service) can map them to exit codes / status codes in one place.
"""

from __future__ import annotations


class CmdlensError(Exception):
    """Base class for all deliberate errors raised by this package."""


# --- shell parsing ---------------------------------------------------------

class UnterminatedQuote(CmdlensError):
    def __init__(self, position: int):
        self.position = position
        super().__init__(f"unterminated quote opened at byte {position}")


class EmptyCommand(CmdlensError):
    pass


# --- documentation corpus --------------------------------------------------

class MissingSection(CmdlensError):
    def __init__(self, section: str):
        self.section = section
        super().__init__(f"required section not found: {section}")


class InsufficientNegatives(CmdlensError):
    pass


# --- embeddings ------------------------------------------------------------

class ProviderUnavailable(CmdlensError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"embedding provider unavailable: {detail}")


class DimensionMismatch(CmdlensError):
    pass


# --- retrieval -------------------------------------------------------------

class DuplicateChunkId(CmdlensError):
    def __init__(self, chunk_id: str):
        self.chunk_id = chunk_id
        super().__init__(f"duplicate chunk id: {chunk_id}")


class ProviderMismatch(CmdlensError):
    pass


class DegenerateLabels(CmdlensError):
    pass


# --- intent catalog --------------------------------------------------------

class SchemaError(CmdlensError):
    def __init__(self, field: str, detail: str = ""):
        self.field = field
        self.detail = detail
        super().__init__(f"catalog schema error at {field}: {detail}" if detail
                         else f"catalog schema error at {field}")


class DanglingTacticRef(CmdlensError):
    def __init__(self, technique_id: str, tactic_id: str):
        self.technique_id = technique_id
        self.tactic_id = tactic_id
        super().__init__(f"technique {technique_id} references unknown tactic {tactic_id}")


class LengthMismatch(CmdlensError):
    pass


# --- prompts / dialogue ----------------------------------------------------

class UnknownSource(CmdlensError):
    def __init__(self, source: str):
        self.source = source
        super().__init__(f"unknown command data source: {source!r}")


class RoleOrderViolation(CmdlensError):
    pass


# --- chat backend / pipeline -----------------------------------------------

class BackendUnavailable(CmdlensError):
    def __init__(self, detail: str):
        self.detail = detail
        super().__init__(f"chat backend unavailable: {detail}")


class ContextOverflow(CmdlensError):
    pass


class DeadlineExceeded(CmdlensError):
    pass


# --- text metrics ----------------------------------------------------------

class EmptyInput(CmdlensError):
    pass


class EmptyCorpus(CmdlensError):
    pass


# --- gateway ---------------------------------------------------------------

class ConfigError(CmdlensError):
    def __init__(self, missing: list[str]):
        self.missing = missing
        super().__init__("missing required config fields: " + ", ".join(missing))


class SessionNotFound(CmdlensError):
    def __init__(self, session_id: str):
        self.session_id = session_id
        super().__init__(f"no such session: {session_id}")


class StoreCorrupt(CmdlensError):
    def __init__(self, detail: str, offset: int | None = None):
        self.detail = detail
        self.offset = offset
        msg = f"session store corrupt: {detail}"
        if offset is not None:
            msg += f" (offset {offset})"
        super().__init__(msg)


def tag_stage(exc: BaseException, stage: str) -> BaseException:
    """Annotate an exception with the pipeline stage it came from."""
    if not getattr(exc, "stage", None):
        exc.stage = stage  # type: ignore[attr-defined]
    return exc
