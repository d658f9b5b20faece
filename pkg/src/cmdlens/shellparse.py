"""Pragmatic tokenizer and structural parser for Unix Shell / PowerShell command lines.

The goal is not a full shell grammar: it is to recover the utility / option /
parameter / redirection surface of a command line (including fd-prefixed
redirections such as ``2>&137``) reliably enough to drive documentation
retrieval and masking.  Subshells, heredocs, arithmetic expansion and
backslash escaping outside quotes are out of scope; environment-variable
assignments before the utility are kept as parameters.
"""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass, field

from .errors import EmptyCommand, UnterminatedQuote


class Dialect(enum.Enum):
    UNIX_SHELL = "unix-shell"
    POWERSHELL = "powershell"


class TokenKind(enum.Enum):
    WORD = "word"
    SINGLE_QUOTED = "single-quoted"
    DOUBLE_QUOTED = "double-quoted"
    OPERATOR = "operator"
    REDIRECTION = "redirection"


class Separator(enum.Enum):
    PIPE = "|"
    AND = "&&"
    OR = "||"
    SEMICOLON = ";"
    BACKGROUND = "&"


@dataclass(frozen=True)
class Token:
    text: str
    kind: TokenKind
    span: tuple[int, int]


@dataclass
class CommandUnit:
    utility: str = ""
    options: list[str] = field(default_factory=list)
    parameters: list[str] = field(default_factory=list)
    redirections: list[str] = field(default_factory=list)
    raw: str = ""


@dataclass
class ShellCommand:
    source: str
    units: list[CommandUnit]
    separators: list[Separator]
    dialect: Dialect
    trailing_separator: Separator | None = None  # accepted trailing ; or &

    def normalized(self) -> str:
        """Source with inter-token whitespace collapsed to single spaces."""
        parts: list[str] = []
        for i, unit in enumerate(self.units):
            parts.append(unit.raw)
            if i < len(self.separators):
                parts.append(self.separators[i].value)
        if self.trailing_separator is not None:
            parts.append(self.trailing_separator.value)
        return " ".join(p for p in parts if p)


_METACHARS = set("'\";&|<>") | set(" \t\n\r")
_ASSIGNMENT_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*=")
# longest first so <<, >>, <>, >&, <& win over single-char ops
_REDIR_OPS = (">>", "<<", "<>", ">&", "<&", ">", "<")
_REDIR_TOKEN_RE = re.compile(r"^(\d*)(&>>|&>|>>|>&|<>|<<|<&|>|<)(.*)$")


def _scan_quoted(source: str, start: int, quote: str) -> int:
    """Return the index one past the closing quote, honoring backslash
    escapes inside double quotes."""
    i = start + 1
    n = len(source)
    while i < n:
        ch = source[i]
        if quote == '"' and ch == "\\" and i + 1 < n:
            i += 2
            continue
        if ch == quote:
            return i + 1
        i += 1
    raise UnterminatedQuote(start)


def tokenize(source: str, dialect: Dialect = Dialect.UNIX_SHELL) -> list[Token]:
    """Split a command line into words, quoted strings, operators and
    redirections.  Quotes are retained in token text; spans index into
    ``source``.  Raises UnterminatedQuote when a quote never closes."""
    tokens: list[Token] = []
    i = 0
    n = len(source)
    while i < n:
        ch = source[i]
        if ch in " \t\n\r":
            i += 1
            continue
        start = i
        if ch == "'":
            end = _scan_quoted(source, i, "'")
            tokens.append(Token(source[start:end], TokenKind.SINGLE_QUOTED, (start, end)))
            i = end
        elif ch == '"':
            end = _scan_quoted(source, i, '"')
            tokens.append(Token(source[start:end], TokenKind.DOUBLE_QUOTED, (start, end)))
            i = end
        elif ch == ";":
            tokens.append(Token(";", TokenKind.OPERATOR, (start, start + 1)))
            i += 1
        elif ch == "|":
            if i + 1 < n and source[i + 1] == "|":
                tokens.append(Token("||", TokenKind.OPERATOR, (start, start + 2)))
                i += 2
            else:
                tokens.append(Token("|", TokenKind.OPERATOR, (start, start + 1)))
                i += 1
        elif ch == "&":
            if i + 1 < n and source[i + 1] == "&":
                tokens.append(Token("&&", TokenKind.OPERATOR, (start, start + 2)))
                i += 2
            elif i + 1 < n and source[i + 1] == ">":
                i = _scan_redirection(source, tokens, start)
            else:
                tokens.append(Token("&", TokenKind.OPERATOR, (start, start + 1)))
                i += 1
        elif ch in "<>":
            i = _scan_redirection(source, tokens, start)
        else:
            j = i
            while j < n and source[j] not in _METACHARS:
                j += 1
            tokens.append(Token(source[i:j], TokenKind.WORD, (i, j)))
            i = j
    return tokens


def _scan_redirection(source: str, tokens: list[Token], start: int) -> int:
    """Consume a redirection operator plus any glued target, folding an
    adjacent fd-number word (``2`` in ``2>&137``) into the token."""
    n = len(source)
    i = start
    if source[i] == "&":  # &> / &>>
        op = "&>>" if source[i:i + 3] == "&>>" else "&>"
        i += len(op)
    else:
        for candidate in _REDIR_OPS:
            if source.startswith(candidate, i):
                op = candidate
                i += len(candidate)
                break
    j = i
    while j < n and source[j] not in _METACHARS:
        j += 1
    text = source[start:j]
    span_start = start
    if tokens and tokens[-1].kind is TokenKind.WORD:
        prev = tokens[-1]
        if prev.span[1] == start and prev.text.isdigit():
            tokens.pop()
            text = prev.text + text
            span_start = prev.span[0]
    tokens.append(Token(text, TokenKind.REDIRECTION, (span_start, j)))
    return j


def _is_option(text: str, dialect: Dialect) -> bool:
    if len(text) > 1 and text.startswith("-"):
        return True
    if dialect is Dialect.POWERSHELL:
        return len(text) > 1 and text.startswith("/") and "/" not in text[1:]
    return False


def _build_unit(segment: list[Token], dialect: Dialect) -> CommandUnit:
    unit = CommandUnit(raw=" ".join(t.text for t in segment))
    pending_redirection = False
    for tok in segment:
        if pending_redirection and tok.kind in (
            TokenKind.WORD, TokenKind.SINGLE_QUOTED, TokenKind.DOUBLE_QUOTED
        ):
            unit.redirections[-1] += tok.text
            pending_redirection = False
            continue
        pending_redirection = False
        if tok.kind is TokenKind.REDIRECTION:
            unit.redirections.append(tok.text)
            # a bare operator (no glued target) absorbs the next word
            m = _REDIR_TOKEN_RE.match(tok.text)
            pending_redirection = bool(m) and m.group(3) == ""
        elif tok.kind in (TokenKind.SINGLE_QUOTED, TokenKind.DOUBLE_QUOTED):
            unit.parameters.append(tok.text)
        elif tok.kind is TokenKind.WORD:
            if not unit.utility and _ASSIGNMENT_RE.match(tok.text):
                unit.parameters.append(tok.text)
            elif not unit.utility:
                unit.utility = tok.text
            elif _is_option(tok.text, dialect):
                unit.options.append(tok.text)
            else:
                unit.parameters.append(tok.text)
    return unit


_SEPARATORS = {
    "|": Separator.PIPE,
    "&&": Separator.AND,
    "||": Separator.OR,
    ";": Separator.SEMICOLON,
    "&": Separator.BACKGROUND,
}


def parse(source: str, dialect: Dialect = Dialect.UNIX_SHELL) -> ShellCommand:
    """Structure a command line into units split on unquoted ``;``, ``&&``,
    ``||``, ``|`` and ``&``.  A trailing ``;`` or ``&`` is accepted (and the
    dangling empty unit dropped, matching interactive shells); any other
    empty unit raises EmptyCommand."""
    tokens = tokenize(source, dialect)
    if not tokens:
        raise EmptyCommand("blank command line")

    segments: list[list[Token]] = [[]]
    separators: list[Separator] = []
    for tok in tokens:
        if tok.kind is TokenKind.OPERATOR:
            separators.append(_SEPARATORS[tok.text])
            segments.append([])
        else:
            segments[-1].append(tok)

    trailing: Separator | None = None
    if not segments[-1] and separators and separators[-1] in (
        Separator.SEMICOLON, Separator.BACKGROUND
    ):
        segments.pop()
        trailing = separators.pop()

    units: list[CommandUnit] = []
    for seg in segments:
        if not seg:
            raise EmptyCommand("empty command between separators")
        units.append(_build_unit(seg, dialect))
    return ShellCommand(source=source, units=units, separators=separators,
                        dialect=dialect, trailing_separator=trailing)


def surface_vocabulary(cmd: ShellCommand) -> list[tuple[str, list[str]]]:
    """One (utility, options) pair per unit, first occurrence wins on
    duplicate utilities; pure-redirection units are skipped."""
    seen: set[str] = set()
    pairs: list[tuple[str, list[str]]] = []
    for unit in cmd.units:
        if not unit.utility:
            continue
        key = unit.utility.lower() if cmd.dialect is Dialect.POWERSHELL else unit.utility
        if key in seen:
            continue
        seen.add(key)
        pairs.append((unit.utility, list(unit.options)))
    return pairs
