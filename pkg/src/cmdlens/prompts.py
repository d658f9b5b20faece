"""Prompt construction: expression diversification over a template set,
question augmentation, the knowledge-infused prompt, per-data-source
dataset prompts, and multi-round dialogue records.

Every emission is byte-deterministic given identical inputs; the templates
are data files so the sets can be extended or localized without code
changes (an English and a Chinese set ship with the package).
"""

from __future__ import annotations

import enum
import json
import random
import time
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path

from .errors import RoleOrderViolation, UnknownSource

COMMAND_SLOT = "<command>"
DEFAULT_PROMPT_CHAR_BUDGET = 6000


@dataclass(frozen=True)
class PromptTemplate:
    id: str
    pattern: str
    language: str = "english"

    def __post_init__(self):
        if self.pattern.count(COMMAND_SLOT) != 1:
            raise ValueError(
                f"template {self.id} must contain exactly one {COMMAND_SLOT} slot")

    def fill(self, command: str) -> str:
        return self.pattern.replace(COMMAND_SLOT, command)


@dataclass(frozen=True)
class TemplateSet:
    templates: tuple[PromptTemplate, ...]

    def __post_init__(self):
        if not self.templates:
            raise ValueError("template set must be non-empty")
        ids = [t.id for t in self.templates]
        if len(set(ids)) != len(ids):
            raise ValueError("template ids must be unique")

    def __len__(self) -> int:
        return len(self.templates)


def load_template_set(path: str | Path) -> TemplateSet:
    data = json.loads(Path(path).read_text(encoding="utf-8"))
    return TemplateSet(tuple(
        PromptTemplate(id=rec["id"], pattern=rec["pattern"],
                       language=rec.get("language", "english"))
        for rec in data["templates"]
    ))


def builtin_template_set(language: str = "english") -> TemplateSet:
    name = "templates_zh.json" if language.lower().startswith("ch") else "templates_en.json"
    with resources.files("cmdlens.data").joinpath(name).open("r", encoding="utf-8") as fh:
        data = json.load(fh)
    return TemplateSet(tuple(
        PromptTemplate(id=rec["id"], pattern=rec["pattern"], language=rec["language"])
        for rec in data["templates"]
    ))


def diversify(command: str, template_set: TemplateSet, seed: int = 0) -> str:
    """Rephrase an explanation request by sampling a template and slotting
    the command in verbatim."""
    rng = random.Random(seed)
    template = rng.choice(template_set.templates)
    return template.fill(command)


QUESTION_AUGMENTATION_PROMPT = (
    "Ask as many different questions as possible about the following command "
    "from all perspectives, and respond in the format of one question per line.\n"
    "\n"
    "Command: {command}"
)


def build_question_augmentation_prompt(command: str) -> str:
    if not command:
        raise ValueError("command must be non-empty")
    return QUESTION_AUGMENTATION_PROMPT.format(command=command)


def parse_question_lines(text: str) -> list[str]:
    """Split a one-question-per-line response, dropping blank lines."""
    return [line.strip() for line in text.splitlines() if line.strip()]


@dataclass(frozen=True)
class CommandMeta:
    technique: str | None = None
    name: str | None = None
    description: str | None = None
    source: str | None = None


def format_doc_lines(docs, indent: str = "    ") -> list[str]:
    """Render retrieval results as numbered provenance lines:
    ``[k] (utility, origin): text``."""
    lines = []
    for i, result in enumerate(docs, start=1):
        chunk = result.chunk
        lines.append(f"{indent}[{i}] ({chunk.utility}, {chunk.origin}): {chunk.text}")
    return lines


KNOWLEDGE_PROMPT_INSTRUCTION = (
    "Please refer to the command documentations and command descriptions, "
    "answer the following questions: {question}"
)


def build_knowledge_prompt(question: str, docs=(), meta: CommandMeta | None = None,
                           char_budget: int = DEFAULT_PROMPT_CHAR_BUDGET) -> str:
    """Assemble instruction + question, a numbered documentation section,
    and a command-description section from meta-information; sections with
    no content are omitted entirely.  Docs are dropped lowest-score-first
    to stay within the character budget."""
    if not question:
        raise ValueError("question must be non-empty")

    def render(doc_list) -> str:
        sections = [KNOWLEDGE_PROMPT_INSTRUCTION.format(question=question)]
        if doc_list:
            sections.append("Command documentation:\n" + "\n".join(format_doc_lines(doc_list)))
        meta_lines = []
        if meta is not None:
            if meta.technique:
                meta_lines.append(f"    MITRE ATT&CK Technique: {meta.technique}")
            if meta.name:
                meta_lines.append(f"    cmd name: {meta.name}")
            if meta.description:
                meta_lines.append(f"    cmd description: {meta.description}")
        if meta_lines:
            sections.append("Command description:\n" + "\n".join(meta_lines))
        return "\n\n".join(sections)

    docs = list(docs)
    prompt = render(docs)
    while len(prompt) > char_budget and docs:
        docs.pop()  # results arrive ranked, so the tail is the lowest score
        prompt = render(docs)
    return prompt


class DataSource(enum.Enum):
    ATOMIC_RED_TEAM = "atomic-red-team"
    METTA = "metta"
    REVERSE_SHELL = "reverse-shell"
    NL2BASH = "nl2bash"
    THE_STACK = "the-stack"


_ATOMIC_METTA_TEMPLATE = (
    "Please refer to the English command documentations and command descriptions, "
    "explain step by step the meaning of each step and each parameter in the "
    "following commands, determine whether the command is potentially malicious "
    "code, what type of malicious code it is, and the overall intent of the "
    "command, and finally give suggestions on how to dispose of the command.\n"
    "Command documentation:\n"
    "{docs}\n"
    "Command description:\n"
    "      From MITRE ATT&CK Technique: {technique}\n"
    "      cmd name: {name}\n"
    "      cmd description: {description}\n"
    "Command: `{command}`"
)

_NL2BASH_TEMPLATE = (
    "Please refer to the English command documentations and command descriptions, "
    "explain step by step the meaning of each step and each parameter in the "
    "following commands, as well as the overall intent of the command.\n"
    "Command documentation:\n"
    "{docs}\n"
    "Command description:\n"
    "{description}\n"
    "Command: `{command}`"
)

_THE_STACK_TEMPLATE = (
    "Explain step by step the meaning of each step and each parameter in the "
    "following commands, analyse the overall intent of the command.\n"
    "Command:`{command}`"
)

_REVERSE_SHELL_TEMPLATE = (
    "Explain step by step the meaning of each step and each parameter in the "
    "following commands, determine whether the command is potentially malicious "
    "code (specifically, whether it is a reverse shell), analyze the overall "
    "intent of the command, and finally give a recommendation on how to dispose "
    "of the command.\n"
    "Command: `{command}`"
)


def dataset_prompt(source: DataSource | str, command: str, docs=(),
                   meta: CommandMeta | None = None) -> str:
    """The per-data-source prompt used when composing training responses:
    the malicious-library variant asks for malicious type and disposal, the
    NL2Bash variant asks for intent, the code-library variant is bare, and
    the reverse-shell variant asks specifically about reverse shells."""
    if isinstance(source, str):
        try:
            source = DataSource(source.lower())
        except ValueError:
            raise UnknownSource(source) from None
    meta = meta or CommandMeta()
    doc_block = "\n".join(format_doc_lines(docs, indent="")) if docs else ""

    if source in (DataSource.ATOMIC_RED_TEAM, DataSource.METTA):
        return _ATOMIC_METTA_TEMPLATE.format(
            docs=doc_block, technique=meta.technique or "",
            name=meta.name or "", description=meta.description or "",
            command=command)
    if source is DataSource.NL2BASH:
        return _NL2BASH_TEMPLATE.format(docs=doc_block,
                                        description=meta.description or "",
                                        command=command)
    if source is DataSource.THE_STACK:
        return _THE_STACK_TEMPLATE.format(command=command)
    if source is DataSource.REVERSE_SHELL:
        return _REVERSE_SHELL_TEMPLATE.format(command=command)
    raise UnknownSource(str(source))


# --- dialogue records --------------------------------------------------------

ROLE_USER = "user"
ROLE_ASSISTANT = "assistant"


@dataclass(frozen=True)
class Turn:
    role: str
    text: str
    timestamp: float


@dataclass(frozen=True)
class Dialogue:
    session_id: str
    turns: tuple[Turn, ...] = ()


def append_turn(dialogue: Dialogue, role: str, text: str,
                timestamp: float | None = None) -> Dialogue:
    """Return the dialogue extended by one turn; roles must alternate
    starting with the user, and timestamps never go backwards."""
    if role not in (ROLE_USER, ROLE_ASSISTANT):
        raise ValueError(f"unknown role {role!r}")
    expected = ROLE_USER if len(dialogue.turns) % 2 == 0 else ROLE_ASSISTANT
    if role != expected:
        raise RoleOrderViolation(
            f"expected {expected} turn at position {len(dialogue.turns)}, got {role}")
    ts = time.time() if timestamp is None else timestamp
    if dialogue.turns:
        ts = max(ts, dialogue.turns[-1].timestamp)
    return replace(dialogue, turns=dialogue.turns + (Turn(role, text, ts),))
