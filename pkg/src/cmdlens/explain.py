"""Explanation pipeline: chat-backend contract, structured response
parsing, and the end-to-end orchestration from command string to an
assembled Explanation with intent prediction and retrieval provenance.

The stub backend synthesizes a deterministic structured explanation from
the prompt's documentation snippets and the parsed command, so the whole
pipeline runs offline with no model weights and byte-stable output.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field
from typing import Protocol, Sequence

import requests

from .errors import (
    BackendUnavailable, ContextOverflow, DeadlineExceeded, tag_stage,
)
from .intent import BehaviorDescription, IntentPrediction, MatchConfig, TechniqueCatalog, identify_intent
from .prompts import (
    Dialogue, ROLE_ASSISTANT, ROLE_USER, TemplateSet, append_turn,
    build_knowledge_prompt, diversify,
)
from .retrieval import ChunkIndex, RetrievalResult, retrieve_for_command
from .shellparse import Dialect, ShellCommand, parse

CHAT_API_KEY_ENV = "CHAT_API_KEY"
DEFAULT_TEMPERATURE = 0.3
DEFAULT_TOP_P = 0.5


@dataclass(frozen=True)
class ChatMessage:
    role: str  # "system" | "user" | "assistant"
    text: str


@dataclass
class ChatRequest:
    messages: list[ChatMessage]
    max_length: int = 1024
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P

    def validate(self) -> None:
        if not self.messages or self.messages[-1].role != ROLE_USER:
            raise ValueError("the last chat message must come from the user")
        if not (0.0 <= self.temperature <= 1.0):
            raise ValueError("temperature must be in [0, 1]")
        if not (0.0 < self.top_p <= 1.0):
            raise ValueError("top_p must be in (0, 1]")


@dataclass
class BackendConfig:
    kind: str = "stub"  # "stub" | "remote"
    endpoint: str = ""
    model: str = ""
    auth_env: str = CHAT_API_KEY_ENV
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_input_chars: int = 64_000


class ChatBackend(Protocol):
    max_input_chars: int

    def complete_text(self, req: ChatRequest) -> str: ...


@dataclass(frozen=True)
class ExplanationStep:
    fragment: str
    explanation: str


@dataclass
class Explanation:
    steps: list[ExplanationStep]
    overall: str
    intent: IntentPrediction
    retrieved: list[RetrievalResult]
    raw_response: str
    disposal_advice: str | None = None

    def to_dict(self) -> dict:
        return {
            "steps": [{"fragment": s.fragment, "explanation": s.explanation}
                      for s in self.steps],
            "overall": self.overall,
            "intent": self.intent.to_dict(),
            "retrieved": [
                {"chunk_id": r.chunk.chunk_id, "utility": r.chunk.utility,
                 "origin": r.chunk.origin, "text": r.chunk.text,
                 "score": r.score, "rank": r.rank}
                for r in self.retrieved
            ],
            "raw_response": self.raw_response,
            "disposal_advice": self.disposal_advice,
        }


# --- backends ----------------------------------------------------------------

_COMMAND_LINE_RE = re.compile(r"^\s*Command\s*:\s*`(.+)`\s*$", re.MULTILINE)
_DOC_LINE_RE = re.compile(r"^\s*\[(\d+)\] \(([^,]+), ([^)]+)\): (.*)$")
_QUESTION_LINE_RE = re.compile(r"answer the following questions: (.*)$", re.MULTILINE)


class StubBackend:
    """Deterministic offline backend.  Recovers the command and any
    documentation lines from the prompt, re-parses the command, and renders
    a templated structured explanation; identical requests produce
    identical text."""

    def __init__(self, template_set: TemplateSet | None = None,
                 max_input_chars: int = 64_000):
        self.max_input_chars = max_input_chars
        self._template_set = template_set

    def _recover_command(self, prompt: str) -> str | None:
        hits = _COMMAND_LINE_RE.findall(prompt)
        if hits:
            return hits[-1]
        m = _QUESTION_LINE_RE.search(prompt)
        question = m.group(1).strip() if m else None
        if question and self._template_set is not None:
            for template in self._template_set.templates:
                prefix, _, suffix = template.pattern.partition("<command>")
                if question.startswith(prefix) and question.endswith(suffix):
                    end = len(question) - len(suffix) if suffix else len(question)
                    return question[len(prefix):end]
        return question

    @staticmethod
    def _doc_snippets(prompt: str) -> list[tuple[str, str, str]]:
        docs = []
        for line in prompt.splitlines():
            m = _DOC_LINE_RE.match(line)
            if m:
                docs.append((m.group(2), m.group(3), m.group(4)))
        return docs

    @staticmethod
    def _describe_unit(unit, docs: list[tuple[str, str, str]]) -> str:
        if not unit.utility:
            return f"Adjusts file descriptors with {', '.join(unit.redirections)}."
        parts = [f"Invokes the utility `{unit.utility}`"]
        if unit.options:
            parts.append(f"with option(s) {', '.join(unit.options)}")
        if unit.parameters:
            parts.append(f"on {', '.join(unit.parameters)}")
        if unit.redirections:
            parts.append(f"redirecting {', '.join(unit.redirections)}")
        sentence = " ".join(parts) + "."
        for utility, _, text in docs:
            if utility == unit.utility:
                lead = " ".join(text.split()[:12])
                sentence += f" Documentation notes: {lead}."
                break
        return sentence

    def _steps_for(self, command: str, docs) -> list[tuple[str, str]]:
        steps: list[tuple[str, str]] = []
        try:
            cmd = parse(command, Dialect.UNIX_SHELL)
        except Exception:
            return [(command, "Could not be parsed as a shell command; treat with care.")]
        for unit in cmd.units:
            # descend one level into a quoted compound payload (sh -c style)
            inner_steps: list[tuple[str, str]] = []
            for param in unit.parameters:
                if len(param) >= 2 and param[0] in "'\"" and param[-1] == param[0]:
                    payload = param[1:-1]
                    if not any(sep in payload for sep in (";", "|", "&&")):
                        continue
                    try:
                        inner = parse(payload, Dialect.UNIX_SHELL)
                    except Exception:
                        continue
                    if len(inner.units) > 1:
                        for inner_unit in inner.units:
                            inner_steps.append((inner_unit.raw,
                                                self._describe_unit(inner_unit, docs)))
            if inner_steps and unit.utility:
                fragment = " ".join([unit.utility] + unit.options)
            else:
                fragment = unit.raw
            steps.append((fragment, self._describe_unit(unit, docs)))
            steps.extend(inner_steps)
        return steps

    def complete_text(self, req: ChatRequest) -> str:
        prompt = req.messages[-1].text
        command = self._recover_command(prompt)
        docs = self._doc_snippets(prompt)
        instructional = ("answer the following questions" in prompt
                         or "explain step by step" in prompt.lower())
        if command is None or not instructional:
            tail = prompt.strip().splitlines()[-1] if prompt.strip() else "(empty prompt)"
            return (f"Considering the conversation so far ({len(req.messages) - 1} prior "
                    f"message(s)), here is a direct answer: {tail}")

        steps = self._steps_for(command, docs)
        utilities = [frag.split()[0] for frag, _ in steps if frag.split()]
        if "/dev/tcp/" in command:
            overall = (
                "The command is attempting to establish a reverse shell connection "
                "to a remote host: it opens a TCP network socket through the shell's "
                "/dev/tcp device and wires the shell's standard input and output "
                "to that socket, so a remote attacker gains access and can execute "
                "further commands.")
            disposal = ("Treat this command as malicious. Terminate the process, "
                        "block the destination address, and rotate any credentials "
                        "reachable from the affected host.")
        else:
            overall = ("The command runs " + ", ".join(dict.fromkeys(utilities))
                       + " with the shown arguments to perform a routine task.")
            disposal = None
        return render_explanation_text(steps, overall, disposal)


class RemoteChatBackend:
    """Client for a chat-completion HTTP service: ``{model, messages,
    temperature, top_p}`` in, ``{choices: [{message: {content}}]}`` out,
    bearer token from the configured environment variable, three attempts
    with exponential backoff."""

    def __init__(self, endpoint: str, model: str, auth_env: str = CHAT_API_KEY_ENV,
                 timeout: float = 60.0, max_input_chars: int = 64_000):
        self.endpoint = endpoint
        self.model = model
        self.auth_env = auth_env
        self.timeout = timeout
        self.max_input_chars = max_input_chars

    def complete_text(self, req: ChatRequest) -> str:
        payload = {
            "model": self.model,
            "messages": [{"role": m.role, "content": m.text} for m in req.messages],
            "temperature": req.temperature,
            "top_p": req.top_p,
        }
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.auth_env, "")
        if key:
            headers["Authorization"] = f"Bearer {key}"
        last_err: Exception | None = None
        for attempt in range(3):
            try:
                resp = requests.post(self.endpoint, json=payload, headers=headers,
                                     timeout=self.timeout)
                resp.raise_for_status()
                return resp.json()["choices"][0]["message"]["content"]
            except (requests.RequestException, KeyError, IndexError, ValueError) as exc:
                last_err = exc
                time.sleep(0.5 * 2 ** attempt)
        raise BackendUnavailable(str(last_err))


def make_backend(cfg: BackendConfig,
                 template_set: TemplateSet | None = None) -> ChatBackend:
    if cfg.kind == "stub":
        return StubBackend(template_set=template_set,
                           max_input_chars=cfg.max_input_chars)
    if cfg.kind == "remote":
        return RemoteChatBackend(endpoint=cfg.endpoint, model=cfg.model,
                                 auth_env=cfg.auth_env,
                                 max_input_chars=cfg.max_input_chars)
    raise ValueError(f"unknown backend kind {cfg.kind!r}")


def complete(backend: ChatBackend, req: ChatRequest) -> str:
    """Run one completion with contract checks (message roles, prompt
    size)."""
    req.validate()
    total_chars = sum(len(m.text) for m in req.messages)
    if total_chars > backend.max_input_chars:
        raise ContextOverflow(
            f"prompt of {total_chars} chars exceeds backend limit {backend.max_input_chars}")
    return backend.complete_text(req)


# --- structured response parsing ----------------------------------------------

_STEP_HEADING_RE = re.compile(
    r"^\s*(?:\*\*)?\s*step[ -]by[ -]step explanation\s*(?:\*\*)?\s*:?\s*(?:\*\*)?\s*$",
    re.IGNORECASE)
_OVERALL_HEADING_RE = re.compile(
    r"^\s*(?:\*\*)?\s*overall\s*(?:\*\*)?\s*:?\s*(?:\*\*)?\s*(.*)$", re.IGNORECASE)
_DISPOSAL_HEADING_RE = re.compile(
    r"^\s*(?:\*\*)?\s*(?:recommendations?|suggestions?|disposal(?: advice)?|how to dispose(?: of the command)?)\s*(?:\*\*)?\s*:?\s*(?:\*\*)?\s*(.*)$",
    re.IGNORECASE)
_BULLET_RE = re.compile(r"^\s*[-*•]\s+(.*)$")
_FRAGMENT_RE = re.compile(r"^`([^`]+)`\s*:?\s*(.*)$", re.DOTALL)


def _collect_bullets(lines: list[str]) -> list[ExplanationStep]:
    bullets: list[str] = []
    for line in lines:
        m = _BULLET_RE.match(line)
        if m:
            bullets.append(m.group(1).strip())
        elif bullets and line.strip():
            bullets[-1] += " " + line.strip()
    steps = []
    for bullet in bullets:
        m = _FRAGMENT_RE.match(bullet)
        if m:
            steps.append(ExplanationStep(fragment=m.group(1),
                                         explanation=m.group(2).strip()))
        else:
            steps.append(ExplanationStep(fragment="", explanation=bullet))
    return steps


def parse_response(raw: str) -> tuple[list[ExplanationStep], str, str | None]:
    """Split a model response on its structural headings.

    Total function: when no recognizable headings are present the whole
    text becomes the overall summary and there are no steps."""
    step_lines: list[str] = []
    overall_parts: list[str] = []
    disposal_parts: list[str] = []
    region = None
    found_heading = False
    for line in raw.splitlines():
        if _STEP_HEADING_RE.match(line):
            region = "steps"
            found_heading = True
            continue
        m = _OVERALL_HEADING_RE.match(line)
        if m:
            region = "overall"
            found_heading = True
            if m.group(1).strip():
                overall_parts.append(m.group(1).strip())
            continue
        m = _DISPOSAL_HEADING_RE.match(line)
        if m and region in ("steps", "overall", None):
            region = "disposal"
            found_heading = True
            if m.group(1).strip():
                disposal_parts.append(m.group(1).strip())
            continue
        if region == "steps":
            step_lines.append(line)
        elif region == "overall":
            if line.strip():
                overall_parts.append(line.strip())
        elif region == "disposal":
            if line.strip():
                disposal_parts.append(line.strip())

    if not found_heading:
        return ([], raw, None)
    steps = _collect_bullets(step_lines)
    overall = " ".join(overall_parts).strip() or raw
    disposal = " ".join(disposal_parts).strip() or None
    return (steps, overall, disposal)


def render_explanation_text(steps: Sequence[tuple[str, str]], overall: str,
                            disposal: str | None = None) -> str:
    """The stub's renderer; parse_response inverts it exactly."""
    lines = ["Step by step explanation:"]
    for fragment, explanation in steps:
        if fragment:
            lines.append(f"- `{fragment}`: {explanation}")
        else:
            lines.append(f"- {explanation}")
    lines.append("")
    lines.append(f"Overall: {overall}")
    if disposal:
        lines.append("")
        lines.append(f"Recommendation: {disposal}")
    return "\n".join(lines)


# --- pipeline ------------------------------------------------------------------

@dataclass
class PipelineConfig:
    dialect: Dialect = Dialect.UNIX_SHELL
    k_per_unit: int = 3
    intent_k: int = 3
    seed: int = 0
    prompt_char_budget: int = 6000
    latency_budget_s: float | None = None
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_length: int = 1024


@dataclass
class ExplainDeps:
    catalog: TechniqueCatalog
    provider: object  # EmbeddingProvider
    backend: ChatBackend
    template_set: TemplateSet
    index: ChunkIndex | None = None
    cfg: PipelineConfig = field(default_factory=PipelineConfig)


def _deadline_check(deadline: float | None, stage: str) -> None:
    if deadline is not None and time.monotonic() > deadline:
        raise tag_stage(DeadlineExceeded(f"latency budget exhausted before {stage}"), stage)


def _messages_from_dialogue(dialogue: Dialogue | None, prompt: str,
                            char_budget: int) -> list[ChatMessage]:
    turns = list(dialogue.turns) if dialogue else []
    # oldest turns go first when the context outgrows the budget
    while turns and sum(len(t.text) for t in turns) + len(prompt) > char_budget:
        turns = turns[2:] if len(turns) >= 2 else []
    messages = [ChatMessage(role=t.role, text=t.text) for t in turns]
    messages.append(ChatMessage(role=ROLE_USER, text=prompt))
    return messages


def explain_command(command: str, deps: ExplainDeps,
                    session: Dialogue | None = None) -> Explanation:
    """parse -> retrieve -> prompt -> complete -> structure -> intent.

    Any failure surfaces the underlying error with a ``stage`` attribute
    naming the pipeline stage that raised it."""
    cfg = deps.cfg
    deadline = (time.monotonic() + cfg.latency_budget_s
                if cfg.latency_budget_s else None)

    def run(stage: str, fn):
        _deadline_check(deadline, stage)
        try:
            return fn()
        except Exception as exc:
            raise tag_stage(exc, stage)

    cmd: ShellCommand = run("parse", lambda: parse(command, cfg.dialect))
    retrieved: list[RetrievalResult] = run("retrieve", lambda: (
        retrieve_for_command(deps.index, cmd, cfg.k_per_unit, deps.provider)
        if deps.index is not None else []))
    prompt: str = run("prompt", lambda: build_knowledge_prompt(
        diversify(command, deps.template_set, cfg.seed), retrieved,
        char_budget=cfg.prompt_char_budget))
    raw: str = run("complete", lambda: complete(deps.backend, ChatRequest(
        messages=_messages_from_dialogue(session, prompt, cfg.prompt_char_budget),
        max_length=cfg.max_length, temperature=cfg.temperature, top_p=cfg.top_p)))
    steps, overall, disposal = run("parse_response", lambda: parse_response(raw))
    intent: IntentPrediction = run("intent", lambda: identify_intent(
        BehaviorDescription(text=overall, source_command=command), deps.catalog,
        deps.provider, MatchConfig(k=cfg.intent_k)))
    return Explanation(steps=steps, overall=overall, intent=intent,
                       retrieved=retrieved, raw_response=raw,
                       disposal_advice=disposal)


def follow_up(session: Dialogue, question: str,
              deps: ExplainDeps) -> tuple[str, Dialogue]:
    """Answer a follow-up question inside an existing dialogue; prior turns
    ride along in the chat request and the exchange is appended."""
    if len(session.turns) < 2:
        raise ValueError("follow-up requires at least one prior exchange")
    if not question.strip():
        raise ValueError("question must be non-empty")
    cfg = deps.cfg
    messages = _messages_from_dialogue(session, question, cfg.prompt_char_budget)
    answer = complete(deps.backend, ChatRequest(
        messages=messages, max_length=cfg.max_length,
        temperature=cfg.temperature, top_p=cfg.top_p))
    updated = append_turn(session, ROLE_USER, question)
    updated = append_turn(updated, ROLE_ASSISTANT, answer)
    return answer, updated
