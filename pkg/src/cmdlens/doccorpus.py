"""Documentation corpus construction.

Turns rendered (plain-text) manual pages into utility/option descriptions,
synthesizes commands from them, chunks the documentation, emits labeled
(command, doc, label) triples whose ground truth is known by construction,
and supports masking private identifiers consistently across commands and
retrieved texts.

File formats (one JSON object per line, UTF-8):
  chunks:  {"chunk_id", "utility", "origin", "ordinal", "text"}
  triples: {"command", "chunk_id", "chunk_text", "label"}
"""

from __future__ import annotations

import hashlib
import json
import random
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

from .errors import InsufficientNegatives, MissingSection
from .shellparse import Dialect, parse

ORIGIN_DESCRIPTION = "description"
OPTION_ORIGIN_PREFIX = "option:"


@dataclass
class UtilityDoc:
    utility: str
    description: str
    options: dict[str, str] = field(default_factory=dict)  # spelling -> description
    source_path: str = ""


@dataclass(frozen=True)
class DocChunk:
    chunk_id: str
    utility: str
    text: str
    origin: str  # "description" or "option:<spelling>"
    ordinal: int


@dataclass(frozen=True)
class RetrievalTriple:
    command: str
    doc: DocChunk
    label: int


@dataclass
class MaskMap:
    mapping: dict[str, str]
    seed: int

    def inverse(self) -> dict[str, str]:
        return {v: k for k, v in self.mapping.items()}


@dataclass(frozen=True)
class ChunkRule:
    """Chunking rule: greedy word-count windows or blank-line paragraphs."""
    kind: str  # "words" | "blanklines"
    max_words: int = 0

    @property
    def rule_id(self) -> str:
        return f"words:{self.max_words}" if self.kind == "words" else "blanklines"

    @staticmethod
    def words(max_words: int = 200) -> "ChunkRule":
        return ChunkRule("words", max_words)

    @staticmethod
    def blank_lines() -> "ChunkRule":
        return ChunkRule("blanklines")


_SECTION_HEADER_RE = re.compile(r"^[A-Z][A-Z &()\-/.,'0-9]*$")
_OPTION_HEAD_RE = re.compile(r"^\s*-{1,2}\S")
_OPTION_SPELLING_RE = re.compile(r"^(--?[A-Za-z0-9?][\w?-]*)")


def _split_sections(page_text: str) -> dict[str, str]:
    sections: dict[str, list[str]] = {}
    current: str | None = None
    for line in page_text.splitlines():
        if line and not line[0].isspace() and _SECTION_HEADER_RE.match(line.rstrip()):
            current = line.rstrip()
            sections.setdefault(current, [])
        elif current is not None:
            sections[current].append(line)
    return {name: "\n".join(body).strip("\n") for name, body in sections.items()}


def _dedent_body(body: str) -> str:
    lines = body.splitlines()
    indents = [len(l) - len(l.lstrip()) for l in lines if l.strip()]
    cut = min(indents) if indents else 0
    return "\n".join(l[cut:] if l.strip() else "" for l in lines).strip()


def _parse_option_head(line: str) -> tuple[list[str], str]:
    """Split an option paragraph head into its spellings and any inline
    description.  ``-B, --ignore-backups   do not list ...`` yields
    (["-B", "--ignore-backups"], "do not list ...")."""
    rest = line.strip()
    spellings: list[str] = []
    while True:
        m = _OPTION_SPELLING_RE.match(rest)
        if not m:
            break
        spellings.append(m.group(1))
        rest = rest[m.end():]
        # skip an argument placeholder glued to the spelling: =WHEN, [=WHEN]
        arg = re.match(r"^(\[?=[^\s,\]]*\]?|\[[^\]]*\])", rest)
        if arg:
            rest = rest[arg.end():]
        sep = re.match(r"^,\s*", rest)
        if not sep:
            break
        rest = rest[sep.end():]
    return spellings, rest.strip()


def extract_utility_doc(page_text: str, utility: str, source_path: str = "") -> UtilityDoc:
    """Pull the DESCRIPTION body and per-option descriptions out of a
    rendered manual page.  Raises MissingSection when no usable
    DESCRIPTION is present."""
    sections = _split_sections(page_text)
    description = _dedent_body(sections.get("DESCRIPTION", ""))
    if not description:
        raise MissingSection("DESCRIPTION")

    options: dict[str, str] = {}
    options_body = sections.get("OPTIONS", "")
    current_spellings: list[str] = []
    current_lines: list[str] = []

    def flush():
        if not current_spellings:
            return
        text = " ".join(l.strip() for l in current_lines if l.strip()).strip()
        if not text:
            return
        for spelling in current_spellings:
            options.setdefault(spelling, text)

    for line in options_body.splitlines():
        if _OPTION_HEAD_RE.match(line):
            flush()
            current_spellings, inline = _parse_option_head(line)
            current_lines = [inline] if inline else []
        elif current_spellings:
            current_lines.append(line)
    flush()

    return UtilityDoc(utility=utility, description=description,
                      options=options, source_path=source_path)


def generate_commands(doc: UtilityDoc, n: int, max_options: int = 2,
                      seed: int = 0) -> list[str]:
    """Synthesize command lines by combining the utility with up to
    ``max_options`` of its options, in sampled order; the results need not
    be real-world commands.  Deterministic under seed; de-duplicated."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = random.Random(seed)
    spellings = list(doc.options)
    seen: set[str] = set()
    out: list[str] = []
    for _ in range(n):
        k = rng.randint(0, min(max_options, len(spellings)))
        picked = rng.sample(spellings, k) if k else []
        command = " ".join([doc.utility] + picked)
        if command not in seen:
            seen.add(command)
            out.append(command)
    return out


def _chunk_id(source_path: str, ordinal: int, rule: ChunkRule) -> str:
    digest = hashlib.sha256(
        f"{source_path}\n{ordinal}\n{rule.rule_id}".encode("utf-8")).hexdigest()
    return digest[:16]


def chunk(doc_text: str, rule: ChunkRule, *, utility: str = "",
          origin: str = ORIGIN_DESCRIPTION, source_path: str = "",
          start_ordinal: int = 0) -> list[DocChunk]:
    """Partition text into chunks.  Words rule: greedy word windows of at
    most ``max_words`` (word multiset is preserved).  BlankLines rule:
    split on one-or-more blank lines.  Empty input gives no chunks."""
    pieces: list[str] = []
    if rule.kind == "words":
        words = doc_text.split()
        for i in range(0, len(words), rule.max_words):
            pieces.append(" ".join(words[i:i + rule.max_words]))
    elif rule.kind == "blanklines":
        pieces = [p.strip() for p in re.split(r"\n[ \t]*\n+", doc_text) if p.strip()]
    else:
        raise ValueError(f"unknown chunk rule: {rule.kind}")
    return [
        DocChunk(chunk_id=_chunk_id(source_path, start_ordinal + i, rule),
                 utility=utility, text=piece, origin=origin,
                 ordinal=start_ordinal + i)
        for i, piece in enumerate(pieces)
    ]


def chunk_utility_doc(doc: UtilityDoc, rule: ChunkRule) -> list[DocChunk]:
    """Chunk a utility's description and each option paragraph, with
    ordinals running through the whole page."""
    chunks = chunk(doc.description, rule, utility=doc.utility,
                   origin=ORIGIN_DESCRIPTION, source_path=doc.source_path)
    ordinal = len(chunks)
    for spelling, text in doc.options.items():
        option_chunks = chunk(f"{spelling} {text}", rule, utility=doc.utility,
                              origin=OPTION_ORIGIN_PREFIX + spelling,
                              source_path=doc.source_path, start_ordinal=ordinal)
        chunks.extend(option_chunks)
        ordinal += len(option_chunks)
    return chunks


def build_ground_truth(commands: Iterable[str],
                       chunks: list[DocChunk]) -> dict[str, set[str]]:
    """Ground-truth chunk ids per command, derived from construction: a
    command's utility owns its description chunks plus the chunks of every
    option it uses."""
    by_key: dict[tuple[str, str], list[str]] = {}
    for c in chunks:
        by_key.setdefault((c.utility, c.origin), []).append(c.chunk_id)
    truth: dict[str, set[str]] = {}
    for command in commands:
        cmd = parse(command, Dialect.UNIX_SHELL)
        ids: set[str] = set()
        for unit in cmd.units:
            if not unit.utility:
                continue
            ids.update(by_key.get((unit.utility, ORIGIN_DESCRIPTION), []))
            for option in unit.options:
                ids.update(by_key.get((unit.utility, OPTION_ORIGIN_PREFIX + option), []))
        truth[command] = ids
    return truth


def make_triples(commands: list[str], chunks: list[DocChunk],
                 ground_truth: dict[str, set[str]],
                 negatives_per_positive: int = 1, seed: int = 0) -> list[RetrievalTriple]:
    """Emit every (command, ground-truth chunk, 1) plus sampled negative
    chunks at the requested ratio, without replacement, deterministically."""
    rng = random.Random(seed)
    by_id = {c.chunk_id: c for c in chunks}
    triples: list[RetrievalTriple] = []
    for command in commands:
        gt = ground_truth.get(command, set())
        positives = [c for c in chunks if c.chunk_id in gt]
        if not positives:
            raise ValueError(
                f"command has no ground-truth chunks in the corpus: {command!r}")
        negatives_pool = [c.chunk_id for c in chunks if c.chunk_id not in gt]
        need = len(positives) * negatives_per_positive
        if need > len(negatives_pool):
            raise InsufficientNegatives(
                f"need {need} negatives for {command!r}, corpus offers {len(negatives_pool)}")
        for c in positives:
            triples.append(RetrievalTriple(command, c, 1))
        for chunk_id in rng.sample(negatives_pool, need):
            triples.append(RetrievalTriple(command, by_id[chunk_id], 0))
    return triples


def split_dataset(triples: list[RetrievalTriple],
                  ratios: tuple[float, float, float],
                  seed: int = 0) -> tuple[list[RetrievalTriple], list[RetrievalTriple], list[RetrievalTriple]]:
    """Group-level split keyed by command so no command straddles splits;
    shuffle groups, then cut proportionally."""
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ValueError(f"ratios must sum to 1, got {ratios}")
    groups: dict[str, list[RetrievalTriple]] = {}
    for t in triples:
        groups.setdefault(t.command, []).append(t)
    keys = list(groups)
    rng = random.Random(seed)
    rng.shuffle(keys)
    g = len(keys)
    cut1 = round(ratios[0] * g)
    cut2 = round((ratios[0] + ratios[1]) * g)
    parts = (keys[:cut1], keys[cut1:cut2], keys[cut2:])
    return tuple([t for k in part for t in groups[k]] for part in parts)  # type: ignore[return-value]


_MASK_BOUNDARY = r"(?<![A-Za-z0-9_-]){}(?![A-Za-z0-9_-])"


def _fresh_replacement(rng: random.Random, taken: set[str], corpus: str) -> str:
    while True:
        candidate = ("".join(rng.choice("abcdefghijklmnopqrstuvwxyz") for _ in range(3))
                     + "_" + "".join(rng.choice("0123456789abcdef") for _ in range(6)))
        if candidate not in taken and candidate not in corpus:
            return candidate


def _apply_mapping(text: str, mapping: dict[str, str]) -> str:
    for original, replacement in mapping.items():
        text = re.sub(_MASK_BOUNDARY.format(re.escape(original)), replacement, text)
    return text


def mask_private(command: str, chunks: list[DocChunk], identifiers: list[str],
                 seed: int = 0) -> tuple[str, list[DocChunk], MaskMap]:
    """Replace each identifier with a random token consistently across the
    command and every chunk (whole-token occurrences only); applying the
    inverse map restores the originals exactly."""
    corpus = "\n".join([command] + [c.text for c in chunks] + identifiers)
    rng = random.Random(seed)
    mapping: dict[str, str] = {}
    taken: set[str] = set()
    for ident in identifiers:
        if ident in mapping:
            continue
        replacement = _fresh_replacement(rng, taken, corpus)
        mapping[ident] = replacement
        taken.add(replacement)
    masked_command = _apply_mapping(command, mapping)
    masked_chunks = [
        DocChunk(chunk_id=c.chunk_id, utility=_apply_mapping(c.utility, mapping),
                 text=_apply_mapping(c.text, mapping), origin=c.origin,
                 ordinal=c.ordinal)
        for c in chunks
    ]
    return masked_command, masked_chunks, MaskMap(mapping=mapping, seed=seed)


def unmask(text: str, mask_map: MaskMap) -> str:
    return _apply_mapping(text, mask_map.inverse())


# --- line-record I/O --------------------------------------------------------

def chunk_to_record(c: DocChunk) -> dict:
    return {"chunk_id": c.chunk_id, "utility": c.utility, "origin": c.origin,
            "ordinal": c.ordinal, "text": c.text}


def record_to_chunk(rec: dict) -> DocChunk:
    return DocChunk(chunk_id=rec["chunk_id"], utility=rec["utility"],
                    origin=rec["origin"], ordinal=rec["ordinal"], text=rec["text"])


def triple_to_record(t: RetrievalTriple) -> dict:
    return {"command": t.command, "chunk_id": t.doc.chunk_id,
            "chunk_text": t.doc.text, "label": t.label}


def record_to_triple(rec: dict) -> RetrievalTriple:
    doc = DocChunk(chunk_id=rec["chunk_id"], utility=rec.get("utility", ""),
                   text=rec["chunk_text"], origin=rec.get("origin", ORIGIN_DESCRIPTION),
                   ordinal=rec.get("ordinal", 0))
    return RetrievalTriple(command=rec["command"], doc=doc, label=rec["label"])


def write_jsonl(path: str | Path, records: Iterable[dict]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps(rec, ensure_ascii=False, sort_keys=True) + "\n")


def read_jsonl(path: str | Path) -> list[dict]:
    with open(path, encoding="utf-8") as fh:
        return [json.loads(line) for line in fh if line.strip()]


def ingest_man_dir(man_dir: str | Path, rule: ChunkRule) -> tuple[list[UtilityDoc], list[DocChunk]]:
    """Extract and chunk every page in a directory of plain-text manual
    pages (one file per utility, filename = utility name); pages are
    processed in sorted filename order so output is deterministic."""
    docs: list[UtilityDoc] = []
    chunks: list[DocChunk] = []
    for path in sorted(Path(man_dir).iterdir()):
        if not path.is_file():
            continue
        utility = path.stem if path.suffix in (".txt", ".man", ".1") else path.name
        doc = extract_utility_doc(path.read_text(encoding="utf-8"), utility,
                                  source_path=str(path.name))
        docs.append(doc)
        chunks.extend(chunk_utility_doc(doc, rule))
    return docs, chunks
