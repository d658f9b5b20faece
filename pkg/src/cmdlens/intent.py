"""Intent identification against a MITRE ATT&CK technique catalog.

A behavior description is embedded and scored against the standard
description of every technique in the catalog; the technique ranking
follows similarity, and each tactic is scored as the average of the top-k
technique scores among the techniques it groups.  Ties always break by
ascending id.
"""

from __future__ import annotations

import hashlib
import json
import random
import re
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .embedding import Embedding, EmbeddingProvider, embed
from .errors import DanglingTacticRef, LengthMismatch, SchemaError

TECHNIQUE_ID_RE = re.compile(r"^T\d{4}(\.\d{3})?$")
TACTIC_ID_RE = re.compile(r"^TA\d{4}$")


@dataclass(frozen=True)
class Technique:
    id: str
    name: str
    description: str
    tactic_ids: tuple[str, ...]


@dataclass(frozen=True)
class Tactic:
    id: str
    name: str


@dataclass
class TechniqueCatalog:
    techniques: list[Technique]
    tactics: list[Tactic]
    _embeddings: dict[str, Embedding] | None = field(default=None, repr=False)
    _embeddings_provider: str = field(default="", repr=False)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def technique_ids_by_tactic(self) -> dict[str, list[str]]:
        grouping: dict[str, list[str]] = {t.id: [] for t in self.tactics}
        for tech in self.techniques:
            for tactic_id in tech.tactic_ids:
                grouping[tactic_id].append(tech.id)
        return grouping

    def content_hash(self) -> str:
        payload = json.dumps(
            [[t.id, t.description, list(t.tactic_ids)] for t in self.techniques],
            sort_keys=True)
        return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:16]

    def description_embeddings(self, provider: EmbeddingProvider) -> dict[str, Embedding]:
        """Embeddings of every technique description, computed once per
        provider and cached (readers after the first call take no lock)."""
        key = f"{provider.provider_id}:{self.content_hash()}"
        if self._embeddings is not None and self._embeddings_provider == key:
            return self._embeddings
        with self._lock:
            if self._embeddings is None or self._embeddings_provider != key:
                vectors = embed(provider, [t.description for t in self.techniques])
                self._embeddings = {t.id: v for t, v in zip(self.techniques, vectors)}
                self._embeddings_provider = key
        return self._embeddings


@dataclass(frozen=True)
class BehaviorDescription:
    text: str
    source_command: str | None = None

    def __post_init__(self):
        if not self.text:
            raise ValueError("behavior description must be non-empty")


@dataclass(frozen=True)
class MatchConfig:
    k: int = 3

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")


@dataclass
class IntentPrediction:
    technique_ranking: list[tuple[str, float]]
    tactic_ranking: list[tuple[str, float]]
    k_used: int

    @property
    def top_technique(self) -> str:
        return self.technique_ranking[0][0]

    @property
    def top_tactic(self) -> str:
        return self.tactic_ranking[0][0]

    def to_dict(self) -> dict:
        return {
            "technique_ranking": [[i, s] for i, s in self.technique_ranking],
            "tactic_ranking": [[i, s] for i, s in self.tactic_ranking],
            "k_used": self.k_used,
        }


def load_catalog(path: str | Path) -> TechniqueCatalog:
    """Load and validate a catalog file: a tactics array plus one object
    per technique; ordering is normalized to ascending id."""
    try:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError("$", f"invalid JSON at line {exc.lineno}") from exc

    if not isinstance(data, dict):
        raise SchemaError("$", "top level must be an object")
    for fieldname in ("tactics", "techniques"):
        if not isinstance(data.get(fieldname), list) or not data[fieldname]:
            raise SchemaError(fieldname, "must be a non-empty array")

    tactics: list[Tactic] = []
    tactic_ids: set[str] = set()
    for i, rec in enumerate(data["tactics"]):
        where = f"tactics[{i}]"
        if not isinstance(rec, dict) or not rec.get("id") or not rec.get("name"):
            raise SchemaError(where, "needs id and name")
        if not TACTIC_ID_RE.match(rec["id"]):
            raise SchemaError(f"{where}.id", f"bad tactic id {rec['id']!r}")
        if rec["id"] in tactic_ids:
            raise SchemaError(f"{where}.id", f"duplicate tactic id {rec['id']}")
        tactic_ids.add(rec["id"])
        tactics.append(Tactic(id=rec["id"], name=rec["name"]))

    techniques: list[Technique] = []
    technique_ids: set[str] = set()
    for i, rec in enumerate(data["techniques"]):
        where = f"techniques[{i}]"
        if not isinstance(rec, dict):
            raise SchemaError(where, "must be an object")
        for key in ("id", "name", "description", "tactics"):
            if not rec.get(key):
                raise SchemaError(f"{where}.{key}", "missing or empty")
        if not TECHNIQUE_ID_RE.match(rec["id"]):
            raise SchemaError(f"{where}.id", f"bad technique id {rec['id']!r}")
        if rec["id"] in technique_ids:
            raise SchemaError(f"{where}.id", f"duplicate technique id {rec['id']}")
        technique_ids.add(rec["id"])
        for tactic_id in rec["tactics"]:
            if tactic_id not in tactic_ids:
                raise DanglingTacticRef(rec["id"], tactic_id)
        techniques.append(Technique(id=rec["id"], name=rec["name"],
                                    description=rec["description"],
                                    tactic_ids=tuple(rec["tactics"])))

    catalog = TechniqueCatalog(techniques=sorted(techniques, key=lambda t: t.id),
                               tactics=sorted(tactics, key=lambda t: t.id))
    for tactic_id, members in catalog.technique_ids_by_tactic().items():
        if not members:
            raise SchemaError(f"tactics[{tactic_id}]", "tactic groups no techniques")
    return catalog


def identify_technique(d: BehaviorDescription, catalog: TechniqueCatalog,
                       provider: EmbeddingProvider) -> list[tuple[str, float]]:
    """Full technique ranking: similarity of the behavior description to
    each technique's standard description, descending, ids ascending on
    ties."""
    if not catalog.techniques:
        raise ValueError("catalog has no techniques")
    query = embed(provider, [d.text])[0].values.astype(np.float64)
    by_id = catalog.description_embeddings(provider)
    scored = [
        (tech.id, float(np.dot(by_id[tech.id].values.astype(np.float64), query)))
        for tech in catalog.techniques
    ]
    scored.sort(key=lambda row: (-row[1], row[0]))
    return scored


def identify_tactic(technique_scores: Sequence[tuple[str, float]],
                    catalog: TechniqueCatalog,
                    cfg: MatchConfig = MatchConfig()) -> list[tuple[str, float]]:
    """Tactic ranking: each tactic scores the average of the top-k technique
    scores among its own techniques (k clipped per tactic)."""
    score_by_id = dict(technique_scores)
    ranking: list[tuple[str, float]] = []
    for tactic_id, member_ids in catalog.technique_ids_by_tactic().items():
        member_scores = sorted((score_by_id[m] for m in member_ids), reverse=True)
        top = member_scores[:min(cfg.k, len(member_scores))]
        ranking.append((tactic_id, sum(top) / len(top)))
    ranking.sort(key=lambda row: (-row[1], row[0]))
    return ranking


def identify_intent(d: BehaviorDescription, catalog: TechniqueCatalog,
                    provider: EmbeddingProvider,
                    cfg: MatchConfig = MatchConfig()) -> IntentPrediction:
    technique_ranking = identify_technique(d, catalog, provider)
    tactic_ranking = identify_tactic(technique_ranking, catalog, cfg)
    return IntentPrediction(technique_ranking=technique_ranking,
                            tactic_ranking=tactic_ranking, k_used=cfg.k)


def topk_acc(predictions: Sequence[IntentPrediction], truths: Sequence[str],
             k: int, level: str = "technique",
             rollup_subtechniques: bool = False) -> float:
    """Fraction of items whose truth id is among the first k entries of the
    technique (or tactic) ranking.  With rollup enabled, sub-technique ids
    match on their parent technique."""
    if len(predictions) != len(truths):
        raise LengthMismatch(f"{len(predictions)} predictions vs {len(truths)} truths")
    if not predictions:
        raise ValueError("nothing to score")

    def norm(identifier: str) -> str:
        return identifier.split(".")[0] if rollup_subtechniques else identifier

    hits = 0
    for pred, truth in zip(predictions, truths):
        ranking = pred.technique_ranking if level == "technique" else pred.tactic_ranking
        top_ids = {norm(i) for i, _ in ranking[:k]}
        if norm(truth) in top_ids:
            hits += 1
    return hits / len(predictions)


def densest_baseline(truths: Sequence[str]) -> list[str]:
    """Static ranking of labels by descending frequency in the truth set,
    ties ascending id: the naive predictor for imbalanced test sets."""
    if not truths:
        raise ValueError("truths must be non-empty")
    counts: dict[str, int] = {}
    for t in truths:
        counts[t] = counts.get(t, 0) + 1
    return sorted(counts, key=lambda label: (-counts[label], label))


def balance_resample(items: Sequence[tuple[object, str]],
                     seed: int = 0) -> list[tuple[object, str]]:
    """Downsample every truth class to the minimum class count."""
    by_class: dict[str, list[tuple[object, str]]] = {}
    for item in items:
        by_class.setdefault(item[1], []).append(item)
    if len(by_class) < 2:
        raise ValueError("need at least two classes to balance")
    m = min(len(group) for group in by_class.values())
    rng = random.Random(seed)
    out: list[tuple[object, str]] = []
    for label in sorted(by_class):
        out.extend(rng.sample(by_class[label], m))
    rng.shuffle(out)
    return out


BEHAVIOR_DESCRIPTION_PROMPT = (
    "Very briefly describe what adversaries attempt to do by the following shell command:\n"
    "Command: {command}\n"
    "\n"
    "Example (follow the style of the following DESCRIPTION):\n"
    "    Command: {example_cmd}\n"
    "    DESCRIPTION: {example_desc}\n"
)


def build_behavior_description_prompt(command: str, example_cmd: str,
                                      example_desc: str) -> str:
    """In-context-learning prompt that elicits a behavior description in
    the style of standard technique descriptions."""
    if not command or not example_cmd or not example_desc:
        raise ValueError("command and both example fields must be non-empty")
    return BEHAVIOR_DESCRIPTION_PROMPT.format(
        command=command, example_cmd=example_cmd, example_desc=example_desc)
