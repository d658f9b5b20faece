"""File-backed session persistence.

One append-only JSON-lines file per session holds dialogue turns, analyst
verdicts, and the last explanation per command.  Every append rewrites the
file through a temp file and an atomic rename, so a crash leaves either the
old or the new file, never a torn one; a torn or hand-truncated file is
reported as StoreCorrupt with the byte offset of the bad record.
"""

from __future__ import annotations

import json
import os
import threading
import uuid
from dataclasses import dataclass, field
from pathlib import Path

from .errors import SessionNotFound, StoreCorrupt
from .prompts import Dialogue, Turn

VERDICTS = ("malicious", "benign", "undecided")


@dataclass
class VerdictEntry:
    command: str
    verdict: str
    timestamp: float


@dataclass
class SessionRecord:
    session_id: str
    dialogue: Dialogue
    verdicts: list[VerdictEntry] = field(default_factory=list)
    explanations: dict[str, dict] = field(default_factory=dict)  # command -> last explanation

    def to_dict(self) -> dict:
        return {
            "session_id": self.session_id,
            "turns": [{"role": t.role, "text": t.text, "timestamp": t.timestamp}
                      for t in self.dialogue.turns],
            "verdicts": [{"command": v.command, "verdict": v.verdict,
                          "timestamp": v.timestamp} for v in self.verdicts],
            "explanations": self.explanations,
        }


class SessionStore:
    """Append-only per-session logs under a single directory."""

    def __init__(self, root: str | Path):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock(self, session_id: str) -> threading.Lock:
        with self._locks_guard:
            return self._locks.setdefault(session_id, threading.Lock())

    def _path(self, session_id: str) -> Path:
        safe = "".join(ch for ch in session_id if ch.isalnum() or ch in "-_")
        if not safe or safe != session_id:
            raise SessionNotFound(session_id)
        return self.root / f"{safe}.jsonl"

    def create(self, session_id: str | None = None) -> str:
        session_id = session_id or uuid.uuid4().hex
        with self._lock(session_id):
            path = self._path(session_id)
            if not path.exists():
                self._rewrite(path, [])
        return session_id

    def exists(self, session_id: str) -> bool:
        try:
            return self._path(session_id).exists()
        except SessionNotFound:
            return False

    def list_sessions(self) -> list[str]:
        return sorted(p.stem for p in self.root.glob("*.jsonl"))

    def _read_records(self, path: Path) -> list[dict]:
        records = []
        data = path.read_bytes()
        offset = 0
        for raw_line in data.split(b"\n"):
            if not raw_line.strip():
                offset += len(raw_line) + 1
                continue
            try:
                rec = json.loads(raw_line.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError) as exc:
                raise StoreCorrupt(f"undecodable record: {exc}", offset=offset) from exc
            if not isinstance(rec, dict) or "type" not in rec:
                raise StoreCorrupt("record is not an object with a type", offset=offset)
            records.append(rec)
            offset += len(raw_line) + 1
        return records

    def load(self, session_id: str) -> SessionRecord:
        path = self._path(session_id)
        if not path.exists():
            raise SessionNotFound(session_id)
        turns: list[Turn] = []
        verdicts: list[VerdictEntry] = []
        explanations: dict[str, dict] = {}
        for rec in self._read_records(path):
            kind = rec["type"]
            if kind == "turn":
                turns.append(Turn(role=rec["role"], text=rec["text"],
                                  timestamp=rec["timestamp"]))
            elif kind == "verdict":
                verdicts.append(VerdictEntry(command=rec["command"],
                                             verdict=rec["verdict"],
                                             timestamp=rec["timestamp"]))
            elif kind == "explanation":
                explanations[rec["command"]] = rec["body"]
            else:
                raise StoreCorrupt(f"unknown record type {kind!r}")
        return SessionRecord(session_id=session_id,
                             dialogue=Dialogue(session_id=session_id, turns=tuple(turns)),
                             verdicts=verdicts, explanations=explanations)

    def _rewrite(self, path: Path, lines: list[str]) -> None:
        tmp = path.with_suffix(".jsonl.tmp")
        with open(tmp, "w", encoding="utf-8") as fh:
            for line in lines:
                fh.write(line + "\n")
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp, path)

    def _append(self, session_id: str, record: dict) -> None:
        with self._lock(session_id):
            path = self._path(session_id)
            if not path.exists():
                raise SessionNotFound(session_id)
            existing = path.read_text(encoding="utf-8").splitlines()
            existing = [l for l in existing if l.strip()]
            existing.append(json.dumps(record, ensure_ascii=False, sort_keys=True))
            self._rewrite(path, existing)

    def append_turn(self, session_id: str, turn: Turn) -> None:
        self._append(session_id, {"type": "turn", "role": turn.role,
                                  "text": turn.text, "timestamp": turn.timestamp})

    def append_verdict(self, session_id: str, entry: VerdictEntry) -> None:
        if entry.verdict not in VERDICTS:
            raise ValueError(f"verdict must be one of {VERDICTS}, got {entry.verdict!r}")
        self._append(session_id, {"type": "verdict", "command": entry.command,
                                  "verdict": entry.verdict,
                                  "timestamp": entry.timestamp})

    def record_explanation(self, session_id: str, command: str, body: dict) -> None:
        self._append(session_id, {"type": "explanation", "command": command,
                                  "body": body})
