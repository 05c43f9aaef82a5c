"""Hash-chained accountability log.

Every model call, ballot, debate statement, reflection verdict, tool
invocation and human feedback is bound to an actor identity in one totally
ordered, append-only chain. Each record digest covers the previous digest,
so any payload flip is detectable by replaying the chain; truncation of the
tail is only detectable against an externally stored head digest.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import threading
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path
from typing import Any, Iterable

GENESIS_DIGEST = "0" * 64


def to_jsonable(value: Any) -> Any:
    """Convert a value into plain JSON types, losslessly for Fractions."""
    if isinstance(value, Fraction):
        return f"{value.numerator}/{value.denominator}"
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, (set, frozenset)):
        return sorted(to_jsonable(v) for v in value)
    if dataclasses.is_dataclass(value) and not isinstance(value, type):
        return to_jsonable(dataclasses.asdict(value))
    return value


def canonical_json(value: Any) -> str:
    """Canonical form: sorted keys, no spaces, UTF-8 preserved."""
    return json.dumps(to_jsonable(value), sort_keys=True,
                      separators=(",", ":"), ensure_ascii=False)


def _chain_digest(seq: int, actor_id: str, event_type: str,
                  payload_json: str, prev_digest: str) -> str:
    h = hashlib.sha256()
    for field in (str(seq), actor_id, event_type, payload_json, prev_digest):
        raw = field.encode("utf-8")
        h.update(len(raw).to_bytes(8, "big"))
        h.update(raw)
    return h.hexdigest()


@dataclass(frozen=True)
class EventRecord:
    seq: int
    actor_id: str
    event_type: str
    payload: Any
    digest: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "actor_id": self.actor_id,
            "event_type": self.event_type,
            "payload": to_jsonable(self.payload),
            "digest": self.digest,
        }


class EventLog:
    """Append-only, totally ordered event chain with a single writer lock."""

    def __init__(self) -> None:
        self._records: list[EventRecord] = []
        self._lock = threading.Lock()

    def __len__(self) -> int:
        return len(self._records)

    @property
    def records(self) -> list[EventRecord]:
        return list(self._records)

    @property
    def head_digest(self) -> str:
        return self._records[-1].digest if self._records else GENESIS_DIGEST

    @property
    def next_seq(self) -> int:
        return len(self._records) + 1

    def append(self, actor_id: str, event_type: str, payload: Any) -> EventRecord:
        with self._lock:
            seq = len(self._records) + 1
            prev = self._records[-1].digest if self._records else GENESIS_DIGEST
            payload = to_jsonable(payload)
            digest = _chain_digest(seq, actor_id, event_type,
                                   canonical_json(payload), prev)
            record = EventRecord(seq, actor_id, event_type, payload, digest)
            self._records.append(record)
            return record

    def since(self, seq: int) -> list[EventRecord]:
        """Records with seq strictly greater than the given value."""
        return [r for r in self._records if r.seq > seq]

    def of_type(self, *event_types: str) -> list[EventRecord]:
        wanted = set(event_types)
        return [r for r in self._records if r.event_type in wanted]

    def write_jsonl(self, path: str | Path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            for record in self._records:
                fh.write(json.dumps(record.to_dict(), ensure_ascii=False))
                fh.write("\n")


def read_jsonl(path: str | Path) -> list[EventRecord]:
    records = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            raw = json.loads(line)
            records.append(EventRecord(raw["seq"], raw["actor_id"],
                                       raw["event_type"], raw["payload"],
                                       raw["digest"]))
    return records


def verify_log(records: Iterable[EventRecord] | EventLog) -> int | None:
    """Recompute the chain; return the first bad seq, or None when intact.

    A truncated tail verifies clean for the remaining prefix: truncation
    detection requires the externally stored head digest.
    """
    if isinstance(records, EventLog):
        records = records.records
    prev = GENESIS_DIGEST
    expected_seq = 1
    for record in records:
        payload_json = canonical_json(record.payload)
        good = _chain_digest(record.seq, record.actor_id, record.event_type,
                             payload_json, prev)
        if record.seq != expected_seq or record.digest != good:
            return expected_seq
        prev = record.digest
        expected_seq += 1
    return None
