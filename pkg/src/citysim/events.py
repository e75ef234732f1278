"""Append-only JSONL event log, the substrate for every analytics metric.

Records are written with sorted keys and fixed separators so a run is
byte-reproducible.  Ticks are sim minutes and never decrease within a log.
"""

from __future__ import annotations

import gzip
import json

EVENT_KINDS = (
    "move",
    "activity_start",
    "activity_end",
    "visit",
    "interaction",
    "interruption",
    "reflection",
    "goal_revision",
    "need_snapshot",
)


def dumps_canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


class EventWriter:
    def __init__(self, path):
        self.path = str(path)
        self.count = 0
        self._last_tick = -1
        if self.path.endswith(".gz"):
            self._fh = gzip.open(self.path, "wt", encoding="utf-8")
        else:
            self._fh = open(self.path, "w", encoding="utf-8")

    def write(self, tick: int, agent_id: int, kind: str, payload: dict) -> None:
        if tick < self._last_tick:
            raise ValueError(f"event tick {tick} behind log head {self._last_tick}")
        self._last_tick = tick
        self._fh.write(dumps_canonical({"tick": tick, "agent_id": agent_id, "kind": kind, "payload": payload}))
        self._fh.write("\n")
        self.count += 1

    def close(self) -> None:
        self._fh.close()


def iter_events(path):
    opener = gzip.open if str(path).endswith(".gz") else open
    with opener(path, "rt", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if line:
                yield json.loads(line)
