"""Per-problem summary replay buffer with replacement and seeded sampling.

Each entry tracks lineage_depth: the turn count of the chain of runs that
produced it (parent depth + source turn), so evaluation can bin rollouts by
effective horizon. Capacity is enforced per problem; eviction removes
oldest-epoch entries first.
"""

from __future__ import annotations

import json
import random
import threading
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence, Union

from .errors import CorruptBuffer, NoEntry

_FIELDS = ("problem_id", "summary", "epoch", "source_turn", "lineage_depth")


@dataclass(frozen=True)
class ReplayEntry:
    summary: str
    epoch: int
    source_turn: int
    lineage_depth: int


class ReplayBuffer:
    """Mutation is serialized per problem; sampling uses one seeded rng."""

    def __init__(self, capacity_per_problem: int = 3, rng_seed: int = 0):
        if capacity_per_problem < 1:
            raise ValueError("capacity_per_problem must be >= 1")
        self.capacity_per_problem = capacity_per_problem
        self.rng_seed = rng_seed
        self._rng = random.Random(rng_seed)
        self._entries: dict[str, list[ReplayEntry]] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._locks_guard = threading.Lock()

    def _lock_for(self, problem_id: str) -> threading.Lock:
        with self._locks_guard:
            if problem_id not in self._locks:
                self._locks[problem_id] = threading.Lock()
            return self._locks[problem_id]

    def insert(
        self,
        problem_id: str,
        summaries: Sequence[tuple[str, int]],
        parent_depth: int = 0,
        epoch: int = 1,
    ) -> None:
        """Append (text, source_turn) pairs; evict oldest-epoch entries when full."""
        if not summaries:
            raise ValueError("summaries must be nonempty")
        with self._lock_for(problem_id):
            bucket = self._entries.setdefault(problem_id, [])
            for text, source_turn in summaries:
                bucket.append(
                    ReplayEntry(
                        summary=text,
                        epoch=epoch,
                        source_turn=source_turn,
                        lineage_depth=parent_depth + source_turn,
                    )
                )
            while len(bucket) > self.capacity_per_problem:
                oldest = min(range(len(bucket)), key=lambda i: (bucket[i].epoch, i))
                bucket.pop(oldest)

    def sample(self, problem_id: str) -> tuple[str, int]:
        """Uniform draw over the problem's stored summaries."""
        with self._lock_for(problem_id):
            bucket = self._entries.get(problem_id)
            if not bucket:
                raise NoEntry(f"no summaries stored for problem {problem_id!r}")
            entry = self._rng.choice(bucket)
        return entry.summary, entry.lineage_depth

    def entries(self, problem_id: str) -> list[ReplayEntry]:
        return list(self._entries.get(problem_id, []))

    def problem_ids(self) -> list[str]:
        return sorted(self._entries)

    def __len__(self) -> int:
        return sum(len(v) for v in self._entries.values())

    def __contains__(self, problem_id: str) -> bool:
        return bool(self._entries.get(problem_id))

    def max_lineage_depth(self) -> int:
        depths = [e.lineage_depth for b in self._entries.values() for e in b]
        return max(depths, default=0)

    def save(self, path: Union[str, Path]) -> None:
        """JSONL, one entry per line, insertion order preserved."""
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            for problem_id in sorted(self._entries):
                for e in self._entries[problem_id]:
                    fh.write(
                        json.dumps(
                            {
                                "problem_id": problem_id,
                                "summary": e.summary,
                                "epoch": e.epoch,
                                "source_turn": e.source_turn,
                                "lineage_depth": e.lineage_depth,
                            },
                            ensure_ascii=False,
                            sort_keys=True,
                        )
                        + "\n"
                    )

    @classmethod
    def load(
        cls, path: Union[str, Path], capacity_per_problem: int = 3, rng_seed: int = 0
    ) -> "ReplayBuffer":
        buffer = cls(capacity_per_problem=capacity_per_problem, rng_seed=rng_seed)
        with open(path, "r", encoding="utf-8") as fh:
            for line_no, line in enumerate(fh, start=1):
                line = line.strip()
                if not line:
                    continue
                try:
                    obj = json.loads(line)
                    missing = [f for f in _FIELDS if f not in obj]
                    if missing:
                        raise KeyError(f"missing fields {missing}")
                    entry = ReplayEntry(
                        summary=str(obj["summary"]),
                        epoch=int(obj["epoch"]),
                        source_turn=int(obj["source_turn"]),
                        lineage_depth=int(obj["lineage_depth"]),
                    )
                except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                    raise CorruptBuffer(line_no, str(exc)) from exc
                buffer._entries.setdefault(str(obj["problem_id"]), []).append(entry)
        return buffer

    def structurally_equal(self, other: "ReplayBuffer") -> bool:
        return self._entries == other._entries
