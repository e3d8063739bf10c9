"""Problem dataset IO: JSONL of {id, prompt, answer?, domain?}."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Union

from .core import ProblemInstance
from .errors import DatasetError


def load_problems(path: Union[str, Path]) -> list[ProblemInstance]:
    path = Path(path)
    if not path.exists():
        raise DatasetError(f"dataset file not found: {path}")
    problems: list[ProblemInstance] = []
    seen: set[str] = set()
    with open(path, "r", encoding="utf-8") as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                problem = ProblemInstance(
                    id=str(obj["id"]),
                    prompt=str(obj["prompt"]),
                    answer=str(obj["answer"]) if obj.get("answer") is not None else None,
                    domain=str(obj.get("domain", "")),
                )
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
                raise DatasetError(f"bad dataset line {line_no} in {path}: {exc}") from exc
            if problem.id in seen:
                raise DatasetError(f"duplicate problem id {problem.id!r} at line {line_no}")
            seen.add(problem.id)
            problems.append(problem)
    if not problems:
        raise DatasetError(f"dataset {path} is empty")
    return problems
