import hashlib
import json
from pathlib import Path

import pytest

from baton.core import BudgetSpec, GenerationParams, ProblemInstance
from baton.prompts import load_prompt_set


@pytest.fixture(scope="session")
def prompts():
    return load_prompt_set()


@pytest.fixture
def problem():
    return ProblemInstance(id="p1", prompt="What is 3+4?", answer="7")


@pytest.fixture
def small_budget():
    return BudgetSpec(h_r=64, h_s=16, turns_t=3)


@pytest.fixture
def params():
    return GenerationParams(temperature=1.0, top_p=1.0, max_tokens=64)


def token_text(n, tag="tok"):
    """Exactly n whitespace tokens, all distinct."""
    return " ".join(f"{tag}{i}" for i in range(n))


def write_dataset(path: Path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return str(path)


def write_script(path: Path, entries):
    with open(path, "w", encoding="utf-8") as fh:
        for match, content in entries:
            fh.write(json.dumps({"match": match, "content": content}) + "\n")
    return str(path)


def tree_digest(root: Path) -> str:
    """Order-independent digest of a directory tree's paths and bytes."""
    digest = hashlib.sha256()
    for path in sorted(p for p in Path(root).rglob("*") if p.is_file()):
        digest.update(str(path.relative_to(root)).encode())
        digest.update(b"\0")
        digest.update(path.read_bytes())
        digest.update(b"\1")
    return digest.hexdigest()
