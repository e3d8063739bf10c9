"""Prompt template loading.

Templates are plain-text files with {problem}, {summary}, {reasoning},
{carryover}, {candidates}, {solution}, {feedback} placeholders. Defaults ship
with the package; any file can be overridden by dropping a same-named file in
a template directory passed at load time.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Optional

SUMMARY_DETAIL_LEVELS = ("answer_only", "one_paragraph", "two_paragraphs", "multi_paragraph")
DEFAULT_SUMMARY_DETAIL = "two_paragraphs"

# Appended to the summarization instruction to control how much the summary keeps.
_DETAIL_INSTRUCTIONS = {
    "answer_only": "Report only the current best final answer, nothing else.",
    "one_paragraph": "Write the summary as a single paragraph.",
    "two_paragraphs": "Write the summary as two paragraphs.",
    "multi_paragraph": "Write the summary in as many paragraphs as the work requires.",
}

_TEMPLATE_NAMES = (
    "reasoning_system",
    "summarize_system",
    "reasoning_first_user",
    "reasoning_user",
    "summarize_first_user",
    "summarize_user",
    "refine_system",
    "verify_system",
    "iterate_user",
    "delethink_user",
    "aggregate_system",
    "aggregate_user",
    "dsm_verify_system",
    "dsm_verify_user",
    "dsm_refine_system",
    "dsm_refine_user",
    "annotate_system",
    "annotate_user",
)


@dataclass(frozen=True)
class PromptSet:
    """All instruction texts and user-block templates used by the decoders."""

    reasoning_system: str
    summarize_system: str
    reasoning_first_user: str
    reasoning_user: str
    summarize_first_user: str
    summarize_user: str
    refine_system: str
    verify_system: str
    iterate_user: str
    delethink_user: str
    aggregate_system: str
    aggregate_user: str
    dsm_verify_system: str
    dsm_verify_user: str
    dsm_refine_system: str
    dsm_refine_user: str
    annotate_system: str
    annotate_user: str
    summary_detail: str = DEFAULT_SUMMARY_DETAIL

    def __post_init__(self) -> None:
        if not self.reasoning_system or not self.summarize_system:
            raise ValueError("instruction texts must be nonempty")
        if self.summary_detail not in SUMMARY_DETAIL_LEVELS:
            raise ValueError(f"unknown summary_detail {self.summary_detail!r}")

    @property
    def summarize_system_detailed(self) -> str:
        """Summarization instruction with the detail-level directive appended."""
        return self.summarize_system.rstrip() + "\n" + _DETAIL_INSTRUCTIONS[self.summary_detail]

    def with_detail(self, summary_detail: str) -> "PromptSet":
        return replace(self, summary_detail=summary_detail)

    def template_hashes(self) -> dict[str, str]:
        """sha256 of each template, recorded in run/batch manifests."""
        out = {}
        for name in _TEMPLATE_NAMES:
            out[name] = hashlib.sha256(getattr(self, name).encode("utf-8")).hexdigest()
        return out


def _read_default(name: str) -> str:
    return resources.files("baton").joinpath(f"templates/{name}.txt").read_text(encoding="utf-8")


def load_prompt_set(
    template_dir: Optional[str] = None,
    summary_detail: str = DEFAULT_SUMMARY_DETAIL,
) -> PromptSet:
    """Load defaults, then apply per-file overrides from template_dir."""
    texts = {}
    override = Path(template_dir) if template_dir else None
    for name in _TEMPLATE_NAMES:
        path = override / f"{name}.txt" if override else None
        if path is not None and path.exists():
            texts[name] = path.read_text(encoding="utf-8")
        else:
            texts[name] = _read_default(name)
    return PromptSet(summary_detail=summary_detail, **texts)
