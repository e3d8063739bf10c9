"""Outcome reward: answer extraction, normalization, equivalence checking.

The equality ladder is deliberately small and deterministic: (1) normalized
string equality, (2) exact rational equality when both sides parse as
numbers, (3) otherwise unequal. No symbolic algebra; disagreements can be
re-adjudicated offline.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from .decoder import detect_termination

REASON_CORRECT = "correct"
REASON_WRONG = "wrong"
REASON_NO_ANSWER = "no_answer"

_FRAC_RE = re.compile(r"\\frac\{([^{}]+)\}\{([^{}]+)\}")
_SQRT_BRACED_RE = re.compile(r"\\sqrt\s*\{([^{}]+)\}")
_SQRT_BARE_RE = re.compile(r"\\sqrt\s*([0-9a-zA-Z])")
_THOUSANDS_RE = re.compile(r"(\d),(\d{3})(?!\d)")


@dataclass(frozen=True)
class RewardOutcome:
    reward: float
    extracted: Optional[str]
    terminated: bool
    reason: str

    def __post_init__(self) -> None:
        if (self.reward == 1.0) != (self.reason == REASON_CORRECT):
            raise ValueError("reward 1.0 must coincide with reason=correct")


def _normalize_once(s: str) -> str:
    s = s.strip()
    s = s.replace("\u2212", "-")
    while len(s) >= 2 and s.startswith("$") and s.endswith("$"):
        s = s[1:-1].strip()
    s = s.replace("\\left", "").replace("\\right", "")
    s = s.replace("\\dfrac", "\\frac").replace("\\tfrac", "\\frac").replace("\\cfrac", "\\frac")
    prev = None
    while prev != s:
        prev = s
        s = _FRAC_RE.sub(r"\1/\2", s)
    s = _SQRT_BRACED_RE.sub(r"sqrt(\1)", s)
    s = _SQRT_BARE_RE.sub(r"sqrt(\1)", s)
    prev = None
    while prev != s:
        prev = s
        s = _THOUSANDS_RE.sub(r"\1\2", s)
    s = re.sub(r"\s+", "", s)
    # Strip one layer of braces that wrap the whole answer.
    while len(s) >= 2 and s[0] == "{" and s[-1] == "}" and _braces_balance(s[1:-1]):
        s = s[1:-1]
    return s


def normalize_answer(s: str) -> str:
    """Canonical form used for answer comparison. Idempotent.

    Rewrites run to a fixpoint: every pass either removes a backslash macro
    or shortens the string, so iteration terminates.
    """
    while True:
        out = _normalize_once(s)
        if out == s:
            return out
        s = out


def _braces_balance(s: str) -> bool:
    depth = 0
    for ch in s:
        if ch == "{":
            depth += 1
        elif ch == "}":
            depth -= 1
            if depth < 0:
                return False
    return depth == 0


def _as_rational(s: str) -> Optional[Fraction]:
    try:
        return Fraction(s)
    except (ValueError, ZeroDivisionError):
        return None


def answers_match(a: str, b: str) -> bool:
    """Equality ladder over two raw answer strings."""
    na, nb = normalize_answer(a), normalize_answer(b)
    if na == nb:
        return True
    ra, rb = _as_rational(na), _as_rational(nb)
    return ra is not None and rb is not None and ra == rb


def score(trace: str, answer: str) -> RewardOutcome:
    """Outcome reward for a reasoning trace against the reference answer."""
    if not answer:
        raise ValueError("reference answer must be nonempty")
    terminated, extracted = detect_termination(trace)
    if not terminated or extracted is None:
        return RewardOutcome(0.0, None, False, REASON_NO_ANSWER)
    if answers_match(extracted, answer):
        return RewardOutcome(1.0, extracted, True, REASON_CORRECT)
    return RewardOutcome(0.0, extracted, True, REASON_WRONG)
