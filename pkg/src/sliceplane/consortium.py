"""Multi-backend candidate generation, agreement scoring, and governance.

Several independent backends answer the same canonical prompt; their
outputs are scored for inter-model agreement and then a deterministic
governor validates, ranks, and selects (or rejects) one.  Nothing a
backend produces is discarded: malformed candidates are retained and
flagged so the decision trail stays complete.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional

from .backends import BackendFailure, BackendPool
from .canonical import flatten_pairs
from .errors import SlicePlaneError

logger = logging.getLogger(__name__)

TASKS = ("manifest_generation", "intent_mapping")


class InsufficientBackends(SlicePlaneError):
    code = "insufficient_backends"


class AllBackendsFailed(SlicePlaneError):
    code = "all_backends_failed"


class TooFewCandidates(SlicePlaneError):
    code = "too_few_candidates"


@dataclass(frozen=True)
class CandidateOutput:
    backend_id: str
    task: str
    content: Optional[dict]
    generation_seed: int
    malformed: bool = False
    raw: str = ""
    error: str = ""

    def to_payload(self) -> dict:
        return {
            "backend_id": self.backend_id,
            "task": self.task,
            "content": self.content,
            "generation_seed": self.generation_seed,
            "malformed": self.malformed,
            "raw": self.raw,
            "error": self.error,
        }


@dataclass(frozen=True)
class ConsensusReport:
    # keys are unordered pairs stored as sorted (a, b) tuples
    pairwise_scores: dict
    mean_agreement: float

    def to_payload(self) -> dict:
        return {
            "pairwise_scores": [
                {"a": a, "b": b, "score": score}
                for (a, b), score in sorted(self.pairwise_scores.items())
            ],
            "mean_agreement": self.mean_agreement,
        }


@dataclass
class GovernanceDecision:
    outcome: str  # selected | synthesized | rejected_all
    chosen: Optional[dict]
    chosen_backend_id: Optional[str]
    per_candidate_verdicts: list
    explanation: list
    audit_ref: Optional[int] = None

    def to_payload(self) -> dict:
        return {
            "outcome": self.outcome,
            "chosen": self.chosen,
            "chosen_backend_id": self.chosen_backend_id,
            "per_candidate_verdicts": self.per_candidate_verdicts,
            "explanation": self.explanation,
            "audit_ref": self.audit_ref,
        }


def generate_candidates(
    task: str, prompt: str, pool: BackendPool, n: int
) -> list[CandidateOutput]:
    """Ask n distinct backends for the same prompt, independently.

    A backend that raises becomes a malformed candidate rather than
    aborting the round, unless every backend raised.
    """
    if task not in TASKS:
        raise ValueError(f"unknown task {task!r}")
    if n < 1:
        raise ValueError("n must be >= 1")
    backends = pool.with_capability(task)
    if len(backends) < n:
        raise InsufficientBackends(
            f"need {n} backends with capability {task!r}, have {len(backends)}"
        )
    candidates: list[CandidateOutput] = []
    failures = 0
    for backend in backends[:n]:
        seed = getattr(backend, "seed", 0)
        try:
            raw = backend.complete(prompt)
        except BackendFailure as exc:
            failures += 1
            candidates.append(
                CandidateOutput(
                    backend_id=backend.name,
                    task=task,
                    content=None,
                    generation_seed=seed,
                    malformed=True,
                    error=str(exc),
                )
            )
            continue
        try:
            content = json.loads(raw)
            if not isinstance(content, dict):
                raise ValueError("top-level document must be an object")
            candidates.append(
                CandidateOutput(
                    backend_id=backend.name,
                    task=task,
                    content=content,
                    generation_seed=seed,
                )
            )
        except (json.JSONDecodeError, ValueError):
            candidates.append(
                CandidateOutput(
                    backend_id=backend.name,
                    task=task,
                    content=None,
                    generation_seed=seed,
                    malformed=True,
                    raw=raw,
                )
            )
    if failures == n:
        raise AllBackendsFailed(f"all {n} backends failed for task {task!r}")
    return candidates


def jaccard(a: Optional[dict], b: Optional[dict]) -> float:
    """Jaccard similarity of the flattened (key-path, value) pair sets."""
    if a is None or b is None:
        return 0.0
    pa, pb = flatten_pairs(a), flatten_pairs(b)
    if not pa and not pb:
        return 1.0
    union = pa | pb
    return len(pa & pb) / len(union)


def score_agreement(candidates: list[CandidateOutput]) -> ConsensusReport:
    """Mean pairwise Jaccard over all unordered candidate pairs.

    Malformed candidates stay in the report and score 0 against everyone.
    """
    well_formed = [c for c in candidates if not c.malformed]
    if len(well_formed) < 2:
        raise TooFewCandidates(
            f"need >= 2 well-formed candidates, have {len(well_formed)}"
        )
    scores: dict = {}
    for i in range(len(candidates)):
        for j in range(i + 1, len(candidates)):
            a, b = candidates[i], candidates[j]
            key = tuple(sorted((a.backend_id, b.backend_id)))
            scores[key] = jaccard(a.content, b.content)
    mean = sum(scores.values()) / len(scores) if scores else 1.0
    return ConsensusReport(pairwise_scores=scores, mean_agreement=mean)


@dataclass(frozen=True)
class Check:
    """A named, pure predicate over candidate content."""

    name: str
    predicate: Callable[[dict], bool]

    def failed(self, content: dict) -> bool:
        return not self.predicate(content)


def declared_resource_cost(content: dict) -> int:
    """Total declared resources: sum of replicas * (cpu + memory) requests.

    Works on a single-unit manifest or a document with a "units" list.
    """
    units = content.get("units")
    if units is None:
        units = [content]
    total = 0
    for unit in units:
        if not isinstance(unit, dict):
            continue
        replicas = unit.get("replicas", 0)
        cpu = unit.get("cpu_request_millicores", 0)
        mem = unit.get("memory_request_mib", 0)
        total += replicas * (cpu + mem)
    return total


def govern(
    candidates: list[CandidateOutput],
    checks: list[Check],
    report: Optional[ConsensusReport] = None,
    cost_fn: Callable[[dict], float] = declared_resource_cost,
    priority: Optional[list[str]] = None,
) -> GovernanceDecision:
    """Validate every candidate against every check, then pick one.

    Selection among all-pass candidates: lowest cost_fn value, then the
    position of the backend in ``priority`` (defaults to candidate
    order), then backend_id.  If nothing passes, the decision is
    rejected_all with the complete failure lists.  Always returns a
    decision; never raises on bad content.
    """
    if not checks:
        raise ValueError("checks must be non-empty")
    order = priority or [c.backend_id for c in candidates]

    def rank(backend_id: str) -> int:
        return order.index(backend_id) if backend_id in order else len(order)

    verdicts = []
    passing: list[CandidateOutput] = []
    for cand in candidates:
        if cand.malformed or cand.content is None:
            failed = ["malformed-content"]
        else:
            failed = [chk.name for chk in checks if chk.failed(cand.content)]
        verdicts.append(
            {
                "backend_id": cand.backend_id,
                "verdict": "pass" if not failed else "fail",
                "failed_checks": failed,
            }
        )
        if not failed:
            passing.append(cand)

    explanation = [
        "checks run: " + ", ".join(chk.name for chk in checks),
    ]
    for v in verdicts:
        if v["verdict"] == "pass":
            explanation.append(f"{v['backend_id']}: pass")
        else:
            explanation.append(
                f"{v['backend_id']}: fail ({', '.join(v['failed_checks'])})"
            )
    if report is not None:
        explanation.append(f"mean agreement {report.mean_agreement:.4f}")
    else:
        explanation.append("agreement not scored")

    if not passing:
        explanation.append("no candidate passed every check; rejected all")
        return GovernanceDecision(
            outcome="rejected_all",
            chosen=None,
            chosen_backend_id=None,
            per_candidate_verdicts=verdicts,
            explanation=explanation,
        )

    ranked = sorted(
        passing, key=lambda c: (cost_fn(c.content), rank(c.backend_id), c.backend_id)
    )
    winner = ranked[0]
    explanation.append(
        f"selected {winner.backend_id} (declared cost {cost_fn(winner.content)}) "
        "by lowest declared resource cost"
    )
    return GovernanceDecision(
        outcome="selected",
        chosen=winner.content,
        chosen_backend_id=winner.backend_id,
        per_candidate_verdicts=verdicts,
        explanation=explanation,
    )
