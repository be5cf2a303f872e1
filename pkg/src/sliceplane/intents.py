"""Natural-language intent extraction over a fixed vocabulary.

The extractor stands in for a fine-tuned mapping model: it is a pure
function of the input text (the seed only names the backend), built from
keyword and pattern rules.  Two properties matter more than recall:

* anti-fabrication: every extracted parameter records the span of source
  text that supports it, and nothing is emitted without a span;
* conflict safety: two different values for the same field make the text
  unmappable rather than letting one silently win.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass
from typing import Optional

from .backends import Backend, BackendFailure, BackendPool, BackendUnavailable, DeterministicBackend
from .canonical import canonical_json
from .errors import SlicePlaneError
from .tools import ToolCall

logger = logging.getLogger(__name__)

SERVICE_CLASSES = ("low_latency", "high_reliability", "high_throughput", "best_effort")
ISOLATION_LEVELS = ("shared", "dedicated")


class EmptyIntent(SlicePlaneError):
    code = "empty_intent"


class UnmappableIntent(SlicePlaneError):
    code = "unmappable_intent"


class MissingRequiredField(SlicePlaneError):
    code = "missing_required_field"

    def __init__(self, fields: list[str]):
        super().__init__("missing required fields: " + ", ".join(fields))
        self.fields = fields

    def payload(self) -> dict:
        out = super().payload()
        out["fields"] = self.fields
        return out


REGIONS = ("stockholm", "oslo", "gothenburg", "copenhagen", "helsinki")

# ordered so that multi-word phrases are tried before their substrings
CLASS_PHRASES = (
    ("low-latency", "low_latency"),
    ("low latency", "low_latency"),
    ("high-reliability", "high_reliability"),
    ("high reliability", "high_reliability"),
    ("high-throughput", "high_throughput"),
    ("high throughput", "high_throughput"),
    ("high-bandwidth", "high_throughput"),
    ("high bandwidth", "high_throughput"),
    ("best-effort", "best_effort"),
    ("best effort", "best_effort"),
)

WORD_NUMBERS = {
    "one": 1, "two": 2, "three": 3, "four": 4, "five": 5, "six": 6,
    "seven": 7, "eight": 8, "nine": 9, "ten": 10, "eleven": 11, "twelve": 12,
}

CURRENCY_SYMBOLS = {"€": "EUR", "$": "USD", "£": "GBP"}

_BUDGET_RE = re.compile(
    r"(?:budget(?:\s+of)?\s+|cost(?:\s+of)?\s+|max(?:imum)?\s+(?:cost|budget)(?:\s+of)?\s+)?"
    r"([€$£])\s?(\d+(?:\.\d{1,2})?)"
)
_DURATION_NUM_RE = re.compile(r"\b(\d+(?:\.\d+)?)\s*(?:hours?|hrs?|h\b)")
_DURATION_WORD_RE = re.compile(
    r"\b(" + "|".join(WORD_NUMBERS) + r")\s+hours?\b"
)
_AN_HOUR_RE = re.compile(r"\ban?\s+hour\b")
_LATENCY_RE = re.compile(
    r"\blatency\s+(?:below|under|of|at most|<=?)\s*(\d+(?:\.\d+)?)\s*ms\b|"
    r"\b(?:below|under)\s*(\d+(?:\.\d+)?)\s*ms\b"
)
_AVAILABILITY_RE = re.compile(r"\b(?:availability\s+(?:of\s+)?)?(\d{2}(?:\.\d+)?)\s?%")
_THROUGHPUT_RE = re.compile(r"\b(\d+(?:\.\d+)?)\s*([MG])bps\b", re.IGNORECASE)
# slice ids equal order ids, so the user-facing token is the order id
_SLICE_ID_RE = re.compile(r"\b(ord-\d{6})\b")
_USE_CASE_RE = re.compile(r"\bfor\s+((?:[a-z][a-z-]*)(?:\s+[a-z][a-z-]*){0,4})")

# words that end or cannot start a use-case phrase; keeps durations,
# prepositions, and boilerplate out of the tag
_USE_CASE_STOP = {
    "the", "a", "an", "next", "one", "two", "three", "four", "five", "six",
    "seven", "eight", "nine", "ten", "eleven", "twelve", "hour", "hours",
    "it", "me", "us", "them", "for", "in", "with", "at", "on", "and", "or",
    "to", "of", "per", "under", "below", "over", "budget", "cost",
}


@dataclass(frozen=True)
class Extraction:
    """A tool call plus, for each param, the supporting source span."""

    call: ToolCall
    spans: dict


def _collect(found: dict, spans: dict, field: str, value, span: tuple[int, int]):
    if field in found and found[field] != value:
        raise UnmappableIntent(
            f"conflicting values for {field}: {found[field]!r} vs {value!r}"
        )
    found[field] = value
    spans.setdefault(field, list(span))


def _detect_tool(lowered: str) -> str:
    # precedence: destructive verbs first so "terminate … slice" never
    # reads as a new request
    if re.search(r"\b(terminate|tear down|teardown|delete|release)\b", lowered):
        return "terminate_slice"
    if re.search(r"\b(status|health|how is|state of)\b", lowered):
        return "get_slice_status"
    if re.search(r"\b(offers?|catalog|marketplace|what can i buy|list)\b", lowered) and not re.search(
        r"\b(provision|set up|setup|create|request|need|deploy|order)\b", lowered
    ):
        return "query_offers"
    if re.search(r"\b(slice|provision|network)\b", lowered):
        return "request_slice"
    raise UnmappableIntent("no registered tool matches the request")


def extract_intent(text: str) -> Extraction:
    """Map free text onto one tool call with per-param evidence spans."""
    if text is None or not text.strip():
        raise EmptyIntent("intent text is empty")
    lowered = text.lower()
    tool = _detect_tool(lowered)
    found: dict = {}
    spans: dict = {}

    m = _SLICE_ID_RE.search(lowered)
    if tool in ("get_slice_status", "terminate_slice"):
        if m is None:
            raise UnmappableIntent(f"{tool} needs a slice id like ord-000001")
        _collect(found, spans, "slice_id", m.group(1), m.span(1))
        return Extraction(
            ToolCall(tool=tool, params=found, provenance=text), spans
        )

    for name in REGIONS:
        for m in re.finditer(r"\b" + name + r"\b", lowered):
            _collect(found, spans, "region", name, m.span())

    for phrase, klass in CLASS_PHRASES:
        idx = lowered.find(phrase)
        while idx != -1:
            _collect(found, spans, "service_class", klass, (idx, idx + len(phrase)))
            idx = lowered.find(phrase, idx + 1)

    for m in _BUDGET_RE.finditer(text):
        currency = CURRENCY_SYMBOLS[m.group(1)]
        minor = round(float(m.group(2)) * 100)
        _collect(found, spans, "budget_amount", minor, m.span(2))
        _collect(found, spans, "budget_currency", currency, m.span(1))

    for m in _DURATION_NUM_RE.finditer(lowered):
        hours = float(m.group(1))
        _collect(found, spans, "duration_hours", int(hours) if hours == int(hours) else hours, m.span())
    for m in _DURATION_WORD_RE.finditer(lowered):
        _collect(found, spans, "duration_hours", WORD_NUMBERS[m.group(1)], m.span())
    m = _AN_HOUR_RE.search(lowered)
    if m:
        _collect(found, spans, "duration_hours", 1, m.span())

    m = _LATENCY_RE.search(lowered)
    if m:
        raw = m.group(1) or m.group(2)
        value = float(raw)
        _collect(
            found, spans, "latency_slo_ms",
            int(value) if value == int(value) else value, m.span(),
        )

    m = _AVAILABILITY_RE.search(lowered)
    if m:
        pct = float(m.group(1))
        _collect(found, spans, "availability_slo_pct", pct, m.span())

    m = _THROUGHPUT_RE.search(lowered)
    if m:
        mbps = float(m.group(1)) * (1000 if m.group(2).lower() == "g" else 1)
        _collect(
            found, spans, "throughput_slo_mbps",
            int(mbps) if mbps == int(mbps) else mbps, m.span(),
        )

    if tool == "request_slice":
        m = re.search(r"\bdedicated\b", lowered)
        if m:
            _collect(found, spans, "isolation_level", "dedicated", m.span())
        use_case = _find_use_case(lowered)
        if use_case is not None:
            tag, span = use_case
            _collect(found, spans, "use_case", tag, span)

    if tool == "query_offers" and not found:
        return Extraction(ToolCall(tool=tool, params={}, provenance=text), {})

    if tool == "request_slice" and "region" not in found and "service_class" not in found:
        raise UnmappableIntent("request mentions a slice but no region or service class")

    return Extraction(ToolCall(tool=tool, params=found, provenance=text), spans)


def intent_render(prompt: str, seed: int) -> str:
    """Backend render function: extraction serialized as canonical JSON."""
    ext = extract_intent(prompt)
    return canonical_json(
        {"tool": ext.call.tool, "params": ext.call.params, "spans": ext.spans}
    )


def intent_backend(name: str = "mapper-a", seed: int = 0) -> Backend:
    return DeterministicBackend(name=name, seed=seed, render=intent_render)


def parse_intent(text: str, pool: BackendPool) -> ToolCall:
    """Map text to a tool call via the first intent-mapping backend.

    The raw text travels with the call as provenance so the audit trail
    can always show what the user actually asked for.
    """
    if text is None or not text.strip():
        raise EmptyIntent("intent text is empty")
    backend = pool.first("intent_mapping")
    try:
        raw = backend.complete(text)
    except BackendFailure as exc:
        raise BackendUnavailable(str(exc)) from exc
    try:
        doc = json.loads(raw)
        tool = doc["tool"]
        params = doc["params"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UnmappableIntent(f"backend output is not a tool call: {exc}") from exc
    return ToolCall(tool=tool, params=params, origin="agent", provenance=text)


@dataclass(frozen=True)
class SliceIntent:
    """Canonical, fully-defaulted request every downstream module consumes."""

    tenant_id: str
    region: str
    service_class: str
    duration_hours: float
    budget_amount: int
    budget_currency: str
    use_case: str = ""
    latency_slo_ms: Optional[float] = None
    availability_slo_pct: Optional[float] = None
    throughput_slo_mbps: Optional[float] = None
    isolation_level: str = "shared"

    def __post_init__(self):
        if self.service_class not in SERVICE_CLASSES:
            raise ValueError(f"unknown service class {self.service_class!r}")
        if self.isolation_level not in ISOLATION_LEVELS:
            raise ValueError(f"unknown isolation level {self.isolation_level!r}")
        if self.duration_hours <= 0:
            raise ValueError("duration_hours must be positive")
        if self.budget_amount < 0:
            raise ValueError("budget_amount must be non-negative")
        if self.availability_slo_pct is not None and not (0 < self.availability_slo_pct <= 100):
            raise ValueError("availability_slo_pct must be in (0, 100]")
        if self.latency_slo_ms is not None and self.latency_slo_ms <= 0:
            raise ValueError("latency_slo_ms must be positive")
        if self.throughput_slo_mbps is not None and self.throughput_slo_mbps <= 0:
            raise ValueError("throughput_slo_mbps must be positive")

    def slo_fields(self) -> dict:
        out = {}
        if self.latency_slo_ms is not None:
            out["latency_slo_ms"] = self.latency_slo_ms
        if self.availability_slo_pct is not None:
            out["availability_slo_pct"] = self.availability_slo_pct
        if self.throughput_slo_mbps is not None:
            out["throughput_slo_mbps"] = self.throughput_slo_mbps
        return out

    def to_payload(self) -> dict:
        return {
            "tenant_id": self.tenant_id,
            "region": self.region,
            "service_class": self.service_class,
            "use_case": self.use_case,
            "duration_hours": self.duration_hours,
            "budget_amount": self.budget_amount,
            "budget_currency": self.budget_currency,
            "isolation_level": self.isolation_level,
            **self.slo_fields(),
        }


_REQUIRED_INTENT_FIELDS = ("region", "service_class", "duration_hours", "budget_amount")


def normalize_intent(params: dict, tenant_id: str = "default") -> SliceIntent:
    """Turn validated request_slice params into a canonical SliceIntent.

    Region is lowercased, isolation defaults to shared, currency defaults
    to EUR.  Classes needing a service guarantee (low_latency,
    high_reliability) must carry at least one SLO field.
    """
    missing = [f for f in _REQUIRED_INTENT_FIELDS if f not in params]
    if missing:
        raise MissingRequiredField(missing)
    service_class = str(params["service_class"]).lower()
    slo_present = any(
        params.get(f) is not None
        for f in ("latency_slo_ms", "availability_slo_pct", "throughput_slo_mbps")
    )
    if service_class in ("low_latency", "high_reliability") and not slo_present:
        raise MissingRequiredField(
            ["latency_slo_ms|availability_slo_pct|throughput_slo_mbps"]
        )
    return SliceIntent(
        tenant_id=tenant_id,
        region=str(params["region"]).lower(),
        service_class=service_class,
        use_case=str(params.get("use_case", "")),
        duration_hours=params["duration_hours"],
        budget_amount=params["budget_amount"],
        budget_currency=str(params.get("budget_currency", "EUR")).upper(),
        latency_slo_ms=params.get("latency_slo_ms"),
        availability_slo_pct=params.get("availability_slo_pct"),
        throughput_slo_mbps=params.get("throughput_slo_mbps"),
        isolation_level=str(params.get("isolation_level", "shared")).lower(),
    )


def _find_use_case(lowered: str) -> Optional[tuple[str, tuple[int, int]]]:
    """Pick the longest plausible "for <phrase>" segment as the use-case tag."""
    best: Optional[tuple[str, tuple[int, int]]] = None
    for m in _USE_CASE_RE.finditer(lowered):
        words = m.group(1).split()
        kept: list[str] = []
        for w in words:
            if w in _USE_CASE_STOP or w in REGIONS or w in WORD_NUMBERS:
                break
            kept.append(w)
        if not kept:
            continue
        phrase = " ".join(kept)
        start = m.start(1)
        end = start + len(phrase)
        tag = "_".join(w.replace("-", "_") for w in kept)
        if best is None or len(kept) > len(best[0].split("_")):
            best = (tag, (start, end))
    return best
