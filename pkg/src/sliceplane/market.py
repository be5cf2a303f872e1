"""Offer catalog, intent-offer matching, and order lifecycle.

Money is integer minor units throughout; the only arithmetic is
rate * duration, done in Decimal and rounded half-up, so no float ever
touches a price.  Matching is a pure filter-and-sort over a catalog
snapshot; order creation and capacity accounting serialize through one
lock.
"""

from __future__ import annotations

import json
import logging
import threading
from dataclasses import dataclass, field, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Optional

from .errors import SlicePlaneError
from .ids import IdFactory
from .intents import SliceIntent
from .policy import PolicyVerdict

logger = logging.getLogger(__name__)


class DuplicateOffer(SlicePlaneError):
    code = "duplicate_offer"


class UnknownOffer(SlicePlaneError):
    code = "unknown_offer"


class PolicyDenied(SlicePlaneError):
    code = "policy_denied"

    def __init__(self, message: str, reasons: Optional[list[str]] = None):
        super().__init__(message)
        self.reasons = reasons or []


class OfferExhausted(SlicePlaneError):
    code = "offer_exhausted"


class StaleOffer(SlicePlaneError):
    code = "stale_offer"


class UnknownOrder(SlicePlaneError):
    code = "unknown_order"


class InvalidOrderState(SlicePlaneError):
    code = "invalid_order_state"


ORDER_STATUSES = ("pending_approval", "approved", "rejected", "fulfilled", "cancelled")


@dataclass(frozen=True)
class SliceOffer:
    offer_id: str
    provider_id: str
    region: str
    service_class: str
    rate_minor_units_per_hour: int
    capacity_slots: int
    currency: str = "EUR"
    guaranteed_latency_ms: Optional[float] = None
    guaranteed_availability_pct: Optional[float] = None
    guaranteed_throughput_mbps: Optional[float] = None
    isolation_supported: tuple = ("shared",)
    compliance_tags: tuple = ()

    def __post_init__(self):
        if self.rate_minor_units_per_hour < 0:
            raise ValueError("rate must be non-negative")
        if self.capacity_slots < 0:
            raise ValueError("capacity_slots must be non-negative")

    def to_payload(self) -> dict:
        return {
            "offer_id": self.offer_id,
            "provider_id": self.provider_id,
            "region": self.region,
            "service_class": self.service_class,
            "rate_minor_units_per_hour": self.rate_minor_units_per_hour,
            "capacity_slots": self.capacity_slots,
            "currency": self.currency,
            "guaranteed_latency_ms": self.guaranteed_latency_ms,
            "guaranteed_availability_pct": self.guaranteed_availability_pct,
            "guaranteed_throughput_mbps": self.guaranteed_throughput_mbps,
            "isolation_supported": list(self.isolation_supported),
            "compliance_tags": list(self.compliance_tags),
        }


@dataclass(frozen=True)
class SliceOrder:
    order_id: str
    intent: SliceIntent
    offer_id: str
    total_cost_minor_units: int
    policy_verdict_ref: Optional[int]
    status: str

    def to_payload(self) -> dict:
        return {
            "order_id": self.order_id,
            "intent": self.intent.to_payload(),
            "offer_id": self.offer_id,
            "total_cost_minor_units": self.total_cost_minor_units,
            "policy_verdict_ref": self.policy_verdict_ref,
            "status": self.status,
        }


def total_cost(rate_minor_units_per_hour: int, duration_hours) -> int:
    """rate * duration in minor units, rounded half-up to the nearest unit."""
    cost = Decimal(rate_minor_units_per_hour) * Decimal(str(duration_hours))
    return int(cost.quantize(Decimal("1"), rounding=ROUND_HALF_UP))


def offer_matches(offer: SliceOffer, intent: SliceIntent) -> bool:
    """One offer against one intent; the match() sort is applied separately.

    An intent SLO that the offer carries no guarantee for is a non-match:
    absence of a guarantee never satisfies a requirement.
    """
    if offer.region != intent.region:
        return False
    if offer.service_class != intent.service_class:
        return False
    if offer.capacity_slots < 1:
        return False
    if offer.currency != intent.budget_currency:
        return False
    if intent.isolation_level not in offer.isolation_supported:
        return False
    if intent.latency_slo_ms is not None:
        if offer.guaranteed_latency_ms is None:
            return False
        if offer.guaranteed_latency_ms > intent.latency_slo_ms:
            return False
    if intent.availability_slo_pct is not None:
        if offer.guaranteed_availability_pct is None:
            return False
        if offer.guaranteed_availability_pct < intent.availability_slo_pct:
            return False
    if intent.throughput_slo_mbps is not None:
        if offer.guaranteed_throughput_mbps is None:
            return False
        if offer.guaranteed_throughput_mbps < intent.throughput_slo_mbps:
            return False
    return total_cost(offer.rate_minor_units_per_hour, intent.duration_hours) <= intent.budget_amount


@dataclass(frozen=True)
class Match:
    offer: SliceOffer
    total_cost_minor_units: int

    def to_payload(self) -> dict:
        return {
            "offer": self.offer.to_payload(),
            "total_cost_minor_units": self.total_cost_minor_units,
        }


class Marketplace:
    def __init__(self):
        self._offers: dict[str, SliceOffer] = {}
        self._orders: dict[str, SliceOrder] = {}
        self._lock = threading.RLock()
        self._order_ids = IdFactory("ord", width=6)

    # -- catalog ---------------------------------------------------------

    def publish_offer(self, offer: SliceOffer) -> None:
        with self._lock:
            if offer.offer_id in self._offers:
                raise DuplicateOffer(f"offer {offer.offer_id!r} already published")
            self._offers[offer.offer_id] = offer

    def withdraw_offer(self, offer_id: str) -> None:
        with self._lock:
            if offer_id not in self._offers:
                raise UnknownOffer(f"offer {offer_id!r} not in catalog")
            del self._offers[offer_id]

    def get_offer(self, offer_id: str) -> Optional[SliceOffer]:
        with self._lock:
            return self._offers.get(offer_id)

    def catalog(self) -> list[SliceOffer]:
        with self._lock:
            return sorted(self._offers.values(), key=lambda o: o.offer_id)

    def load_catalog(self, path: str) -> int:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
        count = 0
        for entry in doc["offers"]:
            self.publish_offer(offer_from_dict(entry))
            count += 1
        return count

    # -- matching --------------------------------------------------------

    def match(self, intent: SliceIntent) -> list[Match]:
        """Feasible offers sorted by total cost, then offer_id."""
        with self._lock:
            snapshot = list(self._offers.values())
        matches = [
            Match(
                offer=o,
                total_cost_minor_units=total_cost(
                    o.rate_minor_units_per_hour, intent.duration_hours
                ),
            )
            for o in snapshot
            if offer_matches(o, intent)
        ]
        matches.sort(key=lambda m: (m.total_cost_minor_units, m.offer.offer_id))
        return matches

    # -- orders ----------------------------------------------------------

    def create_order(
        self,
        intent: SliceIntent,
        offer_id: str,
        verdict: PolicyVerdict,
        verdict_ref: Optional[int] = None,
        pending: bool = False,
    ) -> SliceOrder:
        """Create an order against a still-available offer.

        With pending=True the order waits for explicit approval and no
        capacity is taken yet; otherwise it is approved immediately and
        one capacity slot is consumed atomically.
        """
        if verdict.verdict != "allow":
            raise PolicyDenied(
                "policy denied the order: " + "; ".join(verdict.reasons),
                reasons=verdict.reasons,
            )
        with self._lock:
            offer = self._offers.get(offer_id)
            if offer is None:
                raise StaleOffer(f"offer {offer_id!r} is no longer in the catalog")
            if offer.capacity_slots < 1:
                raise OfferExhausted(f"offer {offer_id!r} has no capacity left")
            cost = total_cost(offer.rate_minor_units_per_hour, intent.duration_hours)
            if cost > intent.budget_amount:
                raise StaleOffer(
                    f"offer {offer_id!r} no longer fits budget {intent.budget_amount}"
                )
            status = "pending_approval" if pending else "approved"
            order = SliceOrder(
                order_id=self._order_ids.next(),
                intent=intent,
                offer_id=offer_id,
                total_cost_minor_units=cost,
                policy_verdict_ref=verdict_ref,
                status=status,
            )
            if not pending:
                self._offers[offer_id] = replace(
                    offer, capacity_slots=offer.capacity_slots - 1
                )
            self._orders[order.order_id] = order
            return order

    def approve_order(self, order_id: str) -> SliceOrder:
        """pending_approval -> approved; takes the capacity slot now."""
        with self._lock:
            order = self._require_order(order_id)
            if order.status != "pending_approval":
                raise InvalidOrderState(
                    f"order {order_id!r} is {order.status}, not pending_approval"
                )
            offer = self._offers.get(order.offer_id)
            if offer is None:
                raise StaleOffer(f"offer {order.offer_id!r} withdrawn before approval")
            if offer.capacity_slots < 1:
                raise OfferExhausted(f"offer {order.offer_id!r} has no capacity left")
            self._offers[order.offer_id] = replace(
                offer, capacity_slots=offer.capacity_slots - 1
            )
            return self._set_status(order_id, "approved")

    def reject_order(self, order_id: str) -> SliceOrder:
        with self._lock:
            order = self._require_order(order_id)
            if order.status != "pending_approval":
                raise InvalidOrderState(
                    f"order {order_id!r} is {order.status}, not pending_approval"
                )
            return self._set_status(order_id, "rejected")

    def complete_order(self, order_id: str, fulfilled: bool) -> SliceOrder:
        """approved -> fulfilled|cancelled; either way the slot frees up."""
        with self._lock:
            order = self._require_order(order_id)
            if order.status != "approved":
                raise InvalidOrderState(
                    f"order {order_id!r} is {order.status}, not approved"
                )
            offer = self._offers.get(order.offer_id)
            if offer is not None:
                self._offers[order.offer_id] = replace(
                    offer, capacity_slots=offer.capacity_slots + 1
                )
            return self._set_status(order_id, "fulfilled" if fulfilled else "cancelled")

    def restore_order(self, order: SliceOrder) -> None:
        """Re-install an order during audit replay.

        An order sitting at approved holds a capacity slot, so replaying
        it re-takes the slot; every other status is capacity-neutral
        (pending/rejected never took one, fulfilled/cancelled returned it).
        """
        with self._lock:
            self._orders[order.order_id] = order
            self._order_ids.advance_past(order.order_id)
            if order.status == "approved":
                offer = self._offers.get(order.offer_id)
                if offer is not None and offer.capacity_slots > 0:
                    self._offers[order.offer_id] = replace(
                        offer, capacity_slots=offer.capacity_slots - 1
                    )

    def get_order(self, order_id: str) -> Optional[SliceOrder]:
        with self._lock:
            return self._orders.get(order_id)

    def orders(self) -> list[SliceOrder]:
        with self._lock:
            return sorted(self._orders.values(), key=lambda o: o.order_id)

    def _require_order(self, order_id: str) -> SliceOrder:
        order = self._orders.get(order_id)
        if order is None:
            raise UnknownOrder(f"order {order_id!r} does not exist")
        return order

    def _set_status(self, order_id: str, status: str) -> SliceOrder:
        order = replace(self._orders[order_id], status=status)
        self._orders[order_id] = order
        return order


def offer_from_dict(entry: dict) -> SliceOffer:
    return SliceOffer(
        offer_id=entry["offer_id"],
        provider_id=entry["provider_id"],
        region=entry["region"],
        service_class=entry["service_class"],
        rate_minor_units_per_hour=entry["rate_minor_units_per_hour"],
        capacity_slots=entry["capacity_slots"],
        currency=entry.get("currency", "EUR"),
        guaranteed_latency_ms=entry.get("guaranteed_latency_ms"),
        guaranteed_availability_pct=entry.get("guaranteed_availability_pct"),
        guaranteed_throughput_mbps=entry.get("guaranteed_throughput_mbps"),
        isolation_supported=tuple(entry.get("isolation_supported", ["shared"])),
        compliance_tags=tuple(entry.get("compliance_tags", [])),
    )
