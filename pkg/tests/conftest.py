from __future__ import annotations

import json
import os
from pathlib import Path

import pytest

from sliceplane.config import ServiceConfig

REPO_ROOT = Path(__file__).resolve().parents[1]
FIXTURES = REPO_ROOT / "fixtures"

STOCKHOLM_TEXT = (
    "Provision a low-latency network slice in Stockholm for autonomous "
    "vehicle testing for the next two hours, with latency below 10 ms "
    "and a maximum cost of €120"
)
OSLO_TEXT = (
    "High-reliability slice for remote surgery in Oslo, 1 hour, "
    "availability 99.999%, budget €300"
)


def make_config(tmp_path, **overrides) -> ServiceConfig:
    defaults = dict(
        audit_log_path=str(tmp_path / "audit.jsonl"),
        slice_store_path=str(tmp_path / "slices.jsonl"),
        offers_path=str(FIXTURES / "offers.json"),
        clusters_path=str(FIXTURES / "clusters.json"),
        policies_path=str(FIXTURES / "policies.json"),
        tools_path=str(FIXTURES / "tools.json"),
        seed=42,
    )
    defaults.update(overrides)
    return ServiceConfig(**defaults)


@pytest.fixture
def config(tmp_path):
    return make_config(tmp_path)


@pytest.fixture
def plane(config):
    from sliceplane.service import ControlPlane

    p = ControlPlane(config)
    yield p
    p.close()


@pytest.fixture
def canonical_scenario():
    with open(FIXTURES / "scenarios" / "canonical_latency.json") as fh:
        return json.load(fh)


@pytest.fixture
def golden_intents():
    entries = []
    with open(FIXTURES / "golden_intents.jsonl") as fh:
        for line in fh:
            entries.append(json.loads(line))
    return entries
