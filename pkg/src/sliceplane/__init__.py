"""Control plane for network-slice orchestration, monitoring, and trading.

Natural-language slice requests are mapped to typed tool calls, validated
against a schema registry, matched against a priced offer catalog, policy
checked, planned into deployment blueprints whose manifests are produced by
a governed multi-backend consortium, deployed onto a deterministic
infrastructure simulator, and kept within their SLOs by a closed
monitor -> detect -> remediate loop.  Every action lands in a hash-chained
audit log.
"""

__version__ = "0.1.0"
