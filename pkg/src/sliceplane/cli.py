"""Command-line client for the slice control-plane service.

Every subcommand except ``scenario-run`` is a thin HTTP client; exit
code 0 means success, 1 a domain or connection error, 2 a usage error.
``--json`` switches from human tables to machine-readable JSON.
"""

from __future__ import annotations

import json
import sys
from typing import Optional

import click
import httpx

DEFAULT_ADDR = "http://127.0.0.1:8470"
ADDR_ENVVAR = "SLICEPLANE_ADDR"


class _Fail(click.ClickException):
    """Domain-level failure: diagnostic on stderr, exit code 1."""

    exit_code = 1

    def show(self, file=None):
        click.echo(f"error: {self.message}", err=True)


def _client(addr: str) -> httpx.Client:
    return httpx.Client(base_url=addr, timeout=30.0)


def _request(ctx, method: str, path: str, **kwargs) -> dict:
    addr = ctx.obj["addr"]
    try:
        with _client(addr) as client:
            resp = client.request(method, path, **kwargs)
    except httpx.HTTPError as exc:
        raise _Fail(f"cannot reach service at {addr}: {exc}")
    if resp.status_code >= 400:
        try:
            body = resp.json()
        except ValueError:
            body = {"error": "http_error", "message": resp.text}
        detail = body.get("message") or body.get("detail") or resp.text
        code = body.get("error", resp.status_code)
        if ctx.obj["json"]:
            click.echo(json.dumps(body, sort_keys=True))
        raise _Fail(f"{code}: {detail}")
    return resp.json()


def _emit(ctx, doc: dict, human) -> None:
    if ctx.obj["json"]:
        click.echo(json.dumps(doc, indent=2, sort_keys=True))
    else:
        human(doc)


def _table(rows: list[list], headers: list[str]) -> str:
    widths = [len(h) for h in headers]
    for row in rows:
        for i, cell in enumerate(row):
            widths[i] = max(widths[i], len(str(cell)))
    fmt = "  ".join(f"{{:<{w}}}" for w in widths)
    lines = [fmt.format(*headers), fmt.format(*("-" * w for w in widths))]
    lines += [fmt.format(*(str(c) for c in row)) for row in rows]
    return "\n".join(lines)


@click.group()
@click.option(
    "--addr",
    envvar=ADDR_ENVVAR,
    default=DEFAULT_ADDR,
    show_default=True,
    help=f"service base URL (env: {ADDR_ENVVAR})",
)
@click.option("--json", "as_json", is_flag=True, help="machine-readable output")
@click.pass_context
def main(ctx, addr: str, as_json: bool):
    """Operate a running slice control plane from the terminal."""
    ctx.ensure_object(dict)
    ctx.obj["addr"] = addr
    ctx.obj["json"] = as_json


@main.command()
@click.option("--text", required=True, help="natural-language request")
@click.option("--tenant", default="default", show_default=True)
@click.pass_context
def intent(ctx, text: str, tenant: str):
    """Submit a natural-language intent."""
    doc = _request(
        ctx, "POST", "/intents", json={"text": text}, headers={"X-Tenant-Id": tenant}
    )

    def human(doc):
        call = doc.get("tool_call", {})
        click.echo(f"tool call: {call.get('tool')} {json.dumps(call.get('params', {}), sort_keys=True)}")
        result = doc.get("result") or {}
        matches = result.get("matches")
        if matches is not None:
            rows = [
                [m["offer"]["offer_id"], m["offer"]["provider_id"], m["total_cost_minor_units"]]
                for m in matches
            ]
            click.echo(_table(rows, ["offer", "provider", "cost"]))
        verdict = result.get("policy_verdict")
        if verdict:
            click.echo(f"policy: {verdict['verdict']} {', '.join(verdict.get('reasons', []))}".rstrip())
        order = result.get("order")
        if order:
            click.echo(f"order: {order['order_id']} status={order['status']}")
        sl = result.get("slice")
        if sl:
            click.echo(f"slice: {sl['slice_id']} state={sl['state']}")
        if isinstance(result, dict) and "offers" in result:
            rows = [
                [o["offer_id"], o["region"], o["service_class"], o["rate_minor_units_per_hour"]]
                for o in result["offers"]
            ]
            click.echo(_table(rows, ["offer", "region", "class", "rate/h"]))

    _emit(ctx, doc, human)


@main.command()
@click.option("--region", default=None, help="filter by region")
@click.option("--service-class", "service_class", default=None, help="filter by class")
@click.pass_context
def offers(ctx, region: Optional[str], service_class: Optional[str]):
    """List marketplace offers."""
    doc = _request(ctx, "GET", "/offers")
    entries = doc["offers"]
    if region:
        entries = [o for o in entries if o["region"] == region]
    if service_class:
        entries = [o for o in entries if o["service_class"] == service_class]
    doc = {"offers": entries}

    def human(doc):
        rows = [
            [
                o["offer_id"], o["provider_id"], o["region"], o["service_class"],
                o["rate_minor_units_per_hour"], o["capacity_slots"],
            ]
            for o in doc["offers"]
        ]
        click.echo(_table(rows, ["offer", "provider", "region", "class", "rate/h", "slots"]))

    _emit(ctx, doc, human)


@main.command()
@click.option("--id", "order_id", default=None, help="show one order")
@click.pass_context
def orders(ctx, order_id: Optional[str]):
    """List orders, or show one."""
    if order_id:
        doc = _request(ctx, "GET", f"/orders/{order_id}")

        def human(doc):
            o = doc["order"]
            click.echo(json.dumps(o, indent=2, sort_keys=True))

        _emit(ctx, doc, human)
        return
    doc = _request(ctx, "GET", "/orders")

    def human(doc):
        rows = [
            [o["order_id"], o["offer_id"], o["status"], o["total_cost_minor_units"]]
            for o in doc["orders"]
        ]
        click.echo(_table(rows, ["order", "offer", "status", "cost"]))

    _emit(ctx, doc, human)


@main.command()
@click.option("--id", "slice_id", default=None, help="show one slice")
@click.option("--compliance", is_flag=True, help="per-window compliance for --id")
@click.pass_context
def slices(ctx, slice_id: Optional[str], compliance: bool):
    """List slices, or show one (optionally with compliance windows)."""
    if compliance and not slice_id:
        raise click.UsageError("--compliance requires --id")
    if slice_id:
        if compliance:
            doc = _request(ctx, "GET", f"/slices/{slice_id}/compliance")

            def human(doc):
                rows = []
                for r in doc["reports"]:
                    for metric, m in r["metrics"].items():
                        rows.append(
                            [
                                r["window_index"], f"{r['first_tick']}-{r['last_tick']}",
                                metric, round(m["observed"], 3), m["slo"],
                                "ok" if m["compliant"] else "VIOLATED",
                            ]
                        )
                click.echo(_table(rows, ["window", "ticks", "metric", "observed", "slo", "status"]))

            _emit(ctx, doc, human)
            return
        doc = _request(ctx, "GET", f"/slices/{slice_id}")

        def human(doc):
            click.echo(json.dumps(doc["slice"], indent=2, sort_keys=True))

        _emit(ctx, doc, human)
        return
    doc = _request(ctx, "GET", "/slices")

    def human(doc):
        rows = []
        for s in doc["slices"]:
            units = ", ".join(
                f"{u}:{d['replicas']}" for u, d in sorted(s["deployed_units"].items())
            )
            rows.append([s["slice_id"], s["state"], units])
        click.echo(_table(rows, ["slice", "state", "units"]))

    _emit(ctx, doc, human)


@main.command()
@click.option("--id", "slice_id", required=True, help="slice to tear down")
@click.pass_context
def terminate(ctx, slice_id: str):
    """Terminate a slice."""
    doc = _request(ctx, "POST", f"/slices/{slice_id}/terminate")

    def human(doc):
        sl = doc.get("slice", doc)
        click.echo(f"slice {sl.get('slice_id', slice_id)} -> {sl.get('state', 'Terminated')}")

    _emit(ctx, doc, human)


@main.command("audit-verify")
@click.pass_context
def audit_verify(ctx):
    """Verify the audit hash chain; exit 1 if broken."""
    doc = _request(ctx, "GET", "/audit/verify")

    def human(doc):
        if doc["ok"]:
            click.echo(f"audit chain ok ({doc['next_seq']} records)")
        else:
            click.echo(f"audit chain BROKEN at seq {doc['first_bad_seq']}")

    _emit(ctx, doc, human)
    if not doc["ok"]:
        sys.exit(1)


@main.command("scenario-run")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--scenario", "scenario_path", default=None, type=click.Path(exists=True))
@click.option("--ticks", default=120, show_default=True)
@click.option("--text", default=None, help="override the provisioning request")
@click.option(
    "--events-out", "events_out", default=None, type=click.Path(),
    help="also write the public event stream as NDJSON",
)
@click.pass_context
def scenario_run(ctx, config_path, scenario_path, ticks, text, events_out):
    """Run a closed-loop scenario with an embedded simulator (no service)."""
    from .config import ConfigError, load_config
    from .runner import DEFAULT_INTENT_TEXT, export_event_lines, run_closed_loop

    try:
        config = load_config(config_path)
    except ConfigError as exc:
        raise _Fail(str(exc))
    scenario_doc = None
    if scenario_path is None and config.scenario_path:
        scenario_path = config.scenario_path
    if scenario_path:
        with open(scenario_path, "r", encoding="utf-8") as fh:
            scenario_doc = json.load(fh)
    try:
        summary = run_closed_loop(
            config,
            scenario_doc=scenario_doc,
            text=text or DEFAULT_INTENT_TEXT,
            ticks=ticks,
        )
    except Exception as exc:  # domain failures all derive from SlicePlaneError
        raise _Fail(str(exc))
    if events_out:
        lines = export_event_lines(config.audit_log_path)
        with open(events_out, "w", encoding="utf-8") as fh:
            fh.writelines(lines)

    def human(summary):
        click.echo(f"slice: {summary['slice_id']}  final state: {summary['final_state']}")
        for v in summary["violations"]:
            vv = v["violation"]
            click.echo(
                f"violation @tick {v['tick']}: {vv['metric']} observed "
                f"{round(vv['observed_value'], 3)} vs slo {vv['slo_value']} "
                f"(windows {vv['window_range'][0]}-{vv['window_range'][1]})"
            )
        for a in summary["actions"]:
            aa = a["action"]
            state = "executed" if a["executed"] else "suppressed"
            click.echo(f"action @tick {a['tick']}: {aa['kind']} {aa['target_unit']} [{state}]")
        audit = summary.get("audit", {})
        click.echo(f"audit: {'ok' if audit.get('ok') else 'BROKEN'} ({audit.get('next_seq')} records)")

    _emit(ctx, summary, human)
    if summary.get("slice_id") is None:
        raise _Fail("no slice was provisioned (no match or policy denial)")


if __name__ == "__main__":
    main()
