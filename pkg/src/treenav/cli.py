"""Operator entry points.

``ingest``, ``validate``, ``eval``, and ``synth`` run locally against files
and a store directory; ``chat`` is a thin HTTP client for a running service
and holds no navigation logic of its own; ``serve`` starts the service.

Exit codes: 0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import functools
import json
import os
import sys
import tempfile
from pathlib import Path

import click
import httpx

from .edge_store import TreeStore
from .errors import TreenavError
from .eval_harness import (
    Strategy,
    build_summary,
    dump_dataset,
    emit_report,
    load_dataset,
    load_rates,
    run_replay,
    summarize_records,
    to_json,
    to_markdown,
)
from .ingestion import SourceDocument, SourceFormat, ingest as ingest_source
from .llm_gateway import BackendConfig, BackendKind
from .synthetic import generate_dataset, generate_tree, scripted_ground_truth
from .tree_core import tree_from_json, tree_to_json
from .validation import validate as validate_tree


def _domain_errors(fn):
    """Map domain failures to exit code 1 with the message on stderr."""

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except TreenavError as exc:
            raise click.ClickException(f"{exc.code}: {exc}") from exc

    return wrapper


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="JSON file with default option values (store, server, endpoint, model).")
@click.pass_context
def main(ctx: click.Context, config_path: str | None):
    ctx.ensure_object(dict)
    if config_path:
        ctx.obj.update(json.loads(Path(config_path).read_text(encoding="utf-8")))


def _cfg(ctx: click.Context, key: str, fallback):
    return ctx.obj.get(key, fallback) if ctx.obj else fallback


@main.command("ingest")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), required=True)
@click.option("--tree-id", default=None)
@click.option("--entry", default=None)
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None)
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@click.pass_context
@_domain_errors
def ingest_cmd(ctx, fmt, tree_id, entry, store_dir, path):
    """Normalize, validate, and store a tree source file."""
    store_dir = store_dir or _cfg(ctx, "store", "./store")
    store = TreeStore(store_dir)
    source = SourceDocument(
        format=SourceFormat(fmt),
        payload=Path(path).read_bytes(),
        source_name=Path(path).stem,
    )
    report = ingest_source(source, store, tree_id=tree_id, entry=entry)
    click.echo(json.dumps(report.to_doc(), indent=2, sort_keys=True))
    if not report.validation.is_valid:
        sys.exit(1)


@main.command("validate")
@click.option("--format", "fmt", type=click.Choice(["json", "csv"]), default="json")
@click.option("--entry", default=None)
@click.argument("path", type=click.Path(exists=True, dir_okay=False))
@_domain_errors
def validate_cmd(fmt, entry, path):
    """Run the structural checks; exit 0 only when the tree is clean."""
    from .ingestion import normalize

    source = SourceDocument(
        format=SourceFormat(fmt),
        payload=Path(path).read_bytes(),
        source_name=Path(path).stem,
    )
    report = validate_tree(normalize(source, entry=entry))
    click.echo(json.dumps(report.to_doc(), indent=2, sort_keys=True))
    if not report.is_valid:
        sys.exit(1)


@main.command("chat")
@click.option("--server", default=None, help="Service base URL.")
@click.option("--tree-id", default=None, help="Create a fresh session on this tree.")
@click.option("--session-id", default=None, help="Resume an existing session.")
@click.option("--strategy", type=click.Choice(["arbor", "baseline"]), default="arbor")
@click.option("--context", "context_pairs", multiple=True, help="key=value external context.")
@click.option("--show-trace", is_flag=True, default=False)
@click.option("--token", default="", help="Bearer token when the service requires one.")
@click.pass_context
@_domain_errors
def chat_cmd(ctx, server, tree_id, session_id, strategy, context_pairs, show_trace, token):
    """Interactive terminal chat: one line in, one agent reply out."""
    server = server or _cfg(ctx, "server", "http://127.0.0.1:8420")
    if not tree_id and not session_id:
        raise click.UsageError("one of --tree-id or --session-id is required")
    headers = {"Authorization": f"Bearer {token}"} if token else {}
    with httpx.Client(base_url=server, headers=headers, timeout=120.0) as client:
        if session_id is None:
            context = dict(p.split("=", 1) for p in context_pairs)
            response = client.post(
                "/sessions", json={"tree_id": tree_id, "external_context": context}
            )
            _raise_for_api_error(response)
            session_id = response.json()["session_id"]
        click.echo(f"session: {session_id}", err=True)
        for line in sys.stdin:
            text = line.strip()
            if not text:
                continue
            response = client.post(
                f"/sessions/{session_id}/messages",
                json={"text": text, "strategy": strategy},
            )
            _raise_for_api_error(response)
            doc = response.json()
            if show_trace:
                for hop in doc.get("hops", []):
                    click.echo(
                        f"[hop] {hop['from_node']} -> {hop['to_node']} via {hop['chosen']}",
                        err=True,
                    )
                click.echo(f"[node] {doc['final_node']}", err=True)
            click.echo(doc["message"])


def _raise_for_api_error(response: httpx.Response) -> None:
    if response.status_code < 400:
        return
    try:
        detail = response.json()
    except ValueError:
        detail = {"code": "http_error", "message": response.text}
    code = detail.get("code", "http_error")
    message = detail.get("message", str(detail))
    raise click.ClickException(f"{code} (HTTP {response.status_code}): {message}")


@main.command("eval")
@click.option("--strategy", type=click.Choice(["arbor", "baseline"]), required=True)
@click.option("--dataset", "dataset_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False), required=True,
              help="Canonical tree JSON the dataset refers to.")
@click.option("--runs", type=int, default=5, show_default=True)
@click.option("--rates", "rates_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--model", "model_id", default="default-model", show_default=True)
@click.option("--backend", "backend_kind", type=click.Choice(["scripted", "http"]),
              default="scripted", show_default=True,
              help="scripted replays ground-truth decisions with no network I/O.")
@click.option("--endpoint", default=None, help="Chat-completions URL for --backend http.")
@click.option("--token-env", default="", help="Env var holding the bearer token for http.")
@click.option("--out", "out_path", type=click.Path(dir_okay=False), default=None)
@click.option("--format", "fmt", type=click.Choice(["json", "csv", "markdown"]), default="json",
              show_default=True)
@click.option("--records-out", type=click.Path(dir_okay=False), default=None,
              help="Also dump every raw record as JSON lines.")
@_domain_errors
def eval_cmd(strategy, dataset_path, tree_path, runs, rates_path, model_id,
             backend_kind, endpoint, token_env, out_path, fmt, records_out):
    """Replay an annotated dataset and report accuracy/latency/cost."""
    tree = tree_from_json(Path(tree_path).read_text(encoding="utf-8"))
    dataset = load_dataset(dataset_path, tree)
    rates = load_rates(rates_path)
    if backend_kind == "scripted":
        backend = scripted_ground_truth(tree, strategy)
    else:
        if not endpoint:
            raise click.UsageError("--endpoint is required with --backend http")
        backend = BackendConfig(
            kind=BackendKind.HTTP,
            endpoint=endpoint,
            auth_token=os.environ.get(token_env, "") if token_env else "",
        )
    with tempfile.TemporaryDirectory(prefix="treenav-eval-") as workdir:
        store = TreeStore(workdir)
        version = store.put_tree(tree)
        records = run_replay(
            Strategy(strategy), dataset, model_id, runs,
            store=store, tree_id=tree.tree_id, tree_version=version,
            rates=rates, backend=backend,
        )
    if records_out:
        lines = [json.dumps(r.to_doc(), sort_keys=True) for r in records]
        Path(records_out).write_text("\n".join(lines) + "\n", encoding="utf-8")
    summary = build_summary([summarize_records(records)])
    if out_path:
        emit_report(summary, fmt, out_path)
        click.echo(f"wrote {out_path} ({len(records)} records)", err=True)
    else:
        renderer = {"json": to_json, "markdown": to_markdown}.get(fmt)
        if renderer is None:
            from .eval_harness import to_csv as renderer  # noqa: F811
        click.echo(renderer(summary), nl=False)


@main.command("serve")
@click.option("--store", "store_dir", type=click.Path(file_okay=False), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8420, show_default=True)
@click.option("--endpoint", default=None, help="Chat-completions URL for the live backend.")
@click.option("--model", "model_id", default="default-model", show_default=True)
@click.option("--token-env", default="", help="Env var holding the backend bearer token.")
@click.option("--auth-token", default="", help="Static bearer token required from clients.")
@click.pass_context
@_domain_errors
def serve_cmd(ctx, store_dir, host, port, endpoint, model_id, token_env, auth_token):
    """Run the HTTP service (requires a live chat-completions endpoint)."""
    import uvicorn

    from .service import ServiceConfig, create_app

    store_dir = store_dir or _cfg(ctx, "store", "./store")
    endpoint = endpoint or _cfg(ctx, "endpoint", None)
    if not endpoint:
        raise click.UsageError("--endpoint (or config endpoint) is required")
    backend = BackendConfig(
        kind=BackendKind.HTTP,
        endpoint=endpoint,
        auth_token=os.environ.get(token_env, "") if token_env else "",
    )
    app = create_app(
        ServiceConfig(
            store_root=store_dir,
            backend=backend,
            eval_model=model_id,
            generation_model=model_id,
            baseline_model=model_id,
            auth_token=auth_token,
        )
    )
    uvicorn.run(app, host=host, port=port, log_level="warning")


@main.group("synth")
def synth_group():
    """Generate synthetic trees and annotated datasets."""


@synth_group.command("tree")
@click.option("--nodes", type=int, default=449, show_default=True)
@click.option("--edges", type=int, default=980, show_default=True)
@click.option("--seed", type=int, default=7, show_default=True)
@click.option("--tree-id", default="synthetic", show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_domain_errors
def synth_tree_cmd(nodes, edges, seed, tree_id, out_path):
    tree = generate_tree(nodes, edges, seed=seed, tree_id=tree_id)
    Path(out_path).write_text(tree_to_json(tree), encoding="utf-8")
    click.echo(f"wrote {out_path}: {len(tree.nodes)} nodes, {len(tree.edges)} edges", err=True)


@synth_group.command("dataset")
@click.option("--tree", "tree_path", type=click.Path(exists=True, dir_okay=False), required=True)
@click.option("--turns", type=int, default=174, show_default=True)
@click.option("--seed", type=int, default=11, show_default=True)
@click.option("--out", "out_path", type=click.Path(dir_okay=False), required=True)
@_domain_errors
def synth_dataset_cmd(tree_path, turns, seed, out_path):
    tree = tree_from_json(Path(tree_path).read_text(encoding="utf-8"))
    dataset = generate_dataset(tree, turns, seed=seed)
    dump_dataset(dataset, out_path)
    click.echo(f"wrote {out_path}: {len(dataset)} turns", err=True)


if __name__ == "__main__":
    main()
