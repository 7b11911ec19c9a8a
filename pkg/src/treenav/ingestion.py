"""Offline normalization of tree sources into the canonical edge list.

Runs only when a tree's schema changes. Two formats ship: canonical JSON
(the store's own serialization) and tabular CSV with columns in fixed
order: transition_key, node_from, node_to, question, answer,
extra_context, flags. Additional formats plug in through
:func:`register_normalizer`.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Callable

from .errors import MalformedSource, MissingField
from .tree_core import (
    DecisionTree,
    NodeKey,
    TransitionEdge,
    tree_from_json,
)
from .validation import ValidationReport, validate

CSV_COLUMNS = (
    "transition_key",
    "node_from",
    "node_to",
    "question",
    "answer",
    "extra_context",
    "flags",
)


class SourceFormat(str, Enum):
    CANONICAL_JSON = "json"
    TABULAR_CSV = "csv"


@dataclass(frozen=True)
class SourceDocument:
    """Raw bytes plus an explicitly declared format — never sniffed."""

    format: SourceFormat
    payload: bytes
    source_name: str = ""


@dataclass(frozen=True)
class IngestReport:
    tree_id: str
    version: int | None
    edge_count: int
    warnings: tuple[str, ...] = ()
    validation: ValidationReport = field(default_factory=ValidationReport)

    @property
    def stored(self) -> bool:
        return self.version is not None

    def to_doc(self) -> dict:
        return {
            "tree_id": self.tree_id,
            "version": self.version,
            "edge_count": self.edge_count,
            "warnings": list(self.warnings),
            "validation": self.validation.to_doc(),
        }


def _normalize_json(
    source: SourceDocument, tree_id: str | None, entry: NodeKey | None
) -> DecisionTree:
    tree = tree_from_json(source.payload)
    if tree_id is not None:
        tree = replace(tree, tree_id=tree_id)
    if entry is not None:
        tree = replace(tree, entry=entry)
    return tree


def _parse_flags(cell: str, row_no: int) -> dict[str, str]:
    if not cell.strip():
        return {}
    try:
        flags = json.loads(cell)
    except json.JSONDecodeError as exc:
        raise MalformedSource(f"row {row_no}: flags cell is not valid JSON") from exc
    if not isinstance(flags, dict):
        raise MalformedSource(f"row {row_no}: flags cell must be a JSON object")
    return {str(k): str(v) for k, v in flags.items()}


def _normalize_csv(
    source: SourceDocument, tree_id: str | None, entry: NodeKey | None
) -> DecisionTree:
    try:
        text = source.payload.decode("utf-8")
    except UnicodeDecodeError as exc:
        raise MalformedSource(f"{source.source_name or 'csv source'}: not UTF-8") from exc

    rows = list(csv.reader(io.StringIO(text)))
    # optional header row, recognized by its first cell
    if rows and rows[0] and rows[0][0].strip().lower() == CSV_COLUMNS[0]:
        rows = rows[1:]

    edges: list[TransitionEdge] = []
    for row_no, row in enumerate(rows, start=1):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) < 5:
            missing = CSV_COLUMNS[len(row)]
            raise MissingField(f"row {row_no}: missing column {missing!r}")
        padded = list(row) + [""] * (len(CSV_COLUMNS) - len(row))
        key, node_from, node_to, question, answer, extra, raw_flags = padded[:7]
        for name, value in (("transition_key", key), ("node_from", node_from), ("node_to", node_to)):
            if not value.strip():
                raise MissingField(f"row {row_no}: empty {name}")
        edges.append(
            TransitionEdge(
                transition_key=key,
                node_from=node_from,
                node_to=node_to,
                question=question,
                answer=answer,
                extra_context=extra,
                flags=_parse_flags(raw_flags, row_no),
            )
        )
    if not edges:
        raise MalformedSource(f"{source.source_name or 'csv source'}: no edge rows")
    return DecisionTree(
        tree_id=tree_id or source.source_name or "tree",
        version=0,
        entry=entry if entry is not None else edges[0].node_from,
        edges=tuple(edges),
    )


Normalizer = Callable[[SourceDocument, "str | None", "NodeKey | None"], DecisionTree]

_NORMALIZERS: dict[str, Normalizer] = {
    SourceFormat.CANONICAL_JSON.value: _normalize_json,
    SourceFormat.TABULAR_CSV.value: _normalize_csv,
}


def register_normalizer(fmt: str, fn: Normalizer) -> None:
    _NORMALIZERS[fmt] = fn


def normalize(
    source: SourceDocument,
    *,
    tree_id: str | None = None,
    entry: NodeKey | None = None,
) -> DecisionTree:
    """Map every source record onto exactly one edge.

    Entry node comes from the source itself (JSON header, or the first CSV
    record's origin) unless explicitly overridden.
    """
    fmt = source.format.value if isinstance(source.format, SourceFormat) else str(source.format)
    try:
        fn = _NORMALIZERS[fmt]
    except KeyError:
        raise MalformedSource(f"no normalizer registered for format {fmt!r}") from None
    return fn(source, tree_id, entry)


def tree_to_csv(tree: DecisionTree) -> str:
    """Edges only, Table-order columns, header row included.

    Node metadata does not survive this format; empty flags serialize as an
    empty cell rather than ``{}`` so hand-authored files stay natural.
    """
    out = io.StringIO()
    writer = csv.writer(out, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for e in tree.edges:
        flags_cell = json.dumps(dict(e.flags), sort_keys=True) if e.flags else ""
        writer.writerow(
            [e.transition_key, e.node_from, e.node_to, e.question, e.answer, e.extra_context, flags_cell]
        )
    return out.getvalue()


def collect_warnings(tree: DecisionTree) -> list[str]:
    """Non-blocking defects: flagged in the report, never rejected."""
    warnings: list[str] = []
    terminals = {n for n in tree.nodes if not tree.adjacency[n]}
    for edge in tree.edges:
        if not edge.question.strip():
            warnings.append(f"edge {edge.transition_key}: empty question text")
    for node in sorted(tree.node_meta):
        if node not in tree.nodes:
            warnings.append(f"node_meta for unknown node {node}")
    for node in sorted(terminals):
        meta = tree.meta_for(node)
        if meta.role not in ("terminal", "question", "guidance"):
            warnings.append(f"node {node}: unrecognized role {meta.role!r}")
    return warnings


def ingest(
    source: SourceDocument,
    store,
    *,
    tree_id: str | None = None,
    entry: NodeKey | None = None,
) -> IngestReport:
    """Normalize, validate, and store — atomically.

    The store is only touched when validation is clean, so observable state
    is always either the previous version or the fully validated new one.
    A failing report carries ``version=None``.
    """
    tree = normalize(source, tree_id=tree_id, entry=entry)
    report = validate(tree)
    warnings = collect_warnings(tree)
    if not report.is_valid:
        return IngestReport(
            tree_id=tree.tree_id,
            version=None,
            edge_count=len(tree.edges),
            warnings=tuple(warnings),
            validation=report,
        )
    version = store.put_tree(tree)
    return IngestReport(
        tree_id=tree.tree_id,
        version=version,
        edge_count=len(tree.edges),
        warnings=tuple(warnings),
        validation=report,
    )
