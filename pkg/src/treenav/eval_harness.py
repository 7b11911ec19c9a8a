"""Replay-based evaluation: accuracy, latency, cost, and quality statistics.

A dataset is a JSON-lines file of annotated turns; each turn is replayed
from a fresh session seeded at its starting node, R times per strategy.
Metrics are pure functions over the resulting records: per-run accuracy
with mean and sample SD across runs, latency mean/median, per-turn dollar
cost from a rate table, unweighted cross-model aggregates, quality-score
distributions, and a Wilcoxon signed-rank test with an exact small-sample
distribution.
"""

from __future__ import annotations

import csv
import io
import json
import math
import re
import statistics
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from importlib import resources
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .baseline import BaselineConfig, BaselineRunner
from .edge_store import TreeStore
from .errors import DatasetError, MetricsError, TreenavError
from .llm_gateway import BackendConfig, Usage
from .orchestrator import Orchestrator, OrchestratorConfig
from .sessions import HistoryEntry, SessionState
from .tree_core import DecisionTree


class Strategy(str, Enum):
    ARBOR = "arbor"
    BASELINE = "baseline"


# -- dataset -------------------------------------------------------------------


@dataclass(frozen=True)
class AnnotatedTurn:
    """One scored step: where the conversation stands, what the user says,
    and which node a correct strategy ends on."""

    turn_id: str
    conversation_prefix: tuple[HistoryEntry, ...]
    external_context: Mapping[str, str]
    current_node: str
    target_node: str
    user_message: str

    def to_doc(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "conversation_prefix": [h.to_doc() for h in self.conversation_prefix],
            "external_context": dict(self.external_context),
            "current_node": self.current_node,
            "target_node": self.target_node,
            "user_message": self.user_message,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "AnnotatedTurn":
        prefix = tuple(
            HistoryEntry(
                speaker=h["speaker"],
                text=h["text"],
                timestamp=float(h.get("timestamp", i)),
            )
            for i, h in enumerate(doc.get("conversation_prefix", []))
        )
        return cls(
            turn_id=str(doc["turn_id"]),
            conversation_prefix=prefix,
            external_context=dict(doc.get("external_context", {})),
            current_node=doc["current_node"],
            target_node=doc["target_node"],
            user_message=doc["user_message"],
        )


def load_dataset(path: str | Path, tree: DecisionTree | None = None) -> list[AnnotatedTurn]:
    """JSON lines, one annotated turn per line, file order preserved.

    With a tree supplied, node references are resolved against it and a bad
    reference fails fast with the offending turn_id.
    """
    turns: list[AnnotatedTurn] = []
    text = Path(path).read_text(encoding="utf-8")
    for line_no, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            doc = json.loads(line)
            turn = AnnotatedTurn.from_doc(doc)
        except (json.JSONDecodeError, KeyError) as exc:
            raise DatasetError(f"line {line_no}: {exc}") from exc
        turns.append(turn)
    if tree is not None:
        for turn in turns:
            for label, node in (("current_node", turn.current_node), ("target_node", turn.target_node)):
                if node not in tree.nodes:
                    raise DatasetError(
                        f"turn {turn.turn_id}: {label} {node!r} not in tree {tree.tree_id}",
                        turn_id=turn.turn_id,
                    )
    return turns


def dump_dataset(turns: Sequence[AnnotatedTurn], path: str | Path) -> None:
    lines = [json.dumps(t.to_doc(), sort_keys=True, ensure_ascii=False) for t in turns]
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- rates and cost ---------------------------------------------------------------


@dataclass(frozen=True)
class RateEntry:
    input_usd_per_token: float
    output_usd_per_token: float

    def __post_init__(self):
        if self.input_usd_per_token < 0 or self.output_usd_per_token < 0:
            raise ValueError("rates must be non-negative")


class RateTable:
    def __init__(self, entries: Mapping[str, RateEntry]):
        self._entries = dict(entries)

    def for_model(self, model_id: str) -> RateEntry:
        try:
            return self._entries[model_id]
        except KeyError:
            raise MetricsError(f"no rates configured for model {model_id!r}") from None

    def __contains__(self, model_id: str) -> bool:
        return model_id in self._entries


def parse_rates(doc: Mapping) -> RateTable:
    """Rate file format: {model_id: {input_per_1m: USD, output_per_1m: USD}}."""
    entries = {}
    for model_id, row in doc.items():
        entries[model_id] = RateEntry(
            input_usd_per_token=float(row["input_per_1m"]) / 1_000_000,
            output_usd_per_token=float(row["output_per_1m"]) / 1_000_000,
        )
    return RateTable(entries)


def load_rates(path: str | Path | None = None) -> RateTable:
    if path is None:
        text = resources.files("treenav").joinpath("data/default_rates.json").read_text("utf-8")
    else:
        text = Path(path).read_text(encoding="utf-8")
    return parse_rates(json.loads(text))


def cost_per_turn(usage: Usage, rate: RateEntry) -> float:
    return (
        usage.input_tokens * rate.input_usd_per_token
        + usage.output_tokens * rate.output_usd_per_token
    )


# -- replay ---------------------------------------------------------------------


@dataclass(frozen=True)
class EvalRecord:
    turn_id: str
    run_index: int  # 1..R
    strategy: str
    model_id: str
    reached_node: str
    correct: bool
    latency_ms: int
    input_tokens: int
    output_tokens: int
    cost_usd: float

    def to_doc(self) -> dict:
        return {
            "turn_id": self.turn_id,
            "run_index": self.run_index,
            "strategy": self.strategy,
            "model_id": self.model_id,
            "reached_node": self.reached_node,
            "correct": self.correct,
            "latency_ms": self.latency_ms,
            "input_tokens": self.input_tokens,
            "output_tokens": self.output_tokens,
            "cost_usd": self.cost_usd,
        }

    @classmethod
    def from_doc(cls, doc: Mapping) -> "EvalRecord":
        return cls(
            turn_id=str(doc["turn_id"]),
            run_index=int(doc["run_index"]),
            strategy=doc["strategy"],
            model_id=doc["model_id"],
            reached_node=doc["reached_node"],
            correct=bool(doc["correct"]),
            latency_ms=int(doc["latency_ms"]),
            input_tokens=int(doc["input_tokens"]),
            output_tokens=int(doc["output_tokens"]),
            cost_usd=float(doc["cost_usd"]),
        )


BackendFactory = Callable[[AnnotatedTurn, int], BackendConfig]

_SESSION_SAFE = re.compile(r"[^A-Za-z0-9_.-]+")


def _seed_session(
    store: TreeStore,
    turn: AnnotatedTurn,
    run_index: int,
    strategy: str,
    tree_id: str,
    tree_version: int,
) -> SessionState:
    safe_turn = _SESSION_SAFE.sub("-", turn.turn_id)
    state = SessionState(
        session_id=f"eval-{strategy}-r{run_index}-{safe_turn}",
        tree_id=tree_id,
        tree_version=tree_version,
        current_node=turn.current_node,
        history=turn.conversation_prefix,
        external_context=dict(turn.external_context),
    )
    store.persist_session(state)
    return state


def run_replay(
    strategy: Strategy | str,
    dataset: Sequence[AnnotatedTurn],
    model_id: str,
    repetitions: int,
    *,
    store: TreeStore,
    tree_id: str,
    rates: RateTable,
    backend: BackendConfig | BackendFactory,
    tree_version: int | None = None,
    hop_cap: int = 25,
) -> list[EvalRecord]:
    """|dataset| × R records; every turn starts from a fresh seeded session.

    ``backend`` may be a fixed config or a factory called per (turn, run) —
    scripted replays need a fresh reply queue for every record. Strategy
    errors become incorrect records; the sweep never aborts.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    strategy = Strategy(strategy)
    version = tree_version if tree_version is not None else store.load_version(tree_id).version
    records: list[EvalRecord] = []
    rate = rates.for_model(model_id)
    for run_index in range(1, repetitions + 1):
        for turn in dataset:
            state = _seed_session(store, turn, run_index, strategy.value, tree_id, version)
            config = backend(turn, run_index) if callable(backend) else backend
            try:
                if strategy is Strategy.ARBOR:
                    runner = Orchestrator(
                        store,
                        OrchestratorConfig(
                            backend=config,
                            eval_model=model_id,
                            generation_model=model_id,
                            hop_cap=hop_cap,
                        ),
                    )
                    result = runner.handle_turn(state.session_id, turn.user_message)
                    reached = result.final_node
                    usage = result.total_usage
                    latency_ms = result.total_latency_ms
                else:
                    runner = BaselineRunner(
                        store, BaselineConfig(backend=config, model=model_id)
                    )
                    result = runner.handle_turn(state.session_id, turn.user_message)
                    reached = result.claimed_node  # verbatim claim, valid or not
                    usage = result.total_usage
                    latency_ms = result.total_latency_ms
            except TreenavError:
                reached = ""
                usage = Usage(0, 0)
                latency_ms = 0
            records.append(
                EvalRecord(
                    turn_id=turn.turn_id,
                    run_index=run_index,
                    strategy=strategy.value,
                    model_id=model_id,
                    reached_node=reached,
                    correct=reached == turn.target_node,
                    latency_ms=latency_ms,
                    input_tokens=usage.input_tokens,
                    output_tokens=usage.output_tokens,
                    cost_usd=cost_per_turn(usage, rate),
                )
            )
    return records


# -- metrics ------------------------------------------------------------------------


def turn_accuracy(records: Sequence[EvalRecord]) -> tuple[float, float]:
    """Mean and sample SD of per-run accuracy, in percent.

    The SD is across the R runs, not across individual turns; a single run
    has SD 0.0 by convention.
    """
    if not records:
        raise MetricsError("no records")
    runs: dict[int, list[EvalRecord]] = {}
    for record in records:
        runs.setdefault(record.run_index, []).append(record)
    turn_sets = {frozenset(r.turn_id for r in batch) for batch in runs.values()}
    if len(turn_sets) != 1:
        raise MetricsError("runs cover different turn sets")
    expected = len(next(iter(turn_sets)))
    if any(len(batch) != expected for batch in runs.values()):
        raise MetricsError("duplicate turn_ids within a run")
    per_run = [
        100.0 * sum(r.correct for r in batch) / len(batch)
        for _, batch in sorted(runs.items())
    ]
    mean = statistics.mean(per_run)
    sd = statistics.stdev(per_run) if len(per_run) > 1 else 0.0
    return mean, sd


@dataclass(frozen=True)
class ModelRow:
    model_id: str
    strategy: str
    accuracy_mean: float  # percent
    accuracy_sd: float  # percent, across runs
    latency_mean_s: float
    latency_median_s: float
    cost_mean_usd: float

    def to_doc(self) -> dict:
        return {
            "model_id": self.model_id,
            "strategy": self.strategy,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_sd": self.accuracy_sd,
            "latency_mean_s": self.latency_mean_s,
            "latency_median_s": self.latency_median_s,
            "cost_mean_usd": self.cost_mean_usd,
        }


@dataclass(frozen=True)
class StrategySummary:
    """Aggregate row: unweighted across models; accuracy SD across models."""

    strategy: str
    accuracy_mean: float
    accuracy_sd: float
    latency_mean_s: float
    latency_median_s: float
    cost_mean_usd: float

    def to_doc(self) -> dict:
        return {
            "strategy": self.strategy,
            "accuracy_mean": self.accuracy_mean,
            "accuracy_sd": self.accuracy_sd,
            "latency_mean_s": self.latency_mean_s,
            "latency_median_s": self.latency_median_s,
            "cost_mean_usd": self.cost_mean_usd,
        }


def summarize_records(records: Sequence[EvalRecord]) -> ModelRow:
    """Collapse one (model, strategy) cell of records into a summary row."""
    if not records:
        raise MetricsError("no records")
    models = {r.model_id for r in records}
    strategies = {r.strategy for r in records}
    if len(models) != 1 or len(strategies) != 1:
        raise MetricsError("records must cover exactly one (model, strategy) cell")
    mean, sd = turn_accuracy(records)
    latencies_s = [r.latency_ms / 1000.0 for r in records]
    return ModelRow(
        model_id=models.pop(),
        strategy=strategies.pop(),
        accuracy_mean=mean,
        accuracy_sd=sd,
        latency_mean_s=statistics.mean(latencies_s),
        latency_median_s=statistics.median(latencies_s),
        cost_mean_usd=statistics.mean(r.cost_usd for r in records),
    )


def aggregate_summary(rows: Sequence[ModelRow]) -> list[StrategySummary]:
    """One aggregate row per strategy: unweighted means across model rows,
    accuracy SD as the sample SD of the per-model means."""
    if not rows:
        raise MetricsError("no rows to aggregate")
    by_strategy: dict[str, list[ModelRow]] = {}
    for row in rows:
        by_strategy.setdefault(row.strategy, []).append(row)
    summaries = []
    for strategy in sorted(by_strategy):
        group = by_strategy[strategy]
        accuracies = [r.accuracy_mean for r in group]
        summaries.append(
            StrategySummary(
                strategy=strategy,
                accuracy_mean=statistics.mean(accuracies),
                accuracy_sd=statistics.stdev(accuracies) if len(accuracies) > 1 else 0.0,
                latency_mean_s=statistics.mean(r.latency_mean_s for r in group),
                latency_median_s=statistics.mean(r.latency_median_s for r in group),
                cost_mean_usd=statistics.mean(r.cost_mean_usd for r in group),
            )
        )
    return summaries


def strategy_deltas(arbor: StrategySummary, baseline: StrategySummary) -> dict:
    """Headline comparisons between the two strategies' aggregate rows."""
    if arbor.cost_mean_usd <= 0 or baseline.latency_mean_s <= 0:
        raise MetricsError("deltas undefined for zero cost or latency")
    return {
        "accuracy_delta_points": arbor.accuracy_mean - baseline.accuracy_mean,
        "latency_reduction_pct": 100.0 * (1.0 - arbor.latency_mean_s / baseline.latency_mean_s),
        "cost_ratio": baseline.cost_mean_usd / arbor.cost_mean_usd,
    }


# -- quality scores ------------------------------------------------------------------


@dataclass(frozen=True)
class QualityDistribution:
    """Counts of reviewer scores 1..4 for accepted messages."""

    counts: tuple[int, int, int, int]

    def __post_init__(self):
        if any(c < 0 for c in self.counts):
            raise ValueError("counts must be non-negative")

    @property
    def accepted_count(self) -> int:
        return sum(self.counts)


def quality_stats(dist: QualityDistribution) -> tuple[float, float]:
    """Frequency-weighted mean and population SD over the 1..4 scale."""
    n = dist.accepted_count
    if n == 0:
        raise MetricsError("empty quality distribution")
    mean = sum(score * count for score, count in zip((1, 2, 3, 4), dist.counts)) / n
    var = sum(count * (score - mean) ** 2 for score, count in zip((1, 2, 3, 4), dist.counts)) / n
    return mean, math.sqrt(var)


# -- Wilcoxon signed-rank ----------------------------------------------------------------


@dataclass(frozen=True)
class WilcoxonResult:
    w: float  # signed-rank sum: sum of sgn(diff) * rank
    p_value: float  # two-sided
    n_nonzero: int
    method: str  # exact | normal | degenerate

    @property
    def degenerate(self) -> bool:
        return self.method == "degenerate"


def _average_ranks(values: Sequence[float]) -> list[float]:
    order = sorted(range(len(values)), key=lambda i: values[i])
    ranks = [0.0] * len(values)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and values[order[j + 1]] == values[order[i]]:
            j += 1
        average = (i + j + 2) / 2.0  # positions i..j hold ranks i+1..j+1
        for k in range(i, j + 1):
            ranks[order[k]] = average
        i = j + 1
    return ranks


def _exact_two_sided_p(ranks: Sequence[float], w_observed: float) -> float:
    # double the ranks so tied (half-integer) averages become exact integers
    doubled = [int(round(2 * r)) for r in ranks]
    total = sum(doubled)
    sums = Counter({0: 1})  # distribution of 2*(sum of positively signed ranks)
    for r in doubled:
        step = Counter()
        for s, c in sums.items():
            step[s] += c
            step[s + r] += c
        sums = step
    threshold = int(round(2 * abs(w_observed)))
    favorable = sum(c for s, c in sums.items() if abs(2 * s - total) >= threshold)
    return favorable / (1 << len(ranks))


EXACT_LIMIT = 12


def wilcoxon_signed_rank(pairs: Sequence[tuple[float, float]]) -> WilcoxonResult:
    """Two-sided paired test on the signed-rank sum W = Σ sgn(d)·rank(|d|).

    Zero differences are dropped; tied magnitudes share average ranks. Small
    samples get the exact distribution over all sign assignments; larger
    ones a normal approximation with continuity correction, whose variance
    Σ rank² absorbs tie corrections automatically.
    """
    if not pairs:
        raise MetricsError("need at least one pair")
    diffs = [b - a for a, b in pairs if b != a]
    n = len(diffs)
    if n == 0:
        return WilcoxonResult(w=0.0, p_value=1.0, n_nonzero=0, method="degenerate")
    ranks = _average_ranks([abs(d) for d in diffs])
    w = sum(math.copysign(rank, diff) for rank, diff in zip(ranks, diffs))
    if n <= EXACT_LIMIT:
        return WilcoxonResult(
            w=w, p_value=_exact_two_sided_p(ranks, w), n_nonzero=n, method="exact"
        )
    sigma = math.sqrt(sum(r * r for r in ranks))
    z = (abs(w) - 0.5) / sigma
    p = math.erfc(z / math.sqrt(2)) if z > 0 else 1.0
    return WilcoxonResult(w=w, p_value=min(1.0, p), n_nonzero=n, method="normal")


# -- reports -------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsSummary:
    rows: tuple[ModelRow, ...]
    aggregates: tuple[StrategySummary, ...]
    deltas: Mapping[str, float] = field(default_factory=dict)

    def to_doc(self) -> dict:
        return {
            "rows": [r.to_doc() for r in self.rows],
            "aggregates": [a.to_doc() for a in self.aggregates],
            "deltas": dict(self.deltas),
        }


def build_summary(rows: Sequence[ModelRow]) -> MetricsSummary:
    aggregates = aggregate_summary(rows)
    by_strategy = {a.strategy: a for a in aggregates}
    deltas: dict[str, float] = {}
    if Strategy.ARBOR.value in by_strategy and Strategy.BASELINE.value in by_strategy:
        deltas = strategy_deltas(
            by_strategy[Strategy.ARBOR.value], by_strategy[Strategy.BASELINE.value]
        )
    return MetricsSummary(rows=tuple(rows), aggregates=tuple(aggregates), deltas=deltas)


_CSV_FIELDS = (
    "model_id",
    "strategy",
    "accuracy_mean",
    "accuracy_sd",
    "latency_mean_s",
    "latency_median_s",
    "cost_mean_usd",
)
_AGGREGATE_MODEL = "ALL"


def to_json(summary: MetricsSummary) -> str:
    return json.dumps(summary.to_doc(), indent=2, sort_keys=True, ensure_ascii=False) + "\n"


def to_csv(summary: MetricsSummary) -> str:
    out = io.StringIO()
    writer = csv.DictWriter(out, fieldnames=_CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in summary.rows:
        writer.writerow(row.to_doc())
    for agg in summary.aggregates:
        writer.writerow({"model_id": _AGGREGATE_MODEL, **agg.to_doc()})
    return out.getvalue()


def from_csv(text: str) -> MetricsSummary:
    rows: list[ModelRow] = []
    aggregates: list[StrategySummary] = []
    for doc in csv.DictReader(io.StringIO(text)):
        numbers = {
            k: float(doc[k])
            for k in _CSV_FIELDS
            if k not in ("model_id", "strategy")
        }
        if doc["model_id"] == _AGGREGATE_MODEL:
            aggregates.append(StrategySummary(strategy=doc["strategy"], **numbers))
        else:
            rows.append(ModelRow(model_id=doc["model_id"], strategy=doc["strategy"], **numbers))
    summary = MetricsSummary(rows=tuple(rows), aggregates=tuple(aggregates))
    if len({a.strategy for a in aggregates}) == 2:
        by_strategy = {a.strategy: a for a in aggregates}
        return MetricsSummary(
            rows=summary.rows,
            aggregates=summary.aggregates,
            deltas=strategy_deltas(
                by_strategy[Strategy.ARBOR.value], by_strategy[Strategy.BASELINE.value]
            ),
        )
    return summary


def to_markdown(summary: MetricsSummary) -> str:
    lines = [
        "| Model | Strategy | Accuracy % (±SD) | Latency mean s | Latency median s | Cost mean $ |",
        "|---|---|---|---|---|---|",
    ]
    for r in summary.rows:
        lines.append(
            f"| {r.model_id} | {r.strategy} | {r.accuracy_mean:.2f} (±{r.accuracy_sd:.2f}) "
            f"| {r.latency_mean_s:.2f} | {r.latency_median_s:.2f} | {r.cost_mean_usd:.4f} |"
        )
    for a in summary.aggregates:
        lines.append(
            f"| {_AGGREGATE_MODEL} | {a.strategy} | {a.accuracy_mean:.2f} (±{a.accuracy_sd:.2f}) "
            f"| {a.latency_mean_s:.2f} | {a.latency_median_s:.2f} | {a.cost_mean_usd:.4f} |"
        )
    if summary.deltas:
        d = summary.deltas
        lines.append("")
        lines.append(
            f"Deltas: accuracy +{d['accuracy_delta_points']:.2f} points, "
            f"latency −{d['latency_reduction_pct']:.1f}%, "
            f"cost ratio {d['cost_ratio']:.2f}x"
        )
    return "\n".join(lines) + "\n"


def emit_report(summary: MetricsSummary, fmt: str, path: str | Path) -> Path:
    renderers = {"json": to_json, "csv": to_csv, "markdown": to_markdown}
    try:
        renderer = renderers[fmt]
    except KeyError:
        raise ValueError(f"unknown report format {fmt!r}") from None
    out = Path(path)
    out.write_text(renderer(summary), encoding="utf-8")
    return out
