"""Scoring and reporting for generated queries.

Three layers:

* pure metric functions (`jaccard`, `attribute_confusion`,
  `sample_scores`) with no I/O, shared by everything,
* `evaluate_sample`, which turns one generation trace into an
  EvalOutcome by executing generated and reference queries,
* `aggregate` / `render_report`, which fold outcomes into per
  (strategy, model, dialect) rows and render them.

Conventions, applied uniformly: a ratio with denominator zero is 1.0
when both sides being compared are empty (nothing was asked for and
nothing was produced) and 0.0 otherwise; an invalid generated query
contributes 0 to result overlap; infrastructure failures mark a sample
Unscored and drop it from every denominator rather than skewing rates.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from decimal import ROUND_HALF_UP, Decimal
from typing import Iterable, Mapping, Sequence

from nl2api.corpus import CorpusEntry
from nl2api.errors import Nl2ApiError
from nl2api.executor import ApiExecutor, ExecutionResult, ExecutorError
from nl2api.query_model import Dialect, Filter, QueryModelError, parse

STRATEGY_LABELS = {
    "prompt_engineering": "Prompt-Engineering",
    "rag": "RAG",
    "agentic": "Agentic",
}


class EvaluatorError(Nl2ApiError):
    pass


def jaccard(a: Iterable, b: Iterable) -> float:
    """|A n B| / |A u B|, with two empty sets counting as identical (1.0)."""
    sa, sb = set(a), set(b)
    union = sa | sb
    if not union:
        return 1.0
    return len(sa & sb) / len(union)


@dataclass(frozen=True)
class AttributeConfusion:
    """Attribute-level confusion counts between reference and generated filters.

    tp_values counts the true-positive attributes whose value sets also
    match, so tp_values <= tp always holds.
    """

    tp: int = 0
    fp: int = 0
    fn: int = 0
    tp_values: int = 0

    def __post_init__(self) -> None:
        if min(self.tp, self.fp, self.fn, self.tp_values) < 0:
            raise ValueError("confusion counts must be non-negative")
        if self.tp_values > self.tp:
            raise ValueError("tp_values cannot exceed tp")

    def __add__(self, other: "AttributeConfusion") -> "AttributeConfusion":
        return AttributeConfusion(
            self.tp + other.tp,
            self.fp + other.fp,
            self.fn + other.fn,
            self.tp_values + other.tp_values,
        )


def attribute_confusion(
    reference: frozenset[Filter], generated: frozenset[Filter]
) -> AttributeConfusion:
    """Count attribute hits and misses between two filter sets.

    Attribute names match exactly (dotted paths included). A matched
    attribute counts toward tp_values when its value sets agree under
    the normalized comparison key.
    """
    ref_by = {f.attribute: f for f in reference}
    gen_by = {f.attribute: f for f in generated}
    matched = ref_by.keys() & gen_by.keys()
    tp_values = sum(
        1
        for attr in matched
        if {v.comparison_key for v in ref_by[attr].values}
        == {v.comparison_key for v in gen_by[attr].values}
    )
    return AttributeConfusion(
        tp=len(matched),
        fp=len(gen_by.keys() - ref_by.keys()),
        fn=len(ref_by.keys() - gen_by.keys()),
        tp_values=tp_values,
    )


@dataclass(frozen=True)
class SampleScores:
    precision: float
    recall: float
    accuracy: float
    f1: float
    value_score: float


def _ratio(numerator: int, denominator: int, both_empty: bool) -> float:
    if denominator == 0:
        return 1.0 if both_empty else 0.0
    return numerator / denominator


def sample_scores(confusion: AttributeConfusion) -> SampleScores:
    """Precision/recall/accuracy/F1/value-score from confusion counts.

    All five are 1.0 for the all-zero confusion (reference and generated
    both filterless: the model correctly produced nothing).
    """
    c = confusion
    both_empty = (c.tp + c.fp + c.fn) == 0
    precision = _ratio(c.tp, c.tp + c.fp, both_empty)
    recall = _ratio(c.tp, c.tp + c.fn, both_empty)
    accuracy = _ratio(c.tp, c.tp + c.fp + c.fn, both_empty)
    if precision + recall == 0.0:
        f1 = 1.0 if both_empty else 0.0
    else:
        f1 = 2 * precision * recall / (precision + recall)
    value_score = _ratio(c.tp_values, c.tp + c.fn, both_empty)
    return SampleScores(precision, recall, accuracy, f1, value_score)


@dataclass(frozen=True)
class EvalOutcome:
    """Everything the aggregator needs to know about one sample."""

    entry_id: str
    strategy: str
    model: str
    dialect: Dialect
    syntax_valid: bool
    result_jaccard: float | None = None
    confusion: AttributeConfusion | None = None
    parser_gap: bool = False
    unscored: str | None = None
    trace_digest: str = ""
    notes: tuple[str, ...] = ()

    def to_record(self) -> dict:
        record = {
            "entry_id": self.entry_id,
            "strategy": self.strategy,
            "model": self.model,
            "dialect": self.dialect.value,
            "syntax_valid": self.syntax_valid,
            "result_jaccard": self.result_jaccard,
            "confusion": None
            if self.confusion is None
            else {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "fn": self.confusion.fn,
                "tp_values": self.confusion.tp_values,
            },
            "parser_gap": self.parser_gap,
            "unscored": self.unscored,
            "trace_digest": self.trace_digest,
            "notes": list(self.notes),
        }
        return record

    @classmethod
    def from_record(cls, record: Mapping) -> "EvalOutcome":
        confusion = record.get("confusion")
        return cls(
            entry_id=record["entry_id"],
            strategy=record["strategy"],
            model=record["model"],
            dialect=Dialect(record["dialect"]),
            syntax_valid=record["syntax_valid"],
            result_jaccard=record.get("result_jaccard"),
            confusion=None if confusion is None else AttributeConfusion(**confusion),
            parser_gap=record.get("parser_gap", False),
            unscored=record.get("unscored"),
            trace_digest=record.get("trace_digest", ""),
            notes=tuple(record.get("notes", ())),
        )


def evaluate_sample(
    entry: CorpusEntry,
    strategy: str,
    model: str,
    dialect: Dialect,
    extracted_query: str | None,
    executor: ApiExecutor,
    trace_digest: str = "",
    notes: tuple[str, ...] = (),
) -> EvalOutcome:
    """Score one generated query against the entry's reference query.

    No extracted query means syntax-invalid: nothing executes. The
    reference executes only after the generated query proved valid, so
    replay cassettes stay minimal. Transport failures and cassette
    misses surface as unscored outcomes, not exceptions.
    """
    reference_text = entry.query_for(dialect)
    if reference_text is None:
        raise EvaluatorError(f"entry {entry.id!r} has no {dialect.value} reference query")
    base = EvalOutcome(
        entry_id=entry.id,
        strategy=strategy,
        model=model,
        dialect=dialect,
        syntax_valid=False,
        trace_digest=trace_digest,
        notes=notes,
    )
    if not extracted_query or not extracted_query.strip():
        return base

    try:
        generated_result = executor.execute(extracted_query, dialect)
    except ExecutorError as err:
        return replace(base, unscored=f"generated query execution failed: {err}", notes=notes)
    if not generated_result.valid:
        return replace(
            base,
            notes=notes + ((generated_result.warning,) if generated_result.warning else ()),
        )

    confusion = None
    parser_gap = False
    extra_notes: tuple[str, ...] = ()
    try:
        generated_query = parse(extracted_query, dialect)
        reference_query = parse(reference_text, dialect)
        confusion = attribute_confusion(reference_query.filters, generated_query.filters)
    except QueryModelError as err:
        # The API accepted what the local grammar cannot read. The
        # sample still counts as valid; filter metrics skip it.
        parser_gap = True
        extra_notes = (f"parser gap: {err}",)

    try:
        reference_result = executor.execute(reference_text, dialect)
    except ExecutorError as err:
        return replace(base, unscored=f"reference query execution failed: {err}")

    overlap = _result_overlap(generated_result, reference_result)
    if overlap is None:
        return replace(base, unscored="reference query did not execute validly")
    if generated_result.warning:
        extra_notes = extra_notes + (generated_result.warning,)
    return replace(
        base,
        syntax_valid=True,
        result_jaccard=overlap,
        confusion=confusion,
        parser_gap=parser_gap,
        notes=notes + extra_notes,
    )


def _result_overlap(generated: ExecutionResult, reference: ExecutionResult) -> float | None:
    if not reference.valid:
        return None
    return jaccard(generated.result_ids, reference.result_ids)


@dataclass(frozen=True)
class ReportRow:
    """One (strategy, model, dialect) aggregate. Percentages are 0..100."""

    strategy: str
    model: str
    dialect: Dialect
    n_samples: int
    n_valid: int
    n_unscored: int
    valid_query: float
    valid_result: float
    precision: float | None
    recall: float | None
    accuracy: float | None
    f1: float | None
    value_score: float | None


def aggregate(
    outcomes: Sequence[EvalOutcome],
    averaging: str = "micro",
    valid_query_metric: str = "rate",
    result_over: str = "all",
) -> list[ReportRow]:
    """Fold outcomes into report rows.

    averaging: "micro" sums confusion counts before scoring (default),
    "macro" averages per-sample scores. valid_query_metric: "rate" is
    the share of syntax-valid samples, "jaccard" the mean per-sample
    attribute overlap. result_over: "all" averages result overlap over
    every scored sample with invalid ones as 0, "valid" over valid ones
    only. Unscored outcomes are excluded everywhere.
    """
    if averaging not in ("micro", "macro"):
        raise ValueError(f"unknown averaging {averaging!r}")
    if valid_query_metric not in ("rate", "jaccard"):
        raise ValueError(f"unknown valid_query_metric {valid_query_metric!r}")
    if result_over not in ("all", "valid"):
        raise ValueError(f"unknown result_over {result_over!r}")

    groups: dict[tuple[str, str, str], list[EvalOutcome]] = {}
    unscored_counts: dict[tuple[str, str, str], int] = {}
    for outcome in outcomes:
        key = (outcome.strategy, outcome.model, outcome.dialect.value)
        if outcome.unscored is not None:
            unscored_counts[key] = unscored_counts.get(key, 0) + 1
            groups.setdefault(key, [])
            continue
        groups.setdefault(key, []).append(outcome)

    rows = []
    for key in sorted(groups):
        strategy, model, dialect_name = key
        scored = groups[key]
        n_unscored = unscored_counts.get(key, 0)
        if not scored:
            continue
        n = len(scored)
        valid = [o for o in scored if o.syntax_valid]
        n_valid = len(valid)

        if valid_query_metric == "rate":
            valid_query = 100.0 * n_valid / n
        else:
            valid_query = 100.0 * _mean(
                [_attribute_overlap(o) for o in scored]
            )

        if result_over == "all":
            result_values = [
                (o.result_jaccard or 0.0) if o.syntax_valid else 0.0 for o in scored
            ]
        else:
            result_values = [o.result_jaccard or 0.0 for o in valid]
        valid_result = 100.0 * _mean(result_values) if result_values else 0.0

        confusions = [o.confusion for o in valid if o.confusion is not None]
        scores: SampleScores | None = None
        if confusions:
            if averaging == "micro":
                total = AttributeConfusion()
                for c in confusions:
                    total = total + c
                scores = sample_scores(total)
            else:
                per_sample = [sample_scores(c) for c in confusions]
                scores = SampleScores(
                    precision=_mean([s.precision for s in per_sample]),
                    recall=_mean([s.recall for s in per_sample]),
                    accuracy=_mean([s.accuracy for s in per_sample]),
                    f1=_mean([s.f1 for s in per_sample]),
                    value_score=_mean([s.value_score for s in per_sample]),
                )

        rows.append(
            ReportRow(
                strategy=strategy,
                model=model,
                dialect=Dialect(dialect_name),
                n_samples=n,
                n_valid=n_valid,
                n_unscored=n_unscored,
                valid_query=valid_query,
                valid_result=valid_result,
                precision=100.0 * scores.precision if scores else None,
                recall=100.0 * scores.recall if scores else None,
                accuracy=100.0 * scores.accuracy if scores else None,
                f1=100.0 * scores.f1 if scores else None,
                value_score=100.0 * scores.value_score if scores else None,
            )
        )
    return rows


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values) if values else 0.0


def _attribute_overlap(outcome: EvalOutcome) -> float:
    if not outcome.syntax_valid or outcome.confusion is None:
        return 0.0
    c = outcome.confusion
    denominator = c.tp + c.fp + c.fn
    if denominator == 0:
        return 1.0
    return c.tp / denominator


def format_percent(value: float | None, decimals: int = 0) -> str:
    """Half-up percentage formatting; None renders as "-"."""
    if value is None:
        return "-"
    quantum = Decimal("1") if decimals == 0 else Decimal("1." + "0" * decimals)
    return f"{Decimal(repr(value)).quantize(quantum, rounding=ROUND_HALF_UP)}%"


def render_report(rows: Sequence[ReportRow], format: str = "markdown", decimals: int = 0) -> str:
    if format == "markdown":
        return _render_markdown(rows, decimals)
    if format == "csv":
        return _render_csv(rows, decimals)
    raise ValueError(f"unknown report format {format!r}")


def _label(strategy: str) -> str:
    return STRATEGY_LABELS.get(strategy, strategy)


def _cell(rows_by_dialect: Mapping[str, ReportRow], dialect: str, getter) -> float | None:
    row = rows_by_dialect.get(dialect)
    if row is None:
        return None
    return getter(row)


def _render_markdown(rows: Sequence[ReportRow], decimals: int) -> str:
    pairs: dict[tuple[str, str], dict[str, ReportRow]] = {}
    for row in rows:
        pairs.setdefault((row.strategy, row.model), {})[row.dialect.value] = row

    def fmt(value: float | None) -> str:
        return format_percent(value, decimals)

    lines: list[str] = []
    lines.append("## Syntax validity")
    lines.append("")
    lines.append("| Approach | LLM | Valid Query for REST | Valid Query for GraphQL |")
    lines.append("| --- | --- | --- | --- |")
    for (strategy, model), by_dialect in sorted(pairs.items()):
        rest = _cell(by_dialect, "REST", lambda r: r.valid_query)
        gql = _cell(by_dialect, "GRAPHQL", lambda r: r.valid_query)
        lines.append(f"| {_label(strategy)} | {model} | {fmt(rest)} | {fmt(gql)} |")

    for dialect, title in (("REST", "REST"), ("GRAPHQL", "GraphQL")):
        lines.append("")
        lines.append(f"## Filter accuracy ({title})")
        lines.append("")
        lines.append("| Approach | LLM | Precision | Recall | Accuracy | F1-score | Value-score |")
        lines.append("| --- | --- | --- | --- | --- | --- | --- |")
        for (strategy, model), by_dialect in sorted(pairs.items()):
            row = by_dialect.get(dialect)
            if row is None:
                continue
            lines.append(
                f"| {_label(strategy)} | {model} | {fmt(row.precision)} | {fmt(row.recall)} "
                f"| {fmt(row.accuracy)} | {fmt(row.f1)} | {fmt(row.value_score)} |"
            )

    lines.append("")
    lines.append("## Result overlap")
    lines.append("")
    lines.append("| Approach | LLM | Valid Result for REST | Valid Result for GraphQL |")
    lines.append("| --- | --- | --- | --- |")
    for (strategy, model), by_dialect in sorted(pairs.items()):
        rest = _cell(by_dialect, "REST", lambda r: r.valid_result)
        gql = _cell(by_dialect, "GRAPHQL", lambda r: r.valid_result)
        lines.append(f"| {_label(strategy)} | {model} | {fmt(rest)} | {fmt(gql)} |")
    lines.append("")
    return "\n".join(lines)


def _render_csv(rows: Sequence[ReportRow], decimals: int) -> str:
    def num(value: float | None) -> str:
        if value is None:
            return ""
        return format_percent(value, decimals).rstrip("%")

    lines = [
        "strategy,model,dialect,n_samples,n_valid,n_unscored,"
        "valid_query,precision,recall,accuracy,f1,value_score,valid_result"
    ]
    for row in sorted(rows, key=lambda r: (r.strategy, r.model, r.dialect.value)):
        lines.append(
            ",".join(
                [
                    row.strategy,
                    row.model,
                    row.dialect.value,
                    str(row.n_samples),
                    str(row.n_valid),
                    str(row.n_unscored),
                    num(row.valid_query),
                    num(row.precision),
                    num(row.recall),
                    num(row.accuracy),
                    num(row.f1),
                    num(row.value_score),
                    num(row.valid_result),
                ]
            )
        )
    return "\n".join(lines) + "\n"
