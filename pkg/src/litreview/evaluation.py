"""Labeling-quality metrics against human gold labels.

All operations are pure functions over immutable inputs. A 0/0 rate is
reported as None (undefined) together with the count of affected terms,
never silently coerced to zero; averaging silent zeros would bias the
model comparisons a human has to adjudicate.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime

from .classifier import AssignmentStatus, RunSet
from .taxonomy import AnswerMode, TaxonomyDimension


class EvaluationError(Exception):
    pass


LabelSets = dict[str, frozenset[str]]


@dataclass(frozen=True)
class GoldLabelSet:
    paper_id: str
    dimension_id: str
    labels: frozenset[str]
    annotator: str
    annotated_at: datetime | None = None

    def __post_init__(self):
        if not self.labels:
            raise EvaluationError("gold label set must be non-empty (use the sentinel)")

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "dimension_id": self.dimension_id,
            "labels": sorted(self.labels),
            "annotator": self.annotator,
            "annotated_at": self.annotated_at.isoformat() if self.annotated_at else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GoldLabelSet":
        ts = d.get("annotated_at")
        return cls(
            paper_id=d["paper_id"],
            dimension_id=d["dimension_id"],
            labels=frozenset(d["labels"]),
            annotator=d.get("annotator", ""),
            annotated_at=datetime.fromisoformat(ts) if ts else None,
        )


@dataclass
class GoldSet:
    """All gold annotations for one dimension; one record per paper (a new
    annotation for the same paper replaces the old one)."""

    dimension_id: str
    records: list[GoldLabelSet] = field(default_factory=list)

    def upsert(self, record: GoldLabelSet) -> bool:
        """Add or replace; returns True when a previous annotation existed."""
        if record.dimension_id != self.dimension_id:
            raise EvaluationError("record belongs to a different dimension")
        for i, existing in enumerate(self.records):
            if existing.paper_id == record.paper_id:
                self.records[i] = record
                return True
        self.records.append(record)
        return False

    def find(self, paper_id: str) -> GoldLabelSet | None:
        for r in self.records:
            if r.paper_id == paper_id:
                return r
        return None

    def label_map(self) -> LabelSets:
        return {r.paper_id: r.labels for r in self.records}

    def to_dict(self) -> dict:
        return {"dimension_id": self.dimension_id,
                "records": [r.to_dict() for r in
                            sorted(self.records, key=lambda r: r.paper_id)]}

    @classmethod
    def from_dict(cls, d: dict) -> "GoldSet":
        return cls(dimension_id=d["dimension_id"],
                   records=[GoldLabelSet.from_dict(x) for x in d.get("records", [])])

    def __eq__(self, other) -> bool:
        if not isinstance(other, GoldSet):
            return NotImplemented
        return self.to_dict() == other.to_dict()


def gold_map(gold) -> LabelSets:
    if isinstance(gold, dict):
        return gold
    if isinstance(gold, GoldSet):
        return gold.label_map()
    return {g.paper_id: g.labels for g in gold}


def _check_matched(pred: LabelSets, gold: LabelSets) -> None:
    missing = sorted(set(pred) - set(gold))
    if missing:
        raise EvaluationError(f"papers predicted but missing gold labels: {', '.join(missing)}")
    for pid, labels in pred.items():
        if not labels or not gold[pid]:
            raise EvaluationError(f"empty label set for {pid}")


# -- set metrics over consolidated predictions -------------------------------

def jaccard_mean(pred: LabelSets, gold: LabelSets) -> float:
    """Mean over papers of |intersection| / |union|."""
    gold = gold_map(gold)
    _check_matched(pred, gold)
    if not pred:
        raise EvaluationError("no papers to evaluate")
    # accumulate in canonical order so the result is exactly permutation-invariant
    total = sum(len(pred[pid] & gold[pid]) / len(pred[pid] | gold[pid])
                for pid in sorted(pred))
    return total / len(pred)


def lenient_accuracy(pred: LabelSets, gold: LabelSets) -> float:
    """Fraction of papers sharing at least one label with gold."""
    gold = gold_map(gold)
    _check_matched(pred, gold)
    if not pred:
        raise EvaluationError("no papers to evaluate")
    hits = sum(1 for pid, p in pred.items() if p & gold[pid])
    return hits / len(pred)


@dataclass(frozen=True)
class PRF:
    precision: float | None
    recall: float | None
    f1: float | None
    undefined_terms: int = 0

    def to_dict(self) -> dict:
        return {"precision": self.precision, "recall": self.recall,
                "f1": self.f1, "undefined_terms": self.undefined_terms}

    @classmethod
    def from_dict(cls, d: dict) -> "PRF":
        return cls(d.get("precision"), d.get("recall"), d.get("f1"),
                   d.get("undefined_terms", 0))


def micro_prf(pred: LabelSets, gold: LabelSets) -> PRF:
    """Precision/recall computed globally: TP, FP, FN pooled over all
    (paper, label) pairs; F1 = 2*TP / (2*TP + FP + FN)."""
    gold = gold_map(gold)
    _check_matched(pred, gold)
    if not pred:
        raise EvaluationError("no papers to evaluate")
    tp = fp = fn = 0
    for pid, p in pred.items():
        g = gold[pid]
        tp += len(p & g)
        fp += len(p - g)
        fn += len(g - p)
    undefined = 0
    precision = recall = f1 = None
    if tp + fp:
        precision = tp / (tp + fp)
    else:
        undefined += 1
    if tp + fn:
        recall = tp / (tp + fn)
    else:
        undefined += 1
    if 2 * tp + fp + fn:
        f1 = 2 * tp / (2 * tp + fp + fn)
    else:
        undefined += 1
    return PRF(precision, recall, f1, undefined)


def sample_prf(pred: LabelSets, gold: LabelSets) -> PRF:
    """Per-paper precision/recall/F1, then averaged over papers."""
    gold = gold_map(gold)
    _check_matched(pred, gold)
    if not pred:
        raise EvaluationError("no papers to evaluate")
    ps, rs, fs = [], [], []
    for pid in sorted(pred):
        p, g = pred[pid], gold[pid]
        inter = len(p & g)
        ps.append(inter / len(p))
        rs.append(inter / len(g))
        fs.append(2 * inter / (len(p) + len(g)))
    n = len(pred)
    return PRF(sum(ps) / n, sum(rs) / n, sum(fs) / n, 0)


# -- run-level metrics --------------------------------------------------------

@dataclass(frozen=True)
class RunDetail:
    run_index: int
    n: int
    accuracy: float | None
    f1: float | None

    def to_dict(self) -> dict:
        return {"run_index": self.run_index, "n": self.n,
                "accuracy": self.accuracy, "f1": self.f1}


@dataclass(frozen=True)
class BinaryMetrics:
    accuracy_avg: float | None
    f1_avg: float | None
    per_run: tuple[RunDetail, ...]
    excluded_pairs: int
    undefined_f1_runs: int


def binary_metrics(run_set: RunSet, gold: list[GoldLabelSet] | LabelSets,
                   positive_label: str = "Yes") -> BinaryMetrics:
    """Accuracy and F1 (positive class = Yes) computed per run and averaged
    across runs. Failed assignments are excluded, with the count reported."""
    gm = gold_map(gold)
    if not gm:
        raise EvaluationError("gold set is empty")
    excluded = 0
    by_run: dict[int, list[tuple[frozenset[str], frozenset[str]]]] = {}
    for a in run_set.assignments:
        if a.paper_id not in gm:
            continue
        if a.status is not AssignmentStatus.OK:
            excluded += 1
            continue
        by_run.setdefault(a.run_index, []).append((a.labels, gm[a.paper_id]))
    if not by_run:
        raise EvaluationError("no ok assignments overlap the gold set")
    details: list[RunDetail] = []
    undefined_f1 = 0
    for r in sorted(by_run):
        pairs = by_run[r]
        correct = sum(1 for p, g in pairs if p == g)
        tp = sum(1 for p, g in pairs if positive_label in p and positive_label in g)
        fp = sum(1 for p, g in pairs if positive_label in p and positive_label not in g)
        fn = sum(1 for p, g in pairs if positive_label not in p and positive_label in g)
        acc = correct / len(pairs)
        f1 = 2 * tp / (2 * tp + fp + fn) if 2 * tp + fp + fn else None
        if f1 is None:
            undefined_f1 += 1
        details.append(RunDetail(r, len(pairs), acc, f1))
    accs = [d.accuracy for d in details if d.accuracy is not None]
    f1s = [d.f1 for d in details if d.f1 is not None]
    return BinaryMetrics(
        accuracy_avg=sum(accs) / len(accs) if accs else None,
        f1_avg=sum(f1s) / len(f1s) if f1s else None,
        per_run=tuple(details),
        excluded_pairs=excluded,
        undefined_f1_runs=undefined_f1,
    )


@dataclass(frozen=True)
class SelfConsistency:
    rate: float | None
    counted: int
    targets: int


def self_consistency(run_set: RunSet) -> SelfConsistency:
    """Share of papers whose label set is identical across all runs. Only
    papers with an ok assignment in every run are counted."""
    if run_set.repetitions < 2:
        raise EvaluationError("self-consistency needs at least 2 repetitions")
    ok = run_set.ok_runs_by_paper()
    counted = 0
    stable = 0
    for pid in run_set.targets:
        runs = ok.get(pid, {})
        if len(runs) != run_set.repetitions:
            continue
        counted += 1
        sets = list(runs.values())
        if all(s == sets[0] for s in sets[1:]):
            stable += 1
    rate = stable / counted if counted else None
    return SelfConsistency(rate=rate, counted=counted, targets=len(run_set.targets))


# -- bundles and model comparison ---------------------------------------------

@dataclass
class MetricBundle:
    """Every metric reported for one model x dimension over a gold sample."""

    dimension_id: str
    model_name: str
    prompt_version: int
    n_samples: int
    accuracy_avg: float | None = None
    f1_avg: float | None = None
    self_consistency: float | None = None
    jaccard_mean: float | None = None
    lenient_accuracy: float | None = None
    micro: PRF | None = None
    sample: PRF | None = None
    per_run_detail: list[dict] = field(default_factory=list)
    excluded_pairs: int = 0
    notes: str = ""

    def to_dict(self) -> dict:
        return {
            "dimension_id": self.dimension_id,
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "n_samples": self.n_samples,
            "accuracy_avg": self.accuracy_avg,
            "f1_avg": self.f1_avg,
            "self_consistency": self.self_consistency,
            "jaccard_mean": self.jaccard_mean,
            "lenient_accuracy": self.lenient_accuracy,
            "micro": self.micro.to_dict() if self.micro else None,
            "sample": self.sample.to_dict() if self.sample else None,
            "per_run_detail": list(self.per_run_detail),
            "excluded_pairs": self.excluded_pairs,
            "notes": self.notes,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricBundle":
        return cls(
            dimension_id=d["dimension_id"],
            model_name=d["model_name"],
            prompt_version=int(d["prompt_version"]),
            n_samples=int(d["n_samples"]),
            accuracy_avg=d.get("accuracy_avg"),
            f1_avg=d.get("f1_avg"),
            self_consistency=d.get("self_consistency"),
            jaccard_mean=d.get("jaccard_mean"),
            lenient_accuracy=d.get("lenient_accuracy"),
            micro=PRF.from_dict(d["micro"]) if d.get("micro") else None,
            sample=PRF.from_dict(d["sample"]) if d.get("sample") else None,
            per_run_detail=list(d.get("per_run_detail", [])),
            excluded_pairs=int(d.get("excluded_pairs", 0)),
            notes=d.get("notes", ""),
        )


def evaluate_dimension(dimension: TaxonomyDimension, run_set: RunSet,
                       gold: list[GoldLabelSet] | LabelSets,
                       finals_labels: LabelSets | None = None) -> MetricBundle:
    """Build the full metric bundle for one run set against gold labels.

    Set metrics are computed over consolidated finals restricted to papers
    that have gold labels; run metrics come straight from the run set.
    """
    from .classifier import consolidate

    gm = gold_map(gold)
    if not gm:
        raise EvaluationError("gold set is empty")
    if finals_labels is None:
        finals_labels = consolidate(run_set, dimension).labels
    pred = {pid: labels for pid, labels in finals_labels.items() if pid in gm}
    bundle = MetricBundle(
        dimension_id=run_set.dimension_id,
        model_name=run_set.model_name,
        prompt_version=run_set.prompt_version,
        n_samples=len(pred),
    )
    if run_set.repetitions >= 2:
        bundle.self_consistency = self_consistency(run_set).rate
    if dimension.answer_mode is AnswerMode.BINARY:
        bm = binary_metrics(run_set, gm)
        bundle.accuracy_avg = bm.accuracy_avg
        bundle.f1_avg = bm.f1_avg
        bundle.per_run_detail = [d.to_dict() for d in bm.per_run]
        bundle.excluded_pairs = bm.excluded_pairs
    if pred:
        bundle.jaccard_mean = jaccard_mean(pred, gm)
        bundle.lenient_accuracy = lenient_accuracy(pred, gm)
        bundle.micro = micro_prf(pred, gm)
        bundle.sample = sample_prf(pred, gm)
    return bundle


_COLUMNS = [
    ("accuracy_avg", lambda b: b.accuracy_avg),
    ("f1_avg", lambda b: b.f1_avg),
    ("self_consistency", lambda b: b.self_consistency),
    ("jaccard_mean", lambda b: b.jaccard_mean),
    ("lenient_accuracy", lambda b: b.lenient_accuracy),
    ("micro_precision", lambda b: b.micro.precision if b.micro else None),
    ("micro_recall", lambda b: b.micro.recall if b.micro else None),
    ("micro_f1", lambda b: b.micro.f1 if b.micro else None),
    ("sample_precision", lambda b: b.sample.precision if b.sample else None),
    ("sample_recall", lambda b: b.sample.recall if b.sample else None),
    ("sample_f1", lambda b: b.sample.f1 if b.sample else None),
]


@dataclass
class ModelComparison:
    """Ranked model table for one dimension. Never picks a winner; the
    ranking key and pairwise deltas are inputs to a human decision."""

    dimension_id: str
    sort_key: str
    rows: list[dict]
    deltas: list[dict]

    def to_dict(self) -> dict:
        return {"dimension_id": self.dimension_id, "sort_key": self.sort_key,
                "rows": self.rows, "deltas": self.deltas}

    def to_text(self) -> str:
        cols = ["model", "version"] + [name for name, _ in _COLUMNS]
        used = [c for c in cols if any(r.get(c) is not None for r in self.rows)]
        widths = {c: max(len(c), *(len(_fmt(r.get(c))) for r in self.rows)) for c in used}
        lines = ["  ".join(c.ljust(widths[c]) for c in used)]
        for r in self.rows:
            lines.append("  ".join(_fmt(r.get(c)).ljust(widths[c]) for c in used))
        return "\n".join(lines)


def _fmt(v) -> str:
    if v is None:
        return "-"
    if isinstance(v, float):
        return f"{v:.4f}"
    return str(v)


def compare_models(bundles: list[MetricBundle], sort_key: str | None = None) -> ModelComparison:
    """Tabulate bundles for one dimension, sorted by the declared key, with
    pairwise deltas for every metric both models define."""
    if not bundles:
        raise EvaluationError("no bundles to compare")
    dims = {b.dimension_id for b in bundles}
    if len(dims) > 1:
        raise EvaluationError(f"bundles span multiple dimensions: {', '.join(sorted(dims))}")
    if sort_key is None:
        sort_key = "f1_avg" if any(b.f1_avg is not None for b in bundles) else "sample_f1"
    getter = dict(_COLUMNS).get(sort_key)
    if getter is None:
        raise EvaluationError(f"unknown sort key: {sort_key}")
    ordered = sorted(bundles, key=lambda b: (getter(b) is None, -(getter(b) or 0.0),
                                             b.model_name))
    rows = []
    for b in ordered:
        row = {"model": b.model_name, "version": b.prompt_version, "n": b.n_samples}
        for name, get in _COLUMNS:
            row[name] = get(b)
        rows.append(row)
    deltas = []
    for i, a in enumerate(ordered):
        for b in ordered[i + 1:]:
            entry = {"model_a": a.model_name, "model_b": b.model_name}
            for name, get in _COLUMNS:
                va, vb = get(a), get(b)
                if va is not None and vb is not None:
                    entry[name] = va - vb
            deltas.append(entry)
    return ModelComparison(dimension_id=bundles[0].dimension_id,
                           sort_key=sort_key, rows=rows, deltas=deltas)
