"""Classification runs over a corpus subset: repeated LLM labeling per
dimension, deterministic text mapping, consolidation into final labels, and
the gate that restricts downstream dimensions.

Runs are resumable: (paper, run) pairs already recorded are skipped, so a
restart only issues the missing gateway calls. Per-item failures (parse or
provider) are recorded as failed assignments, never thrown.
"""

from __future__ import annotations

import math
from concurrent.futures import FIRST_COMPLETED, ThreadPoolExecutor, wait
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum

from .corpus import PaperRecord
from .gateway import (AuthError, Gateway, GatewayError, ParseError,
                      RequestContext, parse_binary, parse_labeled_multi,
                      parse_subclass_list)
from .taxonomy import AnswerMode, PromptRenderError, TaxonomyDimension


class AssignmentStatus(str, Enum):
    OK = "ok"
    PARSE_FAILED = "parse_failed"
    PROVIDER_FAILED = "provider_failed"


@dataclass(frozen=True)
class LabelAssignment:
    """One paper x dimension x run outcome. labels is empty iff status is
    not ok; note carries the audit detail for failures."""

    paper_id: str
    dimension_id: str
    run_index: int
    labels: frozenset[str]
    model_name: str
    prompt_version: int
    produced_at: datetime | None = None
    status: AssignmentStatus = AssignmentStatus.OK
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "dimension_id": self.dimension_id,
            "run_index": self.run_index,
            "labels": sorted(self.labels),
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "produced_at": self.produced_at.isoformat() if self.produced_at else None,
            "status": self.status.value,
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelAssignment":
        ts = d.get("produced_at")
        return cls(
            paper_id=d["paper_id"],
            dimension_id=d["dimension_id"],
            run_index=int(d["run_index"]),
            labels=frozenset(d.get("labels") or ()),
            model_name=d["model_name"],
            prompt_version=int(d["prompt_version"]),
            produced_at=datetime.fromisoformat(ts) if ts else None,
            status=AssignmentStatus(d.get("status", "ok")),
            note=d.get("note", ""),
        )


@dataclass
class RunSet:
    """All assignments of one repeated run (dimension x model x prompt
    version), including failures."""

    dimension_id: str
    model_name: str
    prompt_version: int
    repetitions: int
    targets: tuple[str, ...] = ()
    assignments: list[LabelAssignment] = field(default_factory=list)

    @property
    def run_set_id(self) -> str:
        return run_set_identity(self.dimension_id, self.model_name, self.prompt_version)

    def recorded_pairs(self) -> set[tuple[str, int]]:
        return {(a.paper_id, a.run_index) for a in self.assignments}

    def ok_runs_by_paper(self) -> dict[str, dict[int, frozenset[str]]]:
        out: dict[str, dict[int, frozenset[str]]] = {}
        for a in self.assignments:
            if a.status is AssignmentStatus.OK:
                out.setdefault(a.paper_id, {})[a.run_index] = a.labels
        return out

    @property
    def coverage(self) -> float:
        """Fraction of target papers with an ok assignment in every run."""
        if not self.targets:
            return 0.0
        ok = self.ok_runs_by_paper()
        full = sum(1 for p in self.targets if len(ok.get(p, {})) == self.repetitions)
        return full / len(self.targets)

    def sort(self) -> None:
        self.assignments.sort(key=lambda a: (a.paper_id, a.run_index))

    def to_dict(self) -> dict:
        return {
            "dimension_id": self.dimension_id,
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "repetitions": self.repetitions,
            "targets": list(self.targets),
            "assignments": [a.to_dict() for a in self.assignments],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunSet":
        return cls(
            dimension_id=d["dimension_id"],
            model_name=d["model_name"],
            prompt_version=int(d["prompt_version"]),
            repetitions=int(d["repetitions"]),
            targets=tuple(d.get("targets") or ()),
            assignments=[LabelAssignment.from_dict(x) for x in d.get("assignments", [])],
        )


def run_set_identity(dimension_id: str, model_name: str, prompt_version: int) -> str:
    return f"{dimension_id}__{model_name}__v{prompt_version}"


@dataclass
class Finals:
    """Consolidated label per paper for one dimension. Papers with zero ok
    runs are listed as unclassified and carry no labels."""

    dimension_id: str
    model_name: str
    prompt_version: int
    labels: dict[str, frozenset[str]] = field(default_factory=dict)
    unclassified: tuple[str, ...] = ()

    def to_dict(self) -> dict:
        return {
            "dimension_id": self.dimension_id,
            "model_name": self.model_name,
            "prompt_version": self.prompt_version,
            "labels": {p: sorted(ls) for p, ls in sorted(self.labels.items())},
            "unclassified": sorted(self.unclassified),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Finals":
        return cls(
            dimension_id=d["dimension_id"],
            model_name=d["model_name"],
            prompt_version=int(d["prompt_version"]),
            labels={p: frozenset(ls) for p, ls in d.get("labels", {}).items()},
            unclassified=tuple(d.get("unclassified") or ()),
        )


def classify_text_mapped(paper: PaperRecord, dimension: TaxonomyDimension) -> frozenset[str]:
    """Keyword scan of title+abstract; no LLM involved. Any hit in a label's
    keyword list assigns that label; no hit at all assigns the sentinel."""
    if dimension.answer_mode is not AnswerMode.TEXT_MAPPED:
        raise ValueError(f"{dimension.dimension_id} is not text-mapped")
    haystack = f"{paper.title}\n{paper.abstract}".lower()
    hits = {l.label for l in dimension.labels
            if any(kw.lower() in haystack for kw in l.keywords)}
    return frozenset(hits) if hits else frozenset({dimension.sentinel_label()})


def run_dimension(papers: list[PaperRecord], dimension: TaxonomyDimension,
                  gateway: Gateway, repetitions: int, *,
                  existing: RunSet | None = None,
                  on_assignment=None, should_stop=None,
                  now: datetime | None = None) -> RunSet:
    """Classify every paper `repetitions` times, recording one assignment per
    (paper, run). Pairs already present in `existing` are not re-issued.

    Aborts only on configuration errors (bad repetitions, auth failure,
    missing mock script entries); per-item failures become failed assignments.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    reps = 1 if dimension.answer_mode is AnswerMode.TEXT_MAPPED else repetitions
    stamp = now or datetime.now(timezone.utc)
    prompt_version = dimension.prompt_template.version if dimension.prompt_template else 0
    run_set = RunSet(
        dimension_id=dimension.dimension_id,
        model_name=gateway.config.model_name,
        prompt_version=prompt_version,
        repetitions=reps,
        targets=tuple(sorted(p.paper_id for p in papers)),
    )
    done: set[tuple[str, int]] = set()
    if existing is not None:
        run_set.assignments.extend(existing.assignments)
        done = existing.recorded_pairs()

    by_id = {p.paper_id: p for p in papers}
    tasks = [(pid, r) for pid in run_set.targets for r in range(1, reps + 1)
             if (pid, r) not in done]

    def record(assignment: LabelAssignment) -> None:
        run_set.assignments.append(assignment)
        if on_assignment is not None:
            on_assignment(assignment)

    if dimension.answer_mode is AnswerMode.TEXT_MAPPED:
        for pid, r in tasks:
            if should_stop is not None and should_stop():
                break
            labels = classify_text_mapped(by_id[pid], dimension)
            record(LabelAssignment(pid, dimension.dimension_id, r, labels,
                                   gateway.config.model_name, prompt_version,
                                   stamp, AssignmentStatus.OK))
        run_set.sort()
        return run_set

    def classify_one(pid: str, r: int) -> LabelAssignment:
        paper = by_id[pid]
        context = RequestContext(pid, dimension.dimension_id, r)
        try:
            prompt = dimension.render_prompt(paper.abstract)
        except PromptRenderError as e:
            return LabelAssignment(pid, dimension.dimension_id, r, frozenset(),
                                   gateway.config.model_name, prompt_version, stamp,
                                   AssignmentStatus.PARSE_FAILED, note=str(e))
        try:
            response = gateway.complete(prompt, context)
        except AuthError:
            raise
        except GatewayError as e:
            return LabelAssignment(pid, dimension.dimension_id, r, frozenset(),
                                   gateway.config.model_name, prompt_version, stamp,
                                   AssignmentStatus.PROVIDER_FAILED, note=str(e))
        try:
            if dimension.answer_mode is AnswerMode.BINARY:
                labels = frozenset({parse_binary(response.text)})
            elif dimension.answer_mode is AnswerMode.LABELED_MULTI:
                labels = parse_labeled_multi(response.text, dimension)
            else:
                labels = parse_subclass_list(response.text, dimension)
        except ParseError as e:
            return LabelAssignment(pid, dimension.dimension_id, r, frozenset(),
                                   gateway.config.model_name, prompt_version, stamp,
                                   AssignmentStatus.PARSE_FAILED, note=e.text)
        return LabelAssignment(pid, dimension.dimension_id, r, labels,
                               gateway.config.model_name, prompt_version, stamp,
                               AssignmentStatus.OK)

    workers = max(1, gateway.config.max_concurrent)
    if workers == 1:
        for pid, r in tasks:
            if should_stop is not None and should_stop():
                break
            record(classify_one(pid, r))
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            pending = set()
            for pid, r in tasks:
                if should_stop is not None and should_stop():
                    break
                pending.add(pool.submit(classify_one, pid, r))
                if len(pending) >= workers:
                    finished, pending = wait(pending, return_when=FIRST_COMPLETED)
                    for f in finished:
                        record(f.result())
            for f in pending:
                record(f.result())
    run_set.sort()
    return run_set


def consolidate(run_set: RunSet, dimension: TaxonomyDimension) -> Finals:
    """Collapse repeated runs into one final label set per paper.

    Binary: majority vote over ok runs, ties go to No (the gate is
    exclusionary by design). Multi-label: a label survives iff it appears in
    at least ceil(ok_runs / 2) runs; an empty result becomes the sentinel.
    """
    if run_set.coverage <= 0 and not run_set.ok_runs_by_paper():
        raise ValueError("run set has no ok assignments to consolidate")
    finals = Finals(run_set.dimension_id, run_set.model_name, run_set.prompt_version)
    ok = run_set.ok_runs_by_paper()
    unclassified = []
    for pid in run_set.targets:
        runs = list(ok.get(pid, {}).values())
        if not runs:
            unclassified.append(pid)
            continue
        if dimension.answer_mode is AnswerMode.BINARY:
            yes = sum(1 for labels in runs if "Yes" in labels)
            final = frozenset({"Yes"}) if yes * 2 > len(runs) else frozenset({"No"})
        else:
            threshold = math.ceil(len(runs) / 2)
            counts: dict[str, int] = {}
            for labels in runs:
                for label in labels:
                    counts[label] = counts.get(label, 0) + 1
            kept = frozenset(l for l, c in counts.items() if c >= threshold)
            final = kept or frozenset({dimension.sentinel_label()})
        finals.labels[pid] = final
    finals.unclassified = tuple(sorted(unclassified))
    return finals


@dataclass(frozen=True)
class GateReport:
    """Positive subset of the gate dimension with count and proportion.

    percent is the proportion truncated (not rounded) to two decimals,
    matching how the gate share is conventionally quoted.
    """

    positives: tuple[str, ...]
    total: int

    @property
    def count(self) -> int:
        return len(self.positives)

    @property
    def proportion(self) -> float:
        return self.count / self.total if self.total else 0.0

    @property
    def percent(self) -> str:
        truncated = math.floor(self.proportion * 10_000) / 100
        return f"{truncated:.2f}%"

    def to_dict(self) -> dict:
        return {"positives": list(self.positives), "count": self.count,
                "total": self.total, "proportion": self.proportion,
                "percent": self.percent}


def gate_positive(paper_ids, finals: Finals, positive_label: str = "Yes") -> GateReport:
    """Papers whose final gate label is positive, independent of input order."""
    ids = sorted({p.paper_id if isinstance(p, PaperRecord) else p for p in paper_ids})
    positives = tuple(pid for pid in ids
                      if positive_label in finals.labels.get(pid, frozenset()))
    return GateReport(positives=positives, total=len(ids))


def export_assignments_jsonl(run_set: RunSet) -> str:
    """One assignment per line, all fields, for offline inspection."""
    import json
    return "\n".join(json.dumps(a.to_dict(), sort_keys=True) for a in run_set.assignments)
