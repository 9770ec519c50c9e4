"""Versioned artifact store with filtered paper queries.

Layout: one JSON file per (kind, id, version) under the store root, plus an
append-only journal of committed writes. Writes are atomic — the version
file is created by linking a fully written temp file, so readers never see
a torn artifact and exactly one of two concurrent writers of the same
version can win.
"""

from __future__ import annotations

import json
import os
import re
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

from .citenet import CitationGraph
from .classifier import Finals, RunSet
from .corpus import Corpus, PaperRecord
from .evaluation import GoldSet, MetricBundle
from .taxonomy import Taxonomy


class StoreError(Exception):
    pass


class NotFoundError(StoreError):
    pass


class VersionConflict(StoreError):
    pass


ARTIFACT_KINDS = {
    "corpus": (lambda o: o.to_dict(), Corpus.from_dict),
    "taxonomy": (lambda o: o.to_dict(), Taxonomy.from_dict),
    "run_set": (lambda o: o.to_dict(), RunSet.from_dict),
    "gold_set": (lambda o: o.to_dict(), GoldSet.from_dict),
    "graph": (lambda o: o.to_dict(), CitationGraph.from_dict),
    "report": (lambda o: o.to_dict(), MetricBundle.from_dict),
    "finals": (lambda o: o.to_dict(), Finals.from_dict),
}

_VERSION_RE = re.compile(r"^v(\d+)\.json$")
_ID_SAFE_RE = re.compile(r"[^A-Za-z0-9._-]")


def _safe_id(artifact_id: str) -> str:
    return _ID_SAFE_RE.sub("~", artifact_id)


class Store:
    """Single-directory artifact store. Many concurrent readers; one winner
    per concurrent write to the same identity."""

    def __init__(self, root: str | Path, create: bool = True):
        self.root = Path(root)
        if create:
            self.root.mkdir(parents=True, exist_ok=True)
        elif not self.root.is_dir():
            raise StoreError(f"store root does not exist: {self.root}")
        self._journal_lock = threading.Lock()

    def _dir(self, kind: str, artifact_id: str) -> Path:
        if kind not in ARTIFACT_KINDS:
            raise StoreError(f"unknown artifact kind: {kind!r}")
        return self.root / kind / _safe_id(artifact_id)

    # -- write ---------------------------------------------------------------

    def put(self, kind: str, artifact_id: str, artifact,
            expected_version: int | None = None) -> int:
        """Write the next version. expected_version, when given, must equal
        the current latest or the write is refused."""
        serialize, _ = ARTIFACT_KINDS[kind] if kind in ARTIFACT_KINDS else (None, None)
        if serialize is None:
            raise StoreError(f"unknown artifact kind: {kind!r}")
        payload = serialize(artifact) if not isinstance(artifact, dict) else artifact
        directory = self._dir(kind, artifact_id)
        directory.mkdir(parents=True, exist_ok=True)
        current = self.latest_version(kind, artifact_id) or 0
        if expected_version is not None and expected_version != current:
            raise VersionConflict(
                f"{kind}/{artifact_id}: expected version {expected_version}, found {current}")
        new_version = current + 1
        final = directory / f"v{new_version}.json"
        tmp = directory / f".tmp-{os.getpid()}-{threading.get_ident()}-{new_version}"
        tmp.write_text(json.dumps(payload, sort_keys=True, ensure_ascii=False), "utf-8")
        try:
            os.link(tmp, final)  # atomic create; fails if the version exists
        except FileExistsError:
            raise VersionConflict(
                f"{kind}/{artifact_id}: version {new_version} was written concurrently") from None
        finally:
            tmp.unlink(missing_ok=True)
        self._journal(kind, artifact_id, new_version)
        return new_version

    def _journal(self, kind: str, artifact_id: str, version: int) -> None:
        line = json.dumps({"ts": time.time(), "kind": kind,
                           "id": artifact_id, "version": version}, sort_keys=True)
        with self._journal_lock:
            with open(self.root / "journal.jsonl", "a", encoding="utf-8") as fh:
                fh.write(line + "\n")

    # -- read ----------------------------------------------------------------

    def latest_version(self, kind: str, artifact_id: str) -> int | None:
        directory = self._dir(kind, artifact_id)
        if not directory.is_dir():
            return None
        versions = [int(m.group(1)) for p in directory.iterdir()
                    if (m := _VERSION_RE.match(p.name))]
        return max(versions) if versions else None

    def get(self, kind: str, artifact_id: str, version: int | None = None):
        _, deserialize = ARTIFACT_KINDS[kind] if kind in ARTIFACT_KINDS else (None, None)
        if deserialize is None:
            raise StoreError(f"unknown artifact kind: {kind!r}")
        if version is None:
            version = self.latest_version(kind, artifact_id)
            if version is None:
                raise NotFoundError(f"{kind}/{artifact_id}: not found")
        path = self._dir(kind, artifact_id) / f"v{version}.json"
        if not path.exists():
            raise NotFoundError(f"{kind}/{artifact_id}: version {version} not found")
        return deserialize(json.loads(path.read_text("utf-8")))

    def exists(self, kind: str, artifact_id: str) -> bool:
        return self.latest_version(kind, artifact_id) is not None

    def list_ids(self, kind: str) -> list[str]:
        base = self.root / kind
        if kind not in ARTIFACT_KINDS:
            raise StoreError(f"unknown artifact kind: {kind!r}")
        if not base.is_dir():
            return []
        return sorted(p.name for p in base.iterdir() if p.is_dir())


# -- filtered paper queries ----------------------------------------------------

@dataclass
class QueryFilter:
    """Conjunctive corpus filter: publication-year window, per-dimension
    label constraints (include or exclude), and a case-insensitive keyword
    over title+abstract."""

    year_range: tuple[int | None, int | None] | None = None
    label_constraints: list[tuple[str, str, bool]] = field(default_factory=list)
    keyword: str | None = None
    limit: int = 50
    offset: int = 0

    def __post_init__(self):
        if self.limit < 1:
            raise StoreError("limit must be >= 1")
        if self.offset < 0:
            raise StoreError("offset must be >= 0")
        if self.year_range:
            lo, hi = self.year_range
            if lo is not None and hi is not None and lo > hi:
                raise StoreError("year_range from must be <= to")


@dataclass
class QueryResult:
    total: int
    papers: list[dict]

    def to_dict(self) -> dict:
        return {"total": self.total, "papers": self.papers}


def _label_matches(labels: frozenset[str], wanted: str) -> bool:
    if wanted in labels:
        return True
    # a top-level class constraint matches any of its subclass indices
    return any("." in l and l.split(".", 1)[0] == wanted for l in labels)


def query_papers(corpus: Corpus, finals_by_dim: dict[str, Finals],
                 qf: QueryFilter) -> QueryResult:
    """Deterministic filtered page: year desc, paper_id asc, with each
    paper's final labels attached."""
    keyword = qf.keyword.lower() if qf.keyword else None
    matches: list[PaperRecord] = []
    for rec in corpus:
        if qf.year_range:
            lo, hi = qf.year_range
            if lo is not None and rec.year < lo:
                continue
            if hi is not None and rec.year > hi:
                continue
        if keyword and keyword not in rec.title.lower() and keyword not in rec.abstract.lower():
            continue
        ok = True
        for dim_id, label, include in qf.label_constraints:
            finals = finals_by_dim.get(dim_id)
            labels = finals.labels.get(rec.paper_id, frozenset()) if finals else frozenset()
            if _label_matches(labels, label) != include:
                ok = False
                break
        if ok:
            matches.append(rec)
    matches.sort(key=lambda r: (-r.year, r.paper_id))
    page = matches[qf.offset:qf.offset + qf.limit]
    rows = []
    for rec in page:
        labels = {dim_id: sorted(f.labels.get(rec.paper_id, frozenset()))
                  for dim_id, f in sorted(finals_by_dim.items())
                  if rec.paper_id in f.labels}
        row = rec.to_dict()
        row["final_labels"] = labels
        rows.append(row)
    return QueryResult(total=len(matches), papers=rows)
