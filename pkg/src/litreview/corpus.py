"""Bibliographic corpus: ingestion, validation, deduplication, incremental update.

Records come from tabular export files (CSV or JSONL). Every row either becomes
a validated PaperRecord or a rejection entry; nothing is silently dropped.
Rows rejected only for a missing abstract are kept in a quarantine list so a
later export can fill the field.
"""

from __future__ import annotations

import csv
import hashlib
import json
import re
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path


class CorpusError(Exception):
    """Base error for ingestion problems that abort the whole operation."""


class UnknownProfileError(CorpusError):
    def __init__(self, profile: str):
        super().__init__(f"unknown format profile: {profile!r}")
        self.profile = profile


class HeaderMismatchError(CorpusError):
    def __init__(self, missing: list[str]):
        super().__init__(f"export header is missing columns: {', '.join(missing)}")
        self.missing = missing


class DocType(str, Enum):
    ARTICLE = "article"
    CONFERENCE_PAPER = "conference_paper"
    REVIEW = "review"
    CONFERENCE_REVIEW = "conference_review"
    OTHER = "other"


class RejectionReason(str, Enum):
    MISSING_ABSTRACT = "missing_abstract"
    MISSING_TITLE = "missing_title"
    UNPARSEABLE_ROW = "unparseable_row"
    DUPLICATE = "duplicate"


_PUNCT_RE = re.compile(r"[\W_]+", re.UNICODE)
_WS_RE = re.compile(r"\s+")


def normalize_title(title: str) -> str:
    """Canonical match key for a title: lowercase, punctuation to spaces,
    whitespace collapsed, trimmed. Idempotent."""
    lowered = title.lower()
    no_punct = _PUNCT_RE.sub(" ", lowered)
    return _WS_RE.sub(" ", no_punct).strip()


def _year_bounds() -> tuple[int, int]:
    return 1900, datetime.now(timezone.utc).year + 1


@dataclass(frozen=True)
class PaperRecord:
    """One bibliographic record. Immutable once validated; updates replace
    whole records."""

    paper_id: str
    title: str
    year: int
    abstract: str = ""
    external_id: str | None = None
    doi: str | None = None
    authors: tuple[str, ...] = ()
    source_title: str = ""
    doc_type: DocType = DocType.OTHER
    reference_strings: tuple[str, ...] = ()
    ingested_at: datetime | None = None

    def match_key(self) -> tuple[str, int]:
        return (normalize_title(self.title), self.year)

    def to_dict(self) -> dict:
        return {
            "paper_id": self.paper_id,
            "title": self.title,
            "year": self.year,
            "abstract": self.abstract,
            "external_id": self.external_id,
            "doi": self.doi,
            "authors": list(self.authors),
            "source_title": self.source_title,
            "doc_type": self.doc_type.value,
            "reference_strings": list(self.reference_strings),
            "ingested_at": self.ingested_at.isoformat() if self.ingested_at else None,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PaperRecord":
        ts = d.get("ingested_at")
        return cls(
            paper_id=d["paper_id"],
            title=d["title"],
            year=int(d["year"]),
            abstract=d.get("abstract", ""),
            external_id=d.get("external_id"),
            doi=d.get("doi"),
            authors=tuple(d.get("authors", ())),
            source_title=d.get("source_title", ""),
            doc_type=DocType(d.get("doc_type", "other")),
            reference_strings=tuple(d.get("reference_strings", ())),
            ingested_at=datetime.fromisoformat(ts) if ts else None,
        )


def validate(record: PaperRecord) -> RejectionReason | None:
    """Total validity check. Returns None when valid, else the reason.

    Order of checks: year parses and is in range, then title, then abstract.
    """
    lo, hi = _year_bounds()
    if not isinstance(record.year, int) or not lo <= record.year <= hi:
        return RejectionReason.UNPARSEABLE_ROW
    if not normalize_title(record.title):
        return RejectionReason.MISSING_TITLE
    if not record.abstract.strip():
        return RejectionReason.MISSING_ABSTRACT
    return None


@dataclass
class CorpusDelta:
    """Outcome of one ingest/merge: every input row lands in exactly one of
    added / updated / rejected / duplicates_merged."""

    added: list[PaperRecord] = field(default_factory=list)
    updated: list[PaperRecord] = field(default_factory=list)
    rejected: list[tuple[int, RejectionReason]] = field(default_factory=list)
    duplicates_merged: int = 0

    def is_empty(self) -> bool:
        """True when the operation changed nothing (re-ingest of known data)."""
        return not self.added and not self.updated

    def row_count(self) -> int:
        return len(self.added) + len(self.updated) + len(self.rejected) + self.duplicates_merged

    def summary(self) -> str:
        return (
            f"added={len(self.added)} updated={len(self.updated)} "
            f"rejected={len(self.rejected)} duplicates_merged={self.duplicates_merged}"
        )


SCOPUS_CSV_COLUMNS = [
    "Authors",
    "Title",
    "Year",
    "Source title",
    "Abstract",
    "References",
    "EID",
    "DOI",
    "Document Type",
]

_SCOPUS_DOC_TYPES = {
    "article": DocType.ARTICLE,
    "conference paper": DocType.CONFERENCE_PAPER,
    "review": DocType.REVIEW,
    "conference review": DocType.CONFERENCE_REVIEW,
}

REFERENCE_DELIMITER = "; "

FORMAT_PROFILES = ("scopus_csv", "records_jsonl")


def _parse_doc_type(raw: str) -> DocType:
    return _SCOPUS_DOC_TYPES.get(raw.strip().lower(), DocType.OTHER)


def _split_authors(raw: str) -> tuple[str, ...]:
    raw = raw.strip()
    if not raw:
        return ()
    if ";" in raw:
        parts = raw.split(";")
    else:
        # classic Scopus style: "Black F., Scholes M."
        parts = re.split(r"\.,\s*", raw)
        parts = [p if p.endswith(".") else p + "." for p in parts]
    return tuple(p.strip() for p in parts if p.strip())


def _paper_id_for(external_id: str | None, title: str, year) -> str:
    if external_id:
        return external_id
    basis = f"{normalize_title(title)}|{year}"
    return "t:" + hashlib.sha1(basis.encode("utf-8")).hexdigest()[:16]


class Corpus:
    """In-memory record collection with identity indexes.

    Single-writer: ingest/merge mutate; reads are safe for any number of
    concurrent readers between writes.
    """

    def __init__(self, corpus_id: str = "main"):
        self.corpus_id = corpus_id
        self.records: dict[str, PaperRecord] = {}
        self.quarantine: dict[str, PaperRecord] = {}
        self._by_external: dict[str, str] = {}
        self._by_doi: dict[str, str] = {}
        self._by_title_year: dict[tuple[str, int], str] = {}

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self):
        return iter(self.records.values())

    def get(self, paper_id: str) -> PaperRecord | None:
        return self.records.get(paper_id)

    def _index(self, rec: PaperRecord) -> None:
        if rec.external_id:
            self._by_external[rec.external_id] = rec.paper_id
        if rec.doi:
            self._by_doi[rec.doi.lower()] = rec.paper_id
        self._by_title_year[rec.match_key()] = rec.paper_id

    def find_match(self, rec: PaperRecord) -> PaperRecord | None:
        """Duplicate lookup with key precedence external_id > doi > (title, year)."""
        if rec.external_id and rec.external_id in self._by_external:
            return self.records[self._by_external[rec.external_id]]
        if rec.doi and rec.doi.lower() in self._by_doi:
            return self.records[self._by_doi[rec.doi.lower()]]
        pid = self._by_title_year.get(rec.match_key())
        return self.records[pid] if pid else None

    # -- ingestion ---------------------------------------------------------

    def ingest_export(self, file_path: str | Path, format_profile: str = "scopus_csv",
                      now: datetime | None = None) -> CorpusDelta:
        """Ingest an export file. Idempotent: re-ingesting the same file adds
        and updates nothing (rows resurface as duplicates_merged/rejected)."""
        rows = _read_rows(Path(file_path), format_profile)
        return self._apply_rows(rows, now=now)

    def merge_update(self, delta_file: str | Path, format_profile: str = "scopus_csv",
                     now: datetime | None = None) -> CorpusDelta:
        """Incremental update from a newer export: new papers appended, known
        papers merged with newer non-empty fields winning."""
        return self.ingest_export(delta_file, format_profile, now=now)

    def _apply_rows(self, rows: list[dict | None], now: datetime | None) -> CorpusDelta:
        stamp = now or datetime.now(timezone.utc)
        delta = CorpusDelta()
        added_ids: set[str] = set()
        for i, raw in enumerate(rows):
            if raw is None:
                delta.rejected.append((i, RejectionReason.UNPARSEABLE_ROW))
                continue
            rec, reason = self._build_record(raw, stamp)
            if reason is not None:
                delta.rejected.append((i, reason))
                if reason is RejectionReason.MISSING_ABSTRACT and rec is not None:
                    self.quarantine[rec.paper_id] = rec
                continue
            assert rec is not None
            quarantined = self.quarantine.pop(rec.paper_id, None)
            if quarantined is not None:
                rec = _merge_fields(quarantined, rec)
            existing = self.find_match(rec)
            if existing is None:
                self.records[rec.paper_id] = rec
                self._index(rec)
                delta.added.append(rec)
                added_ids.add(rec.paper_id)
            else:
                merged = _merge_fields(existing, rec)
                if merged == existing:
                    delta.duplicates_merged += 1
                elif existing.paper_id in added_ids:
                    # row folds into a record added earlier in this same batch
                    self.records[merged.paper_id] = merged
                    self._index(merged)
                    delta.added = [merged if r.paper_id == merged.paper_id else r
                                   for r in delta.added]
                    delta.duplicates_merged += 1
                else:
                    self.records[merged.paper_id] = merged
                    self._index(merged)
                    delta.updated.append(merged)
        return delta

    def _build_record(self, raw: dict, stamp: datetime) -> tuple[PaperRecord | None, RejectionReason | None]:
        title = str(raw.get("title") or "")
        year_raw = raw.get("year")
        try:
            year = int(str(year_raw).strip())
        except (TypeError, ValueError):
            return None, RejectionReason.UNPARSEABLE_ROW
        external_id = (raw.get("external_id") or None) or None
        rec = PaperRecord(
            paper_id=raw.get("paper_id") or _paper_id_for(external_id, title, year),
            title=title.strip(),
            year=year,
            abstract=str(raw.get("abstract") or "").strip(),
            external_id=external_id,
            doi=(raw.get("doi") or None),
            authors=tuple(raw.get("authors") or ()),
            source_title=str(raw.get("source_title") or ""),
            doc_type=raw["doc_type"] if isinstance(raw.get("doc_type"), DocType)
            else _parse_doc_type(str(raw.get("doc_type") or "")),
            reference_strings=tuple(raw.get("reference_strings") or ()),
            ingested_at=stamp,
        )
        return rec, validate(rec)

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "corpus_id": self.corpus_id,
            "records": [r.to_dict() for r in sorted(self.records.values(), key=lambda r: r.paper_id)],
            "quarantine": [r.to_dict() for r in sorted(self.quarantine.values(), key=lambda r: r.paper_id)],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Corpus":
        corpus = cls(d.get("corpus_id", "main"))
        for rd in d.get("records", []):
            rec = PaperRecord.from_dict(rd)
            corpus.records[rec.paper_id] = rec
            corpus._index(rec)
        for rd in d.get("quarantine", []):
            rec = PaperRecord.from_dict(rd)
            corpus.quarantine[rec.paper_id] = rec
        return corpus

    def __eq__(self, other) -> bool:
        if not isinstance(other, Corpus):
            return NotImplemented
        return (self.corpus_id == other.corpus_id and self.records == other.records
                and self.quarantine == other.quarantine)


def _merge_fields(old: PaperRecord, new: PaperRecord) -> PaperRecord:
    """Field-level merge: the newer record's non-empty fields win, empty ones
    keep the old value. Identity and first-ingest timestamp are preserved."""
    return replace(
        old,
        title=new.title or old.title,
        year=new.year or old.year,
        abstract=new.abstract or old.abstract,
        external_id=new.external_id or old.external_id,
        doi=new.doi or old.doi,
        authors=new.authors or old.authors,
        source_title=new.source_title or old.source_title,
        doc_type=new.doc_type if new.doc_type is not DocType.OTHER else old.doc_type,
        reference_strings=new.reference_strings or old.reference_strings,
    )


def _read_rows(path: Path, profile: str) -> list[dict | None]:
    """Parse the file into raw row dicts; None marks an unparseable row.
    Raises for problems that invalidate the whole file."""
    if profile not in FORMAT_PROFILES:
        raise UnknownProfileError(profile)
    if not path.exists():
        raise CorpusError(f"unreadable file: {path}")
    if profile == "scopus_csv":
        return _read_scopus_csv(path)
    return _read_records_jsonl(path)


def _read_scopus_csv(path: Path) -> list[dict | None]:
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in SCOPUS_CSV_COLUMNS if c not in header]
        if missing:
            raise HeaderMismatchError(missing)
        rows: list[dict | None] = []
        for row in reader:
            if row.get(None) is not None or any(v is None for v in row.values()):
                rows.append(None)  # ragged row
                continue
            refs = (row["References"] or "").strip()
            rows.append({
                "title": row["Title"],
                "year": row["Year"],
                "abstract": row["Abstract"],
                "external_id": row["EID"].strip() or None,
                "doi": row["DOI"].strip() or None,
                "authors": _split_authors(row["Authors"]),
                "source_title": row["Source title"],
                "doc_type": row["Document Type"],
                "reference_strings": tuple(
                    r.strip() for r in refs.split(REFERENCE_DELIMITER) if r.strip()
                ) if refs else (),
            })
    return rows


def _read_records_jsonl(path: Path) -> list[dict | None]:
    rows: list[dict | None] = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
                if not isinstance(obj, dict):
                    raise ValueError("not an object")
            except ValueError:
                rows.append(None)
                continue
            rows.append(obj)
    return rows
