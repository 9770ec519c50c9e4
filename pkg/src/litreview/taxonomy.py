"""Classification dimensions, label vocabularies, and versioned prompt templates.

A taxonomy is a set of dimensions. Each dimension answers in one of four modes:
binary, labeled_multi (named labels answered yes/no), subclass_indexed
(numeric subclass indices rolling up to top-level classes), or text_mapped
(deterministic keyword matching, no prompt). Prompt templates are immutable
values; every constraint edit creates a new version and the full history is
retained for audit.

The built-in option-pricing taxonomy lives in data/option_pricing_taxonomy.yaml
so prompts are data, reviewable in diffs.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import Enum
from importlib import resources
from pathlib import Path

import yaml

ABSTRACT_PLACEHOLDER = "{{ABSTRACT}}"


class TaxonomyError(Exception):
    pass


class UnknownDimensionError(TaxonomyError):
    def __init__(self, dimension_id: str):
        super().__init__(f"unknown dimension: {dimension_id!r}")
        self.dimension_id = dimension_id


class UnknownSubclassError(TaxonomyError):
    def __init__(self, subclass_index: str):
        super().__init__(f"unknown subclass index: {subclass_index!r}")
        self.subclass_index = subclass_index


class PromptRenderError(TaxonomyError):
    pass


class AnswerMode(str, Enum):
    BINARY = "binary"
    LABELED_MULTI = "labeled_multi"
    SUBCLASS_INDEXED = "subclass_indexed"
    TEXT_MAPPED = "text_mapped"


@dataclass(frozen=True)
class LabelDef:
    label: str
    subclass_index: str | None = None
    parent_class: int | None = None
    keywords: tuple[str, ...] = ()
    sentinel: bool = False

    def __post_init__(self):
        if self.subclass_index is not None:
            prefix = int(self.subclass_index.split(".")[0])
            if self.parent_class is None:
                object.__setattr__(self, "parent_class", prefix)
            elif self.parent_class != prefix:
                raise TaxonomyError(
                    f"parent_class {self.parent_class} does not match index {self.subclass_index}"
                )

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "subclass_index": self.subclass_index,
            "parent_class": self.parent_class,
            "keywords": list(self.keywords),
            "sentinel": self.sentinel,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LabelDef":
        return cls(
            label=d["label"],
            subclass_index=d.get("subclass_index"),
            parent_class=d.get("parent_class"),
            keywords=tuple(d.get("keywords") or ()),
            sentinel=bool(d.get("sentinel", False)),
        )


@dataclass(frozen=True)
class PromptTemplate:
    """Immutable prompt version. Rendering concatenates preamble, every
    constraint line verbatim in order, and the output-format block, then
    substitutes the abstract at the placeholder token."""

    version: int
    preamble: str
    constraints: tuple[str, ...]
    output_format_instruction: str
    abstract_placeholder: str = ABSTRACT_PLACEHOLDER

    def render(self, abstract: str) -> str:
        parts = [self.preamble, *self.constraints, self.output_format_instruction]
        text = "\n".join(p for p in parts if p)
        if self.abstract_placeholder not in text:
            raise PromptRenderError("template has no abstract placeholder")
        return text.replace(self.abstract_placeholder, abstract)

    def to_dict(self) -> dict:
        return {
            "version": self.version,
            "preamble": self.preamble,
            "constraints": list(self.constraints),
            "output_format_instruction": self.output_format_instruction,
            "abstract_placeholder": self.abstract_placeholder,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PromptTemplate":
        return cls(
            version=int(d.get("version", 1)),
            preamble=d["preamble"],
            constraints=tuple(d.get("constraints") or ()),
            output_format_instruction=d.get("output_format_instruction", ""),
            abstract_placeholder=d.get("abstract_placeholder", ABSTRACT_PLACEHOLDER),
        )


@dataclass(frozen=True)
class EditRecord:
    version: int
    editor: str
    edited_at: datetime

    def to_dict(self) -> dict:
        return {"version": self.version, "editor": self.editor,
                "edited_at": self.edited_at.isoformat()}

    @classmethod
    def from_dict(cls, d: dict) -> "EditRecord":
        return cls(d["version"], d["editor"], datetime.fromisoformat(d["edited_at"]))


@dataclass
class TaxonomyDimension:
    dimension_id: str
    name: str
    answer_mode: AnswerMode
    labels: tuple[LabelDef, ...]
    prompt_template: PromptTemplate | None = None
    depends_on: str | None = None
    label_aliases: dict[str, str] = field(default_factory=dict)
    template_history: list[PromptTemplate] = field(default_factory=list)
    edits: list[EditRecord] = field(default_factory=list)

    def __post_init__(self):
        names = [l.label for l in self.labels]
        if len(set(names)) != len(names):
            raise TaxonomyError(f"duplicate label names in {self.dimension_id}")
        sentinels = [l for l in self.labels if l.sentinel]
        if self.answer_mode is not AnswerMode.BINARY and len(sentinels) != 1:
            raise TaxonomyError(f"{self.dimension_id}: exactly one sentinel label required")
        if self.answer_mode is AnswerMode.BINARY and sentinels:
            raise TaxonomyError(f"{self.dimension_id}: binary dimensions take no sentinel")
        if self.answer_mode is AnswerMode.SUBCLASS_INDEXED:
            if any(l.subclass_index is None for l in self.labels):
                raise TaxonomyError(f"{self.dimension_id}: every label needs a subclass index")
        if self.prompt_template and not self.template_history:
            self.template_history = [self.prompt_template]

    # -- vocabulary --------------------------------------------------------

    def valid_labels(self) -> tuple[str, ...]:
        """The label strings assignments carry: subclass indices for
        subclass_indexed dimensions, label names otherwise."""
        if self.answer_mode is AnswerMode.SUBCLASS_INDEXED:
            return tuple(l.subclass_index for l in self.labels)  # type: ignore[misc]
        return tuple(l.label for l in self.labels)

    def sentinel_label(self) -> str:
        for l in self.labels:
            if l.sentinel:
                return l.subclass_index if self.answer_mode is AnswerMode.SUBCLASS_INDEXED else l.label
        raise TaxonomyError(f"{self.dimension_id} has no sentinel label")

    def rollup_map(self) -> dict[str, int]:
        return {l.subclass_index: l.parent_class for l in self.labels
                if l.subclass_index is not None}

    def rollup(self, subclass_index: str) -> int:
        """Top-level class for a subclass index (its integer prefix)."""
        mapping = self.rollup_map()
        if subclass_index not in mapping:
            raise UnknownSubclassError(subclass_index)
        return mapping[subclass_index]

    # -- prompts -----------------------------------------------------------

    def render_prompt(self, abstract: str) -> str:
        if self.answer_mode is AnswerMode.TEXT_MAPPED or self.prompt_template is None:
            raise PromptRenderError(f"{self.dimension_id} is text-mapped and has no prompt")
        if not abstract.strip():
            raise PromptRenderError("abstract is empty")
        return self.prompt_template.render(abstract)

    def template_version(self, version: int) -> PromptTemplate:
        for t in self.template_history:
            if t.version == version:
                return t
        raise TaxonomyError(f"{self.dimension_id} has no template version {version}")

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "dimension_id": self.dimension_id,
            "name": self.name,
            "answer_mode": self.answer_mode.value,
            "labels": [l.to_dict() for l in self.labels],
            "prompt_template": self.prompt_template.to_dict() if self.prompt_template else None,
            "depends_on": self.depends_on,
            "label_aliases": dict(self.label_aliases),
            "template_history": [t.to_dict() for t in self.template_history],
            "edits": [e.to_dict() for e in self.edits],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "TaxonomyDimension":
        return cls(
            dimension_id=d["dimension_id"],
            name=d["name"],
            answer_mode=AnswerMode(d["answer_mode"]),
            labels=tuple(LabelDef.from_dict(x) for x in d["labels"]),
            prompt_template=PromptTemplate.from_dict(d["prompt_template"]) if d.get("prompt_template") else None,
            depends_on=d.get("depends_on"),
            label_aliases=dict(d.get("label_aliases") or {}),
            template_history=[PromptTemplate.from_dict(x) for x in d.get("template_history", [])],
            edits=[EditRecord.from_dict(x) for x in d.get("edits", [])],
        )

    def __eq__(self, other) -> bool:
        if not isinstance(other, TaxonomyDimension):
            return NotImplemented
        return self.to_dict() == other.to_dict()


class Taxonomy:
    """Ordered dimension registry with single-writer template versioning."""

    def __init__(self, dimensions: list[TaxonomyDimension]):
        self._dims: dict[str, TaxonomyDimension] = {}
        for d in dimensions:
            if d.dimension_id in self._dims:
                raise TaxonomyError(f"duplicate dimension id {d.dimension_id}")
            self._dims[d.dimension_id] = d

    def __iter__(self):
        return iter(self._dims.values())

    def __len__(self) -> int:
        return len(self._dims)

    def ids(self) -> list[str]:
        return list(self._dims)

    def dimension(self, dimension_id: str) -> TaxonomyDimension:
        try:
            return self._dims[dimension_id]
        except KeyError:
            raise UnknownDimensionError(dimension_id) from None

    def edit_constraints(self, dimension_id: str, new_constraints: list[str],
                         editor: str, now: datetime | None = None) -> PromptTemplate:
        """Create the next template version with the given constraint lines.
        Identical content still creates a new version (audit trail)."""
        dim = self.dimension(dimension_id)
        if dim.answer_mode is AnswerMode.TEXT_MAPPED or dim.prompt_template is None:
            raise TaxonomyError(f"{dimension_id} is text-mapped and has no prompt to edit")
        new_template = replace(
            dim.prompt_template,
            version=dim.prompt_template.version + 1,
            constraints=tuple(new_constraints),
        )
        dim.template_history.append(new_template)
        dim.prompt_template = new_template
        dim.edits.append(EditRecord(
            version=new_template.version,
            editor=editor,
            edited_at=now or datetime.now(timezone.utc),
        ))
        return new_template

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {"dimensions": [d.to_dict() for d in self._dims.values()]}

    @classmethod
    def from_dict(cls, d: dict) -> "Taxonomy":
        return cls([TaxonomyDimension.from_dict(x) for x in d["dimensions"]])

    def __eq__(self, other) -> bool:
        if not isinstance(other, Taxonomy):
            return NotImplemented
        return self.to_dict() == other.to_dict()

    def to_yaml(self) -> str:
        """Human-editable form: one YAML document per dimension, current
        template only."""
        docs = []
        for d in self._dims.values():
            doc = {
                "dimension_id": d.dimension_id,
                "name": d.name,
                "answer_mode": d.answer_mode.value,
                "depends_on": d.depends_on,
                "labels": [_label_yaml(l) for l in d.labels],
            }
            if d.label_aliases:
                doc["label_aliases"] = dict(d.label_aliases)
            if d.prompt_template:
                doc["prompt"] = {
                    "version": d.prompt_template.version,
                    "preamble": d.prompt_template.preamble,
                    "constraints": list(d.prompt_template.constraints),
                    "output_format_instruction": d.prompt_template.output_format_instruction,
                }
            docs.append(doc)
        return yaml.safe_dump_all(docs, sort_keys=False, allow_unicode=True, width=10_000)

    @classmethod
    def from_yaml(cls, text: str) -> "Taxonomy":
        dims = []
        for doc in yaml.safe_load_all(text):
            if doc is None:
                continue
            prompt = None
            if doc.get("prompt"):
                p = doc["prompt"]
                prompt = PromptTemplate(
                    version=int(p.get("version", 1)),
                    preamble=p["preamble"],
                    constraints=tuple(p.get("constraints") or ()),
                    output_format_instruction=p.get("output_format_instruction", ""),
                )
            dims.append(TaxonomyDimension(
                dimension_id=doc["dimension_id"],
                name=doc["name"],
                answer_mode=AnswerMode(doc["answer_mode"]),
                labels=tuple(LabelDef.from_dict(x) for x in doc.get("labels", [])),
                prompt_template=prompt,
                depends_on=doc.get("depends_on"),
                label_aliases=dict(doc.get("label_aliases") or {}),
            ))
        return cls(dims)


def _label_yaml(l: LabelDef) -> dict:
    d: dict = {"label": l.label}
    if l.subclass_index is not None:
        d["subclass_index"] = l.subclass_index
    if l.keywords:
        d["keywords"] = list(l.keywords)
    if l.sentinel:
        d["sentinel"] = True
    return d


def builtin_option_pricing_taxonomy() -> Taxonomy:
    """The four shipped option-pricing dimensions, loaded from package data."""
    text = resources.files("litreview").joinpath("data/option_pricing_taxonomy.yaml").read_text("utf-8")
    return Taxonomy.from_yaml(text)


def load_taxonomy_file(path: str | Path) -> Taxonomy:
    return Taxonomy.from_yaml(Path(path).read_text("utf-8"))


def save_taxonomy_file(taxonomy: Taxonomy, path: str | Path) -> None:
    Path(path).write_text(taxonomy.to_yaml(), "utf-8")
