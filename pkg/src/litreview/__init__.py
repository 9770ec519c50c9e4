"""Human-in-the-loop literature review engine.

Pipeline: ingest bibliographic exports, classify papers along taxonomy
dimensions with constraint-augmented LLM prompts, evaluate against human
gold labels, and derive citation-network and temporal analyses from the
labeled corpus.
"""

__version__ = "0.1.0"

from .corpus import Corpus, CorpusDelta, PaperRecord, normalize_title, validate
from .taxonomy import Taxonomy, TaxonomyDimension, builtin_option_pricing_taxonomy

__all__ = [
    "Corpus",
    "CorpusDelta",
    "PaperRecord",
    "Taxonomy",
    "TaxonomyDimension",
    "builtin_option_pricing_taxonomy",
    "normalize_title",
    "validate",
    "__version__",
]
