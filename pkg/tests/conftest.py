import sys
from pathlib import Path

import pytest

FIXTURES = Path(__file__).parent / "fixtures"
sys.path.insert(0, str(Path(__file__).parent))

from litreview.corpus import Corpus
from litreview.gateway import mock_gateway
from litreview.taxonomy import builtin_option_pricing_taxonomy


@pytest.fixture
def taxonomy():
    return builtin_option_pricing_taxonomy()


@pytest.fixture
def e2e_corpus_path():
    return FIXTURES / "e2e" / "corpus.csv"


@pytest.fixture
def mock_script_path():
    return FIXTURES / "e2e" / "mock_script.json"


@pytest.fixture
def ingest20_path():
    return FIXTURES / "ingest20.csv"


@pytest.fixture
def e2e_corpus(e2e_corpus_path):
    corpus = Corpus("main")
    corpus.ingest_export(e2e_corpus_path, "scopus_csv")
    return corpus


@pytest.fixture
def gateway(mock_script_path):
    return mock_gateway(mock_script_path)
