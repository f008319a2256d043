import json

import pytest

from ctfair.data import Document
from ctfair.lexicon import default_lexicon, load_lexicon


@pytest.fixture(scope="session")
def lexicon():
    return default_lexicon()


@pytest.fixture(scope="session")
def tiny_lexicon():
    entries = [
        {"term": "muslim", "category": "religion", "variants": ["muslims"]},
        {"term": "jew", "category": "religion", "variants": ["jews", "jewish"]},
        {"term": "asian", "category": "race", "variants": ["asians"]},
        {"term": "african american", "category": "race", "variants": ["african americans"]},
    ]
    return load_lexicon(json.dumps(entries))


def make_doc(doc_id: str, text: str, label=None) -> Document:
    return Document.from_text(doc_id, text, label)
