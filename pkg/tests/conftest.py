import random
from pathlib import Path

import pytest

from mbtikit.data import LabeledExample
from mbtikit.tokenizer import build_vocab
from mbtikit.types import all_types

FIXTURES = Path(__file__).parent / "fixtures"

FILLER_WORDS = [
    "the", "a", "and", "but", "so", "we", "they", "go", "to", "is",
    "was", "on", "off", "very", "quite", "really", "today", "maybe",
]


def synthetic_corpus(posts_per_type: int, seed: int = 0,
                     keyword: bool = True) -> list[LabeledExample]:
    """Balanced 16-class corpus; each class optionally gets one
    type-distinctive keyword planted in every post."""
    rng = random.Random(seed)
    examples = []
    for t in all_types():
        kw = f"kw{t.letters.lower()}"
        for _ in range(posts_per_type):
            words = [rng.choice(FILLER_WORDS) for _ in range(10)]
            if keyword:
                words.insert(rng.randrange(len(words) + 1), kw)
            examples.append(LabeledExample(text=" ".join(words), label=t))
    return examples


@pytest.fixture(scope="session")
def fixtures_dir() -> Path:
    return FIXTURES


@pytest.fixture(scope="session")
def small_vocab():
    corpus = synthetic_corpus(4, seed=7)
    return build_vocab([ex.text for ex in corpus], size=300)
