import random
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from usfkit.fst import build_unigram_fst
from usfkit.vocab import SubwordInventory


@pytest.fixture
def reward_fst():
    """The three-word reward FST with arc weight -1."""
    return build_unigram_fst({"highlife", "fission", "bacc"}, arc_weight=-1.0)


@pytest.fixture
def ab_inventory():
    return SubwordInventory({"a": -1.0, "b": -1.0, "ab": -1.5})


@pytest.fixture
def rng():
    return random.Random(20260809)


@pytest.fixture(scope="session")
def demo_dir(tmp_path_factory):
    """The seeded demo bundle plus derived counts and band FST."""
    from usfkit.cli import main
    from usfkit.demo import gen_demo

    root = tmp_path_factory.mktemp("demo")
    gen_demo(root, seed=0)
    assert main(["extract-vocab", "--corpus", str(root / "corpus.txt"),
                 "--out", str(root / "counts.tsv")]) == 0
    assert main(["build-fst", "--counts", str(root / "counts.tsv"),
                 "--out", str(root / "band.fst")]) == 0
    return root
