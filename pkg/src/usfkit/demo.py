"""Seeded synthetic dataset so the whole pipeline runs offline.

The generator plants four kinds of n-best confusions:

* fix-at-moderate-alpha: the reference holds a banded rare word, the top
  hypothesis replaced it with a frequent confuser; small base-score gaps
  (0.3 / 0.6) let moderate reward weights repair them,
* break-at-extreme-alpha: the wrong hypothesis holds a banded look-alike
  ("lyte" for "light") behind a 1.5 base gap, so only alpha = 2 flips it,
* break-under-all-words: the reference word is a training singleton (in no
  FST) while the confuser is frequent, so only the all-words FST boosts the
  wrong side,
* stable errors: confusers absent from training; no reward ever moves them.

Every hypothesis in a list has the same word count, so rankings reduce to
base + alpha * usf and the sweep shapes are provable by construction.
"""

from __future__ import annotations

import random
from pathlib import Path

from usfkit.fst import build_unigram_fst, write_fst
from usfkit.fusion import DEFAULT_MARKER, Hypothesis, NBestList, write_nbest
from usfkit.lab import EmissionModel, write_emission_model
from usfkit.util import atomic_write
from usfkit.vocab import SubwordInventory, viterbi_segmentation, write_inventory

COMMON_COUNT = 300  # above the default band threshold of 250

# banded rare words (training count in [2, 250]) with their exact counts
BAND_COUNTS = {
    "bacc": 5,
    "fission": 4,
    "highlife": 6,
    "zymurgy": 3,
    "improper": 4,
    "kalimba": 5,
    "brontide": 6,
    "lyte": 5,
    "lowd": 6,
    "mayl": 8,
    "zelkova": 3,
    "quokka": 4,
    "nabla": 5,
    "aurora": 4,
    "falafel": 9,
    "tempeh": 3,
    "dulcimer": 2,
}

# training singletons: removed from every FST by the no-singletons rule
SINGLETONS = (
    "xylophone", "kerfuffle", "obsidian", "farrago",
    "wombat", "gazebo", "ocarina", "teasel", "qwyjibo",
)

_TOP = -6.0
_BURIED = -56.0  # a correct hypothesis no grid weight can promote
_PAD = -15.0

# (ref, wrong word index, confuser, base gap, topmost hyp correct?)
_CASES = [
    # repaired once alpha * reward exceeds the 0.3 gap
    ("play bacc music now please", 1, "back", 0.3, False),
    ("show me fission videos now", 2, "fishing", 0.3, False),
    ("play highlife music again please", 1, "headline", 0.3, False),
    ("search for zymurgy videos now", 2, "symphony", 0.3, False),
    # repaired from alpha = 0.75 on
    ("play improper song again please", 1, "proper", 0.6, False),
    ("play kalimba music now please", 1, "marimba", 0.6, False),
    ("search for brontide videos now", 2, "bromide", 0.6, False),
    # banded look-alike behind a 1.5 gap: only alpha = 2 flips it (wrongly)
    ("zelkova turn the light on", 3, "lyte", 1.5, True),
    ("quokka play the loud song", 3, "lowd", 1.5, True),
    ("nabla check the mail now", 3, "mayl", 1.5, True),
    # frequent confuser vs singleton reference word: broken only by --all
    ("play xylophone music now please", 1, "saxophone", 0.3, True),
    ("show me kerfuffle videos now", 2, "shuffle", 0.3, True),
    ("search for obsidian videos now", 2, "meridian", 0.3, True),
    ("play farrago music again please", 1, "fandango", 0.3, True),
]

# stable errors: the confuser never occurs in training, the correct
# hypothesis is buried (or absent), so no grid weight changes them
_STABLE_RARE = [
    ("show me wombat videos now", 2, "wambat", True),
    ("play gazebo music now please", 1, "gazeebo", True),
    ("search for ocarina videos now", 2, "okarina", False),
    ("play teasel music again please", 1, "teazel", False),
]
_STABLE_GENERAL_REF = "play the music now please"
_STABLE_GENERAL = [(2, "muzik", True)] * 6

_CLEAN_RARE = [
    "show me aurora videos now",
    "play falafel music now please",
    "play tempeh song again please",
    "show me dulcimer videos please",
]
_CLEAN_GENERAL = ["play the next song now"] * 5 + ["turn the volume up please"] * 5

N_BEST = 8


def _substitute(words: tuple[str, ...], idx: int, repl: str) -> tuple[str, ...]:
    return words[:idx] + (repl,) + words[idx + 1 :]


def _pads(ref: tuple[str, ...], case_no: int, count: int) -> list[Hypothesis]:
    out = []
    for rank in range(count):
        words = list(ref)
        words[1] = f"zq{case_no}x{rank}a"
        words[3] = f"zq{case_no}x{rank}b"
        out.append(Hypothesis(words=tuple(words), base_logprob=_PAD - rank))
    return out


def _confusion_list(ref: tuple[str, ...], idx: int, confuser: str, gap: float,
                    top_correct: bool, case_no: int) -> list[Hypothesis]:
    wrong = _substitute(ref, idx, confuser)
    first, second = (ref, wrong) if top_correct else (wrong, ref)
    return [
        Hypothesis(words=first, base_logprob=_TOP),
        Hypothesis(words=second, base_logprob=_TOP - gap),
    ] + _pads(ref, case_no, N_BEST - 2)


def _stable_list(ref: tuple[str, ...], idx: int, confuser: str,
                 keep_correct: bool, case_no: int) -> list[Hypothesis]:
    wrong = Hypothesis(words=_substitute(ref, idx, confuser), base_logprob=_TOP)
    if keep_correct:
        pads = _pads(ref, case_no, N_BEST - 2)
        return [wrong] + pads + [Hypothesis(words=ref, base_logprob=_BURIED)]
    return [wrong] + _pads(ref, case_no, N_BEST - 1)


def _clean_list(ref: tuple[str, ...], case_no: int) -> list[Hypothesis]:
    near = Hypothesis(words=_substitute(ref, 2, f"zq{case_no}near"), base_logprob=_TOP - 0.4)
    return [Hypothesis(words=ref, base_logprob=_TOP), near] + _pads(ref, case_no, N_BEST - 2)


# confusers that must stay out of training entirely
_JUNK = {"wambat", "gazeebo", "okarina", "teazel", "muzik"}


def _build_nbest() -> list[NBestList]:
    lists = []
    case_no = 0
    for ref_text, idx, confuser, gap, top_correct in _CASES:
        ref = tuple(ref_text.split())
        lists.append(NBestList("", _confusion_list(ref, idx, confuser, gap, top_correct, case_no), ref))
        case_no += 1
    for ref_text, idx, confuser, keep_correct in _STABLE_RARE:
        ref = tuple(ref_text.split())
        lists.append(NBestList("", _stable_list(ref, idx, confuser, keep_correct, case_no), ref))
        case_no += 1
    for idx, confuser, keep_correct in _STABLE_GENERAL:
        ref = tuple(_STABLE_GENERAL_REF.split())
        lists.append(NBestList("", _stable_list(ref, idx, confuser, keep_correct, case_no), ref))
        case_no += 1
    for ref_text in _CLEAN_RARE + _CLEAN_GENERAL:
        ref = tuple(ref_text.split())
        lists.append(NBestList("", _clean_list(ref, case_no), ref))
        case_no += 1
    return lists


def _train_counts(lists: list[NBestList]) -> dict[str, int]:
    """Common words get COMMON_COUNT; banded and singleton words their planted counts."""
    counts = dict(BAND_COUNTS)
    for w in SINGLETONS:
        counts[w] = 1
    vocab = set()
    for nb in lists:
        vocab.update(nb.reference)
        for h in nb.hyps:
            vocab.update(h.words)
    for w in sorted(vocab):
        if w not in counts and not w.startswith("zq") and w not in _JUNK:
            counts[w] = COMMON_COUNT
    return counts


def _demo_inventory(lists: list[NBestList]) -> SubwordInventory:
    chars = set()
    for nb in lists:
        for h in nb.hyps + [Hypothesis(words=nb.reference, base_logprob=0.0)]:
            for w in h.words:
                chars.update(w)
    scores = {ch: -3.5 for ch in chars}
    for w in BAND_COUNTS:
        scores[w] = -2.0
    return SubwordInventory(scores)


def _attach_subwords(lists: list[NBestList], inv: SubwordInventory) -> None:
    cache: dict[str, tuple[str, ...]] = {}
    for nb in lists:
        for h in nb.hyps:
            units: list[str] = []
            for w in h.words:
                segs = cache.get(w)
                if segs is None:
                    segs = viterbi_segmentation(w, inv).units
                    cache[w] = segs
                units.append(DEFAULT_MARKER + segs[0])
                units.extend(segs[1:])
            h.subwords = tuple(units)


def _lab_emission_model() -> EmissionModel:
    units = ["a", "ab", "ad", "b", "d", "</s>"]
    rows = [
        [1 / 3, 4 / 15, 3 / 10, 0.04, 0.04, 0.02],
        [0.08, 0.08, 0.08, 0.25, 0.01, 0.50],
    ]
    return EmissionModel.from_probs(units, rows, end_unit="</s>")


def gen_demo(out_dir, seed: int = 0) -> dict[str, Path]:
    """Write the full synthetic bundle; byte-identical for identical seeds."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(seed)

    lists = _build_nbest()
    rng.shuffle(lists)
    for i, nb in enumerate(lists):
        nb.utt_id = f"utt-{i:04d}"

    counts = _train_counts(lists)
    bag: list[str] = []
    for word in sorted(counts):
        bag.extend([word] * counts[word])
    rng.shuffle(bag)

    paths = {
        "corpus": out / "corpus.txt",
        "nbest": out / "nbest.jsonl",
        "refs": out / "refs.tsv",
        "inventory": out / "inventory.tsv",
        "lab_model": out / "lab_model.json",
        "lab_lexicon": out / "lab_lexicon.txt",
        "lab_fst": out / "lab_fst.txt",
    }

    with atomic_write(paths["corpus"]) as fh:
        for i in range(0, len(bag), 8):
            fh.write(" ".join(bag[i : i + 8]) + "\n")

    inv = _demo_inventory(lists)
    _attach_subwords(lists, inv)
    write_inventory(inv, paths["inventory"])
    write_nbest(lists, paths["nbest"])

    with atomic_write(paths["refs"]) as fh:
        for nb in lists:
            fh.write(f"{nb.utt_id}\t{' '.join(nb.reference)}\n")

    write_emission_model(_lab_emission_model(), paths["lab_model"])
    with atomic_write(paths["lab_lexicon"]) as fh:
        for word in ("ab", "ad", "b"):
            fh.write(word + "\n")
    write_fst(build_unigram_fst({"ab"}, arc_weight=-1.0), paths["lab_fst"])
    return paths
