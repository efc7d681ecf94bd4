"""Unigram reward FST with failure-arc ("otherwise") semantics.

Arc weights are tropical costs. A matched word contributes a log-reward of
-arc_weight to the fused score; any other word takes the zero-weight failure
arc and contributes exactly 0. With the conventional arc weight of -1, every
matched word is rewarded by +1 in log units.

At subword level each word additionally carries its Viterbi segmentation,
with the word's total weight distributed uniformly across the path's units
(the last unit absorbs the rounding remainder, so per-unit weights sum to
the word's arc weight exactly).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

from usfkit.errors import FstBuildError, ParseError, SegmentationError
from usfkit.util import atomic_write, norm_token
from usfkit.vocab import SubwordInventory, viterbi_segmentation

WORD_LEVEL = "word"
SUBWORD_LEVEL = "subword"
LEVELS = (WORD_LEVEL, SUBWORD_LEVEL)

_HEADER_PREFIX = "#usf-fst v1 level="


@dataclass(frozen=True)
class FusionReward:
    """Log-probability contribution of one lookup (0 on the failure arc)."""

    log_reward: float


ZERO_REWARD = FusionReward(0.0)


def split_weight(total: float, n_units: int) -> tuple[float, ...]:
    """Distribute a word's arc weight uniformly over n units, summing exactly."""
    share = total / n_units
    if n_units == 1:
        return (total,)
    return (share,) * (n_units - 1) + (total - share * (n_units - 1),)


@dataclass(frozen=True)
class UnigramFst:
    """Immutable word -> arc-weight map; safe for concurrent readers."""

    level: str
    entries: dict[str, float]
    subword_expansion: dict[str, tuple[str, ...]] | None = field(default=None)

    def __post_init__(self):
        if self.level not in LEVELS:
            raise FstBuildError(f"unknown level {self.level!r}")
        if not self.entries:
            raise FstBuildError("empty vocabulary")
        for word, weight in self.entries.items():
            if not math.isfinite(weight):
                raise FstBuildError(f"non-finite weight {weight!r} for {word!r}")
        if self.level == SUBWORD_LEVEL:
            if self.subword_expansion is None:
                raise FstBuildError("subword level requires unit expansions")
            for word in self.entries:
                units = self.subword_expansion.get(word)
                if not units:
                    raise FstBuildError(f"missing unit expansion for {word!r}")
                if "".join(units) != word:
                    raise FstBuildError(f"unit expansion of {word!r} does not spell the word")
        elif self.subword_expansion is not None:
            raise FstBuildError("word level must not carry unit expansions")

    def lookup(self, word: str) -> FusionReward:
        """Reward for one word; exactly 0 for anything outside the vocabulary."""
        weight = self.entries.get(norm_token(word))
        if weight is None:
            return ZERO_REWARD
        return FusionReward(-weight)

    def score_sequence(self, words: Iterable[str]) -> float:
        """Sum of per-word rewards; additive over concatenation."""
        return sum(self.lookup(w).log_reward for w in words)

    def unit_weights(self, word: str) -> tuple[float, ...]:
        """Per-unit weights of a word's subword path (sums to its arc weight)."""
        if self.level != SUBWORD_LEVEL:
            raise FstBuildError("unit_weights is only defined at subword level")
        word = norm_token(word)
        units = self.subword_expansion[word]
        return split_weight(self.entries[word], len(units))

    def __contains__(self, word: str) -> bool:
        return norm_token(word) in self.entries

    def __len__(self) -> int:
        return len(self.entries)


def build_unigram_fst(
    words: Iterable[str],
    arc_weight: float = -1.0,
    level: str = WORD_LEVEL,
    inventory: SubwordInventory | None = None,
) -> UnigramFst:
    """Build an FST whose entries are exactly `words`, each with `arc_weight`.

    Deterministic: identical inputs serialize byte-identically. Duplicate words
    are idempotent. At subword level every word is expanded to its Viterbi
    segmentation under `inventory`; an unsegmentable word is a build error
    naming the word.
    """
    if not math.isfinite(arc_weight):
        raise FstBuildError(f"arc weight must be finite, got {arc_weight!r}")
    if level not in LEVELS:
        raise FstBuildError(f"unknown level {level!r}")
    normed = sorted({norm_token(w) for w in words})
    if not normed:
        raise FstBuildError("empty vocabulary")
    entries = {w: float(arc_weight) for w in normed}
    expansion = None
    if level == SUBWORD_LEVEL:
        if inventory is None:
            raise FstBuildError("subword level requires a subword inventory")
        expansion = {}
        for w in normed:
            try:
                expansion[w] = viterbi_segmentation(w, inventory).units
            except SegmentationError as exc:
                raise FstBuildError(f"cannot segment word {w!r}: {exc}") from exc
    return UnigramFst(level=level, entries=entries, subword_expansion=expansion)


def serialize_fst(fst: UnigramFst) -> str:
    """Canonical text form: header, then one entry per line, sorted by word.

    Weights print with 6 decimal places; weights needing more precision are
    quantized by a round-trip.
    """
    lines = [f"{_HEADER_PREFIX}{fst.level}"]
    for word in sorted(fst.entries):
        weight = fst.entries[word]
        if fst.level == SUBWORD_LEVEL:
            units = " ".join(fst.subword_expansion[word])
            lines.append(f"{word}\t{weight:.6f}\t{units}")
        else:
            lines.append(f"{word}\t{weight:.6f}")
    return "\n".join(lines) + "\n"


def deserialize_fst(text: str, path=None) -> UnigramFst:
    lines = text.splitlines()
    if not lines or not lines[0].startswith(_HEADER_PREFIX):
        raise ParseError(f"missing header line {_HEADER_PREFIX!r}...", path, 1)
    level = lines[0][len(_HEADER_PREFIX) :]
    if level not in LEVELS:
        raise ParseError(f"unknown level {level!r} in header", path, 1)
    n_fields = 3 if level == SUBWORD_LEVEL else 2
    entries: dict[str, float] = {}
    expansion: dict[str, tuple[str, ...]] = {}
    for lineno, line in enumerate(lines[1:], start=2):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != n_fields:
            raise ParseError(
                f"expected {n_fields} tab-separated fields, got {len(fields)}", path, lineno
            )
        try:
            word = norm_token(fields[0])
        except Exception as exc:
            raise ParseError(f"bad word field: {exc}", path, lineno) from exc
        try:
            weight = float(fields[1])
        except ValueError as exc:
            raise ParseError(f"bad weight {fields[1]!r}", path, lineno) from exc
        if not math.isfinite(weight):
            raise ParseError(f"non-finite weight {fields[1]!r}", path, lineno)
        if word in entries:
            same_units = level != SUBWORD_LEVEL or expansion[word] == tuple(fields[2].split(" "))
            if entries[word] == weight and same_units:
                continue
            raise ParseError(f"duplicate word {word!r} with conflicting entry", path, lineno)
        entries[word] = weight
        if level == SUBWORD_LEVEL:
            units = tuple(fields[2].split(" "))
            if not all(units):
                raise ParseError("empty unit in expansion", path, lineno)
            if "".join(units) != word:
                raise ParseError(f"unit expansion does not spell {word!r}", path, lineno)
            expansion[word] = units
    if not entries:
        raise ParseError("empty vocabulary", path)
    return UnigramFst(
        level=level,
        entries=entries,
        subword_expansion=expansion if level == SUBWORD_LEVEL else None,
    )


def write_fst(fst: UnigramFst, path) -> None:
    with atomic_write(path) as fh:
        fh.write(serialize_fst(fst))


def read_fst(path) -> UnigramFst:
    with open(path, encoding="utf-8") as fh:
        return deserialize_fst(fh.read(), path=path)
