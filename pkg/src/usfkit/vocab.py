"""Corpus unigram counts, reward-band selection, and subword segmentation.

The band rule keeps words whose training count lies in [2, n_thresh]:
singletons are dropped as likely spelling errors, very frequent words are
dropped because the first-pass model already handles them.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass
from typing import Iterable, Mapping

from usfkit.errors import (
    InventoryError,
    ParseError,
    SegmentationError,
    SegmentationOverflow,
    TokenError,
)
from usfkit.util import atomic_write, check_finite, logsumexp, norm_token

DEFAULT_N_THRESH = 250
DEFAULT_SEGMENTATION_CAP = 10_000


@dataclass(frozen=True)
class VocabCounts:
    """Unigram occurrence counts over a training corpus."""

    counts: dict[str, int]

    def __post_init__(self):
        for word, count in self.counts.items():
            if not isinstance(count, int) or count < 1:
                raise ValueError(f"count for {word!r} must be a positive integer, got {count!r}")

    @property
    def total_tokens(self) -> int:
        return sum(self.counts.values())

    @property
    def total_types(self) -> int:
        return len(self.counts)

    def __getitem__(self, word: str) -> int:
        return self.counts[word]

    def __contains__(self, word: str) -> bool:
        return word in self.counts


def count_unigrams(lines: Iterable[str], lowercase: bool = False) -> VocabCounts:
    """Count whitespace-separated tokens; order-independent and deterministic.

    Tokens are NFC-normalized; case is kept unless `lowercase` is set, since
    rare words are often cased entities.
    """
    counter: Counter[str] = Counter()
    for line in lines:
        for raw in line.split():
            tok = norm_token(raw)
            if lowercase:
                tok = tok.lower()
            counter[tok] += 1
    return VocabCounts(dict(counter))


def merge_counts(a: VocabCounts, b: VocabCounts) -> VocabCounts:
    """Commutative/associative merge, for sharded counting."""
    merged = Counter(a.counts)
    merged.update(b.counts)
    return VocabCounts(dict(merged))


def select_band(
    counts: VocabCounts,
    n_thresh: int = DEFAULT_N_THRESH,
    include_all_above_one: bool = False,
) -> set[str]:
    """Words with count in [2, n_thresh], or every word with count >= 2 when the flag is set."""
    if include_all_above_one:
        return {w for w, c in counts.counts.items() if c >= 2}
    if n_thresh < 2:
        raise ValueError(f"n_thresh must be >= 2, got {n_thresh}")
    return {w for w, c in counts.counts.items() if 2 <= c <= n_thresh}


def write_counts(counts: VocabCounts, path) -> None:
    """TSV `word<TAB>count`, sorted by descending count then word."""
    with atomic_write(path) as fh:
        for word, count in sorted(counts.counts.items(), key=lambda kv: (-kv[1], kv[0])):
            fh.write(f"{word}\t{count}\n")


def read_counts(path) -> VocabCounts:
    counts: dict[str, int] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", path, lineno)
            word, count_str = fields
            try:
                word = norm_token(word)
                count = int(count_str)
            except (ValueError, TokenError) as exc:
                raise ParseError(f"bad counts line: {exc}", path, lineno) from exc
            if count < 1:
                raise ParseError(f"count must be >= 1, got {count}", path, lineno)
            if word in counts and counts[word] != count:
                raise ParseError(f"conflicting count for {word!r}", path, lineno)
            counts[word] = count
    return VocabCounts(counts)


class SubwordInventory:
    """A fixed set of subword units with per-unit log-probabilities.

    Every single character occurring in any unit must itself be a unit, which
    guarantees that every word over the inventory's alphabet is segmentable.
    """

    def __init__(self, unit_logprob: Mapping[str, float]):
        if not unit_logprob:
            raise InventoryError("empty inventory")
        units: dict[str, float] = {}
        for unit, lp in unit_logprob.items():
            unit = norm_token(unit)
            lp = check_finite(lp, f"logprob of unit {unit!r}")
            if lp > 0.0:
                raise InventoryError(f"unit {unit!r} has logprob {lp} > 0")
            units[unit] = lp
        for unit in units:
            for ch in unit:
                if ch not in units:
                    raise InventoryError(
                        f"character {ch!r} of unit {unit!r} is not itself a unit"
                    )
        self.unit_logprob: dict[str, float] = units
        self._max_len = max(len(u) for u in units)

    @classmethod
    def from_units(cls, units: Iterable[str], logprob: float | None = None) -> "SubwordInventory":
        """Build with uniform scores; defaults to log-uniform over the inventory."""
        unit_list = sorted({norm_token(u) for u in units})
        if not unit_list:
            raise InventoryError("empty inventory")
        lp = math.log(1.0 / len(unit_list)) if logprob is None else logprob
        return cls({u: lp for u in unit_list})

    @property
    def units(self) -> set[str]:
        return set(self.unit_logprob)

    def __contains__(self, unit: str) -> bool:
        return unit in self.unit_logprob

    def __len__(self) -> int:
        return len(self.unit_logprob)

    def matches_at(self, word: str, pos: int) -> list[str]:
        """Inventory units equal to a prefix of word[pos:], shortest first."""
        out = []
        limit = min(self._max_len, len(word) - pos)
        for length in range(1, limit + 1):
            piece = word[pos : pos + length]
            if piece in self.unit_logprob:
                out.append(piece)
        return out


def write_inventory(inv: SubwordInventory, path) -> None:
    """TSV `unit<TAB>logprob`, sorted by unit."""
    with atomic_write(path) as fh:
        for unit in sorted(inv.unit_logprob):
            fh.write(f"{unit}\t{inv.unit_logprob[unit]:.6f}\n")


def read_inventory(path) -> SubwordInventory:
    scores: dict[str, float] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", path, lineno)
            try:
                scores[fields[0]] = float(fields[1])
            except ValueError as exc:
                raise ParseError(f"bad logprob {fields[1]!r}", path, lineno) from exc
    try:
        return SubwordInventory(scores)
    except InventoryError as exc:
        raise ParseError(str(exc), path) from exc


@dataclass(frozen=True)
class Segmentation:
    """A decomposition of one word into inventory units."""

    units: tuple[str, ...]
    logprob: float

    def __len__(self) -> int:
        return len(self.units)


def _check_alphabet(word: str, inv: SubwordInventory) -> str:
    word = norm_token(word)
    for ch in word:
        if ch not in inv:
            raise SegmentationError(f"character {ch!r} of word {word!r} is not in the inventory")
    return word


def count_segmentations(word: str, inv: SubwordInventory) -> int:
    word = _check_alphabet(word, inv)
    n = len(word)
    ways = [0] * (n + 1)
    ways[0] = 1
    for i in range(n):
        if ways[i] == 0:
            continue
        for unit in inv.matches_at(word, i):
            ways[i + len(unit)] += ways[i]
    return ways[n]


def enumerate_segmentations(
    word: str, inv: SubwordInventory, cap: int = DEFAULT_SEGMENTATION_CAP
) -> list[Segmentation]:
    """Every distinct segmentation, sorted lexicographically by unit sequence.

    Raises SegmentationOverflow when the word has more than `cap` segmentations,
    before materializing any of them.
    """
    if cap < 1:
        raise ValueError(f"cap must be >= 1, got {cap}")
    word = _check_alphabet(word, inv)
    total = count_segmentations(word, inv)
    if total == 0:
        raise SegmentationError(f"word {word!r} is not segmentable")
    if total > cap:
        raise SegmentationOverflow(
            f"word {word!r} has {total} segmentations, exceeding cap {cap}", total
        )
    n = len(word)
    results: list[Segmentation] = []
    stack: list[str] = []

    def descend(pos: int, logprob: float) -> None:
        if pos == n:
            results.append(Segmentation(tuple(stack), logprob))
            return
        for unit in sorted(inv.matches_at(word, pos)):
            stack.append(unit)
            descend(pos + len(unit), logprob + inv.unit_logprob[unit])
            stack.pop()

    descend(0, 0.0)
    return results


def viterbi_segmentation(word: str, inv: SubwordInventory) -> Segmentation:
    """Highest-logprob segmentation; ties broken by fewer units, then by unit sequence."""
    word = _check_alphabet(word, inv)
    n = len(word)
    # per position: (logprob, unit count, units) of the best segmentation of word[:i]
    best: list[tuple[float, int, tuple[str, ...]] | None] = [None] * (n + 1)
    best[0] = (0.0, 0, ())
    for i in range(n):
        cur = best[i]
        if cur is None:
            continue
        lp0, cnt0, units0 = cur
        for unit in inv.matches_at(word, i):
            j = i + len(unit)
            cand = (lp0 + inv.unit_logprob[unit], cnt0 + 1, units0 + (unit,))
            prev = best[j]
            if (
                prev is None
                or cand[0] > prev[0]
                or (cand[0] == prev[0] and cand[1] < prev[1])
                or (cand[0] == prev[0] and cand[1] == prev[1] and cand[2] < prev[2])
            ):
                best[j] = cand
    if best[n] is None:
        raise SegmentationError(f"word {word!r} is not segmentable")
    lp, _, units = best[n]
    return Segmentation(units, lp)


def marginal_logprob(word: str, inv: SubwordInventory) -> float:
    """log-sum-exp of the logprob over all segmentations, without enumerating them.

    Computed positionwise in max + log1p form, so the result never drops below
    the Viterbi logprob.
    """
    word = _check_alphabet(word, inv)
    n = len(word)
    acc: list[float | None] = [None] * (n + 1)
    acc[0] = 0.0
    for i in range(1, n + 1):
        cands = []
        for j in range(max(0, i - inv._max_len), i):
            if acc[j] is None:
                continue
            unit = word[j:i]
            if unit in inv.unit_logprob:
                cands.append(acc[j] + inv.unit_logprob[unit])
        if cands:
            acc[i] = logsumexp(cands)
    if acc[n] is None:
        raise SegmentationError(f"word {word!r} is not segmentable")
    return acc[n]
