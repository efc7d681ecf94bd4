"""Score combination over hypotheses and n-best rescoring.

A hypothesis with first-pass score base, word count |w|, reward-FST score
usf, and external LM score nlm is ranked by

    (base + alpha * usf) / max(1, |w|) + beta * nlm + gamma * |w|

The alpha term can be contributed on the fly during beam search (summed
per-extension deltas) or computed at second pass; both routes yield the same
total for a complete hypothesis.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from functools import partial
from typing import Iterable, Sequence

from usfkit.errors import ConfigError, ParseError, TokenError
from usfkit.fst import SUBWORD_LEVEL, WORD_LEVEL, UnigramFst, split_weight
from usfkit.util import atomic_write, check_finite, norm_token, parallel_map

ON_THE_FLY = "on_the_fly"
SECOND_PASS = "second_pass"
STAGES = (ON_THE_FLY, SECOND_PASS)

DEFAULT_MARKER = "▁"  # leading-marker convention for word starts
DEFAULT_ALPHA = 0.75


@dataclass
class Hypothesis:
    """One candidate transcript with its scores."""

    words: tuple[str, ...]
    base_logprob: float
    subwords: tuple[str, ...] | None = None
    nlm_logprob: float | None = None
    usf_logprob: float = 0.0
    combined: float | None = None

    @property
    def word_count(self) -> int:
        return len(self.words)

    @property
    def text(self) -> str:
        return " ".join(self.words)


@dataclass
class NBestList:
    utt_id: str
    hyps: list[Hypothesis]
    reference: tuple[str, ...] | None = None


@dataclass(frozen=True)
class FusionParams:
    alpha: float = DEFAULT_ALPHA
    beta: float = 0.0
    gamma: float = 0.0
    level: str = WORD_LEVEL
    usf_stage: str = SECOND_PASS
    marker: str = DEFAULT_MARKER

    def __post_init__(self):
        check_finite(self.alpha, "alpha")
        check_finite(self.beta, "beta")
        check_finite(self.gamma, "gamma")
        if self.alpha < 0 or self.beta < 0:
            raise ConfigError("alpha and beta must be >= 0")
        if self.level not in (WORD_LEVEL, SUBWORD_LEVEL):
            raise ConfigError(f"unknown level {self.level!r}")
        if self.usf_stage not in STAGES:
            raise ConfigError(f"unknown stage {self.usf_stage!r}")


@dataclass
class LmScoreSource:
    """External-LM stand-in: attached per-hypothesis scores, or a tiny add-k n-gram.

    The builtin n-gram (order <= 2) assigns a finite log-probability to every
    word sequence; the first word of a bigram-order sequence is scored by the
    unigram estimate.
    """

    ATTACHED = "file_attached"
    NGRAM = "builtin_ngram"

    kind: str = ATTACHED
    order: int = 1
    add_k: float = 1.0
    unigram: dict[str, int] = field(default_factory=dict)
    bigram: dict[tuple[str, str], int] = field(default_factory=dict)
    total_tokens: int = 0
    vocab_size: int = 0

    @classmethod
    def attached(cls) -> "LmScoreSource":
        return cls(kind=cls.ATTACHED)

    @classmethod
    def ngram_from_corpus(
        cls, lines: Iterable[str], order: int = 1, add_k: float = 1.0
    ) -> "LmScoreSource":
        if order not in (1, 2):
            raise ConfigError(f"builtin n-gram supports order 1 or 2, got {order}")
        if not add_k > 0:
            raise ConfigError(f"smoothing constant must be > 0, got {add_k}")
        unigram: dict[str, int] = {}
        bigram: dict[tuple[str, str], int] = {}
        total = 0
        for line in lines:
            prev = None
            for raw in line.split():
                tok = norm_token(raw)
                unigram[tok] = unigram.get(tok, 0) + 1
                total += 1
                if prev is not None:
                    bigram[(prev, tok)] = bigram.get((prev, tok), 0) + 1
                prev = tok
        if total == 0:
            raise ConfigError("cannot fit an n-gram on an empty corpus")
        return cls(
            kind=cls.NGRAM,
            order=order,
            add_k=add_k,
            unigram=unigram,
            bigram=bigram,
            total_tokens=total,
            vocab_size=len(unigram),
        )

    def sequence_logprob(self, words: Sequence[str]) -> float:
        if self.kind != self.NGRAM:
            raise ConfigError("sequence_logprob is only defined for the builtin n-gram")
        k, v = self.add_k, self.vocab_size
        total = 0.0
        prev = None
        for raw in words:
            w = norm_token(raw)
            if self.order == 1 or prev is None:
                p = (self.unigram.get(w, 0) + k) / (self.total_tokens + k * v)
            else:
                p = (self.bigram.get((prev, w), 0) + k) / (self.unigram.get(prev, 0) + k * v)
            total += math.log(p)
            prev = w
        return total


def builtin_ngram_score(lm: LmScoreSource, words: Sequence[str]) -> float:
    return lm.sequence_logprob(words)


def split_subwords_into_words(
    subwords: Sequence[str], marker: str = DEFAULT_MARKER
) -> list[tuple[str, ...]]:
    """Group a unit sequence into per-word unit paths; a leading marker starts a word."""
    groups: list[tuple[str, ...]] = []
    cur: list[str] = []
    for unit in subwords:
        if unit.startswith(marker):
            if cur:
                groups.append(tuple(cur))
            cur = []
            unit = unit[len(marker) :]
            if not unit:
                continue
        cur.append(unit)
    if cur:
        groups.append(tuple(cur))
    return groups


def subword_sequence_logprob(
    subwords: Sequence[str], fst: UnigramFst, marker: str = DEFAULT_MARKER
) -> float:
    """log P_USF of a unit sequence against a subword-level FST.

    A completed word contributes -arc_weight only when its unit path equals the
    stored expansion; anything else nets exactly 0 (cancellation on failure).
    """
    if fst.level != SUBWORD_LEVEL:
        raise ConfigError("subword scoring requires a subword-level FST")
    total = 0.0
    for units in split_subwords_into_words(subwords, marker):
        text = "".join(units)
        expansion = fst.subword_expansion.get(text)
        if expansion is not None and expansion == units:
            total += -fst.entries[text]
    return total


def usf_sequence_logprob(h: Hypothesis, params: FusionParams, fst: UnigramFst) -> float:
    """log P_USF(y) for a complete hypothesis at the configured level."""
    if params.level == WORD_LEVEL:
        return fst.score_sequence(h.words)
    if h.subwords is None:
        raise ConfigError(
            f"subword-level fusion needs unit sequences, none on hypothesis {h.text!r}"
        )
    return subword_sequence_logprob(h.subwords, fst, params.marker)


def _nlm_logprob(h: Hypothesis, lm: LmScoreSource | None) -> float:
    if lm is None:
        raise ConfigError("beta > 0 requires an LM score source")
    if lm.kind == LmScoreSource.ATTACHED:
        if h.nlm_logprob is None:
            raise ConfigError(f"hypothesis {h.text!r} has no attached LM score")
        return h.nlm_logprob
    return lm.sequence_logprob(h.words)


def combined_score(
    h: Hypothesis,
    params: FusionParams,
    fst: UnigramFst | None,
    lm: LmScoreSource | None = None,
) -> float:
    """Score one hypothesis and cache the result on it.

    With usf_stage == on_the_fly, base_logprob is taken to already contain the
    alpha term (the decoder summed the per-extension deltas), so it is not
    added again.
    """
    if fst is not None and params.level != fst.level:
        raise ConfigError(f"params level {params.level!r} != FST level {fst.level!r}")
    numer = h.base_logprob
    if params.usf_stage == SECOND_PASS and fst is not None:
        usf = usf_sequence_logprob(h, params, fst)
        h.usf_logprob = usf
        numer += params.alpha * usf
    score = numer / max(1, h.word_count)
    if params.beta != 0.0:
        score += params.beta * _nlm_logprob(h, lm)
    if params.gamma != 0.0:
        score += params.gamma * h.word_count
    h.combined = score
    return score


def rescore_nbest(
    nb: NBestList,
    params: FusionParams,
    fst: UnigramFst | None,
    lm: LmScoreSource | None = None,
) -> NBestList:
    """Re-rank by combined score, descending; ties keep the original rank.

    Pure: the input list and its hypotheses are left untouched.
    """
    if not nb.hyps:
        raise ValueError(f"empty n-best list for utterance {nb.utt_id!r}")
    rescored = [replace(h) for h in nb.hyps]
    for h in rescored:
        combined_score(h, params, fst, lm)
    rescored.sort(key=lambda h: h.combined, reverse=True)
    return NBestList(utt_id=nb.utt_id, hyps=rescored, reference=nb.reference)


def _rescore_one(nb, params, fst, lm):
    return rescore_nbest(nb, params, fst, lm)


def rescore_dataset(
    lists: Sequence[NBestList],
    params: FusionParams,
    fst: UnigramFst | None,
    lm: LmScoreSource | None = None,
    jobs: int = 1,
) -> list[NBestList]:
    """Rescore every utterance; parallelizes across utterances, order preserved."""
    fn = partial(_rescore_one, params=params, fst=fst, lm=lm)
    return parallel_map(fn, lists, jobs=jobs)


class FusionAutomaton:
    """Incremental on-the-fly fusion scorer with immutable, copy-free states.

    Word level: a state is the unit path of the open word; the reward lands
    when a boundary completes a matched word. Subword level: a state is a trie
    position plus the pending partial reward, which is paid out per unit along
    a stored path, corrected at word completion, and cancelled when the path
    dies. Summed over a complete hypothesis, the deltas equal
    alpha * log P_USF of the second pass.
    """

    _DEAD = -1

    def __init__(self, fst: UnigramFst, alpha: float, marker: str = DEFAULT_MARKER):
        self.fst = fst
        self.alpha = check_finite(alpha, "alpha")
        self.marker = marker
        if fst.level == SUBWORD_LEVEL:
            self._build_trie()

    def _build_trie(self) -> None:
        self._arcs: list[dict[str, int]] = [{}]
        self._partial: list[float] = [0.0]
        self._terminal: list[float | None] = [None]
        for word in sorted(self.fst.entries):
            units = self.fst.subword_expansion[word]
            reward = -self.fst.entries[word]
            node = 0
            for depth, unit in enumerate(units, start=1):
                nxt = self._arcs[node].get(unit)
                share = reward * depth / len(units)
                if nxt is None:
                    nxt = len(self._arcs)
                    self._arcs[node][unit] = nxt
                    self._arcs.append({})
                    self._partial.append(share)
                    self._terminal.append(None)
                else:
                    self._partial[nxt] = max(self._partial[nxt], share)
                node = nxt
            self._terminal[node] = reward

    def start(self) -> tuple:
        if self.fst.level == WORD_LEVEL:
            return ()
        return (0, 0.0)

    def _close(self, state) -> float:
        if self.fst.level == WORD_LEVEL:
            if not state:
                return 0.0
            return self.alpha * self.fst.lookup("".join(state)).log_reward
        node, pending = state
        if node != self._DEAD and self._terminal[node] is not None:
            return self.alpha * (self._terminal[node] - pending)
        return self.alpha * (-pending)

    def step(self, state, unit: str) -> tuple[tuple, float]:
        """Consume one unit; returns (next state, score delta)."""
        delta = 0.0
        if unit.startswith(self.marker):
            delta += self._close(state)
            state = self.start()
            unit = unit[len(self.marker) :]
            if not unit:
                return state, delta
        if self.fst.level == WORD_LEVEL:
            return state + (unit,), delta
        node, pending = state
        if node == self._DEAD:
            return state, delta
        child = self._arcs[node].get(unit)
        if child is None:
            delta += self.alpha * (-pending)
            return (self._DEAD, 0.0), delta
        delta += self.alpha * (self._partial[child] - pending)
        return (child, self._partial[child]), delta

    def finish(self, state) -> float:
        """Close the open word at end of hypothesis."""
        return self._close(state)


class OnTheFlyFusion:
    """Stateful convenience wrapper around FusionAutomaton for a single hypothesis."""

    def __init__(self, fst: UnigramFst, alpha: float, marker: str = DEFAULT_MARKER):
        self._auto = FusionAutomaton(fst, alpha, marker)
        self._state = self._auto.start()

    def feed_word(self, word: str) -> float:
        """Delta for completing `word` at a boundary (word-level FSTs only)."""
        if self._auto.fst.level != WORD_LEVEL:
            raise ConfigError("feed_word requires a word-level FST; feed units instead")
        return self._auto.alpha * self._auto.fst.lookup(word).log_reward

    def feed_unit(self, unit: str) -> float:
        self._state, delta = self._auto.step(self._state, unit)
        return delta

    def finish(self) -> float:
        delta = self._auto.finish(self._state)
        self._state = self._auto.start()
        return delta


def subword_unit_rewards(fst: UnigramFst, word: str) -> tuple[float, ...]:
    """Per-unit rewards along a stored word path (negated distributed weights)."""
    return tuple(-w for w in split_weight(fst.entries[norm_token(word)], len(fst.subword_expansion[norm_token(word)])))


def read_nbest(path) -> list[NBestList]:
    """Parse the n-best JSONL interface; schema violations report line numbers."""
    lists: list[NBestList] = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ParseError(f"invalid JSON: {exc.msg}", path, lineno) from exc
            if not isinstance(obj, dict):
                raise ParseError("expected a JSON object", path, lineno)
            utt_id = obj.get("utt_id")
            if not isinstance(utt_id, str) or not utt_id:
                raise ParseError("missing or empty 'utt_id'", path, lineno)
            if utt_id in seen:
                raise ParseError(f"duplicate utt_id {utt_id!r}", path, lineno)
            seen.add(utt_id)
            ref = obj.get("ref")
            if ref is not None and not isinstance(ref, str):
                raise ParseError("'ref' must be a string or null", path, lineno)
            raw_hyps = obj.get("hyps")
            if not isinstance(raw_hyps, list) or not raw_hyps:
                raise ParseError("'hyps' must be a non-empty array", path, lineno)
            hyps = []
            for idx, rh in enumerate(raw_hyps):
                hyps.append(_parse_hyp(rh, path, lineno, idx))
            reference = tuple(norm_token(t) for t in ref.split()) if ref is not None else None
            lists.append(NBestList(utt_id=utt_id, hyps=hyps, reference=reference))
    return lists


def _parse_hyp(obj, path, lineno, idx) -> Hypothesis:
    if not isinstance(obj, dict):
        raise ParseError(f"hyp #{idx} is not an object", path, lineno)
    text = obj.get("text")
    if not isinstance(text, str):
        raise ParseError(f"hyp #{idx}: 'text' must be a string", path, lineno)
    base = obj.get("base_logprob")
    if not isinstance(base, (int, float)) or isinstance(base, bool) or not math.isfinite(base):
        raise ParseError(f"hyp #{idx}: 'base_logprob' must be a finite number", path, lineno)
    subwords = obj.get("subwords")
    if subwords is not None:
        if not isinstance(subwords, list) or not all(isinstance(u, str) and u for u in subwords):
            raise ParseError(f"hyp #{idx}: 'subwords' must be an array of units", path, lineno)
        try:
            subwords = tuple(norm_token(u) for u in subwords)
        except TokenError as exc:
            raise ParseError(f"hyp #{idx}: bad subword unit: {exc}", path, lineno) from exc
    nlm = obj.get("nlm_logprob")
    if nlm is not None:
        if not isinstance(nlm, (int, float)) or isinstance(nlm, bool) or not math.isfinite(nlm):
            raise ParseError(f"hyp #{idx}: 'nlm_logprob' must be a finite number", path, lineno)
        nlm = float(nlm)
    combined = obj.get("combined")
    if combined is not None and not isinstance(combined, (int, float)):
        raise ParseError(f"hyp #{idx}: 'combined' must be a number", path, lineno)
    return Hypothesis(
        words=tuple(norm_token(t) for t in text.split()),
        base_logprob=float(base),
        subwords=subwords,
        nlm_logprob=nlm,
        combined=float(combined) if combined is not None else None,
    )


def _hyp_to_obj(h: Hypothesis) -> dict:
    obj = {
        "text": h.text,
        "subwords": list(h.subwords) if h.subwords is not None else None,
        "base_logprob": h.base_logprob,
        "nlm_logprob": h.nlm_logprob,
    }
    if h.combined is not None:
        obj["combined"] = h.combined
    return obj


def write_nbest(lists: Iterable[NBestList], path) -> None:
    with atomic_write(path) as fh:
        for nb in lists:
            obj = {
                "utt_id": nb.utt_id,
                "ref": " ".join(nb.reference) if nb.reference is not None else None,
                "hyps": [_hyp_to_obj(h) for h in nb.hyps],
            }
            fh.write(json.dumps(obj, ensure_ascii=False) + "\n")
