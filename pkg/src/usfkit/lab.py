"""Desk-scale subword decoder that makes segmentation search errors observable.

A word's exact posterior sums the probabilities of all of its unit
segmentations; Viterbi (max) decoding keeps only the best one. When a
competitor word concentrates its mass on a single segmentation, max decoding
can pick it even though the summed posterior prefers the other word. A reward
FST with a large enough weight flips the max decision back, which is the
effect this module quantifies per word.

The emission model factorizes per position: a T x U table of log-probabilities
with row-normalized entries; sequences shorter than T are padded with a
designated end unit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from usfkit.errors import ConfigError, ParseError
from usfkit.fst import UnigramFst
from usfkit.fusion import FusionAutomaton, Hypothesis, NBestList
from usfkit.util import atomic_write, logsumexp, norm_token
from usfkit.vocab import Segmentation, SubwordInventory, enumerate_segmentations

DEFAULT_END_UNIT = "</s>"
DEFAULT_ALPHA_GRID = (0.25, 0.5, 0.75, 1.0, 2.0)
_ROW_NORM_TOL = 1e-9


class EmissionModel:
    """Position-factorized log-probabilities over a unit alphabet."""

    def __init__(self, units, log_table, end_unit: str | None = None):
        self.units: tuple[str, ...] = tuple(units)
        if len(set(self.units)) != len(self.units):
            raise ConfigError("duplicate units in emission model")
        table = np.asarray(log_table, dtype=float)
        if table.ndim != 2 or table.shape[1] != len(self.units):
            raise ConfigError(
                f"log_table must be steps x {len(self.units)}, got shape {table.shape}"
            )
        if not np.all(np.isfinite(table)):
            raise ConfigError("log_table entries must be finite")
        for i, row in enumerate(table):
            norm = logsumexp(row.tolist())
            if abs(norm) > _ROW_NORM_TOL:
                raise ConfigError(f"row {i} is not normalized (log-sum-exp = {norm:.3e})")
        self.log_table = table
        self.end_unit = self.units[-1] if end_unit is None else end_unit
        if self.end_unit not in self.units:
            raise ConfigError(f"end unit {self.end_unit!r} is not a model unit")
        self._index = {u: k for k, u in enumerate(self.units)}

    @property
    def steps(self) -> int:
        return int(self.log_table.shape[0])

    @classmethod
    def from_probs(cls, units, prob_rows, end_unit: str | None = None) -> "EmissionModel":
        rows = [[math.log(p) for p in row] for row in prob_rows]
        return cls(units, rows, end_unit=end_unit)

    def segmentation_inventory(self) -> SubwordInventory:
        """The non-end units, log-uniform scored, for building lexicons."""
        return SubwordInventory.from_units(u for u in self.units if u != self.end_unit)

    def seq_logprob(self, units) -> float:
        """Score of a unit sequence, padded to `steps` with the end unit."""
        units = tuple(units)
        if len(units) > self.steps:
            raise ValueError(f"sequence of {len(units)} units exceeds {self.steps} steps")
        total = 0.0
        end_idx = self._index[self.end_unit]
        for i in range(self.steps):
            if i < len(units):
                idx = self._index.get(units[i])
                if idx is None:
                    raise ValueError(f"unit {units[i]!r} is not in the model alphabet")
            else:
                idx = end_idx
            total += float(self.log_table[i, idx])
        return total

    def to_json(self) -> dict:
        return {
            "steps": self.steps,
            "units": list(self.units),
            "end_unit": self.end_unit,
            "log_table": [[float(x) for x in row] for row in self.log_table],
        }


def write_emission_model(em: EmissionModel, path) -> None:
    with atomic_write(path) as fh:
        json.dump(em.to_json(), fh, indent=2)
        fh.write("\n")


def read_emission_model(path) -> EmissionModel:
    with open(path, encoding="utf-8") as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", path, exc.lineno) from exc
    for key in ("steps", "units", "log_table"):
        if key not in obj:
            raise ParseError(f"missing key {key!r}", path)
    try:
        em = EmissionModel(obj["units"], obj["log_table"], end_unit=obj.get("end_unit"))
    except ConfigError as exc:
        raise ParseError(str(exc), path) from exc
    if em.steps != obj["steps"]:
        raise ParseError(f"'steps' is {obj['steps']} but log_table has {em.steps} rows", path)
    return em


class Lexicon:
    """Words with their complete segmentation sets against a unit inventory."""

    def __init__(self, segmentations: dict[str, tuple[Segmentation, ...]]):
        if not segmentations:
            raise ConfigError("empty lexicon")
        for word, segs in segmentations.items():
            if not segs:
                raise ConfigError(f"word {word!r} has no segmentations")
            for seg in segs:
                if "".join(seg.units) != word:
                    raise ConfigError(f"segmentation {seg.units!r} does not spell {word!r}")
        self.segmentations = segmentations

    @classmethod
    def build(cls, words, inventory: SubwordInventory, cap: int = 10_000) -> "Lexicon":
        segs = {}
        for word in sorted({norm_token(w) for w in words}):
            segs[word] = tuple(enumerate_segmentations(word, inventory, cap=cap))
        return cls(segs)

    @property
    def words(self) -> tuple[str, ...]:
        return tuple(sorted(self.segmentations))

    def __contains__(self, word: str) -> bool:
        return word in self.segmentations


def _scoreable_segs(em: EmissionModel, lex: Lexicon, word: str) -> list[Segmentation]:
    if word not in lex:
        raise ValueError(f"word {word!r} is not in the lexicon")
    segs = [s for s in lex.segmentations[word] if len(s.units) <= em.steps]
    if not segs:
        raise ValueError(f"no segmentation of {word!r} fits in {em.steps} steps")
    return segs


def word_posterior_sum(em: EmissionModel, lex: Lexicon, word: str) -> float:
    """Exact log-posterior: log-sum-exp over every segmentation of the word."""
    return logsumexp([em.seq_logprob(s.units) for s in _scoreable_segs(em, lex, word)])


def word_posterior_max(em: EmissionModel, lex: Lexicon, word: str) -> float:
    """Viterbi log-posterior: only the best-scoring segmentation counts."""
    return max(em.seq_logprob(s.units) for s in _scoreable_segs(em, lex, word))


def _decode_sequence(em: EmissionModel, units: tuple[str, ...]) -> tuple[str, ...] | None:
    """Strip the trailing end-run; None when an end unit appears mid-sequence."""
    k = len(units)
    while k > 0 and units[k - 1] == em.end_unit:
        k -= 1
    prefix = units[:k]
    if em.end_unit in prefix:
        return None
    return prefix


def beam_search(
    em: EmissionModel,
    lex: Lexicon,
    beam_width: int,
    fusion: tuple[UnigramFst, float] | None = None,
    utt_id: str = "lab",
) -> NBestList:
    """Max-decoding beam over unit extensions, mapped to words via the lexicon.

    With `fusion` set, per-extension reward deltas are added to the running
    beam score (and therefore participate in pruning). A beam at least as wide
    as the whole sequence space makes the search exhaustive.
    """
    if beam_width < 1:
        raise ValueError(f"beam width must be >= 1, got {beam_width}")
    automaton = None
    if fusion is not None:
        fst, alpha = fusion
        automaton = FusionAutomaton(fst, alpha)
    # beam entries: (units, raw score, fused score, automaton state)
    beam = [((), 0.0, 0.0, automaton.start() if automaton else None)]
    for t in range(em.steps):
        row = em.log_table[t]
        candidates = []
        for units, raw, fused, state in beam:
            for k, unit in enumerate(em.units):
                step_lp = float(row[k])
                n_units, n_state, delta = units + (unit,), state, 0.0
                if automaton is not None and unit != em.end_unit:
                    n_state, delta = automaton.step(state, unit)
                candidates.append((n_units, raw + step_lp, fused + step_lp + delta, n_state))
        candidates.sort(key=lambda c: (-c[2], c[0]))
        beam = candidates[:beam_width]

    best: dict[str, tuple[float, float, tuple[str, ...]]] = {}
    for units, raw, fused, state in beam:
        prefix = _decode_sequence(em, units)
        if prefix is None or not prefix:
            continue
        word = "".join(prefix)
        if word not in lex:
            continue
        if automaton is not None:
            fused += automaton.finish(state)
        cur = best.get(word)
        if cur is None or (fused, raw) > (cur[0], cur[1]):
            best[word] = (fused, raw, prefix)

    hyps = []
    for word in sorted(best, key=lambda w: (-best[w][0], w)):
        fused, raw, prefix = best[word]
        alpha = fusion[1] if fusion else 0.0
        hyps.append(
            Hypothesis(
                words=(word,),
                base_logprob=raw,
                subwords=prefix,
                usf_logprob=(fused - raw) / alpha if alpha else 0.0,
                combined=fused,
            )
        )
    return NBestList(utt_id=utt_id, hyps=hyps, reference=None)


def _argmax_word(scores: dict[str, float]) -> str:
    return min(scores, key=lambda w: (-scores[w], w))


@dataclass(frozen=True)
class SearchErrorRow:
    word: str
    n_segs: int
    logp_sum: float
    logp_max: float
    gap: float
    is_search_error: bool
    repair_alpha: float | None


@dataclass(frozen=True)
class SearchErrorReport:
    rows: tuple[SearchErrorRow, ...]
    sum_decision: str
    max_decision: str


def search_error_report(
    em: EmissionModel,
    lex: Lexicon,
    fst: UnigramFst | None = None,
    alphas=DEFAULT_ALPHA_GRID,
) -> SearchErrorReport:
    """Per word: exact vs Viterbi posterior, their gap, and whether a reward
    weight from the grid repairs a wrong max decision.

    A word with a single segmentation has gap exactly 0 and can never be a
    search error. The flagged word is the sum-decoding winner when max
    decoding disagrees; its repair alpha is the smallest grid value whose
    reward flips the max decision to it (None when the grid cannot).
    """
    sums = {w: word_posterior_sum(em, lex, w) for w in lex.words}
    maxes = {w: word_posterior_max(em, lex, w) for w in lex.words}
    sum_winner = _argmax_word(sums)
    max_winner = _argmax_word(maxes)
    rewards = {w: (fst.lookup(w).log_reward if fst is not None else 0.0) for w in lex.words}

    rows = []
    for word in lex.words:
        flagged = word == sum_winner and word != max_winner
        repair = None
        if flagged:
            for alpha in sorted(alphas):
                fused = {w: maxes[w] + alpha * rewards[w] for w in lex.words}
                if _argmax_word(fused) == word:
                    repair = alpha
                    break
        rows.append(
            SearchErrorRow(
                word=word,
                n_segs=len(lex.segmentations[word]),
                logp_sum=sums[word],
                logp_max=maxes[word],
                gap=sums[word] - maxes[word],
                is_search_error=flagged,
                repair_alpha=repair,
            )
        )
    return SearchErrorReport(rows=tuple(rows), sum_decision=sum_winner, max_decision=max_winner)


def format_report_tsv(report: SearchErrorReport) -> str:
    lines = ["word\tn_segs\tlogp_sum\tlogp_max\tgap\tflipped_by_alpha"]
    for row in report.rows:
        if not row.is_search_error:
            flipped = "-"
        elif row.repair_alpha is None:
            flipped = "unrepaired"
        else:
            flipped = f"{row.repair_alpha:g}"
        lines.append(
            f"{row.word}\t{row.n_segs}\t{row.logp_sum:.6f}\t{row.logp_max:.6f}"
            f"\t{row.gap:.6f}\t{flipped}"
        )
    return "\n".join(lines) + "\n"


def write_report_tsv(report: SearchErrorReport, path) -> None:
    with atomic_write(path) as fh:
        fh.write(format_report_tsv(report))


def read_lexicon_words(path) -> list[str]:
    """Lexicon file: one word per line."""
    words = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            word = line.strip()
            if not word:
                continue
            try:
                words.append(norm_token(word))
            except Exception as exc:
                raise ParseError(f"bad word: {exc}", path, lineno) from exc
    if not words:
        raise ParseError("empty lexicon", path)
    return words
