"""WER machinery, oracle WER over n-best lists, rare-word subset extraction,
and parameter-sweep harnesses.

Corpus WER pools error counts over utterances (sum S, D, I and reference
tokens, then divide); it is not a mean of per-utterance rates. Relative WER
(WERR) is (baseline - system) / baseline, so positive means improvement.
"""

from __future__ import annotations

from dataclasses import dataclass, replace as dc_replace
from typing import Iterable, Sequence

from usfkit import alignment
from usfkit.errors import ConfigError, ParseError
from usfkit.fst import SUBWORD_LEVEL, WORD_LEVEL, UnigramFst, build_unigram_fst
from usfkit.fusion import FusionParams, LmScoreSource, NBestList, rescore_dataset
from usfkit.util import atomic_write, norm_token
from usfkit.vocab import SubwordInventory, VocabCounts, select_band

RARE_TEST_COUNT = 4  # a test word is rare when it occurs fewer than this many times


@dataclass(frozen=True)
class WerReport:
    substitutions: int
    deletions: int
    insertions: int
    ref_tokens: int

    @property
    def errors(self) -> int:
        return self.substitutions + self.deletions + self.insertions

    @property
    def wer(self) -> float:
        if self.ref_tokens < 1:
            raise ValueError("WER is undefined without reference tokens")
        return self.errors / self.ref_tokens

    def __add__(self, other: "WerReport") -> "WerReport":
        return WerReport(
            self.substitutions + other.substitutions,
            self.deletions + other.deletions,
            self.insertions + other.insertions,
            self.ref_tokens + other.ref_tokens,
        )


_ZERO_REPORT = WerReport(0, 0, 0, 0)


def align_wer(ref: Sequence[str], hyp: Sequence[str]) -> WerReport:
    """Minimum-edit alignment of one utterance; empty references are an error."""
    if len(ref) == 0:
        raise ValueError("empty reference: WER undefined")
    s, d, i = alignment.edit_counts(list(ref), list(hyp))
    return WerReport(s, d, i, len(ref))


def corpus_wer(pairs: Iterable[tuple[Sequence[str], Sequence[str]]]) -> WerReport:
    """Pooled WER over (reference, hypothesis) token-sequence pairs."""
    total = _ZERO_REPORT
    n = 0
    for ref, hyp in pairs:
        total = total + align_wer(ref, hyp)
        n += 1
    if n == 0:
        raise ValueError("corpus_wer needs at least one utterance")
    return total


def _require_reference(nb: NBestList) -> tuple[str, ...]:
    if nb.reference is None:
        raise ValueError(f"utterance {nb.utt_id!r} has no reference")
    return nb.reference


def top1_wer(lists: Sequence[NBestList]) -> WerReport:
    return corpus_wer((_require_reference(nb), nb.hyps[0].words) for nb in lists)


def oracle_wer(lists: Sequence[NBestList]) -> WerReport:
    """Per utterance, score the list hypothesis with the fewest edit errors.

    Ties go to the higher-ranked hypothesis, then counts are pooled.
    """
    total = _ZERO_REPORT
    n = 0
    for nb in lists:
        ref = _require_reference(nb)
        best = None
        for h in nb.hyps:
            report = align_wer(ref, h.words)
            if best is None or report.errors < best.errors:
                best = report
        total = total + best
        n += 1
    if n == 0:
        raise ValueError("oracle_wer needs at least one utterance")
    return total


def werr(baseline: WerReport, system: WerReport) -> float:
    """Relative WER reduction; positive means the system improves on the baseline."""
    if baseline.wer == 0:
        raise ValueError("WERR undefined for a zero-WER baseline")
    return (baseline.wer - system.wer) / baseline.wer


def _sweep_werr(baseline: WerReport, system: WerReport) -> float:
    """werr, except that an error-free baseline matched by an error-free system
    reports 0 (second-pass rescoring cannot change the oracle)."""
    if baseline.wer == 0 and system.wer == 0:
        return 0.0
    return werr(baseline, system)


def extract_rare_testset(
    testset: Sequence[tuple[str, Sequence[str]]],
    rare_count: int = RARE_TEST_COUNT,
) -> list[tuple[str, Sequence[str]]]:
    """Keep utterances whose reference contains a word occurring fewer than
    `rare_count` times across the test set's references."""
    counts: dict[str, int] = {}
    for _, ref in testset:
        for tok in ref:
            counts[tok] = counts.get(tok, 0) + 1
    return [
        (utt_id, ref)
        for utt_id, ref in testset
        if any(counts[tok] < rare_count for tok in ref)
    ]


def read_refs_tsv(path) -> dict[str, tuple[str, ...]]:
    """Test-set references: TSV `utt_id<TAB>reference`."""
    refs: dict[str, tuple[str, ...]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ParseError(f"expected 2 tab-separated fields, got {len(fields)}", path, lineno)
            utt_id, text = fields
            if utt_id in refs:
                raise ParseError(f"duplicate utt_id {utt_id!r}", path, lineno)
            refs[utt_id] = tuple(norm_token(t) for t in text.split())
    return refs


def rare_utterance_ids(lists: Sequence[NBestList], rare_count: int = RARE_TEST_COUNT) -> set[str]:
    pairs = [(nb.utt_id, _require_reference(nb)) for nb in lists]
    return {utt_id for utt_id, _ in extract_rare_testset(pairs, rare_count)}


@dataclass(frozen=True)
class SubsetScores:
    top1: WerReport
    oracle: WerReport


@dataclass(frozen=True)
class EvalSummary:
    rare: SubsetScores
    general: SubsetScores
    rare_utterances: int
    total_utterances: int


def evaluate_dataset(lists: Sequence[NBestList]) -> EvalSummary:
    """Top-1 and oracle WER on the rare subset and on the whole (general) set."""
    if not lists:
        raise ValueError("empty dataset")
    rare_ids = rare_utterance_ids(lists)
    rare_lists = [nb for nb in lists if nb.utt_id in rare_ids]
    general = SubsetScores(top1_wer(lists), oracle_wer(lists))
    if rare_lists:
        rare = SubsetScores(top1_wer(rare_lists), oracle_wer(rare_lists))
    else:
        rare = SubsetScores(_ZERO_REPORT, _ZERO_REPORT)
    return EvalSummary(
        rare=rare,
        general=general,
        rare_utterances=len(rare_lists),
        total_utterances=len(lists),
    )


def format_eval_tsv(summary: EvalSummary) -> str:
    lines = ["subset\tutterances\tref_tokens\tsubstitutions\tdeletions\tinsertions\twer\toracle_wer"]
    for name, scores, n in (
        ("rare", summary.rare, summary.rare_utterances),
        ("general", summary.general, summary.total_utterances),
    ):
        t = scores.top1
        if t.ref_tokens == 0:
            lines.append(f"{name}\t0\t0\t0\t0\t0\t-\t-")
            continue
        lines.append(
            f"{name}\t{n}\t{t.ref_tokens}\t{t.substitutions}\t{t.deletions}"
            f"\t{t.insertions}\t{t.wer:.6f}\t{scores.oracle.wer:.6f}"
        )
    return "\n".join(lines) + "\n"


SWEEP_ALPHA = "alpha"
SWEEP_N_THRESH = "n_thresh"
SWEEP_LEVEL = "level"
ALL_BAND = "all"  # n_thresh grid token: every word with count > 1


@dataclass
class SweepConfig:
    param: str
    values: list
    base: FusionParams
    counts: VocabCounts | None = None
    inventory: SubwordInventory | None = None
    fst: UnigramFst | None = None
    arc_weight: float = -1.0
    n_thresh: int = 250
    include_all_above_one: bool = False
    lm: LmScoreSource | None = None
    jobs: int = 1


@dataclass(frozen=True)
class SweepCell:
    label: str
    werr_rare: float
    oracle_werr_rare: float
    werr_gen: float
    oracle_werr_gen: float
    wer_rare: float
    wer_gen: float


@dataclass(frozen=True)
class SweepResult:
    param: str
    cells: list[SweepCell]


def _build_band_fst(cfg: SweepConfig, level: str, n_thresh, all_flag: bool) -> UnigramFst:
    if cfg.counts is None:
        raise ConfigError("this sweep needs unigram counts to build the FST")
    band = select_band(cfg.counts, n_thresh=n_thresh if not all_flag else 2,
                       include_all_above_one=all_flag)
    if not band:
        raise ConfigError("band selection produced an empty vocabulary")
    inventory = cfg.inventory if level == SUBWORD_LEVEL else None
    if level == SUBWORD_LEVEL and inventory is None:
        raise ConfigError("subword level needs a subword inventory")
    return build_unigram_fst(band, arc_weight=cfg.arc_weight, level=level, inventory=inventory)


def _subset_wers(lists: Sequence[NBestList], rare_ids: set[str]):
    rare_lists = [nb for nb in lists if nb.utt_id in rare_ids]
    if not rare_lists:
        raise ConfigError("rare subset is empty; WERR on it is undefined")
    return (
        top1_wer(rare_lists),
        oracle_wer(rare_lists),
        top1_wer(lists),
        oracle_wer(lists),
    )


def run_sweep(lists: Sequence[NBestList], cfg: SweepConfig) -> SweepResult:
    """Rescore the dataset per grid cell and report WERR / oracle WERR per subset.

    The baseline row rescoring uses alpha = 0 (no reward FST) with the fixed
    beta and gamma, and has WERR exactly 0 by construction.
    """
    if not cfg.values:
        raise ConfigError("empty sweep grid")
    if cfg.param not in (SWEEP_ALPHA, SWEEP_N_THRESH, SWEEP_LEVEL):
        raise ConfigError(f"unknown sweep parameter {cfg.param!r}")
    if not lists:
        raise ConfigError("empty dataset")
    rare_ids = rare_utterance_ids(lists)

    baseline_params = dc_replace(cfg.base, alpha=0.0)
    baseline_lists = rescore_dataset(lists, baseline_params, None, cfg.lm, jobs=cfg.jobs)
    b_rare, b_orare, b_gen, b_ogen = _subset_wers(baseline_lists, rare_ids)

    cells = [
        SweepCell(
            label="baseline",
            werr_rare=werr(b_rare, b_rare),
            oracle_werr_rare=_sweep_werr(b_orare, b_orare),
            werr_gen=werr(b_gen, b_gen),
            oracle_werr_gen=_sweep_werr(b_ogen, b_ogen),
            wer_rare=b_rare.wer,
            wer_gen=b_gen.wer,
        )
    ]

    fixed_fst: UnigramFst | None = None
    if cfg.param in (SWEEP_ALPHA,):
        fixed_fst = cfg.fst or _build_band_fst(
            cfg, cfg.base.level, cfg.n_thresh, cfg.include_all_above_one
        )

    for value in cfg.values:
        if cfg.param == SWEEP_ALPHA:
            params = dc_replace(cfg.base, alpha=float(value))
            fst = fixed_fst
            label = f"{float(value):g}"
        elif cfg.param == SWEEP_N_THRESH:
            all_flag = isinstance(value, str) and value == ALL_BAND
            params = cfg.base
            fst = _build_band_fst(cfg, cfg.base.level, None if all_flag else int(value), all_flag)
            label = ALL_BAND if all_flag else f"{int(value)}"
        else:
            level = str(value)
            if level not in (WORD_LEVEL, SUBWORD_LEVEL):
                raise ConfigError(f"unknown level {level!r} in sweep grid")
            params = dc_replace(cfg.base, level=level)
            fst = _build_band_fst(cfg, level, cfg.n_thresh, cfg.include_all_above_one)
            label = level
        rescored = rescore_dataset(lists, params, fst, cfg.lm, jobs=cfg.jobs)
        c_rare, c_orare, c_gen, c_ogen = _subset_wers(rescored, rare_ids)
        cells.append(
            SweepCell(
                label=label,
                werr_rare=werr(b_rare, c_rare),
                oracle_werr_rare=_sweep_werr(b_orare, c_orare),
                werr_gen=werr(b_gen, c_gen),
                oracle_werr_gen=_sweep_werr(b_ogen, c_ogen),
                wer_rare=c_rare.wer,
                wer_gen=c_gen.wer,
            )
        )
    return SweepResult(param=cfg.param, cells=cells)


def format_sweep_tsv(result: SweepResult) -> str:
    lines = ["param\twerr_rare\toracle_werr_rare\twerr_gen\toracle_werr_gen"]
    for cell in result.cells:
        lines.append(
            f"{cell.label}\t{cell.werr_rare:.6f}\t{cell.oracle_werr_rare:.6f}"
            f"\t{cell.werr_gen:.6f}\t{cell.oracle_werr_gen:.6f}"
        )
    return "\n".join(lines) + "\n"


def format_sweep_table(result: SweepResult) -> str:
    """Human-readable table: WERR with oracle WERR parenthesized, per subset."""
    header = f"{result.param:<10}  {'D_rare':<16}  {'D_gen':<16}"
    lines = [header, "-" * len(header)]
    for cell in result.cells:
        if cell.label == "baseline":
            lines.append(f"{cell.label:<10}  {'baseline':<16}  {'baseline':<16}")
            continue
        rare = f"{100 * cell.werr_rare:.1f}% ({100 * cell.oracle_werr_rare:.1f}%)"
        gen = f"{100 * cell.werr_gen:.1f}% ({100 * cell.oracle_werr_gen:.1f}%)"
        lines.append(f"{cell.label:<10}  {rare:<16}  {gen:<16}")
    return "\n".join(lines) + "\n"


def write_sweep_tsv(result: SweepResult, path) -> None:
    with atomic_write(path) as fh:
        fh.write(format_sweep_tsv(result))
