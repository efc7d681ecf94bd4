"""usfkit: unigram shallow-fusion toolkit.

Reward FSTs with failure-arc semantics, vocabulary band selection, combined
scoring (on the fly and second pass), n-best rescoring, WER/oracle-WER sweep
harnesses, and a toy decoder quantifying sum-vs-max segmentation search errors.
"""

from usfkit.fst import (
    FusionReward,
    UnigramFst,
    build_unigram_fst,
    deserialize_fst,
    read_fst,
    serialize_fst,
    write_fst,
)
from usfkit.fusion import (
    FusionParams,
    Hypothesis,
    LmScoreSource,
    NBestList,
    OnTheFlyFusion,
    combined_score,
    read_nbest,
    rescore_dataset,
    rescore_nbest,
    write_nbest,
)
from usfkit.metrics import (
    WerReport,
    align_wer,
    corpus_wer,
    extract_rare_testset,
    oracle_wer,
    run_sweep,
    werr,
)
from usfkit.vocab import (
    Segmentation,
    SubwordInventory,
    VocabCounts,
    count_unigrams,
    enumerate_segmentations,
    marginal_logprob,
    select_band,
    viterbi_segmentation,
)

__version__ = "0.1.0"

__all__ = [
    "FusionParams",
    "FusionReward",
    "Hypothesis",
    "LmScoreSource",
    "NBestList",
    "OnTheFlyFusion",
    "Segmentation",
    "SubwordInventory",
    "UnigramFst",
    "VocabCounts",
    "WerReport",
    "align_wer",
    "build_unigram_fst",
    "combined_score",
    "corpus_wer",
    "count_unigrams",
    "deserialize_fst",
    "enumerate_segmentations",
    "extract_rare_testset",
    "marginal_logprob",
    "oracle_wer",
    "read_fst",
    "read_nbest",
    "rescore_dataset",
    "rescore_nbest",
    "run_sweep",
    "select_band",
    "serialize_fst",
    "viterbi_segmentation",
    "werr",
    "write_fst",
    "write_nbest",
]
