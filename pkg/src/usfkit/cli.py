"""Command-line entry point: usfkit <subcommand>.

Any long flag may also come from a config file of `key = value` lines
(--config PATH); explicit command-line flags win. USF_JOBS mirrors --jobs.
"""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path

from usfkit import demo as demo_mod
from usfkit import lab as lab_mod
from usfkit import metrics
from usfkit.errors import ConfigError, ParseError, UsfError
from usfkit.fst import SUBWORD_LEVEL, WORD_LEVEL, build_unigram_fst, read_fst, write_fst
from usfkit.fusion import (
    DEFAULT_ALPHA,
    DEFAULT_MARKER,
    FusionParams,
    LmScoreSource,
    read_nbest,
    rescore_dataset,
    write_nbest,
)
from usfkit.util import atomic_write
from usfkit.vocab import (
    DEFAULT_N_THRESH,
    count_unigrams,
    read_counts,
    read_inventory,
    select_band,
    write_counts,
)

PROG = "usfkit"


def _read_config(path) -> dict[str, str]:
    """Flat key = value text; '#' starts a comment, keys match long flag names."""
    out: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError("expected 'key = value'", path, lineno)
            key, value = line.split("=", 1)
            key = key.strip().replace("-", "_")
            value = value.strip().strip("'\"")
            if not key:
                raise ParseError("empty key", path, lineno)
            out[key] = value
    return out


_TRUE = {"1", "true", "yes", "on"}
_FALSE = {"0", "false", "no", "off"}


def _as_bool(raw: str) -> bool:
    low = raw.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    raise ConfigError(f"expected a boolean, got {raw!r}")


_CONFIG_ALIASES = {"all_words": "all"}  # argparse dest -> flag name


class _Resolver:
    """Merge command line > config file > built-in default."""

    def __init__(self, ns: argparse.Namespace, config: dict[str, str]):
        self.ns = ns
        self.config = config

    def get(self, key: str, cast, default=None, required: bool = False):
        value = getattr(self.ns, key, None)
        if value is None:
            raw = self.config.get(key, self.config.get(_CONFIG_ALIASES.get(key, key)))
            if raw is not None:
                value = _as_bool(raw) if cast is bool else cast(raw)
        if value is None:
            value = default
        if value is None and required:
            raise ConfigError(f"missing required option --{key.replace('_', '-')}")
        return value

    def jobs(self) -> int:
        env = os.environ.get("USF_JOBS")
        fallback = int(env) if env else 1
        return self.get("jobs", int, default=fallback)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog=PROG,
        description="Unigram shallow-fusion toolkit: vocabulary bands, reward FSTs, "
        "n-best rescoring, WER sweeps, and a segmentation search-error lab.",
        epilog="All long flags can be supplied from --config (key = value lines); "
        "command-line values override the file. USF_JOBS mirrors --jobs.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def add(name, help_text):
        p = sub.add_parser(name, help=help_text, description=help_text)
        p.add_argument("--config", help="config file of key = value lines")
        p.add_argument("--jobs", "-j", type=int, help="worker processes (default: USF_JOBS or 1)")
        return p

    p = add("extract-vocab", "Count unigrams in a training-text corpus.")
    p.add_argument("--corpus", help="input corpus, one utterance per line")
    p.add_argument("--out", help="output counts TSV (word<TAB>count)")
    p.add_argument("--lowercase", action="store_true", default=None,
                   help="lowercase tokens before counting (default: off)")

    p = add("build-fst", "Select the reward band from counts and build the FST.")
    p.add_argument("--counts", help="counts TSV from extract-vocab")
    p.add_argument("--out", help="output FST text file")
    p.add_argument("--n-thresh", type=int,
                   help=f"keep words with count in [2, n_thresh] (default: {DEFAULT_N_THRESH})")
    p.add_argument("--weight", type=float, help="arc weight per word (default: -1.0)")
    p.add_argument("--level", choices=[WORD_LEVEL, SUBWORD_LEVEL],
                   help="FST level (default: word)")
    p.add_argument("--inventory", help="subword inventory TSV (required at subword level)")
    p.add_argument("--all", action="store_true", default=None, dest="all_words",
                   help="ignore n-thresh and keep every word with count > 1 (default: off)")

    p = add("rescore", "Apply the combined score to an n-best file and re-rank it.")
    p.add_argument("--nbest", help="input n-best JSONL")
    p.add_argument("--fst", help="reward FST file")
    p.add_argument("--out", help="output JSONL with combined scores")
    p.add_argument("--alpha", type=float, help=f"reward weight (default: {DEFAULT_ALPHA})")
    p.add_argument("--beta", type=float, help="external LM weight (default: 0.0)")
    p.add_argument("--gamma", type=float, help="word-insertion weight (default: 0.0)")
    p.add_argument("--marker", help="leading word-boundary marker on units (default: U+2581)")
    p.add_argument("--lm-source", choices=["attached", "builtin"],
                   help="external LM scores: attached per hypothesis, or builtin n-gram "
                   "(default: attached)")
    p.add_argument("--lm-corpus", help="training text for the builtin n-gram")
    p.add_argument("--lm-order", type=int, help="builtin n-gram order, 1 or 2 (default: 1)")
    p.add_argument("--lm-addk", type=float, help="builtin add-k smoothing (default: 1.0)")

    p = add("evaluate", "Top-1 and oracle WER on the rare and general subsets.")
    p.add_argument("--nbest", help="n-best JSONL (rescored or raw)")
    p.add_argument("--refs", help="reference TSV utt_id<TAB>reference (overrides embedded refs)")
    p.add_argument("--out", help="output metrics TSV")

    p = add("sweep", "Rescore per grid cell and report WERR on both subsets.")
    p.add_argument("--nbest", help="n-best JSONL")
    p.add_argument("--refs", help="reference TSV utt_id<TAB>reference")
    p.add_argument("--param", choices=[metrics.SWEEP_ALPHA, metrics.SWEEP_N_THRESH, metrics.SWEEP_LEVEL],
                   help="which parameter the grid varies")
    p.add_argument("--values", help="comma-separated grid, e.g. 0.5,0.75,1.0,2.0 or 8,31,250,all")
    p.add_argument("--counts", help="counts TSV for (re)building FSTs")
    p.add_argument("--fst", help="prebuilt FST (alpha sweeps only)")
    p.add_argument("--inventory", help="subword inventory TSV (for subword cells)")
    p.add_argument("--n-thresh", type=int,
                   help=f"band threshold when not swept (default: {DEFAULT_N_THRESH})")
    p.add_argument("--all", action="store_true", default=None, dest="all_words",
                   help="use the all-words band when not swept (default: off)")
    p.add_argument("--weight", type=float, help="arc weight per word (default: -1.0)")
    p.add_argument("--level", choices=[WORD_LEVEL, SUBWORD_LEVEL],
                   help="fusion level when not swept (default: word)")
    p.add_argument("--alpha", type=float,
                   help=f"reward weight when not swept (default: {DEFAULT_ALPHA})")
    p.add_argument("--beta", type=float, help="external LM weight (default: 0.0)")
    p.add_argument("--gamma", type=float, help="word-insertion weight (default: 0.0)")
    p.add_argument("--marker", help="word-boundary marker (default: U+2581)")
    p.add_argument("--lm-source", choices=["attached", "builtin"],
                   help="external LM scores (default: attached)")
    p.add_argument("--lm-corpus", help="training text for the builtin n-gram")
    p.add_argument("--lm-order", type=int, help="builtin n-gram order (default: 1)")
    p.add_argument("--lm-addk", type=float, help="builtin add-k smoothing (default: 1.0)")
    p.add_argument("--out", help="output sweep TSV")

    p = add("lab", "Sum-vs-max posteriors per word and reward repair weights.")
    p.add_argument("--model", help="emission model JSON")
    p.add_argument("--lexicon", help="lexicon file, one word per line")
    p.add_argument("--fst", help="reward FST used for repair (default: none)")
    p.add_argument("--alphas", help="comma-separated repair grid (default: 0.25,0.5,0.75,1.0,2.0)")
    p.add_argument("--out", help="output report TSV")

    p = add("gen-demo", "Write the seeded synthetic demo dataset.")
    p.add_argument("--out", help="output directory")
    p.add_argument("--seed", type=int, help="random seed (default: 0)")

    return parser


def _load_lm(res: _Resolver, beta: float) -> LmScoreSource | None:
    if beta == 0.0:
        return None
    source = res.get("lm_source", str, default="attached")
    if source == "attached":
        return LmScoreSource.attached()
    corpus = res.get("lm_corpus", str, required=True)
    order = res.get("lm_order", int, default=1)
    add_k = res.get("lm_addk", float, default=1.0)
    with open(corpus, encoding="utf-8") as fh:
        return LmScoreSource.ngram_from_corpus(fh, order=order, add_k=add_k)


def _apply_refs(lists, refs_path) -> None:
    refs = metrics.read_refs_tsv(refs_path)
    for nb in lists:
        if nb.utt_id in refs:
            nb.reference = refs[nb.utt_id]


def cmd_extract_vocab(res: _Resolver) -> int:
    corpus = res.get("corpus", str, required=True)
    out = res.get("out", str, required=True)
    lowercase = res.get("lowercase", bool, default=False)
    with open(corpus, encoding="utf-8") as fh:
        counts = count_unigrams(fh, lowercase=lowercase)
    write_counts(counts, out)
    print(f"{counts.total_types} types / {counts.total_tokens} tokens -> {out}")
    return 0


def cmd_build_fst(res: _Resolver) -> int:
    counts = read_counts(res.get("counts", str, required=True))
    out = res.get("out", str, required=True)
    n_thresh = res.get("n_thresh", int, default=DEFAULT_N_THRESH)
    weight = res.get("weight", float, default=-1.0)
    level = res.get("level", str, default=WORD_LEVEL)
    all_words = res.get("all_words", bool, default=False)
    inventory = None
    if level == SUBWORD_LEVEL:
        inventory = read_inventory(res.get("inventory", str, required=True))
    band = select_band(counts, n_thresh=n_thresh, include_all_above_one=all_words)
    fst = build_unigram_fst(band, arc_weight=weight, level=level, inventory=inventory)
    write_fst(fst, out)
    print(f"{len(fst)} entries ({level} level) -> {out}")
    return 0


def _fusion_params(res: _Resolver, level: str) -> FusionParams:
    return FusionParams(
        alpha=res.get("alpha", float, default=DEFAULT_ALPHA),
        beta=res.get("beta", float, default=0.0),
        gamma=res.get("gamma", float, default=0.0),
        level=level,
        marker=res.get("marker", str, default=DEFAULT_MARKER),
    )


def cmd_rescore(res: _Resolver) -> int:
    lists = read_nbest(res.get("nbest", str, required=True))
    fst = read_fst(res.get("fst", str, required=True))
    out = res.get("out", str, required=True)
    params = _fusion_params(res, fst.level)
    lm = _load_lm(res, params.beta)
    rescored = rescore_dataset(lists, params, fst, lm, jobs=res.jobs())
    write_nbest(rescored, out)
    print(f"rescored {len(rescored)} utterances -> {out}")
    return 0


def cmd_evaluate(res: _Resolver) -> int:
    lists = read_nbest(res.get("nbest", str, required=True))
    out = res.get("out", str, required=True)
    refs_path = res.get("refs", str)
    if refs_path:
        _apply_refs(lists, refs_path)
    summary = metrics.evaluate_dataset(lists)
    tsv = metrics.format_eval_tsv(summary)
    with atomic_write(out) as fh:
        fh.write(tsv)
    sys.stdout.write(tsv)
    return 0


def cmd_sweep(res: _Resolver) -> int:
    lists = read_nbest(res.get("nbest", str, required=True))
    out = res.get("out", str, required=True)
    refs_path = res.get("refs", str)
    if refs_path:
        _apply_refs(lists, refs_path)
    param = res.get("param", str, required=True)
    raw_values = res.get("values", str, required=True)
    tokens = [v.strip() for v in raw_values.split(",") if v.strip()]
    if param == metrics.SWEEP_ALPHA:
        values: list = [float(v) for v in tokens]
    elif param == metrics.SWEEP_N_THRESH:
        values = [v if v == metrics.ALL_BAND else int(v) for v in tokens]
    else:
        values = tokens
    level = res.get("level", str, default=WORD_LEVEL)
    params = _fusion_params(res, level)
    counts_path = res.get("counts", str)
    fst_path = res.get("fst", str)
    inventory_path = res.get("inventory", str)
    cfg = metrics.SweepConfig(
        param=param,
        values=values,
        base=params,
        counts=read_counts(counts_path) if counts_path else None,
        inventory=read_inventory(inventory_path) if inventory_path else None,
        fst=read_fst(fst_path) if fst_path else None,
        arc_weight=res.get("weight", float, default=-1.0),
        n_thresh=res.get("n_thresh", int, default=DEFAULT_N_THRESH),
        include_all_above_one=res.get("all_words", bool, default=False),
        lm=_load_lm(res, params.beta),
        jobs=res.jobs(),
    )
    result = metrics.run_sweep(lists, cfg)
    metrics.write_sweep_tsv(result, out)
    sys.stdout.write(metrics.format_sweep_table(result))
    return 0


def cmd_lab(res: _Resolver) -> int:
    em = lab_mod.read_emission_model(res.get("model", str, required=True))
    words = lab_mod.read_lexicon_words(res.get("lexicon", str, required=True))
    out = res.get("out", str, required=True)
    fst_path = res.get("fst", str)
    fst = read_fst(fst_path) if fst_path else None
    raw_alphas = res.get("alphas", str, default="0.25,0.5,0.75,1.0,2.0")
    alphas = [float(v) for v in raw_alphas.split(",") if v.strip()]
    lex = lab_mod.Lexicon.build(words, em.segmentation_inventory())
    report = lab_mod.search_error_report(em, lex, fst, alphas)
    lab_mod.write_report_tsv(report, out)
    sys.stdout.write(lab_mod.format_report_tsv(report))
    print(f"sum decision: {report.sum_decision}; max decision: {report.max_decision}")
    return 0


def cmd_gen_demo(res: _Resolver) -> int:
    out = res.get("out", str, required=True)
    seed = res.get("seed", int, default=0)
    paths = demo_mod.gen_demo(Path(out), seed=seed)
    for name in sorted(paths):
        print(f"{name}: {paths[name]}")
    return 0


_COMMANDS = {
    "extract-vocab": cmd_extract_vocab,
    "build-fst": cmd_build_fst,
    "rescore": cmd_rescore,
    "evaluate": cmd_evaluate,
    "sweep": cmd_sweep,
    "lab": cmd_lab,
    "gen-demo": cmd_gen_demo,
}


def main(argv=None) -> int:
    parser = build_parser()
    ns = parser.parse_args(argv)
    config = {}
    if getattr(ns, "config", None):
        try:
            config = _read_config(ns.config)
        except OSError as exc:
            print(f"{PROG}: {exc}", file=sys.stderr)
            return 2
        except UsfError as exc:
            print(f"{PROG}: {exc}", file=sys.stderr)
            return 1
    res = _Resolver(ns, config)
    try:
        return _COMMANDS[ns.command](res)
    except OSError as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 2
    except (UsfError, ValueError) as exc:
        print(f"{PROG}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
