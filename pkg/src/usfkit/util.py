"""Small shared helpers: token normalization, stable log-sum-exp, atomic writes."""

from __future__ import annotations

import math
import os
import tempfile
from contextlib import contextmanager
from pathlib import Path
from typing import Iterable
from unicodedata import normalize as _unicode_normalize

from usfkit.errors import TokenError


def norm_token(token: str) -> str:
    """NFC-normalize a token and check it is usable as a vocabulary symbol."""
    tok = _unicode_normalize("NFC", token)
    if not tok:
        raise TokenError("empty token")
    if any(ch.isspace() for ch in tok):
        raise TokenError(f"token {tok!r} contains whitespace")
    return tok


def norm_tokens(tokens: Iterable[str]) -> tuple[str, ...]:
    return tuple(norm_token(t) for t in tokens)


def check_finite(value: float, what: str) -> float:
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"{what} must be finite, got {value!r}")
    return value


def logsumexp(values: Iterable[float]) -> float:
    """log(sum(exp(v))) in max + log1p form.

    The result is never below the maximum element, so dominance properties
    (sum >= max) survive floating point.
    """
    vals = list(values)
    if not vals:
        raise ValueError("logsumexp of an empty collection")
    mx = max(vals)
    k = vals.index(mx)
    acc = 0.0
    for i, v in enumerate(vals):
        if i != k:
            acc += math.exp(v - mx)
    return mx + math.log1p(acc)


@contextmanager
def atomic_write(path, encoding: str = "utf-8"):
    """Write a text file via a temporary sibling; no partial file survives a failure."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding=encoding, newline="\n") as fh:
            yield fh
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def parallel_map(fn, items, jobs: int = 1) -> list:
    """Order-preserving map, over a process pool when jobs > 1."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    from concurrent.futures import ProcessPoolExecutor

    chunksize = max(1, len(items) // (jobs * 4))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunksize))
