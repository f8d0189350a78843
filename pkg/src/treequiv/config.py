"""Run configuration: oracle caps, enumeration budgets, cache location, seed."""

from __future__ import annotations

import os
from dataclasses import dataclass, fields, replace

from .errors import ParseError

CACHE_DIR_ENV = "TREEQUIV_CACHE_DIR"


@dataclass(frozen=True)
class RunConfig:
    """Caps and knobs shared across the library.

    fo_cap / mso_cap bound the universe size accepted by the brute-force type
    oracles; mso_max_rank bounds the MSO rank. enum_max_size bounds structure
    sizes in preservation searches; enum_max_candidates bounds the raw number of
    candidate structures enumerated before canonical filtering. jobs > 1 enables
    threaded scanning in the preservation checkers (results are order-independent).
    """

    fo_cap: int = 10
    mso_cap: int = 8
    mso_max_rank: int = 3
    enum_max_size: int = 6
    enum_max_candidates: int = 2_000_000
    cache_dir: str | None = None
    seed: int = 0
    jobs: int = 1
    word_order: bool = False

    def __post_init__(self):
        if self.fo_cap < 0 or self.mso_cap < 0:
            raise ValueError("oracle caps must be >= 0")
        if self.mso_max_rank < 0:
            raise ValueError("mso_max_rank must be >= 0")
        if self.jobs < 1:
            raise ValueError("jobs must be >= 1")

    def oracle_cap(self, mode: str) -> int:
        return self.fo_cap if mode == "fo" else self.mso_cap

    def resolved_cache_dir(self) -> str | None:
        return self.cache_dir or os.environ.get(CACHE_DIR_ENV)


DEFAULT_CONFIG = RunConfig()

_INT_FIELDS = {
    "fo_cap", "mso_cap", "mso_max_rank", "enum_max_size",
    "enum_max_candidates", "seed", "jobs",
}
_BOOL_FIELDS = {"word_order"}


def load_config(path: str) -> RunConfig:
    """Read key=value lines (# comments allowed) into a RunConfig."""
    known = {f.name for f in fields(RunConfig)}
    cfg = RunConfig()
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ParseError(f"expected key=value, got {line!r}", line=lineno)
            key, _, value = line.partition("=")
            key, value = key.strip(), value.strip()
            if key not in known:
                raise ParseError(f"unknown config key {key!r}", line=lineno)
            if key in _INT_FIELDS:
                try:
                    parsed: object = int(value)
                except ValueError:
                    raise ParseError(f"config key {key!r} needs an integer", line=lineno) from None
            elif key in _BOOL_FIELDS:
                if value not in ("true", "false", "0", "1"):
                    raise ParseError(f"config key {key!r} needs true/false", line=lineno)
                parsed = value in ("true", "1")
            else:
                parsed = value or None
            cfg = replace(cfg, **{key: parsed})
    return cfg
