"""Feedback learning: grow the training set with the most confident discoveries and refit."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .discovery import discover_all, flatten
from .errors import ConfigError, FeedbackError, FfdError
from .kb import atomic_write_text
from .metrics import map_score, precision_recall_f1
from .training import AUTOENCODERS, BOTH, KBR, train_components


@dataclass(frozen=True)
class FeedbackConfig:
    n_fb: int = 20000
    rounds: int = 2
    retrain: str = BOTH
    warm_start: bool = False

    def __post_init__(self):
        if self.n_fb < 1:
            raise ConfigError("n_fb must be >= 1")
        if self.rounds < 1:
            raise ConfigError("rounds must be >= 1")
        if self.retrain not in (AUTOENCODERS, KBR, BOTH):
            raise ConfigError(f"retrain must be one of {AUTOENCODERS!r}, {KBR!r}, {BOTH!r}")


@dataclass
class FeedbackRound:
    index: int
    train: object
    components: object
    discovered: dict
    fed_back: list


@dataclass
class FeedbackResult:
    components: object
    discovered: dict
    rounds: list = field(default_factory=list)
    trace: list = field(default_factory=list)


def select_feedback(per_head, n_fb):
    """Global top-``n_fb`` facts by confidence; ties by ascending (h, r, t)."""
    facts = flatten(per_head)
    facts.sort(key=lambda f: (-f.confidence, f.h, f.r, f.t))
    return facts[:n_fb]


def feedback_round(split, components, disc_cfg, fb_cfg, train_cfgs, index=1, workers=1):
    discovered = discover_all(split.heads, components, disc_cfg, workers=workers)
    chosen = select_feedback(discovered, fb_cfg.n_fb)
    if not chosen:
        raise FeedbackError(f"round {index}: discovery returned no facts")
    extra = np.array([f.triple for f in chosen], dtype=np.int64)
    train = components.train.with_facts(extra)
    refit = train_components(train, train_cfgs, which=fb_cfg.retrain, previous=components,
                             warm_start=fb_cfg.warm_start)
    return FeedbackRound(index, train, refit, discovered, chosen)


def feedback_loop(split, components, disc_cfg, fb_cfg, train_cfgs, audit_path=None, workers=1):
    """Run ``fb_cfg.rounds`` feedback rounds, then a final discovery pass.

    The per-round trace scores each round's discoveries against the test
    set for inspection only; nothing is selected on it.
    """
    result = FeedbackResult(components=components, discovered={})
    audit = []
    current = components
    for i in range(1, fb_cfg.rounds + 1):
        try:
            rnd = feedback_round(split, current, disc_cfg, fb_cfg, train_cfgs, index=i,
                                 workers=workers)
        except FfdError as exc:
            if isinstance(exc, FeedbackError):
                raise
            raise FeedbackError(f"round {i}: {exc}") from exc
        p, r, f1 = precision_recall_f1(rnd.discovered, split.test)
        result.trace.append({
            "round": i,
            "n_discovered": sum(len(v) for v in rnd.discovered.values()),
            "n_fed_back": len(rnd.fed_back),
            "train_size": len(rnd.train),
            "added": len(rnd.train) - len(current.train),
            "precision": p, "recall": r, "f1": f1,
            "map": map_score(rnd.discovered, split.test),
        })
        audit.extend((i, f) for f in rnd.fed_back)
        result.rounds.append(rnd)
        current = rnd.components
    result.components = current
    result.discovered = discover_all(split.heads, current, disc_cfg, workers=workers)
    if audit_path is not None:
        write_audit(audit, current.train.vocab, audit_path)
    return result


def write_audit(rows, vocab, path):
    ents, rels = vocab.entities, vocab.relations
    lines = ["round\thead\trelation\ttail\tconfidence\n"]
    lines += [f"{i}\t{ents[f.h]}\t{rels[f.r]}\t{ents[f.t]}\t{f.confidence!r}\n" for i, f in rows]
    atomic_write_text(path, "".join(lines))


def write_trace(trace, path):
    if not trace:
        atomic_write_text(path, "")
        return
    keys = list(trace[0])
    lines = [",".join(keys) + "\n"]
    lines += [",".join(repr(row[k]) if isinstance(row[k], float) else str(row[k]) for k in keys)
              + "\n" for row in trace]
    atomic_write_text(path, "".join(lines))
