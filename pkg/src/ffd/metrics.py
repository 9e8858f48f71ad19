"""Evaluation: precision / recall / F1, MAP, and relation-difficulty breakdowns."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ContractError
from .kb import TripleStore, atomic_write_text

# log-spaced bucket edges for heads-per-tail / tails-per-head
DEFAULT_BINS = (1.0, 1.5, 3.0, 10.0, math.inf)


def _triple(x):
    if hasattr(x, "triple"):
        return x.triple
    h, r, t = x[:3]
    return (int(h), int(r), int(t))


def _fact_set(facts):
    if isinstance(facts, TripleStore):
        return facts.fact_set()
    if isinstance(facts, dict):
        return {_triple(f) for fs in facts.values() for f in fs}
    return {_triple(f) for f in facts}


def f1_score(p, r):
    return 2.0 * p * r / (p + r) if p + r > 0 else 0.0


def precision_recall_f1(discovered, test):
    found = _fact_set(discovered)
    gold = _fact_set(test)
    hits = len(found & gold)
    p = hits / len(found) if found else 0.0
    r = hits / len(gold) if gold else 0.0
    return p, r, f1_score(p, r)


def _score_of(f):
    return f.confidence if hasattr(f, "confidence") else float(f[3])


def average_precision(ranked, relevant):
    """Sum of precision@i over hit ranks i, divided by max(1, |relevant|)."""
    hits = 0
    total = 0.0
    for i, f in enumerate(ranked, 1):
        if _triple(f) in relevant:
            hits += 1
            total += hits / i
    return total / max(1, len(relevant)), hits


def _check_sorted(h, ranked):
    scores = [_score_of(f) for f in ranked]
    if any(b > a for a, b in zip(scores, scores[1:])):
        raise ContractError(f"ranking for head {h} is not sorted by confidence")


def _relevant_by_head(test):
    rel = {}
    for t in _fact_set(test):
        rel.setdefault(t[0], set()).add(t)
    return rel


def per_head_average_precision(per_head_rankings, test):
    """[(head, AP, hits)] for every head with at least one test fact."""
    relevant = _relevant_by_head(test)
    rows = []
    for h in sorted(relevant):
        ranked = per_head_rankings.get(h, [])
        _check_sorted(h, ranked)
        ap, hits = average_precision(ranked, relevant[h])
        rows.append((h, ap, hits))
    return rows


def map_score(per_head_rankings, test, mode="macro"):
    """Mean average precision over heads with >= 1 test fact.

    ``mode="micro"`` pools instead: summed precision@hit over all heads
    divided by the total number of relevant facts.
    """
    for h, ranked in per_head_rankings.items():
        _check_sorted(h, ranked)
    rows = per_head_average_precision(per_head_rankings, test)
    if not rows:
        return 0.0
    if mode == "macro":
        return float(np.mean([ap for _, ap, _ in rows]))
    if mode == "micro":
        relevant = _relevant_by_head(test)
        num = sum(ap * max(1, len(relevant[h])) for h, ap, _ in rows)
        return num / sum(len(v) for v in relevant.values())
    raise ValueError(f"unknown MAP mode {mode!r}")


@dataclass(frozen=True)
class RelationDifficulty:
    relation: int
    hpt: float
    tph: float
    n_facts: int


def relation_difficulty(store):
    """Heads-per-tail and tails-per-head for every relation with >= 1 fact."""
    tr = store.triples
    if len(tr) == 0:
        return []
    rels, n_facts = np.unique(tr[:, 1], return_counts=True)
    n_heads = np.unique(tr[:, [1, 0]], axis=0)[:, 0]
    n_tails = np.unique(tr[:, [1, 2]], axis=0)[:, 0]
    heads_per_rel = dict(zip(*np.unique(n_heads, return_counts=True)))
    tails_per_rel = dict(zip(*np.unique(n_tails, return_counts=True)))
    return [RelationDifficulty(int(r), n / tails_per_rel[r], n / heads_per_rel[r], int(n))
            for r, n in zip(rels, n_facts)]


@dataclass(frozen=True)
class BucketRow:
    hpt_lo: float
    hpt_hi: float
    tph_lo: float
    tph_hi: float
    discovered: int
    hits: int

    @property
    def precision(self):
        """None marks an empty bucket (no discovered facts), distinct from 0.0."""
        return self.hits / self.discovered if self.discovered else None


def _bin(x, bins):
    for lo, hi in zip(bins, bins[1:]):
        if lo <= x < hi:
            return lo, hi
    return (bins[-2], bins[-1]) if x >= bins[-1] else (math.nan, bins[0])


def precision_by_difficulty(discovered, test, difficulties, bins=DEFAULT_BINS):
    """Group discovered facts by their relation's (hpt, tph) bucket.

    Facts whose relation has no difficulty entry land in a NaN bucket so
    that counts still sum to the number of discovered facts.
    """
    bins = tuple(float(b) for b in bins)
    if any(b >= a for a, b in zip(bins[1:], bins)) or len(bins) < 2:
        raise ValueError("bins must be strictly increasing with at least two edges")
    found = _fact_set(discovered)
    gold = _fact_set(test)
    diff = {d.relation: d for d in difficulties}
    cells = {}
    for hb in zip(bins, bins[1:]):
        for tb in zip(bins, bins[1:]):
            cells[hb + tb] = [0, 0]
    for f in sorted(found):
        d = diff.get(f[1])
        key = (_bin(d.hpt, bins) + _bin(d.tph, bins)) if d else (math.nan,) * 4
        cell = cells.setdefault(key, [0, 0])
        cell[0] += 1
        cell[1] += f in gold
    return [BucketRow(*k, n, hits) for k, (n, hits) in cells.items()]


@dataclass
class EvalReport:
    map: float
    precision: float
    recall: float
    f1: float
    n_discovered: int
    n_test: int
    per_head: list = field(default_factory=list)
    per_relation_bucket: list = field(default_factory=list)
    map_mode: str = "macro"

    def as_items(self):
        return [("map", self.map), ("precision", self.precision), ("recall", self.recall),
                ("f1", self.f1), ("n_discovered", self.n_discovered), ("n_test", self.n_test),
                ("map_mode", self.map_mode)]


def evaluate(per_head_rankings, test, difficulty_store=None, bins=DEFAULT_BINS, map_mode="macro"):
    p, r, f1 = precision_recall_f1(per_head_rankings, test)
    per_head = per_head_average_precision(per_head_rankings, test)
    m = map_score(per_head_rankings, test, mode=map_mode)
    buckets = []
    if difficulty_store is not None:
        buckets = precision_by_difficulty(per_head_rankings, test,
                                          relation_difficulty(difficulty_store), bins)
    return EvalReport(map=m, precision=p, recall=r, f1=f1,
                      n_discovered=len(_fact_set(per_head_rankings)),
                      n_test=len(_fact_set(test)), per_head=per_head,
                      per_relation_bucket=buckets, map_mode=map_mode)


def _fmt(x):
    if isinstance(x, float):
        return "" if math.isnan(x) else repr(x)
    return str(x)


def _csv_text(header, rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    w.writerows(rows)
    return buf.getvalue()


def write_report(report, outdir, vocab=None, prefix="eval"):
    """``<prefix>.txt`` key = value pairs plus per-head and per-bucket CSV sidecars."""
    outdir = Path(outdir)
    atomic_write_text(outdir / f"{prefix}.txt",
                      "".join(f"{k} = {_fmt(v)}\n" for k, v in report.as_items()))
    heads = [(vocab.entities[h] if vocab is not None else h, repr(ap), hits)
             for h, ap, hits in report.per_head]
    atomic_write_text(outdir / f"{prefix}_per_head.csv",
                      _csv_text(["head", "average_precision", "hits"], heads))
    buckets = [(_fmt(b.hpt_lo), _fmt(b.hpt_hi), _fmt(b.tph_lo), _fmt(b.tph_hi), b.discovered,
                b.hits, "" if b.precision is None else repr(b.precision))
               for b in report.per_relation_bucket]
    atomic_write_text(outdir / f"{prefix}_buckets.csv",
                      _csv_text(["hpt_lo", "hpt_hi", "tph_lo", "tph_hi", "discovered", "hits",
                                 "precision"], buckets))


def read_report(path):
    out = {}
    for line in Path(path).read_text(encoding="utf-8").splitlines():
        if "=" in line:
            k, v = (x.strip() for x in line.split("=", 1))
            out[k] = v
    return out
