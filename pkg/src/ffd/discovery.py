"""Fact discovery by facet decomposition, plus the exhaustive KBR+ ranking.

For a head ``h`` the discovery pipeline prunes the |R| x |E| candidate grid
in three stages before the final cut:

1. keep the ``n_h`` relations with the highest head-relation facet f_h(r);
2. for each kept relation keep the ``n_t`` entities with the highest
   tail-relation facet f_t(r) (precomputed once per tail auto-encoder);
3. score those tails with the tail-inference facet f_{h,r}(t) and cache the
   best ``n_f`` per relation (or per head, see ``nf_scope``).

Survivors are ranked by ``lambda1*f_h(r) + lambda2*f_t(r) + lambda3*f_{h,r}(t)``;
ties go to the smaller (relation id, tail id).
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from . import autoencoder as ae
from . import kbr
from .errors import ConfigError, EntityLookupError, FfdError, ParseError, StateError
from .kb import HEAD, TAIL, atomic_write_text, profile_matrix, relation_profile
from .ranking import top_k_order


class DiscoveryError(FfdError):
    def __init__(self, head, cause):
        self.head = head
        super().__init__(f"head {head}: {cause}")


@dataclass(frozen=True)
class DiscoveryConfig:
    n_h: int = 30
    n_t: int = 30
    n_f: int = 10
    K_bar: int = 50
    lambda1: float = 1.0
    lambda2: float = 1.0
    lambda3: float = 0.5
    exclude_known: bool = True
    nf_scope: str = "relation"

    def __post_init__(self):
        if min(self.n_h, self.n_t, self.n_f) < 1:
            raise ConfigError("n_h, n_t and n_f must be >= 1")
        if self.n_f > self.n_t:
            raise ConfigError("n_f must not exceed n_t")
        if self.K_bar < 1:
            raise ConfigError("K_bar must be >= 1")
        if not all(math.isfinite(x) for x in (self.lambda1, self.lambda2, self.lambda3)):
            raise ConfigError("facet weights must be finite")
        if self.nf_scope not in ("relation", "head"):
            raise ConfigError("nf_scope must be 'relation' or 'head'")


@dataclass(frozen=True)
class ScoredFact:
    h: int
    r: int
    t: int
    f_h_r: float
    f_t_r: float
    f_hr_t: float
    confidence: float

    @property
    def triple(self):
        return (self.h, self.r, self.t)


def confidence(f_h_r, f_t_r, f_hr_t, cfg):
    return cfg.lambda1 * f_h_r + cfg.lambda2 * f_t_r + cfg.lambda3 * f_hr_t


class FacetComponents:
    """Trained facet models bound to the training store they were fitted on."""

    def __init__(self, head_ae, tail_ae, model, train):
        if head_ae is None or tail_ae is None or model is None:
            raise StateError("all three facet components must be trained")
        nr, ne = train.n_relations, train.n_entities
        if head_ae.n_relations != nr or tail_ae.n_relations != nr:
            raise StateError("auto-encoder width does not match |R|")
        if model.n_entities != ne or model.n_relations != nr:
            raise StateError("KBR model shape does not match the vocabulary")
        self.head_ae = head_ae
        self.tail_ae = tail_ae
        self.model = model
        self.train = train
        self._top_tails = {}

    @cached_property
    def tail_table(self):
        """f_t(r) for every (entity, relation): |E| x |R|."""
        table = ae.score_table(self.tail_ae, profile_matrix(self.train, TAIL))
        table.setflags(write=False)
        return table

    def head_scores(self, h):
        return ae.predict_relation_scores(self.head_ae, relation_profile(self.train, h, HEAD))

    def top_tails(self, r, n_t):
        key = (int(r), int(n_t))
        tails = self._top_tails.get(key)
        if tails is None:
            tails = top_k_order(self.tail_table[:, r], n_t)
            self._top_tails[key] = tails
        return tails

    def prepare(self, relations=None, n_t=None):
        """Materialise shared caches up front, e.g. before threaded discovery."""
        _ = self.tail_table
        if relations is not None and n_t is not None:
            for r in relations:
                self.top_tails(r, n_t)


def _known_pairs(train, h):
    rows = train.by_head.get(int(h))
    if rows is None:
        return np.empty(0, dtype=np.int64)
    return rows[:, 0] * train.n_entities + rows[:, 1]


def _final_cut(h, rs, ts, fh, ft, fhrt, cfg):
    conf = confidence(fh, ft, fhrt, cfg)
    order = np.lexsort((ts, rs, -conf))[:cfg.K_bar]
    return [ScoredFact(int(h), int(rs[i]), int(ts[i]), float(fh[i]), float(ft[i]),
                       float(fhrt[i]), float(conf[i])) for i in order]


def discover_for_head(h, components, cfg=DiscoveryConfig()):
    """Top-``K_bar`` facts for one head, best first."""
    c = components
    ne = c.train.n_entities
    if not 0 <= int(h) < ne:
        raise EntityLookupError(f"head id {h} out of range")
    f_h = c.head_scores(h)
    rels = top_k_order(f_h, cfg.n_h)
    L = kbr.tail_log_softmax_many(c.model, h, rels)
    known = _known_pairs(c.train, h) if cfg.exclude_known else None

    rs, ts, fhrt = [], [], []
    for i, r in enumerate(rels):
        tails = np.sort(c.top_tails(r, cfg.n_t))
        if known is not None and len(known):
            tails = tails[~np.isin(r * ne + tails, known)]
        s = L[i, tails]
        if cfg.nf_scope == "relation":
            keep = top_k_order(s, cfg.n_f)
            tails, s = tails[keep], s[keep]
        rs.append(np.full(len(tails), r, dtype=np.int64))
        ts.append(tails)
        fhrt.append(s)
    if not rs:
        return []
    rs, ts, fhrt = np.concatenate(rs), np.concatenate(ts), np.concatenate(fhrt)
    if cfg.nf_scope == "head":
        keep = np.lexsort((ts, rs, -fhrt))[:cfg.n_f]
        rs, ts, fhrt = rs[keep], ts[keep], fhrt[keep]
    return _final_cut(h, rs, ts, f_h[rs], c.tail_table[ts, rs], fhrt, cfg)


def _run_per_head(fn, heads, workers):
    heads = [int(h) for h in heads]

    def guarded(h):
        try:
            return fn(h)
        except FfdError as exc:
            if isinstance(exc, DiscoveryError):
                raise
            raise DiscoveryError(h, exc) from exc

    if workers and workers > 1 and len(heads) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(guarded, heads))
    else:
        results = [guarded(h) for h in heads]
    return dict(zip(heads, results))


def discover_all(heads, components, cfg=DiscoveryConfig(), workers=1):
    """Run :func:`discover_for_head` for every head; returns {head: facts}."""
    components.prepare()
    return _run_per_head(lambda h: discover_for_head(h, components, cfg), sorted(set(heads)),
                         workers)


def exhaustive_kbr_rank(model, h, K_bar, train, exclude_known=True):
    """KBR+ baseline: rank the whole relation x tail grid by log p(r, t | h)."""
    J = kbr.joint_log_softmax(model, h).ravel()
    ne = model.n_entities
    cand = np.arange(len(J))
    if exclude_known:
        known = _known_pairs(train, h)
        if len(known):
            cand = cand[~np.isin(cand, known)]
    s = J[cand]
    pick = cand[top_k_order(s, K_bar)]
    return [ScoredFact(int(h), int(i // ne), int(i % ne), float(J[i]), float(J[i]), float(J[i]),
                       float(J[i])) for i in pick]


def exhaustive_all(heads, model, K_bar, train, exclude_known=True, workers=1):
    return _run_per_head(lambda h: exhaustive_kbr_rank(model, h, K_bar, train, exclude_known),
                         sorted(set(heads)), workers)


def flatten(per_head):
    return [f for h in sorted(per_head) for f in per_head[h]]


# --------------------------------------------------------------------------
# discovered-facts TSV:
# head TAB relation TAB tail TAB confidence TAB f_h TAB f_t TAB f_hrt

def format_facts(per_head, vocab):
    ents, rels = vocab.entities, vocab.relations
    lines = []
    for h in sorted(per_head):
        for f in per_head[h]:
            lines.append(f"{ents[f.h]}\t{rels[f.r]}\t{ents[f.t]}\t{f.confidence!r}\t"
                         f"{f.f_h_r!r}\t{f.f_t_r!r}\t{f.f_hr_t!r}\n")
    return "".join(lines)


def write_facts(per_head, vocab, path):
    atomic_write_text(path, format_facts(per_head, vocab))


def read_facts(path, vocab):
    per_head = {}
    with Path(path).open(encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.rstrip("\n")
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 7:
                raise ParseError(path, no, f"expected 7 fields, got {len(parts)}")
            h, r, t = vocab.entity_id(parts[0]), vocab.relation_id(parts[1]), vocab.entity_id(parts[2])
            conf, fh_, ft_, fhrt = (float(x) for x in parts[3:])
            per_head.setdefault(h, []).append(ScoredFact(h, r, t, fh_, ft_, fhrt, conf))
    return per_head
