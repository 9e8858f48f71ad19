"""Triple files, vocabularies, the fact-discovery re-split and relation profiles."""

from __future__ import annotations

import math
import os
import tempfile
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path

import numpy as np

from .errors import ConfigError, EntityLookupError, ParseError, VocabularyError
from .random import rng_for

HEAD = "head"
TAIL = "tail"
ROLES = (HEAD, TAIL)


class Vocab:
    """Bijections entity-label <-> id and relation-label <-> id.

    Ids are dense, assigned in first-appearance order.
    """

    def __init__(self, entities=(), relations=()):
        self.entities = list(entities)
        self.relations = list(relations)
        self._ent = {lab: i for i, lab in enumerate(self.entities)}
        self._rel = {lab: i for i, lab in enumerate(self.relations)}
        if len(self._ent) != len(self.entities) or len(self._rel) != len(self.relations):
            raise VocabularyError("duplicate label in vocabulary")

    @property
    def n_entities(self):
        return len(self.entities)

    @property
    def n_relations(self):
        return len(self.relations)

    def entity_id(self, label):
        try:
            return self._ent[label]
        except KeyError:
            raise VocabularyError(f"unknown entity label {label!r}") from None

    def relation_id(self, label):
        try:
            return self._rel[label]
        except KeyError:
            raise VocabularyError(f"unknown relation label {label!r}") from None

    def has_entity(self, label):
        return label in self._ent

    def _add(self, h, r, t):
        for lab, table, labels in ((h, self._ent, self.entities), (t, self._ent, self.entities),
                                   (r, self._rel, self.relations)):
            if lab not in table:
                table[lab] = len(labels)
                labels.append(lab)

    @classmethod
    def scan(cls, paths):
        """Build a vocabulary over several triple files, in file then line order."""
        vocab = cls()
        for path in paths:
            for _, h, r, t in _read_lines(path):
                vocab._add(h, r, t)
        return vocab

    def __eq__(self, other):
        return (isinstance(other, Vocab) and self.entities == other.entities
                and self.relations == other.relations)

    def __repr__(self):
        return f"Vocab(|E|={self.n_entities}, |R|={self.n_relations})"


def _dedupe(triples):
    if len(triples) == 0:
        return triples
    _, first = np.unique(triples, axis=0, return_index=True)
    return triples[np.sort(first)]


class TripleStore:
    """An immutable set of (h, r, t) id triples over a shared vocabulary.

    ``triples`` keeps first-appearance order with duplicates removed.
    """

    def __init__(self, vocab, triples=None):
        self.vocab = vocab
        arr = np.asarray(triples if triples is not None else np.empty((0, 3)), dtype=np.int64)
        arr = _dedupe(arr.reshape(-1, 3))
        if len(arr):
            ne, nr = vocab.n_entities, vocab.n_relations
            if (arr[:, [0, 2]].min() < 0 or arr[:, [0, 2]].max() >= ne
                    or arr[:, 1].min() < 0 or arr[:, 1].max() >= nr):
                raise EntityLookupError("triple id out of vocabulary range")
        arr.setflags(write=False)
        self.triples = arr

    def __len__(self):
        return len(self.triples)

    def __iter__(self):
        for h, r, t in self.triples:
            yield int(h), int(r), int(t)

    def __contains__(self, triple):
        h, r, t = triple
        return bool(self.contains(np.array([[h, r, t]]))[0])

    @property
    def n_entities(self):
        return self.vocab.n_entities

    @property
    def n_relations(self):
        return self.vocab.n_relations

    def encode(self, triples):
        triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
        ne, nr = self.vocab.n_entities, self.vocab.n_relations
        return (triples[:, 0] * nr + triples[:, 1]) * ne + triples[:, 2]

    @cached_property
    def keys(self):
        """Sorted int64 codes of all facts, for vectorised membership tests."""
        k = np.sort(self.encode(self.triples))
        k.setflags(write=False)
        return k

    def contains(self, triples):
        codes = self.encode(triples)
        keys = self.keys
        if len(keys) == 0:
            return np.zeros(len(codes), dtype=bool)
        pos = np.searchsorted(keys, codes)
        pos[pos == len(keys)] = 0
        return keys[pos] == codes

    def fact_set(self):
        return {(int(h), int(r), int(t)) for h, r, t in self.triples}

    @cached_property
    def by_head(self):
        return _group(self.triples, 0, (1, 2))

    @cached_property
    def by_tail(self):
        return _group(self.triples, 2, (1, 0))

    def relations_of(self, entity, role=HEAD):
        index = self.by_head if role == HEAD else self.by_tail
        rows = index.get(int(entity))
        if rows is None:
            return np.empty(0, dtype=np.int64)
        return np.unique(rows[:, 0])

    def heads(self):
        return np.unique(self.triples[:, 0])

    def with_facts(self, extra):
        """Return a new store holding these facts plus ``extra``."""
        extra = np.asarray(extra, dtype=np.int64).reshape(-1, 3)
        return TripleStore(self.vocab, np.concatenate([self.triples, extra]))

    def without(self, other_triples):
        mask = ~TripleStore(self.vocab, other_triples).contains(self.triples)
        return TripleStore(self.vocab, self.triples[mask])

    def labelled(self):
        v = self.vocab
        for h, r, t in self:
            yield v.entities[h], v.relations[r], v.entities[t]

    def __eq__(self, other):
        return (isinstance(other, TripleStore) and self.vocab == other.vocab
                and np.array_equal(self.keys, other.keys))

    def __repr__(self):
        return f"TripleStore({len(self)} facts, {self.vocab!r})"


def _group(triples, key_col, val_cols):
    if len(triples) == 0:
        return {}
    order = np.argsort(triples[:, key_col], kind="stable")
    keys = triples[order, key_col]
    vals = triples[order][:, list(val_cols)]
    bounds = np.flatnonzero(np.diff(keys)) + 1
    starts = np.concatenate([[0], bounds])
    return {int(keys[s]): chunk for s, chunk in zip(starts, np.split(vals, bounds))}


def _read_lines(path):
    path = Path(path)
    with path.open("r", encoding="utf-8") as fh:
        for no, line in enumerate(fh, 1):
            line = line.rstrip("\r\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise ParseError(path, no, f"expected 3 tab-separated fields, got {len(fields)}")
            yield no, fields[0], fields[1], fields[2]


def load_triples(path, vocab=None):
    """Read a head<TAB>relation<TAB>tail file.

    With ``vocab`` given, labels missing from it raise VocabularyError;
    otherwise a fresh vocabulary is grown in first-appearance order.
    """
    fixed = vocab is not None
    vocab = vocab if fixed else Vocab()
    rows = []
    for no, h, r, t in _read_lines(path):
        if not fixed:
            vocab._add(h, r, t)
        try:
            rows.append((vocab.entity_id(h), vocab.relation_id(r), vocab.entity_id(t)))
        except VocabularyError as exc:
            raise VocabularyError(f"{path}:{no}: {exc}") from None
    return TripleStore(vocab, np.array(rows, dtype=np.int64).reshape(-1, 3))


def atomic_write_text(path, text):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_bytes(path, data):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_triples(store, path):
    lines = ["\t".join(row) + "\n" for row in store.labelled()]
    atomic_write_text(path, "".join(lines))


# --------------------------------------------------------------------------
# splitting

@dataclass(frozen=True)
class KbSplit:
    train: TripleStore
    valid: TripleStore
    test: TripleStore
    heads: np.ndarray
    valid_heads: np.ndarray

    @property
    def vocab(self):
        return self.train.vocab


def _n_train_relations(n, ratio):
    # both sides must stay nonempty
    return min(max(math.ceil(ratio / 100.0 * n - 1e-9), 1), n - 1)


def split_fdkb(all_facts, ratio=50.0, num_heads=2000, valid_fraction=1.0, seed=0,
               test_ratio=None):
    """Re-split a KB for head-only fact discovery.

    ``num_heads`` test heads and ``round(valid_fraction * num_heads)``
    validation heads are drawn uniformly (disjointly) among entities with
    at least two distinct relations as head. Each sampled head's relations
    are permuted; the first ``ceil(ratio%)`` go to train and the rest to the
    held-out side, every (h, r, *) fact travelling with its relation.

    ``test_ratio`` fixes the held-out side independently of ``ratio`` (used by
    the sparsity sweep): the held-out relations are those beyond
    ``ceil(test_ratio%)`` and the train side keeps ``ceil(ratio%)`` of the
    remaining ones, so facts of dropped relations leave the KB altogether.
    Non-sampled heads keep all facts in train.
    """
    if not 0 < ratio < 100:
        raise ConfigError(f"ratio must lie in (0, 100), got {ratio}")
    test_ratio = ratio if test_ratio is None else test_ratio
    if not 0 < test_ratio < 100 or ratio > test_ratio:
        raise ConfigError(f"test_ratio must lie in [ratio, 100), got {test_ratio}")
    if num_heads < 1:
        raise ConfigError("num_heads must be positive")
    if valid_fraction < 0:
        raise ConfigError("valid_fraction must be nonnegative")

    vocab = all_facts.vocab
    triples = all_facts.triples
    nr = vocab.n_relations
    hr = np.unique(triples[:, 0] * nr + triples[:, 1])
    hr_heads = hr // nr
    heads, counts = np.unique(hr_heads, return_counts=True)
    eligible = heads[counts >= 2]
    n_valid = int(round(valid_fraction * num_heads))
    if len(eligible) == 0 or num_heads + n_valid > len(eligible):
        raise ConfigError(
            f"need {num_heads + n_valid} heads with >= 2 relations, only {len(eligible)} eligible")

    rng = rng_for(seed, "split")
    sampled = rng.choice(eligible, size=num_heads + n_valid, replace=False)
    test_heads = np.sort(sampled[:num_heads])
    valid_heads = np.sort(sampled[num_heads:])

    # side code per (h, r): 0 train, 1 test, 2 valid, 3 dropped
    codes = {}
    test_set = {int(h) for h in test_heads}
    rel_rng = rng_for(seed, "split", "relations")
    for h in np.sort(sampled):
        rels = hr[hr_heads == h] % nr
        rels = rels[rel_rng.permutation(len(rels))]
        n = len(rels)
        n_keep_side = _n_train_relations(n, test_ratio)
        is_test = int(h) in test_set
        n_train = _n_train_relations(n, ratio) if is_test else n_keep_side
        n_train = min(n_train, n_keep_side)
        held = 1 if is_test else 2
        for i, r in enumerate(rels):
            if i < n_train:
                side = 0
            elif i < n_keep_side:
                side = 3
            else:
                side = held
            codes[int(h) * nr + int(r)] = side

    fact_hr = triples[:, 0] * nr + triples[:, 1]
    side = np.zeros(len(triples), dtype=np.int8)
    if codes:
        ks = np.fromiter(codes.keys(), dtype=np.int64, count=len(codes))
        vs = np.fromiter(codes.values(), dtype=np.int8, count=len(codes))
        order = np.argsort(ks)
        ks, vs = ks[order], vs[order]
        pos = np.searchsorted(ks, fact_hr)
        pos[pos == len(ks)] = 0
        hit = ks[pos] == fact_hr
        side[hit] = vs[pos[hit]]

    return KbSplit(
        train=TripleStore(vocab, triples[side == 0]),
        valid=TripleStore(vocab, triples[side == 2]),
        test=TripleStore(vocab, triples[side == 1]),
        heads=test_heads,
        valid_heads=valid_heads,
    )


def write_split(split, outdir):
    outdir = Path(outdir)
    save_triples(split.train, outdir / "train.txt")
    save_triples(split.valid, outdir / "valid.txt")
    save_triples(split.test, outdir / "test.txt")
    ents = split.vocab.entities
    atomic_write_text(outdir / "heads.txt", "".join(ents[h] + "\n" for h in split.heads))


def load_split(outdir):
    """Reload a split written by :func:`write_split` with one shared vocabulary."""
    outdir = Path(outdir)
    files = [outdir / f"{name}.txt" for name in ("train", "valid", "test")]
    for f in files + [outdir / "heads.txt"]:
        if not f.exists():
            raise FileNotFoundError(f"missing split file: {f}")
    vocab = Vocab.scan(files)
    train, valid, test = (load_triples(f, vocab) for f in files)
    labels = [ln for ln in (outdir / "heads.txt").read_text(encoding="utf-8").splitlines() if ln]
    heads = np.array(sorted(vocab.entity_id(lab) for lab in labels), dtype=np.int64)
    valid_heads = np.unique(valid.triples[:, 0]) if len(valid) else np.empty(0, dtype=np.int64)
    return KbSplit(train=train, valid=valid, test=test, heads=heads, valid_heads=valid_heads)


# --------------------------------------------------------------------------
# relation profiles

@dataclass(frozen=True)
class RelationProfile:
    entity: int
    role: str
    bits: np.ndarray

    @property
    def is_empty(self):
        return not self.bits.any()


def _check_role(role):
    if role not in ROLES:
        raise ValueError(f"role must be 'head' or 'tail', got {role!r}")


def relation_profile(store, entity, role=HEAD):
    _check_role(role)
    if not 0 <= int(entity) < store.n_entities:
        raise EntityLookupError(f"entity id {entity} out of range")
    bits = np.zeros(store.n_relations, dtype=np.float64)
    bits[store.relations_of(entity, role)] = 1.0
    return RelationProfile(int(entity), role, bits)


def profile_matrix(store, role=HEAD):
    """Dense |E| x |R| 0-1 matrix whose rows are the relation profiles."""
    _check_role(role)
    m = np.zeros((store.n_entities, store.n_relations), dtype=np.float64)
    if len(store):
        ent = store.triples[:, 0] if role == HEAD else store.triples[:, 2]
        m[ent, store.triples[:, 1]] = 1.0
    return m
