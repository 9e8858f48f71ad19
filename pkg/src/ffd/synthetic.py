"""Synthetic knowledge bases with planted structure, for tests and offline experiments."""

from __future__ import annotations

import numpy as np

from .kb import TripleStore, Vocab
from .random import rng_for


def store_from_ids(triples, n_entities, n_relations):
    vocab = Vocab([f"e{i}" for i in range(n_entities)], [f"r{i}" for i in range(n_relations)])
    return TripleStore(vocab, np.asarray(triples, dtype=np.int64).reshape(-1, 3))


def random_kb(n_entities, n_relations, n_facts, seed=0):
    """Uniformly random facts (duplicates dropped)."""
    rng = rng_for(seed, "random-kb")
    t = np.column_stack([rng.integers(n_entities, size=n_facts),
                         rng.integers(n_relations, size=n_facts),
                         rng.integers(n_entities, size=n_facts)])
    return store_from_ids(t, n_entities, n_relations)


def two_cluster_profiles(n_entities=200, n_relations=10, p_in=0.9, p_out=0.02, seed=0):
    """Head profiles where relations {0..R/2-1} and {R/2..R-1} co-occur.

    Entity i belongs to cluster ``i % 2``; it has each relation of its own
    cluster with probability ``p_in`` and each other relation with ``p_out``.
    Returns (profiles, cluster labels).
    """
    rng = rng_for(seed, "two-cluster")
    half = n_relations // 2
    clusters = np.arange(n_entities) % 2
    own = np.zeros((n_entities, n_relations), dtype=bool)
    own[clusters == 0, :half] = True
    own[clusters == 1, half:] = True
    p = np.where(own, p_in, p_out)
    Y = (rng.random((n_entities, n_relations)) < p).astype(float)
    # every entity keeps at least two relations of its own cluster
    for i in range(n_entities):
        mine = np.flatnonzero(own[i])
        if Y[i, mine].sum() < 2:
            Y[i, rng.choice(mine, 2, replace=False)] = 1.0
    return Y, clusters


def typed_kb(n_types=6, entities_per_type=100, relations_per_type=16, communities=4,
             p_relation=0.7, p_community=0.85, max_tails=5, n_values=12, seed=0):
    """A typed KB with schema, community and 'value' structure.

    Entities have a type and a latent community. Each type owns a relation
    schema: a relation links heads of its type to tails of one target type
    (another entity type, or a small shared pool of value entities such as
    currencies). A head has each schema relation with probability
    ``p_relation`` and 1..``max_tails`` tails for it, drawn from its own
    community with probability ``p_community``.
    """
    rng = rng_for(seed, "typed-kb")
    n_ent_typed = n_types * entities_per_type
    ent_type = np.repeat(np.arange(n_types), entities_per_type)
    community = rng.integers(communities, size=n_ent_typed)
    values = np.arange(n_ent_typed, n_ent_typed + n_values)
    n_entities = n_ent_typed + n_values

    rel_head_type, rel_target, rel_tails = [], [], []
    for ty in range(n_types):
        for j in range(relations_per_type):
            rel_head_type.append(ty)
            if j < 2:
                rel_target.append(-1)  # value relation
                rel_tails.append(1)
            else:
                rel_target.append(int(rng.integers(n_types)))
                rel_tails.append(int(rng.integers(1, max_tails + 1)))
    n_relations = len(rel_head_type)

    # a relation's preferred tails within each community: a small pool
    pools = {}
    for r in range(n_relations):
        tgt = rel_target[r]
        if tgt < 0:
            pools[r] = [rng.choice(values, size=2, replace=False) for _ in range(communities)]
        else:
            members = np.flatnonzero(ent_type == tgt)
            pools[r] = []
            for c in range(communities):
                cand = members[community[members] == c]
                if len(cand) == 0:
                    cand = members
                pools[r].append(rng.choice(cand, size=min(6, len(cand)), replace=False))

    facts = []
    for h in range(n_ent_typed):
        ty, c = ent_type[h], community[h]
        for r in np.flatnonzero(np.array(rel_head_type) == ty):
            if rng.random() >= p_relation:
                continue
            tgt = rel_target[r]
            n = int(rng.integers(1, rel_tails[r] + 1))
            for _ in range(n):
                if rng.random() < p_community:
                    t = int(rng.choice(pools[r][c]))
                else:
                    t = int(rng.choice(values if tgt < 0 else np.flatnonzero(ent_type == tgt)))
                if t != h:
                    facts.append((h, int(r), t))
    return store_from_ids(facts, n_entities, n_relations)
