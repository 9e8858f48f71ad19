import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ffd.kb import TripleStore, Vocab

settings.register_profile("default", max_examples=60, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


def make_store(triples, n_entities=None, n_relations=None):
    triples = np.asarray(triples, dtype=np.int64).reshape(-1, 3)
    ne = n_entities if n_entities is not None else int(triples[:, [0, 2]].max(initial=-1)) + 1
    nr = n_relations if n_relations is not None else int(triples[:, 1].max(initial=-1)) + 1
    vocab = Vocab([f"e{i}" for i in range(ne)], [f"r{i}" for i in range(nr)])
    return TripleStore(vocab, triples)


@pytest.fixture
def toy_store():
    # 6 entities, 3 relations
    return make_store([
        (0, 0, 1), (0, 0, 2), (0, 1, 3), (0, 2, 4),
        (1, 0, 2), (1, 1, 5), (2, 2, 0), (3, 1, 4),
        (4, 0, 5), (4, 2, 1), (5, 1, 0), (5, 2, 3),
    ], 6, 3)
