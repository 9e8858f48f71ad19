"""Shared builders for tests that need facet components without training."""

import numpy as np

from ffd import autoencoder as ae
from ffd.discovery import FacetComponents
from ffd.kbr import KbrModel
from ffd.synthetic import random_kb


def random_components(ne, nr, n_facts, kind="analogy", dim=6, d1=5, seed=0, scale=1.0):
    train = random_kb(ne, nr, n_facts, seed=seed)
    rng = np.random.default_rng(seed + 1000)

    def params():
        return ae.AutoencoderParams(rng.normal(size=(d1, nr)), rng.normal(size=d1),
                                    rng.normal(size=(nr, d1)), rng.normal(size=nr))

    model = KbrModel(kind, rng.normal(size=(ne, dim)) * scale, rng.normal(size=(nr, dim)) * scale)
    return FacetComponents(params(), params(), model, train)
