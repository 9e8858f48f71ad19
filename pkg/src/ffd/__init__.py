"""Head-only fact discovery from knowledge bases by facet decomposition."""

from .discovery import DiscoveryConfig, FacetComponents, ScoredFact, discover_all, discover_for_head
from .kb import KbSplit, TripleStore, Vocab, load_triples, split_fdkb
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = [
    "BACKEND",
    "DiscoveryConfig",
    "FacetComponents",
    "KbSplit",
    "ScoredFact",
    "TripleStore",
    "Vocab",
    "discover_all",
    "discover_for_head",
    "load_triples",
    "split_fdkb",
]
