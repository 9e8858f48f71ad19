import numpy as np


def top_k_order(scores, k):
    """Indices of the ``k`` largest scores, best first, ties by ascending index.

    Exact under ties: every element tied with the k-th largest value is a
    candidate before the final cut.
    """
    scores = np.asarray(scores, dtype=float)
    n = len(scores)
    k = min(int(k), n)
    if k <= 0:
        return np.empty(0, dtype=np.int64)
    if k < n:
        kth = np.partition(scores, n - k)[n - k]
        cand = np.flatnonzero(scores >= kth)
    else:
        cand = np.arange(n)
    order = np.lexsort((cand, -scores[cand]))
    return cand[order[:k]].astype(np.int64)
