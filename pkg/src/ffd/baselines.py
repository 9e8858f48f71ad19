"""Matrix-factorisation baselines over the (head, relation-tail pair) incidence matrix."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from sklearn.utils.extmath import randomized_svd

from .discovery import ScoredFact
from .errors import ConfigError, EntityLookupError
from .random import rng_for
from .ranking import top_k_order


@dataclass(frozen=True)
class PairVocab:
    """Columns of the incidence matrix: (relation, tail) pairs sorted by (r, t)."""

    pairs: np.ndarray
    n_entities: int
    min_count: int

    def __len__(self):
        return len(self.pairs)

    @property
    def codes(self):
        return self.pairs[:, 0] * self.n_entities + self.pairs[:, 1]

    def column(self, r, t):
        code = r * self.n_entities + t
        codes = self.codes
        i = int(np.searchsorted(codes, code))
        if i == len(codes) or codes[i] != code:
            raise KeyError((r, t))
        return i


def build_pair_matrix(train, min_count=3):
    """Keep (r, t) pairs seen strictly more than ``min_count`` times in train;
    return the pair vocabulary and the |E| x p 0-1 CSR incidence matrix."""
    ne = train.n_entities
    tr = train.triples
    codes = tr[:, 1] * ne + tr[:, 2]
    uniq, counts = np.unique(codes, return_counts=True)
    kept = uniq[counts > min_count]
    vocab = PairVocab(np.stack([kept // ne, kept % ne], axis=1).astype(np.int64), ne, min_count)
    pos = np.searchsorted(kept, codes)
    pos[pos == len(kept)] = 0
    hit = (kept[pos] == codes) if len(kept) else np.zeros(len(codes), dtype=bool)
    rows, cols = tr[hit, 0], pos[hit]
    M = sp.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(ne, len(kept)))
    M.sum_duplicates()
    M.data[:] = 1.0
    return vocab, M


def svd_factorize(M, k, seed=0, n_oversamples=10, n_iter=2, exact_below=250_000):
    """Rank-k truncated SVD with W = U and H = S V^T.

    Matrices with at most ``exact_below`` cells use a dense LAPACK SVD; larger
    ones use randomized range finding with the given oversampling and power
    iterations.
    """
    if not 1 <= k <= min(M.shape):
        raise ConfigError(f"rank {k} outside [1, {min(M.shape)}]")
    if M.shape[0] * M.shape[1] <= exact_below:
        dense = M.toarray() if sp.issparse(M) else np.asarray(M, dtype=float)
        U, S, Vt = np.linalg.svd(dense, full_matrices=False)
        U, S, Vt = U[:, :k], S[:k], Vt[:k]
    else:
        U, S, Vt = randomized_svd(M, n_components=k, n_oversamples=n_oversamples, n_iter=n_iter,
                                  random_state=int(seed) % (2 ** 32))
    return U, S[:, None] * Vt


def _frobenius_sq(M, W, H, m_norm_sq):
    # ||M - WH||^2 without forming WH
    cross = float((np.asarray(M @ H.T) * W).sum())
    return m_norm_sq - 2.0 * cross + float(((W.T @ W) * (H @ H.T)).sum())


def nmf_factorize(M, k, iters=200, seed=0, return_trace=False, eps=1e-12):
    """Lee-Seung multiplicative updates for min ||M - WH||_F^2 with W, H >= 0."""
    n, p = M.shape
    if not 1 <= k <= min(n, p):
        raise ConfigError(f"rank {k} outside [1, {min(n, p)}]")
    if sp.issparse(M):
        if M.nnz and M.data.min() < 0:
            raise ConfigError("NMF needs a nonnegative matrix")
        m_norm_sq = float(M.multiply(M).sum())
    else:
        M = np.asarray(M, dtype=float)
        if (M < 0).any():
            raise ConfigError("NMF needs a nonnegative matrix")
        m_norm_sq = float((M * M).sum())
    rng = rng_for(seed, "nmf")
    # positive init with E[WH] matching the mean entry of M
    scale = np.sqrt(m_norm_sq / (n * p) / k) / 0.55 if m_norm_sq > 0 else 0.1
    W = rng.uniform(0.1, 1.0, size=(n, k)) * scale
    H = rng.uniform(0.1, 1.0, size=(k, p)) * scale
    trace = [_frobenius_sq(M, W, H, m_norm_sq)] if return_trace else None
    for _ in range(iters):
        H *= np.asarray(M.T @ W).T / ((W.T @ W) @ H + eps)
        W *= np.asarray(M @ H.T) / (W @ (H @ H.T) + eps)
        if return_trace:
            trace.append(_frobenius_sq(M, W, H, m_norm_sq))
    if return_trace:
        return W, H, trace
    return W, H


def mf_predict(W, H, pair_vocab, head, K_bar, train=None, exclude_known=True):
    """Top-K_bar (relation, tail) pairs for one head from the row of W @ H."""
    if not 0 <= int(head) < W.shape[0]:
        raise EntityLookupError(f"head id {head} has no row")
    scores = W[int(head)] @ H
    cand = np.arange(len(scores))
    if exclude_known and train is not None and len(cand):
        pairs = pair_vocab.pairs
        triples = np.column_stack([np.full(len(pairs), int(head)), pairs[:, 0], pairs[:, 1]])
        cand = cand[~train.contains(triples)]
    pick = cand[top_k_order(scores[cand], K_bar)]
    out = []
    for j in pick:
        r, t = pair_vocab.pairs[j]
        s = float(scores[j])
        out.append(ScoredFact(int(head), int(r), int(t), s, s, s, s))
    return out


def mf_predict_all(W, H, pair_vocab, heads, K_bar, train=None, exclude_known=True):
    return {int(h): mf_predict(W, H, pair_vocab, h, K_bar, train, exclude_known)
            for h in sorted(set(int(x) for x in heads))}
