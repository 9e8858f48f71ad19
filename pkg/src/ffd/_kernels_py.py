"""Numpy implementations of the compiled kernels, used when the extension is absent."""

import numpy as np


def _split(x, n_scalar):
    return x[:, :n_scalar], x[:, n_scalar::2], x[:, n_scalar + 1::2]


def score_triples(ent, rel, h, r, t, n_scalar, out):
    H, R, T = ent[h], rel[r], ent[t]
    hs, h1, h2 = _split(H, n_scalar)
    rs, a, b = _split(R, n_scalar)
    ts, t1, t2 = _split(T, n_scalar)
    out[:] = ((hs * rs * ts).sum(axis=1)
              + (a * (h1 * t1 + h2 * t2) + b * (h1 * t2 - h2 * t1)).sum(axis=1))


def accumulate_grads(ent, rel, h, r, t, coef, n_scalar, g_ent, g_rel):
    c = np.asarray(coef)[:, None]
    H, R, T = ent[h], rel[r], ent[t]
    hs, h1, h2 = _split(H, n_scalar)
    rs, a, b = _split(R, n_scalar)
    ts, t1, t2 = _split(T, n_scalar)

    dH = np.empty_like(H)
    dT = np.empty_like(T)
    dR = np.empty_like(R)
    dH[:, :n_scalar] = rs * ts
    dT[:, :n_scalar] = hs * rs
    dR[:, :n_scalar] = hs * ts
    dH[:, n_scalar::2] = a * t1 + b * t2
    dH[:, n_scalar + 1::2] = a * t2 - b * t1
    dT[:, n_scalar::2] = a * h1 - b * h2
    dT[:, n_scalar + 1::2] = b * h1 + a * h2
    dR[:, n_scalar::2] = h1 * t1 + h2 * t2
    dR[:, n_scalar + 1::2] = h1 * t2 - h2 * t1

    np.add.at(g_ent, h, c * dH)
    np.add.at(g_ent, t, c * dT)
    np.add.at(g_rel, r, c * dR)
