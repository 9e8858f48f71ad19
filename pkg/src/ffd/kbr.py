"""Bilinear knowledge-base representation models: DistMult, ComplEx and Analogy.

All three share one parameter layout. An embedding row of width ``d`` starts
with ``n_scalar`` diagonal coordinates and continues with 2x2 blocks stored
as (a, b) pairs, so a relation acts on entities as the block-diagonal matrix
``diag(s_1, ..., s_m) (+) [[a_1, b_1], [-b_1, a_1]] (+) ...``.

* DistMult: every coordinate is diagonal.
* ComplEx: every pair is one complex number (re, im); the block form gives
  ``Re(<h, r, conj(t)>)``.
* Analogy: half the width diagonal, the rest 2x2 blocks, i.e. the
  almost-diagonal normal, mutually commuting relation matrices.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import kernels
from .errors import (ConfigError, DimensionError, EntityLookupError, ModelFormatError,
                     TrainingError)
from .kb import atomic_write_bytes, atomic_write_text
from .optim import Adam
from .random import rng_for

DISTMULT = "distmult"
COMPLEX = "complex"
ANALOGY = "analogy"
KINDS = (DISTMULT, COMPLEX, ANALOGY)
_KIND_CODE = {DISTMULT: 1, COMPLEX: 2, ANALOGY: 3}

_MAGIC = b"FFDKBR"
_VERSION = 1


def normalize_kind(kind):
    k = str(kind).lower()
    if k not in KINDS:
        raise ConfigError(f"unknown KBR kind {kind!r}; expected one of {KINDS}")
    return k


def n_scalar_for(kind, dim):
    """Number of leading diagonal coordinates for a model kind and width."""
    kind = normalize_kind(kind)
    if kind == DISTMULT:
        return dim
    if kind == COMPLEX:
        if dim % 2:
            raise ConfigError("ComplEx needs an even embedding width")
        return 0
    return dim - 2 * (dim // 4)


@dataclass
class KbrModel:
    kind: str
    entity_emb: np.ndarray
    relation_emb: np.ndarray
    loss_trace: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        self.kind = normalize_kind(self.kind)
        self.entity_emb = np.ascontiguousarray(self.entity_emb, dtype=np.float64)
        self.relation_emb = np.ascontiguousarray(self.relation_emb, dtype=np.float64)
        if self.entity_emb.ndim != 2 or self.relation_emb.ndim != 2:
            raise DimensionError("embeddings must be 2-D")
        if self.entity_emb.shape[1] != self.relation_emb.shape[1]:
            raise DimensionError("entity and relation widths differ")
        self.n_scalar = n_scalar_for(self.kind, self.dim)

    @property
    def dim(self):
        return self.entity_emb.shape[1]

    @property
    def n_entities(self):
        return self.entity_emb.shape[0]

    @property
    def n_relations(self):
        return self.relation_emb.shape[0]

    def copy(self):
        return KbrModel(self.kind, self.entity_emb.copy(), self.relation_emb.copy(),
                        list(self.loss_trace))

    def all_finite(self):
        return bool(np.isfinite(self.entity_emb).all() and np.isfinite(self.relation_emb).all())


def init_model(kind, n_entities, n_relations, dim, rng):
    bound = 0.5 / np.sqrt(dim)
    return KbrModel(
        kind,
        rng.uniform(-bound, bound, size=(n_entities, dim)),
        rng.uniform(-bound, bound, size=(n_relations, dim)),
    )


def relation_matrix(model, r):
    """The d x d matrix M_r with score(h, r, t) = h^T M_r t."""
    rel = model.relation_emb[r]
    ns = model.n_scalar
    M = np.zeros((model.dim, model.dim))
    M[np.arange(ns), np.arange(ns)] = rel[:ns]
    for k in range(ns, model.dim - 1, 2):
        a, b = rel[k], rel[k + 1]
        M[k, k] = a
        M[k, k + 1] = b
        M[k + 1, k] = -b
        M[k + 1, k + 1] = a
    return M


def _check_ids(model, h=None, r=None, t=None):
    for name, ids, bound in (("head", h, model.n_entities), ("relation", r, model.n_relations),
                             ("tail", t, model.n_entities)):
        if ids is None:
            continue
        ids = np.asarray(ids)
        if ids.size and (ids.min() < 0 or ids.max() >= bound):
            raise EntityLookupError(f"{name} id out of range")


def score_batch(model, triples):
    triples = np.ascontiguousarray(np.asarray(triples, dtype=np.int64).reshape(-1, 3))
    h, r, t = (np.ascontiguousarray(triples[:, i]) for i in range(3))
    _check_ids(model, h, r, t)
    out = np.empty(len(triples))
    kernels.score_triples(model.entity_emb, model.relation_emb, h, r, t, model.n_scalar, out)
    return out


def score(model, h, r, t):
    """f_r(h, t) for a single triple."""
    return float(score_batch(model, [[h, r, t]])[0])


def head_queries(model, h, relations=None):
    """Rows q_r = h^T M_r for the given relations (default: all), so f_r(h, .) = q_r @ E^T."""
    _check_ids(model, h=h, r=relations)
    hv = model.entity_emb[h]
    rel = model.relation_emb if relations is None else model.relation_emb[np.asarray(relations)]
    ns = model.n_scalar
    Q = np.empty_like(rel)
    Q[:, :ns] = hv[:ns] * rel[:, :ns]
    h1, h2 = hv[ns::2], hv[ns + 1::2]
    a, b = rel[:, ns::2], rel[:, ns + 1::2]
    Q[:, ns::2] = a * h1 - b * h2
    Q[:, ns + 1::2] = b * h1 + a * h2
    return Q


def tail_scores(model, h, r):
    """Raw f_r(h, t) for every tail t."""
    return head_queries(model, h, [r])[0] @ model.entity_emb.T


def _log_softmax(x):
    m = x.max()
    return x - (m + np.log(np.exp(x - m).sum()))


def tail_log_softmax(model, h, r):
    """log p(t | h, r), normalised over tails only."""
    return _log_softmax(tail_scores(model, h, r))


def tail_log_softmax_many(model, h, relations):
    """Rows of :func:`tail_log_softmax` for several relations of one head."""
    S = head_queries(model, h, relations) @ model.entity_emb.T
    m = S.max(axis=1, keepdims=True)
    return S - (m + np.log(np.exp(S - m).sum(axis=1, keepdims=True)))


def joint_log_softmax(model, h):
    """log p(r, t | h) over the full |R| x |E| grid."""
    S = head_queries(model, h) @ model.entity_emb.T
    return _log_softmax(S)


# --------------------------------------------------------------------------
# training

@dataclass(frozen=True)
class KbrTrainConfig:
    kind: str = ANALOGY
    dim: int = 200
    epochs: int = 100
    learning_rate: float = 0.01
    batch_size: int = 1024
    negatives_per_positive: int = 10
    loss: str | None = None
    margin: float = 1.0
    l2: float = 0.0
    seed: int = 0
    early_stopping_patience: int = 0

    def __post_init__(self):
        object.__setattr__(self, "kind", normalize_kind(self.kind))
        if self.loss not in (None, "margin", "logistic"):
            raise ConfigError(f"unknown loss {self.loss!r}")
        if self.dim < 1:
            raise ConfigError("dim must be >= 1")
        n_scalar_for(self.kind, self.dim)
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.negatives_per_positive < 1:
            raise ConfigError("negatives_per_positive must be >= 1")
        if self.loss_kind == "margin" and not self.margin > 0:
            raise ConfigError("margin must be positive")
        if self.l2 < 0:
            raise ConfigError("l2 must be nonnegative")


    @property
    def loss_kind(self):
        """The configured loss, or the per-kind default (margin for DistMult)."""
        if self.loss is not None:
            return self.loss
        return "margin" if self.kind == DISTMULT else "logistic"


def sample_negatives(pos, k, n_entities, known, rng, max_rounds=100):
    """``k`` corruptions per positive, replacing head or tail (fair coin) with a
    uniform entity and redrawing any corruption that is a known fact."""
    pos = np.asarray(pos, dtype=np.int64).reshape(-1, 3)
    neg = np.repeat(pos, k, axis=0)
    side = np.where(rng.random(len(neg)) < 0.5, 0, 2)
    todo = np.arange(len(neg))
    for _ in range(max_rounds):
        if len(todo) == 0:
            break
        neg[todo, side[todo]] = rng.integers(n_entities, size=len(todo))
        todo = todo[known.contains(neg[todo])]
    return neg


def loss_and_coefs(model, pos, neg, cfg):
    """Loss of positives vs their negatives and d loss / d score for each triple.

    ``neg`` holds ``k`` consecutive rows per positive.
    """
    k = len(neg) // max(len(pos), 1)
    fp = score_batch(model, pos)
    fn = score_batch(model, neg)
    if cfg.loss_kind == "margin":
        viol = cfg.margin - np.repeat(fp, k) + fn
        active = viol > 0
        loss = float(viol[active].sum())
        cn = active.astype(float)
        cp = -cn.reshape(-1, k).sum(axis=1)
    else:
        loss = float(np.logaddexp(0.0, -fp).sum() + np.logaddexp(0.0, fn).sum())
        cp = -_sigmoid(-fp)
        cn = _sigmoid(fn)
    return loss, cp, cn


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def loss_and_grads(model, pos, neg, cfg):
    loss, cp, cn = loss_and_coefs(model, pos, neg, cfg)
    triples = np.ascontiguousarray(np.concatenate([pos, neg]).astype(np.int64))
    coef = np.ascontiguousarray(np.concatenate([cp, cn]))
    g_ent = np.zeros_like(model.entity_emb)
    g_rel = np.zeros_like(model.relation_emb)
    kernels.accumulate_grads(model.entity_emb, model.relation_emb,
                             np.ascontiguousarray(triples[:, 0]),
                             np.ascontiguousarray(triples[:, 1]),
                             np.ascontiguousarray(triples[:, 2]),
                             coef, model.n_scalar, g_ent, g_rel)
    if cfg.l2:
        loss += cfg.l2 * float((model.entity_emb ** 2).sum() + (model.relation_emb ** 2).sum())
        g_ent += 2.0 * cfg.l2 * model.entity_emb
        g_rel += 2.0 * cfg.l2 * model.relation_emb
    return loss, {"entity_emb": g_ent, "relation_emb": g_rel}


def train_kbr(train, cfg=KbrTrainConfig(), init=None, valid=None, log=None):
    """Minibatch Adam with negative sampling; per-epoch loss lands in ``loss_trace``.

    With ``valid`` and ``cfg.early_stopping_patience > 0`` training stops once
    the validation loss (fixed negatives) has not improved for that many
    epochs, and the best parameters are returned.
    """
    if len(train) == 0:
        raise ConfigError("training set is empty")
    ne, nr = train.n_entities, train.n_relations
    if init is None:
        model = init_model(cfg.kind, ne, nr, cfg.dim, rng_for(cfg.seed, "kbr", cfg.kind, "init"))
    else:
        if (init.n_entities, init.n_relations, init.kind) != (ne, nr, cfg.kind):
            raise DimensionError("initial model does not match the training set")
        model = init.copy()
    rng = rng_for(cfg.seed, "kbr", cfg.kind, "train", len(model.loss_trace))
    opt = Adam(lr=cfg.learning_rate)
    params = {"entity_emb": model.entity_emb, "relation_emb": model.relation_emb}
    pos_all = train.triples
    k = cfg.negatives_per_positive

    monitor = cfg.early_stopping_patience > 0 and valid is not None and len(valid) > 0
    if monitor:
        vpos = valid.triples
        vneg = sample_negatives(vpos, k, ne, train, rng_for(cfg.seed, "kbr", "valid-negatives"))
        best, best_state, stale = np.inf, None, 0

    start = len(model.loss_trace)
    for epoch in range(start, start + cfg.epochs):
        order = rng.permutation(len(pos_all))
        total = 0.0
        for s in range(0, len(order), cfg.batch_size):
            pos = pos_all[order[s:s + cfg.batch_size]]
            neg = sample_negatives(pos, k, ne, train, rng)
            loss, grads = loss_and_grads(model, pos, neg, cfg)
            if not np.isfinite(loss):
                raise TrainingError(f"{cfg.kind} loss diverged", epoch=epoch + 1)
            total += loss
            opt.step(params, grads)
        model.loss_trace.append(total)
        if log is not None:
            log(epoch + 1, total)
        if monitor:
            vloss = loss_and_coefs(model, vpos, vneg, cfg)[0]
            if vloss < best:
                best, stale = vloss, 0
                best_state = (model.entity_emb.copy(), model.relation_emb.copy())
            else:
                stale += 1
                if stale >= cfg.early_stopping_patience:
                    break
    if monitor and best_state is not None:
        model.entity_emb[...] = best_state[0]
        model.relation_emb[...] = best_state[1]
    if not model.all_finite():
        raise TrainingError(f"{cfg.kind} parameters became non-finite")
    return model


# --------------------------------------------------------------------------
# persistence: magic(6) + version(u16) + kind, dim, |E|, |R| (u32 each)
# + entity then relation embeddings as little-endian float64, row-major.

def save_kbr(model, path):
    header = (_MAGIC + struct.pack("<H", _VERSION)
              + struct.pack("<IIII", _KIND_CODE[model.kind], model.dim,
                            model.n_entities, model.n_relations))
    body = (np.ascontiguousarray(model.entity_emb, dtype="<f8").tobytes()
            + np.ascontiguousarray(model.relation_emb, dtype="<f8").tobytes())
    atomic_write_bytes(path, header + body)


def load_kbr(path):
    data = Path(path).read_bytes()
    if len(data) < 24 or data[:6] != _MAGIC:
        raise ModelFormatError(f"{path}: not a KBR model file")
    (version,) = struct.unpack_from("<H", data, 6)
    if version != _VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    code, dim, ne, nr = struct.unpack_from("<IIII", data, 8)
    kinds = {v: k for k, v in _KIND_CODE.items()}
    if code not in kinds:
        raise ModelFormatError(f"{path}: unknown kind code {code}")
    if len(data) != 24 + 8 * dim * (ne + nr):
        raise ModelFormatError(f"{path}: truncated or oversized payload")
    flat = np.frombuffer(data, dtype="<f8", offset=24).astype(np.float64)
    return KbrModel(kinds[code], flat[:ne * dim].reshape(ne, dim).copy(),
                    flat[ne * dim:].reshape(nr, dim).copy())


def write_loss_trace(trace, path):
    rows = ["epoch,loss\n"] + [f"{i},{v!r}\n" for i, v in enumerate(trace, 1)]
    atomic_write_text(path, "".join(rows))
