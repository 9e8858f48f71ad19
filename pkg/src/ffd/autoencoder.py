"""Entity-relation facet: a one-hidden-layer denoising auto-encoder over relation profiles.

The encoder maps a (corrupted) 0-1 relation profile to ``tanh(W_f y + b_f)``;
the decoder recovers per-relation probabilities ``sigmoid(W_g x + b_g)``.
Training minimises summed binary cross-entropy between the decoded
probabilities and the *uncorrupted* profile.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DimensionError, ModelFormatError, TrainingError
from .kb import RelationProfile, atomic_write_bytes
from .optim import Adam
from .random import rng_for

LOG_EPS = 1e-12
EMPTY_SCORE = float(np.log(0.5))

_MAGIC = b"FFDAE\x00"
_VERSION = 1


@dataclass
class AutoencoderParams:
    W_f: np.ndarray
    b_f: np.ndarray
    W_g: np.ndarray
    b_g: np.ndarray
    loss_trace: list = field(default_factory=list, compare=False, repr=False)

    def __post_init__(self):
        d1, nr = self.W_f.shape
        if self.b_f.shape != (d1,) or self.W_g.shape != (nr, d1) or self.b_g.shape != (nr,):
            raise DimensionError("inconsistent auto-encoder parameter shapes")

    @property
    def d1(self):
        return self.W_f.shape[0]

    @property
    def n_relations(self):
        return self.W_f.shape[1]

    def as_dict(self):
        return {"W_f": self.W_f, "b_f": self.b_f, "W_g": self.W_g, "b_g": self.b_g}

    def copy(self):
        return AutoencoderParams(self.W_f.copy(), self.b_f.copy(), self.W_g.copy(),
                                 self.b_g.copy(), list(self.loss_trace))

    def all_finite(self):
        return all(np.isfinite(a).all() for a in self.as_dict().values())


@dataclass(frozen=True)
class AeTrainConfig:
    d1: int = 256
    corruption_rate: float = 0.2
    epochs: int = 1000
    learning_rate: float = 0.005
    batch_size: int = 128
    seed: int = 0

    def __post_init__(self):
        if self.d1 < 1:
            raise ConfigError("d1 must be >= 1")
        if not 0.0 <= self.corruption_rate < 1.0:
            raise ConfigError("corruption_rate must lie in [0, 1)")
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be positive")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")


def init_params(n_relations, d1, rng):
    bound = np.sqrt(6.0 / (n_relations + d1))
    return AutoencoderParams(
        W_f=rng.uniform(-bound, bound, size=(d1, n_relations)),
        b_f=np.zeros(d1),
        W_g=rng.uniform(-bound, bound, size=(n_relations, d1)),
        b_g=np.zeros(n_relations),
    )


def _bits(profile):
    return profile.bits if isinstance(profile, RelationProfile) else np.asarray(profile, dtype=float)


def corrupt_rows(Y, rate, rng):
    """Zero each 1-entry of a 0-1 matrix independently with probability ``rate``.

    A nonempty row that would lose every entry gets one of its original
    entries back, chosen uniformly.
    """
    Y = np.asarray(Y, dtype=float)
    if rate == 0.0:
        return Y.copy()
    keep = rng.random(Y.shape) >= rate
    out = np.where(keep, Y, 0.0)
    wiped = np.flatnonzero((out.sum(axis=1) == 0) & (Y.sum(axis=1) > 0))
    for i in wiped:
        ones = np.flatnonzero(Y[i])
        out[i, ones[rng.integers(len(ones))]] = 1.0
    return out


def corrupt(profile, rate, rng):
    y = _bits(profile)
    if not 0.0 <= rate < 1.0:
        raise ConfigError("corruption rate must lie in [0, 1)")
    return corrupt_rows(y[None, :], rate, rng)[0]


def encode(params, y):
    y = np.asarray(y, dtype=float)
    if y.shape[-1] != params.n_relations:
        raise DimensionError(f"profile length {y.shape[-1]} != |R| = {params.n_relations}")
    return np.tanh(y @ params.W_f.T + params.b_f)


def _sigmoid(z):
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def decode(params, x):
    x = np.asarray(x, dtype=float)
    if x.shape[-1] != params.d1:
        raise DimensionError(f"hidden length {x.shape[-1]} != d1 = {params.d1}")
    return _sigmoid(np.atleast_1d(x @ params.W_g.T + params.b_g))


def reconstruction_loss(y, y_hat):
    """Binary cross-entropy summed over relations (and over rows for 2-D input)."""
    y = np.asarray(y, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y.shape != y_hat.shape:
        raise DimensionError(f"shape mismatch {y.shape} vs {y_hat.shape}")
    p = np.clip(y_hat, LOG_EPS, 1.0 - LOG_EPS)
    return float(-(y * np.log(p) + (1.0 - y) * np.log1p(-p)).sum())


def loss_and_grads(params, Y_in, Y_target):
    """Cross-entropy of a batch and its gradient w.r.t. every parameter.

    Works on logits (``softplus(z) - y*z``), which equals the clamped
    probability form wherever the clamp is inactive.
    """
    A = Y_in @ params.W_f.T + params.b_f
    X = np.tanh(A)
    Z = X @ params.W_g.T + params.b_g
    loss = float((np.logaddexp(0.0, Z) - Y_target * Z).sum())
    dZ = _sigmoid(Z) - Y_target
    dX = dZ @ params.W_g
    dA = dX * (1.0 - X * X)
    grads = {
        "W_g": dZ.T @ X,
        "b_g": dZ.sum(axis=0),
        "W_f": dA.T @ Y_in,
        "b_f": dA.sum(axis=0),
    }
    return loss, grads


def _profile_rows(profiles):
    if isinstance(profiles, np.ndarray):
        return np.asarray(profiles, dtype=float)
    rows = [_bits(p) for p in profiles]
    return np.vstack(rows) if rows else np.empty((0, 0))


def train_autoencoder(profiles, cfg=AeTrainConfig(), init=None, log=None):
    """Minibatch Adam on the reconstruction loss with fresh corruption every epoch.

    ``profiles`` is a sequence of RelationProfile or a 0-1 matrix with one
    row per entity; all-zero rows are ignored. ``init`` continues training
    from existing parameters. Per-epoch summed loss lands in
    ``params.loss_trace``.
    """
    Y = _profile_rows(profiles)
    if Y.ndim != 2 or Y.size == 0:
        raise ConfigError("no profiles to train on")
    Y = Y[Y.sum(axis=1) > 0]
    if len(Y) == 0:
        raise ConfigError("at least one nonempty profile is required")

    nr = Y.shape[1]
    if init is None:
        params = init_params(nr, cfg.d1, rng_for(cfg.seed, "ae", "init"))
    else:
        if init.n_relations != nr:
            raise DimensionError("initial parameters do not match profile width")
        params = init.copy()
    rng = rng_for(cfg.seed, "ae", "train", len(params.loss_trace))
    opt = Adam(lr=cfg.learning_rate)
    store = params.as_dict()

    start = len(params.loss_trace)
    for epoch in range(start, start + cfg.epochs):
        Y_in = corrupt_rows(Y, cfg.corruption_rate, rng)
        order = rng.permutation(len(Y))
        total = 0.0
        for s in range(0, len(Y), cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            loss, grads = loss_and_grads(params, Y_in[idx], Y[idx])
            if not np.isfinite(loss):
                raise TrainingError("auto-encoder loss diverged", epoch=epoch + 1)
            total += loss
            opt.step(store, grads)
        params.loss_trace.append(total)
        if log is not None:
            log(epoch + 1, total)
    if not params.all_finite():
        raise TrainingError("auto-encoder parameters became non-finite", epoch=start + cfg.epochs)
    return params


def predict_proba(params, Y):
    """Decoded probabilities for uncorrupted profiles (rows of ``Y``)."""
    return decode(params, encode(params, Y))


def predict_relation_scores(params, profile):
    """log p(r|e) for every relation; an empty profile scores log(0.5) uniformly."""
    y = _bits(profile)
    if y.shape != (params.n_relations,):
        raise DimensionError(f"profile length {y.shape} != |R| = {params.n_relations}")
    if not y.any():
        return np.full(params.n_relations, EMPTY_SCORE)
    return np.log(np.clip(predict_proba(params, y), LOG_EPS, 1.0))


def score_table(params, Y, chunk=4096):
    """Row-wise :func:`predict_relation_scores` over a whole profile matrix."""
    Y = np.asarray(Y, dtype=float)
    out = np.empty(Y.shape)
    for s in range(0, len(Y), chunk):
        block = Y[s:s + chunk]
        out[s:s + chunk] = np.log(np.clip(predict_proba(params, block), LOG_EPS, 1.0))
    out[Y.sum(axis=1) == 0] = EMPTY_SCORE
    return out


# --------------------------------------------------------------------------
# persistence: magic(6) + version(u16) + d1(u32) + |R|(u32) + float64 arrays,
# little-endian, row-major, in the order W_f, b_f, W_g, b_g.

def save_autoencoder(params, path):
    header = _MAGIC + struct.pack("<H", _VERSION) + struct.pack("<II", params.d1, params.n_relations)
    body = b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes()
                    for a in (params.W_f, params.b_f, params.W_g, params.b_g))
    atomic_write_bytes(path, header + body)


def load_autoencoder(path):
    data = Path(path).read_bytes()
    if len(data) < 16 or data[:6] != _MAGIC:
        raise ModelFormatError(f"{path}: not an auto-encoder file")
    (version,) = struct.unpack_from("<H", data, 6)
    if version != _VERSION:
        raise ModelFormatError(f"{path}: unsupported version {version}")
    d1, nr = struct.unpack_from("<II", data, 8)
    expected = 16 + 8 * (2 * d1 * nr + d1 + nr)
    if len(data) != expected:
        raise ModelFormatError(f"{path}: truncated or oversized payload")
    flat = np.frombuffer(data, dtype="<f8", offset=16).astype(np.float64)
    sizes = [d1 * nr, d1, nr * d1, nr]
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    return AutoencoderParams(
        W_f=parts[0].reshape(d1, nr).copy(),
        b_f=parts[1].copy(),
        W_g=parts[2].reshape(nr, d1).copy(),
        b_g=parts[3].copy(),
    )
