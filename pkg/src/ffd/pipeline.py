"""End-to-end experiment plumbing: configs, per-method runs and the sparsity sweep."""

from __future__ import annotations

import csv
import io
import os
from dataclasses import dataclass, field, replace

from . import autoencoder as ae
from . import kbr
from .baselines import build_pair_matrix, mf_predict_all, nmf_factorize, svd_factorize
from .discovery import DiscoveryConfig, discover_all, exhaustive_all
from .errors import ConfigError, FfdError
from .feedback import FeedbackConfig, feedback_loop
from .kb import split_fdkb
from .metrics import DEFAULT_BINS, evaluate
from .random import rng_for
from .training import ComponentConfigs, train_components

FFD = "ffd"
KBR_PLUS = "kbr+"
SVD = "svd"
NMF = "nmf"


@dataclass(frozen=True)
class SplitConfig:
    ratio: float = 50.0
    num_heads: int = 2000
    valid_fraction: float = 1.0

    def __post_init__(self):
        if not 0 < self.ratio < 100:
            raise ConfigError("split ratio must lie in (0, 100)")
        if self.num_heads < 1:
            raise ConfigError("num_heads must be >= 1")
        if self.valid_fraction < 0:
            raise ConfigError("valid_fraction must be >= 0")


@dataclass(frozen=True)
class BaselineConfig:
    k: int = 100
    nmf_iters: int = 200
    min_count: int = 3
    svd_oversamples: int = 10
    svd_iters: int = 2
    svd_exact_below: int = 250_000

    def __post_init__(self):
        if self.k < 1 or self.nmf_iters < 1:
            raise ConfigError("baseline rank and iteration count must be >= 1")
        if self.min_count < 0:
            raise ConfigError("min_count must be >= 0")
        if self.svd_oversamples < 0 or self.svd_iters < 0:
            raise ConfigError("SVD oversampling and power iterations must be >= 0")


@dataclass(frozen=True)
class EvalConfig:
    map_mode: str = "macro"
    bins: tuple = DEFAULT_BINS

    def __post_init__(self):
        if self.map_mode not in ("macro", "micro"):
            raise ConfigError("map_mode must be 'macro' or 'micro'")
        b = tuple(float(x) for x in self.bins)
        if len(b) < 2 or any(y <= x for x, y in zip(b, b[1:])):
            raise ConfigError("bins must be strictly increasing with at least two edges")
        object.__setattr__(self, "bins", b)


@dataclass(frozen=True)
class SweepConfig:
    ratios: tuple = (50.0, 40.0, 30.0, 20.0, 10.0)
    method: str = "ffd:analogy"
    feedback: bool = True

    def __post_init__(self):
        r = tuple(float(x) for x in self.ratios)
        if not r or not all(0 < x < 100 for x in r):
            raise ConfigError("sweep ratios must be a nonempty list within (0, 100)")
        object.__setattr__(self, "ratios", r)
        parse_method(self.method)


@dataclass(frozen=True)
class PipelineConfig:
    seed: int = 0
    workers: int = 0
    split: SplitConfig = field(default_factory=SplitConfig)
    autoencoder: ae.AeTrainConfig = field(default_factory=ae.AeTrainConfig)
    kbr: kbr.KbrTrainConfig = field(default_factory=kbr.KbrTrainConfig)
    discovery: DiscoveryConfig = field(default_factory=DiscoveryConfig)
    feedback: FeedbackConfig = field(default_factory=FeedbackConfig)
    baselines: BaselineConfig = field(default_factory=BaselineConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def __post_init__(self):
        if self.workers < 0:
            raise ConfigError("workers must be >= 0 (0 = all cores)")

    @property
    def n_workers(self):
        return self.workers or (os.cpu_count() or 1)

    def component_configs(self, kind=None):
        kcfg = self.kbr if kind is None else replace(self.kbr, kind=kind)
        return ComponentConfigs.from_shared(
            self.autoencoder, kcfg,
            head_seed=derive_seed(self.seed, "ae-head"),
            tail_seed=derive_seed(self.seed, "ae-tail"),
            kbr_seed=derive_seed(self.seed, f"kbr-{kcfg.kind}"))


def derive_seed(seed, label):
    """A component seed expanded from the global one through a fixed label."""
    return int(rng_for(seed, "derive", label).integers(2 ** 31 - 1))


def parse_method(method):
    """'ffd:<kind>' | 'kbr+:<kind>' | 'svd' | 'nmf' -> (family, kind or None)."""
    family, _, kind = str(method).strip().lower().partition(":")
    if family in (SVD, NMF):
        if kind:
            raise ConfigError(f"{family} takes no model kind")
        return family, None
    if family in (FFD, KBR_PLUS):
        if not kind:
            raise ConfigError(f"{family} needs a model kind, e.g. {family}:analogy")
        return family, kbr.normalize_kind(kind)
    raise ConfigError(f"unknown method {method!r}")


def fit_components(split, cfg, kind):
    return train_components(split.train, cfg.component_configs(kind), valid=split.valid)


def fit_kbr(split, cfg, kind):
    return kbr.train_kbr(split.train, cfg.component_configs(kind).kbr, valid=split.valid)


def run_mf(split, cfg, family):
    b = cfg.baselines
    vocab, M = build_pair_matrix(split.train, b.min_count)
    if M.shape[1] == 0:
        raise ConfigError(f"no (relation, tail) pair occurs more than {b.min_count} times")
    k = min(b.k, min(M.shape))
    seed = derive_seed(cfg.seed, family)
    if family == SVD:
        W, H = svd_factorize(M, k, seed=seed, n_oversamples=b.svd_oversamples, n_iter=b.svd_iters,
                             exact_below=b.svd_exact_below)
    else:
        W, H = nmf_factorize(M, k, iters=b.nmf_iters, seed=seed)
    return mf_predict_all(W, H, vocab, split.heads, cfg.discovery.K_bar, split.train,
                          cfg.discovery.exclude_known)


def run_method(method, split, cfg, components=None, model=None, use_feedback=False):
    """Discovered facts {head: ranked facts} for one method on ``split``.

    Trained state can be passed in (``components`` for FFD, ``model`` for
    KBR+); missing state is fitted here with the configured seeds.
    """
    family, kind = parse_method(method)
    if family in (SVD, NMF):
        return run_mf(split, cfg, family)
    if family == KBR_PLUS:
        if model is None:
            model = components.model if components is not None else fit_kbr(split, cfg, kind)
        return exhaustive_all(split.heads, model, cfg.discovery.K_bar, split.train,
                              cfg.discovery.exclude_known, workers=cfg.n_workers)
    if components is None:
        components = fit_components(split, cfg, kind)
    if use_feedback:
        return feedback_loop(split, components, cfg.discovery, cfg.feedback,
                             cfg.component_configs(kind), workers=cfg.n_workers).discovered
    return discover_all(split.heads, components, cfg.discovery, workers=cfg.n_workers)


def evaluate_run(per_head, split, cfg, difficulty_store=None):
    return evaluate(per_head, split.test, difficulty_store=difficulty_store,
                    bins=cfg.eval.bins, map_mode=cfg.eval.map_mode)


class SweepError(FfdError):
    def __init__(self, ratio, cause):
        self.ratio = ratio
        super().__init__(f"ratio {ratio:g}: {cause}")


SWEEP_COLUMNS = ("ratio", "n_train", "n_valid", "n_test", "map", "precision", "recall", "f1")


def sparsity_sweep(all_facts, ratios, cfg, method=None, use_feedback=None):
    """One row per relation ratio, with the held-out side fixed across ratios.

    The head sample and each head's relation order depend only on the seed,
    and the held-out relations are the tail of that order at the largest
    ratio, so every row is scored against the same test facts.
    """
    ratios = [float(r) for r in ratios]
    if not ratios or not all(0 < r < 100 for r in ratios):
        raise ConfigError("ratios must be a nonempty list within (0, 100)")
    method = method or cfg.sweep.method
    use_feedback = cfg.sweep.feedback if use_feedback is None else use_feedback
    fixed = max(ratios)
    s = cfg.split
    rows = []
    for ratio in ratios:
        try:
            split = split_fdkb(all_facts, ratio=ratio, num_heads=s.num_heads,
                               valid_fraction=s.valid_fraction,
                               seed=derive_seed(cfg.seed, "split"), test_ratio=fixed)
            per_head = run_method(method, split, cfg, use_feedback=use_feedback)
            rep = evaluate_run(per_head, split, cfg)
        except FfdError as exc:
            raise SweepError(ratio, exc) from exc
        rows.append({"ratio": ratio, "n_train": len(split.train), "n_valid": len(split.valid),
                     "n_test": len(split.test), "map": rep.map, "precision": rep.precision,
                     "recall": rep.recall, "f1": rep.f1})
    return rows


def sweep_csv(rows):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(SWEEP_COLUMNS)
    for row in rows:
        w.writerow([f"{row['ratio']:g}" if k == "ratio" else
                    repr(row[k]) if isinstance(row[k], float) else row[k] for k in SWEEP_COLUMNS])
    return buf.getvalue()
