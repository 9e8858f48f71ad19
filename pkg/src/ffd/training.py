"""Fitting the three facet components on a training store."""

from __future__ import annotations

from dataclasses import dataclass, replace

from . import autoencoder as ae
from . import kbr
from .discovery import FacetComponents
from .errors import ConfigError
from .kb import HEAD, TAIL, profile_matrix

AUTOENCODERS = "autoencoders"
KBR = "kbr"
BOTH = "both"


@dataclass(frozen=True)
class ComponentConfigs:
    head_ae: ae.AeTrainConfig
    tail_ae: ae.AeTrainConfig
    kbr: kbr.KbrTrainConfig

    @classmethod
    def from_shared(cls, ae_cfg, kbr_cfg, head_seed, tail_seed, kbr_seed):
        return cls(replace(ae_cfg, seed=head_seed), replace(ae_cfg, seed=tail_seed),
                   replace(kbr_cfg, seed=kbr_seed))


def train_head_ae(train, cfg, init=None, log=None):
    return ae.train_autoencoder(profile_matrix(train, HEAD), cfg, init=init, log=log)


def train_tail_ae(train, cfg, init=None, log=None):
    return ae.train_autoencoder(profile_matrix(train, TAIL), cfg, init=init, log=log)


def train_components(train, cfgs, which=BOTH, previous=None, warm_start=False, valid=None):
    """Fit (or refit) facet components on ``train``.

    ``which`` selects what is (re)trained; the rest is carried over from
    ``previous``. ``warm_start`` initialises refits from ``previous``.
    """
    if which not in (AUTOENCODERS, KBR, BOTH):
        raise ConfigError(f"unknown component selection {which!r}")
    if which != BOTH and previous is None:
        raise ConfigError("partial retraining needs previous components")
    do_ae = which in (AUTOENCODERS, BOTH)
    do_kbr = which in (KBR, BOTH)
    init = previous if warm_start else None

    if do_ae:
        head = train_head_ae(train, cfgs.head_ae, init=init.head_ae if init else None)
        tail = train_tail_ae(train, cfgs.tail_ae, init=init.tail_ae if init else None)
    else:
        head, tail = previous.head_ae, previous.tail_ae
    if do_kbr:
        model = kbr.train_kbr(train, cfgs.kbr, init=init.model if init else None, valid=valid)
    else:
        model = previous.model
    return FacetComponents(head, tail, model, train)
