import numpy as np
import pytest

from ffd import autoencoder as ae
from ffd.discovery import DiscoveryConfig, ScoredFact
from ffd.errors import ConfigError, FeedbackError
from ffd.feedback import (FeedbackConfig, feedback_loop, feedback_round, select_feedback,
                          write_audit, write_trace)
from ffd.kb import split_fdkb
from ffd.kbr import KbrTrainConfig
from ffd.synthetic import typed_kb
from ffd.training import AUTOENCODERS, BOTH, KBR, ComponentConfigs, train_components

DISC = DiscoveryConfig(n_h=4, n_t=6, n_f=3, K_bar=10)


@pytest.fixture(scope="module")
def setup():
    kb = typed_kb(n_types=3, entities_per_type=30, relations_per_type=6, seed=3)
    split = split_fdkb(kb, ratio=50, num_heads=12, valid_fraction=0.0, seed=1)
    cfgs = ComponentConfigs.from_shared(
        ae.AeTrainConfig(d1=8, epochs=5, batch_size=32),
        KbrTrainConfig(dim=8, epochs=3, batch_size=256),
        head_seed=1, tail_seed=2, kbr_seed=3)
    comps = train_components(split.train, cfgs)
    return split, cfgs, comps


def fact(h, r, t, c):
    return ScoredFact(h, r, t, 0.0, 0.0, 0.0, c)


def test_select_global_top_with_tie_order():
    per_head = {0: [fact(0, 1, 2, 0.5), fact(0, 0, 3, 0.1)],
                1: [fact(1, 0, 0, 0.5), fact(1, 2, 2, 0.9)]}
    got = [f.triple for f in select_feedback(per_head, 3)]
    assert got == [(1, 2, 2), (0, 1, 2), (1, 0, 0)]
    assert len(select_feedback(per_head, 100)) == 4
    assert select_feedback({}, 5) == []


def test_config_validation():
    for bad in (dict(n_fb=0), dict(rounds=0), dict(retrain="everything")):
        with pytest.raises(ConfigError):
            FeedbackConfig(**bad)


def test_single_fact_feedback_adds_the_top_fact(setup):
    split, cfgs, comps = setup
    rnd = feedback_round(split, comps, DISC, FeedbackConfig(n_fb=1, rounds=1), cfgs)
    assert len(rnd.fed_back) == 1
    top = select_feedback(rnd.discovered, 1)[0]
    assert rnd.fed_back[0] == top
    assert len(rnd.train) == len(split.train) + 1
    assert top.triple in rnd.train and top.triple not in split.train


def test_train_grows_by_at_most_n_fb_and_held_out_is_untouched(setup):
    split, cfgs, comps = setup
    test_before = split.test.triples.copy()
    valid_before = split.valid.triples.copy()
    fb = FeedbackConfig(n_fb=15, rounds=2)
    res = feedback_loop(split, comps, DISC, fb, cfgs)
    prev = len(split.train)
    for rnd in res.rounds:
        assert 0 < len(rnd.train) - prev <= fb.n_fb
        prev = len(rnd.train)
    assert np.array_equal(split.test.triples, test_before)
    assert np.array_equal(split.valid.triples, valid_before)
    assert [row["round"] for row in res.trace] == [1, 2]
    assert res.components.train is res.rounds[-1].train


def test_duplicate_feedback_is_deduplicated(setup):
    split, cfgs, comps = setup
    rnd = feedback_round(split, comps, DISC, FeedbackConfig(n_fb=10, rounds=1), cfgs)
    again = rnd.train.with_facts(np.array([f.triple for f in rnd.fed_back]))
    assert len(again) == len(rnd.train)


def test_audit_has_min_nfb_rows_per_round(setup, tmp_path):
    split, cfgs, comps = setup
    fb = FeedbackConfig(n_fb=7, rounds=2)
    res = feedback_loop(split, comps, DISC, fb, cfgs, audit_path=tmp_path / "audit.tsv")
    lines = (tmp_path / "audit.tsv").read_text().splitlines()
    assert lines[0] == "round\thead\trelation\ttail\tconfidence"
    rounds = [ln.split("\t")[0] for ln in lines[1:]]
    for i, rnd in enumerate(res.rounds, start=1):
        n_disc = sum(len(v) for v in rnd.discovered.values())
        assert rounds.count(str(i)) == min(fb.n_fb, n_disc)


def test_feedback_is_deterministic(setup, tmp_path):
    split, cfgs, comps = setup
    fb = FeedbackConfig(n_fb=5, rounds=1)
    a = feedback_loop(split, comps, DISC, fb, cfgs, audit_path=tmp_path / "a.tsv")
    b = feedback_loop(split, comps, DISC, fb, cfgs, audit_path=tmp_path / "b.tsv")
    assert (tmp_path / "a.tsv").read_bytes() == (tmp_path / "b.tsv").read_bytes()
    assert a.discovered == b.discovered
    write_trace(a.trace, tmp_path / "ta.csv")
    write_trace(b.trace, tmp_path / "tb.csv")
    assert (tmp_path / "ta.csv").read_bytes() == (tmp_path / "tb.csv").read_bytes()


def test_partial_retraining_keeps_other_components(setup):
    split, cfgs, comps = setup
    only_ae = feedback_round(split, comps, DISC, FeedbackConfig(n_fb=5, retrain=AUTOENCODERS), cfgs)
    assert only_ae.components.model is comps.model
    assert only_ae.components.head_ae is not comps.head_ae
    only_kbr = feedback_round(split, comps, DISC, FeedbackConfig(n_fb=5, retrain=KBR), cfgs)
    assert only_kbr.components.head_ae is comps.head_ae
    assert only_kbr.components.tail_ae is comps.tail_ae
    assert only_kbr.components.model is not comps.model
    both = feedback_round(split, comps, DISC, FeedbackConfig(n_fb=5, retrain=BOTH), cfgs)
    assert both.components.model is not comps.model


def test_empty_discovery_raises(setup):
    split, cfgs, comps = setup
    # no heads -> nothing discovered
    empty = type(split)(split.train, split.valid, split.test, np.empty(0, dtype=np.int64),
                        split.valid_heads)
    with pytest.raises(FeedbackError):
        feedback_loop(empty, comps, DISC, FeedbackConfig(n_fb=3), cfgs)


def test_write_helpers(setup, tmp_path):
    split, _, _ = setup
    write_audit([], split.vocab, tmp_path / "a.tsv")
    assert (tmp_path / "a.tsv").read_text() == "round\thead\trelation\ttail\tconfidence\n"
    write_trace([], tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text() == ""
