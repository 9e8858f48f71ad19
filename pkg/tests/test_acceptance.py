"""Acceptance checks, one printed PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v``. The reduced-scale ordering,
feedback and sparsity checks (C6-C8) run on FB15k when ``FFD_FB15K`` names a
directory holding its train/valid/test files, and always on a synthetic typed
KB labelled ``proxy``. The full-scale reproduction (C9) runs only when
``FFD_FULL_SCALE=1`` is also set.
"""

import filecmp
import os
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

from helpers import random_components
from ffd import autoencoder as ae
from ffd import kbr
from ffd.cli import load_kb, main
from ffd.discovery import DiscoveryConfig, ScoredFact, discover_for_head, exhaustive_kbr_rank
from ffd.feedback import FeedbackConfig, feedback_loop
from ffd.kb import TripleStore, save_triples, split_fdkb
from ffd.kbr import KbrModel, KbrTrainConfig
from ffd.metrics import map_score, precision_recall_f1, relation_difficulty
from ffd.pipeline import (PipelineConfig, SplitConfig, derive_seed, evaluate_run, fit_components,
                          run_method, sparsity_sweep)
from ffd.random import rng_for
from ffd.synthetic import store_from_ids, two_cluster_profiles, typed_kb

KINDS = ("distmult", "complex", "analogy")


def report(capsys, tag, ok, detail):
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    with capsys.disabled():
        print(f"\n[{tag}] {status}: {detail}", flush=True)


# -- C1: pruning with vacuous budgets equals exhaustive ranking -----------------------

def test_c1_vacuous_pruning_matches_exhaustive(capsys):
    rng = np.random.default_rng(2024)
    t0 = time.perf_counter()
    mismatched, total = [], 0
    for i in range(24):
        ne, nr = int(rng.integers(5, 51)), int(rng.integers(1, 9))
        comps = random_components(ne, nr, 3 * ne, kind=KINDS[i % 3], dim=6, seed=100 + i)
        cfg = DiscoveryConfig(n_h=nr, n_t=ne, n_f=ne, K_bar=min(20, ne * nr),
                              lambda1=0.0, lambda2=0.0, lambda3=1.0, exclude_known=False)
        for h in rng.choice(ne, size=3, replace=False):
            total += 1
            got = [f.triple for f in discover_for_head(int(h), comps, cfg)]
            want = [f.triple for f in exhaustive_kbr_rank(comps.model, int(h), cfg.K_bar,
                                                          comps.train, exclude_known=False)]
            if got != want:
                mismatched.append(nr)
    ok = not mismatched
    report(capsys, "C1", ok,
           f"{total - len(mismatched)}/{total} heads identical to the exhaustive ranking; "
           f"mismatches only at |R| in {sorted(set(mismatched))}; "
           f"{time.perf_counter() - t0:.1f}s")
    assert ok


# -- C2: analytic gradients vs central differences --------------------------------

def _fd_worst(params, loss_fn, grads, h=1e-6, floor=1e-3):
    """Largest |num - ana| / max(|num|, |ana|, floor) over every parameter.

    The floor keeps exactly-zero gradients (inactive hinge terms, unused
    inputs) from turning finite-difference round-off into a huge ratio.
    """
    worst = 0.0
    for name, arr in params.items():
        for idx in np.ndindex(arr.shape):
            old = arr[idx]
            arr[idx] = old + h
            up = loss_fn()
            arr[idx] = old - h
            down = loss_fn()
            arr[idx] = old
            num = (up - down) / (2 * h)
            ana = grads[name][idx]
            worst = max(worst, abs(num - ana) / max(abs(num), abs(ana), floor))
    return worst


def test_c2_gradients(capsys):
    t0 = time.perf_counter()
    rows = []
    rng = np.random.default_rng(7)
    for trial in range(3):
        nr, d1 = 6, 4
        p = ae.AutoencoderParams(rng.normal(size=(d1, nr)) * 0.7, rng.normal(size=d1) * 0.7,
                                 rng.normal(size=(nr, d1)) * 0.7, rng.normal(size=nr) * 0.7)
        Y = (rng.random((5, nr)) < 0.5).astype(float)
        Y_in = ae.corrupt_rows(Y, 0.3, rng)
        _, g = ae.loss_and_grads(p, Y_in, Y)
        worst = _fd_worst(p.as_dict(), lambda: ae.reconstruction_loss(
            Y, ae.decode(p, ae.encode(p, Y_in))), g)
        rows.append(("autoencoder", worst))
    pos = np.array([[0, 1, 2], [3, 0, 4], [2, 2, 2]])
    neg = np.array([[1, 1, 2], [0, 1, 3], [3, 0, 1], [4, 0, 4], [2, 2, 0], [0, 2, 2]])
    for kind in KINDS:
        for loss in ("margin", "logistic"):
            m = KbrModel(kind, rng.normal(size=(5, 4)), rng.normal(size=(3, 4)))
            cfg = KbrTrainConfig(kind=kind, dim=4, loss=loss, margin=3.0)
            _, g = kbr.loss_and_grads(m, pos, neg, cfg)
            params = {"entity_emb": m.entity_emb, "relation_emb": m.relation_emb}
            worst = _fd_worst(params, lambda: kbr.loss_and_coefs(m, pos, neg, cfg)[0], g)
            rows.append((f"{kind}/{loss}", worst))
    worst = max(w for _, w in rows)
    ok = worst < 1e-4
    report(capsys, "C2", ok, f"max relative error {worst:.2e} over {len(rows)} checks "
           f"(AE + 3 kinds x 2 losses, dim 4); {time.perf_counter() - t0:.2f}s")
    assert ok


# -- C3: metric vignettes ------------------------------------------------------

def _ranked(h, pairs):
    return [ScoredFact(h, r, t, 0.0, 0.0, 0.0, -float(i)) for i, (r, t) in enumerate(pairs)]


def test_c3_metric_vignettes(capsys):
    t0 = time.perf_counter()
    checks = []

    def check(name, got, want):
        checks.append((name, got, want, abs(got - want) <= 1e-9))

    check("AP hit,miss,hit", map_score({0: _ranked(0, [(0, 1), (0, 2), (0, 3)])},
                                       {(0, 0, 1), (0, 0, 3)}), 5 / 6)
    check("AP miss,hit of 3 relevant", map_score({0: _ranked(0, [(0, 1), (0, 2)])},
                                                 {(0, 0, 2), (0, 0, 8), (0, 0, 9)}), 1 / 6)
    check("MAP two heads", map_score({0: _ranked(0, [(0, 1)]), 1: _ranked(1, [(0, 5), (0, 2)])},
                                     {(0, 0, 1), (1, 0, 2), (1, 0, 3)}), 0.625)
    check("MAP missing head counts 0", map_score({0: _ranked(0, [(0, 1)])},
                                                 {(0, 0, 1), (2, 0, 1)}), 0.5)
    check("MAP micro", map_score({0: _ranked(0, [(0, 1)]), 1: _ranked(1, [(0, 5), (0, 2)])},
                                 {(0, 0, 1), (1, 0, 2), (1, 0, 3)}, mode="micro"), 0.5)
    disc = {(i, 0, 0) for i in range(100_000)}
    test = {(i, 0, 0) for i in range(20_010)} | {(i, 1, 0) for i in range(21_851)}
    p, r, f1 = precision_recall_f1(disc, test)
    check("precision 20010/100000", p, 0.2001)
    check("recall 20010/41861", r, 20_010 / 41_861)
    check("F1", f1, 2 * 0.2001 * (20_010 / 41_861) / (0.2001 + 20_010 / 41_861))
    check("F1 rounds to 0.2821", round(f1, 4), 0.2821)
    check("P/R/F1 empty", sum(precision_recall_f1(set(), test)), 0.0)
    bij = {d.relation: d for d in relation_difficulty(store_from_ids(
        [(0, 0, 1), (1, 0, 2), (2, 0, 3), (0, 1, 5), (0, 1, 6), (4, 2, 5), (4, 2, 6), (3, 2, 5)],
        7, 3))}
    check("bijection hpt", bij[0].hpt, 1.0)
    check("bijection tph", bij[0].tph, 1.0)
    check("one head two tails tph", bij[1].tph, 2.0)
    check("one head two tails hpt", bij[1].hpt, 1.0)
    check("mixed relation tph", bij[2].tph, 1.5)
    check("mixed relation hpt", bij[2].hpt, 1.5)
    elapsed = time.perf_counter() - t0
    bad = [c[0] for c in checks if not c[3]]
    ok = not bad and elapsed < 1.0
    report(capsys, "C3", ok, f"{len(checks) - len(bad)}/{len(checks)} vignettes within 1e-9 "
           f"in {elapsed:.3f}s" + (f"; failing: {bad}" if bad else ""))
    assert ok


# -- C4: auto-encoder recovers a masked relation ----------------------------------

def test_c4_masked_relation_recovery(capsys):
    t0 = time.perf_counter()
    Y, _ = two_cluster_profiles(seed=0)
    params = ae.train_autoencoder(Y, ae.AeTrainConfig(seed=derive_seed(0, "ae-head")))
    rng = np.random.default_rng(1)
    hits = 0
    for y in Y:
        j = rng.choice(np.flatnonzero(y))
        x = y.copy()
        x[j] = 0.0
        s = ae.predict_relation_scores(params, x)
        # rank of the masked relation among relations absent from the input
        absent = np.flatnonzero(x == 0)
        hits += int(1 + np.sum(s[absent] > s[j]) <= 3)
    frac = hits / len(Y)
    elapsed = time.perf_counter() - t0
    ok = frac >= 0.9 and elapsed < 120
    report(capsys, "C4", ok, f"masked relation in top 3 for {frac:.1%} of {len(Y)} entities; "
           f"{elapsed:.1f}s")
    assert ok


# -- C5: Analogy normality and commutativity -----------------------------------------

def test_c5_analogy_structure(capsys):
    t0 = time.perf_counter()
    worst_normal = worst_comm = 0.0
    for seed in range(10):
        rng = np.random.default_rng(seed)
        m = KbrModel("analogy", rng.normal(size=(3, 12)), rng.normal(size=(5, 12)))
        Ms = [kbr.relation_matrix(m, r) for r in range(5)]
        for A in Ms:
            worst_normal = max(worst_normal, np.abs(A @ A.T - A.T @ A).max())
            for B in Ms:
                worst_comm = max(worst_comm, np.abs(A @ B - B @ A).max())
    elapsed = time.perf_counter() - t0
    ok = worst_normal < 1e-10 and worst_comm < 1e-10 and elapsed < 1
    report(capsys, "C5", ok, f"max |MM^T - M^TM| {worst_normal:.1e}, "
           f"max |MM' - M'M| {worst_comm:.1e}; {elapsed:.3f}s")
    assert ok


# -- C6-C8: reduced-scale experiments -------------------------------------------------

REDUCED_HEADS = 400
REDUCED_K_BAR = 50


def reduced_config(seed=0):
    # feed back one fifth of the facts discovered per round
    n_fb = REDUCED_HEADS * REDUCED_K_BAR // 5
    return PipelineConfig(
        seed=seed, workers=0,
        split=SplitConfig(ratio=50.0, num_heads=REDUCED_HEADS, valid_fraction=0.25),
        kbr=KbrTrainConfig(dim=50, epochs=100),
        discovery=DiscoveryConfig(K_bar=REDUCED_K_BAR),
        feedback=FeedbackConfig(n_fb=n_fb, rounds=2))


def head_subsample(store, fraction, seed):
    """Keep every fact of a uniform ``fraction`` of the head entities."""
    heads = np.unique(store.triples[:, 0])
    rng = rng_for(seed, "head-subsample")
    keep = rng.choice(heads, size=int(round(fraction * len(heads))), replace=False)
    return TripleStore(store.vocab, store.triples[np.isin(store.triples[:, 0], keep)])


def fb15k_files(root):
    root = Path(root)
    files = []
    for part in ("train", "valid", "test"):
        found = sorted(p for p in root.iterdir() if part in p.name and p.suffix in (".txt", ".tsv"))
        if not found:
            raise FileNotFoundError(f"no {part} file under {root}")
        files.append(found[0])
    return files


DATASETS = ["fb15k", "proxy"]
_cache = {}


def load_dataset(name):
    if name == "fb15k":
        root = os.environ.get("FFD_FB15K")
        if not root:
            pytest.skip("FFD_FB15K not set; FB15k is not bundled")
        return head_subsample(load_kb(fb15k_files(root)), 0.2, seed=0)
    return typed_kb(entities_per_type=120, seed=0)


def reduced_run(name):
    """Train once per dataset and cache every number C6-C8 need."""
    if name in _cache:
        return _cache[name]
    kb = load_dataset(name)
    cfg = reduced_config()
    s = cfg.split
    split = split_fdkb(kb, ratio=s.ratio, num_heads=s.num_heads, valid_fraction=s.valid_fraction,
                       seed=derive_seed(cfg.seed, "split"))
    t0 = time.perf_counter()
    f1, maps, comps = {}, {}, {}
    for kind in KINDS:
        comps[kind] = fit_components(split, cfg, kind)
        for method in (f"ffd:{kind}", f"kbr+:{kind}"):
            rep = evaluate_run(run_method(method, split, cfg, components=comps[kind]), split, cfg)
            f1[method], maps[method] = rep.f1, rep.map
    for method in ("svd", "nmf"):
        rep = evaluate_run(run_method(method, split, cfg), split, cfg)
        f1[method], maps[method] = rep.f1, rep.map
    table_time = time.perf_counter() - t0

    with tempfile.TemporaryDirectory() as d:
        audit = Path(d) / "audit.tsv"
        fb = feedback_loop(split, comps["analogy"], cfg.discovery, cfg.feedback,
                           cfg.component_configs("analogy"), audit_path=audit,
                           workers=cfg.n_workers)
        rounds = [ln.split("\t")[0] for ln in audit.read_text().splitlines()[1:]]
    audit_ok = all(
        rounds.count(str(i)) == min(cfg.feedback.n_fb, sum(len(v) for v in rnd.discovered.values()))
        for i, rnd in enumerate(fb.rounds, start=1))
    map_fb = evaluate_run(fb.discovered, split, cfg).map

    sweep = sparsity_sweep(kb, [50, 30, 10], cfg, method="ffd:analogy", use_feedback=True)
    out = {
        "f1": f1, "map": maps, "map_fb": map_fb, "audit_ok": audit_ok,
        "sweep": [(row["ratio"], row["precision"]) for row in sweep],
        "sizes": (len(split.train), len(split.valid), len(split.test)),
        "elapsed": time.perf_counter() - t0, "table_time": table_time,
    }
    _cache[name] = out
    return out


@pytest.mark.parametrize("dataset", DATASETS)
def test_c6_reduced_ordering(capsys, dataset):
    run = reduced_run(dataset)
    f1 = run["f1"]
    mf_best = max(f1["svd"], f1["nmf"])
    fails = []
    for kind in KINDS:
        if not f1[f"ffd:{kind}"] >= f1[f"kbr+:{kind}"] + 0.01:
            fails.append(f"ffd:{kind} vs kbr+:{kind}")
        if not f1[f"kbr+:{kind}"] >= mf_best + 0.01:
            fails.append(f"kbr+:{kind} vs MF")
    table = ", ".join(f"{m} {v:.4f}" for m, v in f1.items())
    report(capsys, f"C6 {dataset}", not fails,
           f"F1 {table}; train/valid/test {run['sizes']}; {run['table_time']:.0f}s"
           + (f"; violated: {fails}" if fails else ""))
    assert not fails


@pytest.mark.parametrize("dataset", DATASETS)
def test_c7_feedback_non_degradation(capsys, dataset):
    run = reduced_run(dataset)
    base, with_fb = run["map"]["ffd:analogy"], run["map_fb"]
    ok = with_fb >= base - 0.005 and run["audit_ok"]
    report(capsys, f"C7 {dataset}", ok,
           f"MAP without feedback {base:.4f}, with 2 rounds {with_fb:.4f}; "
           f"audit rows per round {'exact' if run['audit_ok'] else 'WRONG'}")
    assert ok


@pytest.mark.parametrize("dataset", DATASETS)
def test_c8_sparsity_trend(capsys, dataset):
    run = reduced_run(dataset)
    prec = [p for _, p in run["sweep"]]
    rises = [b - a for a, b in zip(prec, prec[1:]) if b > a]
    ok = len(rises) == 0 or (len(rises) == 1 and rises[0] <= 0.005)
    series = ", ".join(f"R={r:g}: {p:.4f}" for r, p in run["sweep"])
    report(capsys, f"C8 {dataset}", ok, f"precision {series}")
    assert ok


# -- C9: full-scale reproduction (opt-in, non-gating) -------------------------------

def test_c9_full_scale(capsys):
    root = os.environ.get("FFD_FB15K")
    if not root or os.environ.get("FFD_FULL_SCALE") != "1":
        report(capsys, "C9", "SKIP", "non-gating; set FFD_FB15K and FFD_FULL_SCALE=1 to run")
        pytest.skip("full-scale FB15k run is opt-in")
    cfg = PipelineConfig(seed=0, workers=0)
    kb = load_kb(fb15k_files(root))
    s = cfg.split
    split = split_fdkb(kb, ratio=s.ratio, num_heads=s.num_heads, valid_fraction=s.valid_fraction,
                       seed=derive_seed(cfg.seed, "split"))
    comps = fit_components(split, cfg, "analogy")
    per_head = run_method("ffd:analogy", split, cfg, components=comps, use_feedback=True)
    rep = evaluate_run(per_head, split, cfg)
    ok = abs(rep.map - 0.2769) <= 0.03 and abs(rep.f1 - 0.2821) <= 0.03
    report(capsys, "C9", ok, f"FFD(Analogy) MAP {rep.map:.4f} (target 0.2769 +- 0.03), "
           f"F1 {rep.f1:.4f} (target 0.2821 +- 0.03)")
    assert ok


# -- C10: byte-identical artifacts across re-runs -------------------------------------

C10_CONFIG = """
[paths]
data = kb.tsv
split_dir = split
models = models
outputs = outputs
[run]
seed = 11
workers = 4
[split]
num_heads = 12
valid_fraction = 0.5
[autoencoder]
d1 = 16
epochs = 10
batch_size = 32
[kbr]
dim = 8
epochs = 5
batch_size = 256
[discovery]
n_h = 5
n_t = 8
n_f = 4
K_bar = 10
[feedback]
n_fb = 20
rounds = 2
[baselines]
k = 6
nmf_iters = 30
min_count = 1
"""


def _pipeline(root):
    root.mkdir()
    save_triples(typed_kb(n_types=3, entities_per_type=30, relations_per_type=6, seed=4),
                 root / "kb.tsv")
    (root / "run.ini").write_text(C10_CONFIG)
    cfg = ["-c", str(root / "run.ini")]
    steps = [["split"], ["train", "all"]]
    steps += [["discover", m] for m in ("ffd:analogy", "ffd:distmult", "kbr+:complex", "svd", "nmf")]
    steps += [["feedback"], ["eval", str(root / "outputs" / "facts-ffd-analogy.tsv")],
              ["sweep", "--ratios", "50,30,10", "--method", "ffd:complex"]]
    for step in steps:
        assert main(cfg + step) == 0, step
    return sorted(p.relative_to(root) for p in root.rglob("*") if p.is_file())


def test_c10_determinism(capsys, tmp_path, monkeypatch):
    for var in ("FFD_DATA", "FFD_SPLIT_DIR", "FFD_MODELS", "FFD_OUTPUTS"):
        monkeypatch.delenv(var, raising=False)
    a, b = tmp_path / "a", tmp_path / "b"
    files_a, files_b = _pipeline(a), _pipeline(b)
    differ = [str(f) for f in files_a if not filecmp.cmp(a / f, b / f, shallow=False)]
    ok = files_a == files_b and not differ
    report(capsys, "C10", ok, f"{len(files_a)} artifacts from split/train/discover/feedback/"
           f"eval/sweep compared byte for byte" + (f"; differing: {differ}" if differ else ""))
    assert ok
