"""Command-line front end: split, train, discover, feedback, eval, sweep, case."""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from . import autoencoder as ae
from . import kbr
from .config import load_config
from .discovery import FacetComponents, discover_for_head, exhaustive_kbr_rank, read_facts, write_facts
from .errors import ConfigError, FfdError, VocabularyError
from .feedback import feedback_loop, write_trace
from .kb import Vocab, atomic_write_text, load_split, load_triples, split_fdkb, write_split
from .metrics import evaluate, write_report
from .pipeline import FFD, KBR_PLUS, derive_seed, parse_method, run_method, sparsity_sweep, sweep_csv
from .training import train_head_ae, train_tail_ae

log = logging.getLogger("ffd")

AE_HEAD = "ae-head"
AE_TAIL = "ae-tail"
ALL_COMPONENTS = (AE_HEAD, AE_TAIL, "kbr:distmult", "kbr:complex", "kbr:analogy")


class UsageError(FfdError):
    """Bad input from the command line or missing files; exit code 2."""


def _require(*paths):
    missing = [str(p) for p in paths if not Path(p).exists()]
    if missing:
        raise UsageError("missing path(s): " + ", ".join(missing))


def load_kb(paths):
    """Concatenate one or more triple files under a shared vocabulary."""
    if not paths:
        raise UsageError("no data files configured ([paths] data or FFD_DATA)")
    _require(*paths)
    vocab = Vocab.scan(paths)
    stores = [load_triples(p, vocab) for p in paths]
    store = stores[0]
    for extra in stores[1:]:
        store = store.with_facts(extra.triples)
    return store


def _split(cfg):
    d = cfg.paths.split_dir
    _require(*(d / f for f in ("train.txt", "valid.txt", "test.txt", "heads.txt")))
    return load_split(d)


def model_path(cfg, component):
    name = component.replace(":", "-")
    return cfg.paths.models / f"{name}.bin"


def _trace_path(path):
    return path.with_suffix(".loss.csv")


def _read_trace(path):
    if not path.exists():
        return []
    with path.open(encoding="utf-8", newline="") as fh:
        return [float(row["loss"]) for row in csv.DictReader(fh)]


def _epoch_logger(name, every=10):
    def emit(epoch, loss):
        if epoch == 1 or epoch % every == 0:
            log.info("%s epoch %d loss %.6g", name, epoch, loss)
    return emit


def _component_kind(component):
    if component in (AE_HEAD, AE_TAIL):
        return None
    family, _, kind = component.partition(":")
    if family != "kbr" or not kind:
        raise UsageError(f"unknown component {component!r}; expected ae-head, ae-tail, "
                         "kbr:<kind> or all")
    return kbr.normalize_kind(kind)


def train_one(cfg, split, component, resume=False):
    kind = _component_kind(component)
    pipe = cfg.pipeline
    path = model_path(cfg, component)
    trace_path = _trace_path(path)
    init = None
    if kind is None:
        ccfg = pipe.component_configs()
        acfg = ccfg.head_ae if component == AE_HEAD else ccfg.tail_ae
        if resume and path.exists():
            init = ae.load_autoencoder(path)
            init.loss_trace[:] = _read_trace(trace_path)
        fit = train_head_ae if component == AE_HEAD else train_tail_ae
        params = fit(split.train, acfg, init=init, log=_epoch_logger(component))
        ae.save_autoencoder(params, path)
        trace = params.loss_trace
    else:
        kcfg = pipe.component_configs(kind).kbr
        if resume and path.exists():
            init = kbr.load_kbr(path)
            init.loss_trace[:] = _read_trace(trace_path)
        model = kbr.train_kbr(split.train, kcfg, init=init, valid=split.valid,
                              log=_epoch_logger(component))
        kbr.save_kbr(model, path)
        trace = model.loss_trace
    kbr.write_loss_trace(trace, trace_path)
    log.info("wrote %s", path)
    return path


def load_components(cfg, split, kind):
    paths = [model_path(cfg, AE_HEAD), model_path(cfg, AE_TAIL), model_path(cfg, f"kbr:{kind}")]
    _require(*paths)
    return FacetComponents(ae.load_autoencoder(paths[0]), ae.load_autoencoder(paths[1]),
                           kbr.load_kbr(paths[2]), split.train)


def load_model(cfg, kind):
    path = model_path(cfg, f"kbr:{kind}")
    _require(path)
    return kbr.load_kbr(path)


def facts_path(cfg, method):
    slug = method.lower().replace(":", "-").replace("+", "plus")
    return cfg.paths.outputs / f"facts-{slug}.tsv"


# --------------------------------------------------------------------------
# commands

def cmd_split(cfg, args):
    store = load_kb(cfg.paths.data)
    s = cfg.pipeline.split
    split = split_fdkb(store, ratio=s.ratio, num_heads=s.num_heads,
                       valid_fraction=s.valid_fraction,
                       seed=derive_seed(cfg.pipeline.seed, "split"))
    write_split(split, cfg.paths.split_dir)
    print(f"train {len(split.train)}  valid {len(split.valid)}  test {len(split.test)}  "
          f"heads {len(split.heads)} -> {cfg.paths.split_dir}")


def cmd_train(cfg, args):
    split = _split(cfg)
    comps = ALL_COMPONENTS if args.component == "all" else (args.component,)
    for c in comps:
        _component_kind(c)
    for c in comps:
        print(train_one(cfg, split, c, resume=args.resume))


def _discover(cfg, split, method):
    family, kind = parse_method(method)
    if family == FFD:
        return run_method(method, split, cfg.pipeline, components=load_components(cfg, split, kind))
    if family == KBR_PLUS:
        return run_method(method, split, cfg.pipeline, model=load_model(cfg, kind))
    return run_method(method, split, cfg.pipeline)


def cmd_discover(cfg, args):
    split = _split(cfg)
    per_head = _discover(cfg, split, args.method)
    out = Path(args.out) if args.out else facts_path(cfg, args.method)
    write_facts(per_head, split.vocab, out)
    print(f"{sum(len(v) for v in per_head.values())} facts -> {out}")


def cmd_feedback(cfg, args):
    split = _split(cfg)
    kind = kbr.normalize_kind(args.kind or cfg.pipeline.kbr.kind)
    components = load_components(cfg, split, kind)
    out = cfg.paths.outputs
    pipe = cfg.pipeline
    result = feedback_loop(split, components, pipe.discovery, pipe.feedback,
                           pipe.component_configs(kind), audit_path=out / "feedback-audit.tsv",
                           workers=pipe.n_workers)
    write_trace(result.trace, out / "feedback-trace.csv")
    dest = facts_path(cfg, f"ffd:{kind}").with_name(f"facts-ffd-{kind}-feedback.tsv")
    write_facts(result.discovered, split.vocab, dest)
    print(f"{len(result.rounds)} rounds, "
          f"{sum(len(v) for v in result.discovered.values())} facts -> {dest}")


def cmd_eval(cfg, args):
    split = _split(cfg)
    _require(args.facts)
    per_head = read_facts(args.facts, split.vocab)
    everything = split.train.with_facts(split.valid.triples).with_facts(split.test.triples)
    rep = evaluate(per_head, split.test, difficulty_store=everything, bins=cfg.pipeline.eval.bins,
                   map_mode=cfg.pipeline.eval.map_mode)
    prefix = args.prefix or f"eval-{Path(args.facts).stem}"
    write_report(rep, cfg.paths.outputs, split.vocab, prefix=prefix)
    for k, v in rep.as_items():
        print(f"{k} = {v}")


def cmd_sweep(cfg, args):
    store = load_kb(cfg.paths.data)
    ratios = args.ratios or cfg.pipeline.sweep.ratios
    use_fb = cfg.pipeline.sweep.feedback and not args.no_feedback
    rows = sparsity_sweep(store, ratios, cfg.pipeline, method=args.method, use_feedback=use_fb)
    out = cfg.paths.outputs / "sweep.csv"
    text = sweep_csv(rows)
    atomic_write_text(out, text)
    sys.stdout.write(text)


def cmd_case(cfg, args):
    split = _split(cfg)
    vocab = split.vocab
    if not vocab.has_entity(args.head):
        raise UsageError(f"unknown head label {args.head!r}")
    h = vocab.entity_id(args.head)
    if args.facts:
        _require(args.facts)
        facts = read_facts(args.facts, vocab).get(h, [])
    else:
        family, kind = parse_method(args.method)
        disc = cfg.pipeline.discovery
        if family == FFD:
            facts = discover_for_head(h, load_components(cfg, split, kind), disc)
        elif family == KBR_PLUS:
            facts = exhaustive_kbr_rank(load_model(cfg, kind), h, disc.K_bar, split.train,
                                        disc.exclude_known)
        else:
            facts = run_method(args.method, dataclasses.replace(split, heads=[h]),
                               cfg.pipeline).get(h, [])
    test = split.test.fact_set()
    width = max([len(vocab.relations[f.r]) for f in facts] + [8])
    print(f"head: {args.head}")
    print(f"{'rank':>4}  {'relation':<{width}}  {'confidence':>12}  in_test  tail")
    for i, f in enumerate(facts, 1):
        mark = "yes" if f.triple in test else "-"
        print(f"{i:>4}  {vocab.relations[f.r]:<{width}}  {f.confidence:>12.5f}  {mark:<7}  "
              f"{vocab.entities[f.t]}")


# --------------------------------------------------------------------------

def build_parser():
    p = argparse.ArgumentParser(prog="ffd", description=__doc__)
    p.add_argument("-c", "--config", help="INI configuration file")
    p.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                   help="override one config value (repeatable)")
    p.add_argument("--seed", type=int, help="global seed (same as --set run.seed=N)")
    p.add_argument("--workers", type=int, help="worker threads, 0 = all cores")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    sub.add_parser("split", help="re-split the KB for head-only discovery")

    t = sub.add_parser("train", help="train one component and save it")
    t.add_argument("component", help="ae-head | ae-tail | kbr:<kind> | all")
    t.add_argument("--resume", action="store_true", help="continue from the saved model file")

    d = sub.add_parser("discover", help="write discovered facts for one method")
    d.add_argument("method", help="ffd:<kind> | kbr+:<kind> | svd | nmf")
    d.add_argument("-o", "--out", help="output TSV (default: outputs/facts-<method>.tsv)")

    f = sub.add_parser("feedback", help="run feedback learning from saved components")
    f.add_argument("--kind", help="KBR kind (default: [kbr] kind)")

    e = sub.add_parser("eval", help="score a facts TSV against the test split")
    e.add_argument("facts")
    e.add_argument("--prefix", help="report file prefix")

    s = sub.add_parser("sweep", help="relation-ratio sparsity sweep")
    s.add_argument("--ratios", type=lambda x: [float(v) for v in x.split(",")],
                   help="comma-separated R%% values")
    s.add_argument("--method", help="method to sweep (default: [sweep] method)")
    s.add_argument("--no-feedback", action="store_true")

    c = sub.add_parser("case", help="list the top facts discovered for one head")
    c.add_argument("head", help="head entity label")
    c.add_argument("--method", default="ffd:analogy")
    c.add_argument("--facts", help="read rankings from a facts TSV instead of the models")
    return p


COMMANDS = {
    "split": cmd_split, "train": cmd_train, "discover": cmd_discover, "feedback": cmd_feedback,
    "eval": cmd_eval, "sweep": cmd_sweep, "case": cmd_case,
}


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(levelname)s %(message)s", stream=sys.stderr)
    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"run.seed={args.seed}")
    if args.workers is not None:
        overrides.append(f"run.workers={args.workers}")
    try:
        cfg = load_config(args.config, overrides)
        if args.command == "sweep" and args.method:
            parse_method(args.method)
        COMMANDS[args.command](cfg, args)
    except (UsageError, ConfigError, VocabularyError) as exc:
        print(f"ffd {args.command}: error: {exc}", file=sys.stderr)
        return 2
    except FfdError as exc:
        print(f"ffd {args.command}: failed: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"ffd {args.command}: I/O error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
