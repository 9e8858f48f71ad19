"""Time the compiled scoring/gradient kernels against the numpy fallback.

    python benchmarks/bench_kernels.py [--batch 20000] [--dim 200] [--repeat 5]

Both backends are checked for agreement before timing.
"""

import argparse
import timeit

import numpy as np

from ffd import kernels
from ffd.kbr import n_scalar_for


def make_batch(n_entities, n_relations, dim, batch, seed):
    rng = np.random.default_rng(seed)
    ent = rng.normal(size=(n_entities, dim))
    rel = rng.normal(size=(n_relations, dim))
    h = rng.integers(n_entities, size=batch)
    r = rng.integers(n_relations, size=batch)
    t = rng.integers(n_entities, size=batch)
    coef = rng.normal(size=batch)
    return ent, rel, h, r, t, coef


def run_scores(backend, ent, rel, h, r, t, ns):
    out = np.empty(len(h))
    backend.score_triples(ent, rel, h, r, t, ns, out)
    return out


def run_grads(backend, ent, rel, h, r, t, coef, ns):
    g_ent, g_rel = np.zeros_like(ent), np.zeros_like(rel)
    backend.accumulate_grads(ent, rel, h, r, t, coef, ns, g_ent, g_rel)
    return g_ent, g_rel


def best_of(fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--entities", type=int, default=15000)
    p.add_argument("--relations", type=int, default=1300)
    p.add_argument("--dim", type=int, default=200)
    p.add_argument("--batch", type=int, default=20000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    compiled = kernels.compiled_backend
    py = kernels.python_backend
    if compiled is None:
        print("compiled kernels unavailable (not built, or FFD_PURE_PYTHON set); timing numpy only")
    ent, rel, h, r, t, coef = make_batch(args.entities, args.relations, args.dim, args.batch, 0)

    print(f"batch {args.batch}, dim {args.dim}, |E| {args.entities}, |R| {args.relations}")
    print(f"{'kind':<9} {'kernel':<7} {'numpy ms':>9} {'cython ms':>10} {'speedup':>8}")
    for kind in ("distmult", "complex", "analogy"):
        ns = n_scalar_for(kind, args.dim)
        for name, fn, extra in (("score", run_scores, ()), ("grads", run_grads, (coef,))):
            py_t = best_of(lambda: fn(py, ent, rel, h, r, t, *extra, ns), args.repeat)
            if compiled is None:
                print(f"{kind:<9} {name:<7} {py_t * 1e3:>9.2f} {'-':>10} {'-':>8}")
                continue
            a = fn(py, ent, rel, h, r, t, *extra, ns)
            b = fn(compiled, ent, rel, h, r, t, *extra, ns)
            pairs = [(a, b)] if name == "score" else zip(a, b)
            for x, y in pairs:
                if not np.allclose(x, y, rtol=1e-10, atol=1e-10):
                    raise SystemExit(f"backends disagree on {kind} {name}")
            c_t = best_of(lambda: fn(compiled, ent, rel, h, r, t, *extra, ns), args.repeat)
            print(f"{kind:<9} {name:<7} {py_t * 1e3:>9.2f} {c_t * 1e3:>10.2f} {py_t / c_t:>7.1f}x")


if __name__ == "__main__":
    main()
