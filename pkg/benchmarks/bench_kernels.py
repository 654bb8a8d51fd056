"""Time the numpy and numba kernel sets on a synthetic corpus.

    python3 benchmarks/bench_kernels.py            # 2M records
    python3 benchmarks/bench_kernels.py --scale 0.1 --repeat 5

Each kernel is run once untimed (JIT warm-up), then ``--repeat`` times; the
best wall time is reported.  Results of the two backends are compared and
the run fails if they differ.
"""

from __future__ import annotations

import argparse
import os
import time
from dataclasses import replace
from pathlib import Path

import numpy as np

from topcite import _kernels
from topcite.corpus import Entity
from topcite.indicators import _member_matrix, indicator_reports
from topcite.synth import generate, load_spec

SPEC = Path(__file__).resolve().parent.parent / "tests" / "fixtures" / "perf_2m.ini"


def best_of(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def same(a, b):
    if isinstance(a, tuple):
        return all(np.array_equal(x, y) for x, y in zip(a, b))
    return np.array_equal(a, b)


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--scale", type=float, default=1.0, help="fraction of the 2M-record spec")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--workers", type=int, default=1)
    args = ap.parse_args(argv)

    spec = load_spec(SPEC)
    if args.scale != 1.0:
        spec = replace(spec, fields=tuple(replace(f, n_records=max(1, int(f.n_records * args.scale))) for f in spec.fields))
    corpus = generate(spec)
    rows = corpus.all_rows
    ents = [Entity.country(c) for c in ("CN", "US", "DE")]
    member = _member_matrix(corpus, ents)
    ptr, idx = corpus.countries.ptr, corpus.countries.idx
    size = int(corpus.citations.max()) + 1
    weights = np.ones((2, len(corpus)), dtype=np.int64)
    weights[1] = corpus.citations >= np.quantile(corpus.citations, 0.99)
    bits = np.array([1 << i if i < 3 else 0 for i in range(len(corpus.countries.vocab))], dtype=np.int64)
    max_d = corpus.countries.max_length

    cases = {
        "histogram": (corpus.citations, size),
        "row_any": (ptr, idx, member[0]),
        "bloc_bits": (ptr, idx, bits),
        "entity_sums": (weights, ptr, idx, member, max_d),
    }
    print(f"records: {len(corpus):,}  repeat: {args.repeat}  workers: {args.workers}")
    print(f"{'kernel':<12} {'numpy s':>10} {'numba s':>10} {'speedup':>8}")
    for name, extra in cases.items():
        results = {}
        for k in _kernels.backends():
            t, out = best_of(lambda: _kernels.chunked(name, rows, *extra, workers=args.workers, kernels=k), args.repeat)
            results[k.name] = (t, out)
        t_np, out_np = results["numpy"]
        if "numba" in results:
            t_nb, out_nb = results["numba"]
            if not same(out_np, out_nb):
                raise SystemExit(f"{name}: backends disagree")
            print(f"{name:<12} {t_np:>10.4f} {t_nb:>10.4f} {t_np / t_nb:>7.1f}x")
        else:
            print(f"{name:<12} {t_np:>10.4f} {'n/a':>10}")

    # end to end: threshold + PP-top1% for three entities
    view = corpus.default_view()
    for flag in ("1", ""):
        os.environ[_kernels._FLAG] = flag
        t, res = best_of(lambda: indicator_reports(view, ents, 1, workers=args.workers), args.repeat)
        label = "numpy" if flag else _kernels.active().name
        pp = ", ".join(f"{r.label}={r.pp_topk:.4f}" for r in res.entities)
        print(f"indicators ({label}): {t:.4f} s  [{pp}]")
    os.environ.pop(_kernels._FLAG, None)


if __name__ == "__main__":
    main()
