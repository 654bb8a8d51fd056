"""Inner loops over record and byline arrays.

Every kernel exists twice: a numba ``@njit`` version and a vectorised numpy
version.  Both return identical integer results.  The numba path is used
when numba imports and ``TOPCITE_DISABLE_NUMBA`` is unset; set it to ``1``
to force the numpy path (``benchmarks/bench_kernels.py`` compares both).

Kernels take ``rows`` (int64 corpus row indices) so work can be split into
contiguous chunks and the integer partial results summed; the merged result
does not depend on how the rows were split.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from types import SimpleNamespace

import numpy as np

_FLAG = "TOPCITE_DISABLE_NUMBA"

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    HAVE_NUMBA = False


def _flag_set() -> bool:
    return os.environ.get(_FLAG, "").strip().lower() in {"1", "true", "yes", "on"}


# --------------------------------------------------------------------------
# numpy implementations


def row_entries(ptr, rows):
    """Entry positions and owning row position for the bylines of ``rows``."""
    lo = ptr[rows]
    lens = ptr[rows + 1] - lo
    owner = np.repeat(np.arange(len(rows), dtype=np.int64), lens)
    starts = np.cumsum(lens) - lens
    pos = np.arange(int(lens.sum()), dtype=np.int64) - np.repeat(starts - lo, lens)
    return owner, pos, lens


def _histogram_np(rows, values, size):
    return np.bincount(values[rows], minlength=size).astype(np.int64)


def _row_any_np(rows, ptr, idx, member):
    owner, pos, _ = row_entries(ptr, rows)
    hits = np.bincount(owner, weights=member[idx[pos]], minlength=len(rows))
    return hits > 0


def _bloc_bits_np(rows, ptr, idx, bits):
    owner, pos, _ = row_entries(ptr, rows)
    code_bits = bits[idx[pos]]
    out = np.zeros(len(rows), dtype=np.int64)
    for b in range(63):
        flag = (code_bits >> b) & 1
        if not flag.any():
            continue
        hit = np.bincount(owner, weights=flag, minlength=len(rows)) > 0
        out |= hit.astype(np.int64) << b
    return out


def _entity_sums_np(rows, weights, ptr, idx, member, max_d):
    n_val = weights.shape[0]
    n_ent = member.shape[0]
    whole = np.zeros((n_val, n_ent), dtype=np.int64)
    frac = np.zeros((n_val, n_ent, max_d + 1), dtype=np.int64)
    owner, pos, lens = row_entries(ptr, rows)
    codes = idx[pos]
    w = weights[:, rows]
    for e in range(n_ent):
        m = np.bincount(owner, weights=member[e, codes], minlength=len(rows))
        m = m.astype(np.int64)
        hit = m > 0
        d = lens[hit]
        for v in range(n_val):
            wv = w[v, hit]
            whole[v, e] = wv.sum()
            np.add.at(frac[v, e], d, wv * m[hit])
    return whole, frac


numpy_kernels = SimpleNamespace(
    name="numpy",
    histogram=_histogram_np,
    row_any=_row_any_np,
    bloc_bits=_bloc_bits_np,
    entity_sums=_entity_sums_np,
)


# --------------------------------------------------------------------------
# numba implementations

if HAVE_NUMBA:

    @njit(cache=True, nogil=True)
    def _histogram_nb(rows, values, size):
        out = np.zeros(size, np.int64)
        for j in range(rows.shape[0]):
            out[values[rows[j]]] += 1
        return out

    @njit(cache=True, nogil=True)
    def _row_any_nb(rows, ptr, idx, member):
        out = np.zeros(rows.shape[0], np.bool_)
        for j in range(rows.shape[0]):
            i = rows[j]
            for q in range(ptr[i], ptr[i + 1]):
                if member[idx[q]]:
                    out[j] = True
                    break
        return out

    @njit(cache=True, nogil=True)
    def _bloc_bits_nb(rows, ptr, idx, bits):
        out = np.zeros(rows.shape[0], np.int64)
        for j in range(rows.shape[0]):
            i = rows[j]
            acc = 0
            for q in range(ptr[i], ptr[i + 1]):
                acc |= bits[idx[q]]
            out[j] = acc
        return out

    @njit(cache=True, nogil=True)
    def _entity_sums_nb(rows, weights, ptr, idx, member, max_d):
        n_val = weights.shape[0]
        n_ent = member.shape[0]
        whole = np.zeros((n_val, n_ent), np.int64)
        frac = np.zeros((n_val, n_ent, max_d + 1), np.int64)
        for j in range(rows.shape[0]):
            i = rows[j]
            lo = ptr[i]
            hi = ptr[i + 1]
            d = hi - lo
            if d == 0:
                continue
            for e in range(n_ent):
                m = 0
                for q in range(lo, hi):
                    m += member[e, idx[q]]
                if m == 0:
                    continue
                for v in range(n_val):
                    w = weights[v, i]
                    whole[v, e] += w
                    frac[v, e, d] += w * m
        return whole, frac

    numba_kernels = SimpleNamespace(
        name="numba",
        histogram=_histogram_nb,
        row_any=_row_any_nb,
        bloc_bits=_bloc_bits_nb,
        entity_sums=_entity_sums_nb,
    )
else:  # pragma: no cover
    numba_kernels = None


def backends() -> list[SimpleNamespace]:
    """All importable kernel sets, numpy first."""
    return [k for k in (numpy_kernels, numba_kernels) if k is not None]


def active() -> SimpleNamespace:
    if HAVE_NUMBA and not _flag_set():
        return numba_kernels
    return numpy_kernels


def chunked(name: str, rows: np.ndarray, *args, workers: int = 1, kernels=None):
    """Run kernel ``name`` over contiguous chunks of ``rows`` and merge.

    Array results (and tuples of arrays) are summed when the kernel is a
    reduction, or concatenated when it returns one value per row.
    """
    kernels = kernels or active()
    fn = getattr(kernels, name)
    rows = np.ascontiguousarray(rows, dtype=np.int64)
    if workers <= 1 or len(rows) < 2 * workers:
        return fn(rows, *args)
    parts = np.array_split(rows, workers)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(lambda p: fn(p, *args), parts))
    if name in ("row_any", "bloc_bits"):
        return np.concatenate(results)
    if isinstance(results[0], tuple):
        return tuple(sum(r[i] for r in results) for i in range(len(results[0])))
    return sum(results[1:], results[0])
