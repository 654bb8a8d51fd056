import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from topcite import _kernels
from topcite.corpus import Entity
from topcite.indicators import _member_matrix

from conftest import COUNTRY_POOL, corpora

pytestmark = pytest.mark.skipif(len(_kernels.backends()) < 2, reason="numba not importable")


def run_all(c, workers):
    rows = c.all_rows
    ptr, idx = c.countries.ptr, c.countries.idx
    ents = [Entity.country(x) for x in COUNTRY_POOL[:3]] + [Entity("B", frozenset(COUNTRY_POOL[3:]))]
    member = _member_matrix(c, ents)
    weights = np.stack([np.ones(len(c), np.int64), c.citations])
    bits = np.arange(len(c.countries.vocab), dtype=np.int64) % 3
    out = {}
    for k in _kernels.backends():
        out[k.name] = (
            _kernels.chunked("histogram", rows, c.citations, int(c.citations.max()) + 1, workers=workers, kernels=k),
            _kernels.chunked("row_any", rows, ptr, idx, member[0], workers=workers, kernels=k),
            _kernels.chunked("bloc_bits", rows, ptr, idx, bits, workers=workers, kernels=k),
            _kernels.chunked("entity_sums", rows, weights, ptr, idx, member, c.countries.max_length, workers=workers, kernels=k),
        )
    return out


@settings(max_examples=40, deadline=None)
@given(corpora(max_size=300), st.integers(1, 5))
def test_backends_agree(c, workers):
    out = run_all(c, workers)
    a, b = out["numpy"], out["numba"]
    for x, y in zip(a[:3], b[:3]):
        assert np.array_equal(x, y)
    for x, y in zip(a[3], b[3]):
        assert np.array_equal(x, y)


@settings(max_examples=20, deadline=None)
@given(corpora(min_size=20, max_size=300))
def test_worker_split_does_not_change_results(c):
    base = run_all(c, 1)["numba"]
    for w in (2, 3, 8):
        other = run_all(c, w)["numba"]
        for x, y in zip(base[:3], other[:3]):
            assert np.array_equal(x, y)
        for x, y in zip(base[3], other[3]):
            assert np.array_equal(x, y)


def test_env_flag_selects_numpy(monkeypatch):
    monkeypatch.setenv("TOPCITE_DISABLE_NUMBA", "1")
    assert _kernels.active().name == "numpy"
    monkeypatch.setenv("TOPCITE_DISABLE_NUMBA", "")
    assert _kernels.active().name == "numba"


def test_row_entries():
    ptr = np.array([0, 2, 2, 5])
    owner, pos, lens = _kernels.row_entries(ptr, np.array([2, 0]))
    assert list(owner) == [0, 0, 0, 1, 1]
    assert list(pos) == [2, 3, 4, 0, 1]
    assert list(lens) == [3, 2]
