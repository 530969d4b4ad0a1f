import gzip

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from mthetgnn.dataset import (
    DatasetConfig,
    SeriesMatrix,
    chronological_split,
    denormalize,
    load_series,
    make_samples,
    minimum_length,
    normalize,
    sample_arrays,
    sample_count,
)
from mthetgnn.errors import DimensionError, FormatError, ParseError


def write(tmp_path, text, name="data.txt"):
    p = tmp_path / name
    p.write_text(text)
    return p


def test_load_transposes_rows_to_variables(tmp_path):
    m = load_series(write(tmp_path, "1,2\n3,4\n5,6\n"))
    assert (m.n, m.L) == (2, 3)
    np.testing.assert_array_equal(m.values, [[1, 3, 5], [2, 4, 6]])
    assert m.variable_ids == ("v0", "v1")


def test_load_parse_error_location(tmp_path):
    with pytest.raises(ParseError) as exc:
        load_series(write(tmp_path, "1,x\n2,3\n"))
    assert (exc.value.row, exc.value.column) == (1, 2)


def test_load_ragged_row_named(tmp_path):
    with pytest.raises(FormatError, match="row 2"):
        load_series(write(tmp_path, "1,2\n3\n"))


def test_load_single_variable_rejected(tmp_path):
    with pytest.raises(DimensionError):
        load_series(write(tmp_path, "1\n2\n3\n"))


def test_load_header_and_delimiter(tmp_path):
    m = load_series(write(tmp_path, "a;b;c\n1;2;3\n4;5;6\n"), delimiter=";", skip_header=True)
    assert m.variable_ids == ("a", "b", "c")
    assert m.L == 2


def test_load_gzip(tmp_path):
    p = tmp_path / "d.txt.gz"
    with gzip.open(p, "wt") as fh:
        fh.write("1,2\n3,4\n")
    assert load_series(p).L == 2


def test_series_rejects_nan():
    with pytest.raises(FormatError):
        SeriesMatrix(np.array([[1.0, np.nan], [1.0, 2.0]]))


def test_normalize_max_abs():
    m = SeriesMatrix(np.array([[2.0, -4.0, 1.0], [0.0, 0.0, 0.0]]))
    norm, scale = normalize(m, "max_abs", range(0, 3))
    np.testing.assert_array_equal(scale, [4.0, 1.0])
    np.testing.assert_array_equal(norm.values[0], [0.5, -1.0, 0.25])
    np.testing.assert_array_equal(norm.values[1], [0.0, 0.0, 0.0])


def test_normalize_fits_on_range_only():
    m = SeriesMatrix(np.array([[1.0, 2.0, 100.0], [1.0, 1.0, 1.0]]))
    _, scale = normalize(m, "max_abs", range(0, 2))
    assert scale[0] == 2.0


def test_normalize_none_is_identity():
    m = SeriesMatrix(np.arange(6.0).reshape(2, 3))
    norm, scale = normalize(m, "none", range(0, 3))
    np.testing.assert_array_equal(norm.values, m.values)
    np.testing.assert_array_equal(scale, [1.0, 1.0])


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_normalize_round_trip(seed):
    rng = np.random.default_rng(seed)
    vals = rng.normal(size=(3, 20)) * rng.uniform(1e-3, 1e3, size=(3, 1))
    m = SeriesMatrix(vals)
    norm, scale = normalize(m, "max_abs", range(0, 12))
    back = denormalize(norm, scale).values
    np.testing.assert_allclose(back, vals, rtol=1e-12, atol=0)


def test_split_defaults_l100():
    assert chronological_split(100, DatasetConfig(window_T=8, horizon_h=3)) == (
        range(0, 60), range(60, 80), range(80, 100))


def test_split_exchange_rate_length():
    # integer oracle: floor(L*6/10), floor(L*8/10)
    L = 7588
    assert chronological_split(L, DatasetConfig()) == (
        range(0, L * 6 // 10), range(L * 6 // 10, L * 8 // 10), range(L * 8 // 10, L))
    assert L * 6 // 10 == 4552 and L * 8 // 10 == 6070


def test_split_too_short_states_minimum():
    cfg = DatasetConfig(window_T=32, horizon_h=3)
    with pytest.raises(DimensionError, match=f"minimum L is {minimum_length(cfg)}"):
        chronological_split(10, cfg)
    chronological_split(minimum_length(cfg), cfg)


@settings(max_examples=60, deadline=None)
@given(st.integers(60, 3000), st.integers(2, 12), st.integers(1, 6))
def test_split_partitions_exactly(L, T, h):
    cfg = DatasetConfig(window_T=T, horizon_h=h)
    assume(L >= minimum_length(cfg))
    tr, va, te = chronological_split(L, cfg)
    assert tr.start == 0 and tr.stop == va.start and va.stop == te.start and te.stop == L
    m = SeriesMatrix(np.zeros((2, L)))
    for r in (tr, va, te):
        _, _, origins = sample_arrays(m, r, T, h)
        if len(origins):
            assert origins[0] - T + 1 >= r.start and origins[-1] + h < r.stop


def test_sample_counts():
    m = SeriesMatrix(np.arange(80.0).reshape(2, 40))
    cfg = DatasetConfig(window_T=32, horizon_h=3)
    assert len(make_samples(m, range(0, 40), cfg)) == 6
    assert len(make_samples(m, range(0, 34), cfg)) == 0


def test_first_sample_indexing():
    vals = np.vstack([np.arange(40.0), -np.arange(40.0)])
    s = make_samples(SeriesMatrix(vals), range(0, 40), DatasetConfig(window_T=32, horizon_h=3))[0]
    np.testing.assert_array_equal(s.input, vals[:, 0:32])
    np.testing.assert_array_equal(s.target, vals[:, 34])
    assert s.origin_index == 31


@settings(max_examples=60, deadline=None)
@given(st.integers(1, 80), st.integers(1, 20), st.integers(1, 10), st.integers(0, 20))
def test_sample_count_formula_and_targets(range_len, T, h, start):
    L = start + range_len
    vals = np.random.default_rng(L).normal(size=(2, L))
    m = SeriesMatrix(vals)
    rng = range(start, L)
    samples = make_samples(m, rng, DatasetConfig(window_T=T, horizon_h=h))
    assert len(samples) == max(range_len - T - h + 1, 0) == sample_count(range_len, T, h)
    for s in samples:
        np.testing.assert_array_equal(s.target, vals[:, s.origin_index + h])
        np.testing.assert_array_equal(s.input, vals[:, s.origin_index - T + 1 : s.origin_index + 1])
