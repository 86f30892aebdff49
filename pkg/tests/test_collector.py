"""Statistics collection: histograms, NDV, sampling, size model."""

import math
from collections import Counter

import pytest
from hypothesis import given, settings, strategies as st

from videx.catalog import SAMPLE_CAP, ColumnDef, validate_snapshot
from videx.collector import (
    CollectConfig,
    CollectorError,
    DataTable,
    build_equi_depth_histogram,
    collect_snapshot,
    collect_table_stats,
    exact_ndv,
    load_data_dir,
    reservoir_sample,
    write_data_dir,
)


def int_table(values, name="t", column="a"):
    return DataTable(name=name, schema=(ColumnDef(column, "int", False),),
                     rows=tuple((v,) for v in values))


class TestCollectTableStats:
    def test_empty_table(self):
        stats = collect_table_stats(int_table([]))
        assert stats.row_count == 0
        assert stats.column_stats["a"].ndv == 0
        assert stats.column_stats["a"].histogram.is_empty
        assert stats.sample.size == 0

    def test_uniform_1_to_100_four_buckets(self):
        stats = collect_table_stats(int_table(range(1, 101)),
                                    CollectConfig(bucket_count=4))
        buckets = stats.column_stats["a"].histogram.buckets
        assert [(b.lower, b.upper, b.row_fraction, b.distinct_count)
                for b in buckets] == [
            (1, 25, 0.25, 25), (26, 50, 0.25, 25),
            (51, 75, 0.25, 25), (76, 100, 0.25, 25)]

    def test_sample_capped_at_1e5(self):
        data = int_table(range(200_000))
        stats = collect_table_stats(data, CollectConfig(bucket_count=4))
        assert stats.sample.size == 100_000

    def test_cap_never_exceeded_even_if_requested(self):
        data = int_table(range(150_000))
        stats = collect_table_stats(
            data, CollectConfig(bucket_count=4, sample_cap=200_000))
        assert stats.sample.size <= SAMPLE_CAP

    def test_size_model_frozen_values(self):
        # 2 ints (8B) + 1 null int + string 'ab' (3B) + string null + date (4B)
        data = DataTable(
            name="t",
            schema=(ColumnDef("i", "int", True), ColumnDef("s", "string", True),
                    ColumnDef("d", "date", True)),
            rows=((1, "ab", 100), (2, None, None), (None, None, 200)))
        stats = collect_table_stats(data, CollectConfig(bucket_count=2))
        assert stats.data_size_bytes == 2 * 8 + (2 + 1) + 2 * 4
        assert stats.page_count == 1

    def test_bad_config_rejected(self):
        with pytest.raises(CollectorError):
            collect_table_stats(int_table([1]), CollectConfig(bucket_count=0))
        with pytest.raises(CollectorError):
            collect_table_stats(int_table([1]), CollectConfig(sample_cap=0))


class TestEquiDepthHistogram:
    def test_single_distinct_value_any_bucket_count(self):
        for k in (1, 2, 16):
            hist = build_equi_depth_histogram([7] * 50, k)
            assert len(hist.buckets) == 1
            b = hist.buckets[0]
            assert (b.lower, b.upper, b.row_fraction, b.distinct_count) == \
                (7, 7, 1.0, 1)

    def test_duplicates_never_split(self):
        hist = build_equi_depth_histogram([1, 1, 1, 1, 2], 2)
        assert [(b.lower, b.upper, b.row_fraction, b.distinct_count)
                for b in hist.buckets] == [(1, 1, 0.8, 1), (2, 2, 0.2, 1)]

    def test_empty_multiset(self):
        assert build_equi_depth_histogram([], 8).is_empty

    def test_uniform_floats_recount(self):
        import random
        rng = random.Random(3)
        values = [rng.random() for _ in range(10_000)]
        hist = build_equi_depth_histogram(values, 32)
        assert len(hist.buckets) <= 32
        # recount oracle: every bucket's fraction matches an exact recount of
        # the values it was assigned
        values.sort()
        i = 0
        for b in hist.buckets:
            assigned = 0
            while i < len(values) and values[i] <= b.upper:
                assert values[i] >= b.lower
                assigned += 1
                i += 1
            assert b.row_fraction == pytest.approx(assigned / len(values),
                                                   abs=1e-12)
        assert i == len(values)

    @given(st.lists(st.integers(min_value=-50, max_value=50), min_size=1,
                    max_size=400),
           st.integers(min_value=1, max_value=12))
    @settings(max_examples=60, deadline=None)
    def test_recount_property(self, values, bucket_count):
        hist = build_equi_depth_histogram(values, bucket_count)
        svals = sorted(values)
        assert len(hist.buckets) <= bucket_count
        assert sum(b.row_fraction for b in hist.buckets) == pytest.approx(1.0,
                                                                          abs=1e-9)
        # oracle: per bucket, exact count of values in [lower, upper] matches
        # the fraction, and no value appears in two buckets
        for b in hist.buckets:
            count = sum(1 for v in svals if b.lower <= v <= b.upper)
            assert b.row_fraction == pytest.approx(count / len(svals), abs=1e-9)
            assert b.distinct_count == len({v for v in svals
                                            if b.lower <= v <= b.upper})
        uppers = [b.upper for b in hist.buckets]
        lowers = [b.lower for b in hist.buckets]
        assert lowers == sorted(lowers) and uppers == sorted(uppers)
        for prev, cur in zip(uppers, lowers[1:]):
            assert cur > prev  # a value never straddles buckets


class TestExactNdv:
    def test_hundred_distinct(self):
        assert exact_ndv(int_table(range(100)), ["a"]) == 100

    def test_joint_ndv_matches_hash_set_oracle(self):
        import random
        rng = random.Random(11)
        rows = tuple((rng.randrange(10), rng.randrange(10)) for _ in range(10_000))
        data = DataTable(name="t",
                         schema=(ColumnDef("x", "int", False),
                                 ColumnDef("y", "int", False)),
                         rows=rows)
        oracle = len({(x, y) for x, y in rows})
        assert exact_ndv(data, ["x", "y"]) == oracle
        assert oracle == 100  # both dimensions saturate at this scale

    def test_empty_table(self):
        assert exact_ndv(int_table([]), ["a"]) == 0

    def test_all_null_tuples_excluded(self):
        data = DataTable(name="t",
                         schema=(ColumnDef("x", "int", True),
                                 ColumnDef("y", "int", True)),
                         rows=((None, None), (1, None), (None, None)))
        assert exact_ndv(data, ["x", "y"]) == 1

    def test_unknown_column(self):
        with pytest.raises(CollectorError):
            exact_ndv(int_table([1]), ["nope"])

    @given(st.lists(st.tuples(st.integers(0, 5), st.integers(0, 5)),
                    min_size=1, max_size=200))
    @settings(max_examples=40, deadline=None)
    def test_joint_at_least_max_of_parts(self, pairs):
        data = DataTable(name="t",
                         schema=(ColumnDef("x", "int", False),
                                 ColumnDef("y", "int", False)),
                         rows=tuple(pairs))
        joint = exact_ndv(data, ["x", "y"])
        assert joint >= max(exact_ndv(data, ["x"]), exact_ndv(data, ["y"]))
        assert joint <= len(pairs)


class TestReservoirSample:
    def test_under_cap_keeps_all_rows_in_order(self):
        data = int_table(range(10))
        sample = reservoir_sample(data, 100, seed=1)
        assert sample.rows == data.rows
        assert sample.size == 10

    def test_same_seed_identical(self):
        data = int_table(range(1000))
        a = reservoir_sample(data, 64, seed=9)
        b = reservoir_sample(data, 64, seed=9)
        assert a == b
        c = reservoir_sample(data, 64, seed=10)
        assert c != a  # overwhelmingly likely for distinct seeds

    def test_inclusion_frequency_uniform(self):
        # 1-of-10 reservoir repeated many times: each row's inclusion
        # frequency within 3 sigma of 1/10
        data = int_table(range(10))
        draws = 200_000
        counts = Counter()
        for seed in range(draws):
            counts[reservoir_sample(data, 1, seed).rows[0][0]] += 1
        p = 1 / 10
        sigma = math.sqrt(draws * p * (1 - p))
        for row in range(10):
            assert abs(counts[row] - draws * p) < 3 * sigma


def test_collect_output_always_validates(tmp_path):
    from _synth import make_three_table_db
    snapshot = collect_snapshot(make_three_table_db(scale=300),
                                CollectConfig(bucket_count=16))
    assert validate_snapshot(snapshot) == []


@given(st.lists(st.one_of(st.none(), st.integers(-100, 100)),
                min_size=0, max_size=150),
       st.integers(min_value=1, max_value=8))
@settings(max_examples=40, deadline=None)
def test_collected_stats_validate_for_random_tables(values, buckets):
    data = DataTable(name="t", schema=(ColumnDef("a", "int", True),),
                     rows=tuple((v,) for v in values))
    snapshot = collect_snapshot([data], CollectConfig(bucket_count=buckets))
    assert validate_snapshot(snapshot) == []


def test_csv_round_trip(tmp_path):
    data = DataTable(
        name="mixed",
        schema=(ColumnDef("i", "int", True), ColumnDef("f", "float", True),
                ColumnDef("s", "string", True), ColumnDef("d", "date", True)),
        rows=((1, 1.5, "hi", 18262), (None, None, None, None),
              (2, -0.25, "a,b", 0)))
    write_data_dir([data], tmp_path)
    [loaded] = load_data_dir(tmp_path)
    assert loaded.schema == data.schema
    assert loaded.rows == data.rows
