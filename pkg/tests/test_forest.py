import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastforest.forest import (
    BAG,
    BAG_UNIQUE,
    BuildConfig,
    ForestModel,
    SamplerMode,
    build_forest,
    draw_sample,
    make_bag,
    make_subbag,
    predict,
    predict_batch,
    subbag,
    tree_rng,
    tree_votes,
    vote,
)
from fastforest.split import EXHAUSTIVE, LSPS
from fastforest.tree import STATIC, drs, predict_rows

from conftest import make_dataset

FACTORS = [round(0.05 * i, 2) for i in range(1, 13)] + [0.632]


class TestSamplers:
    def test_subbag_six(self):
        s = make_subbag(6, 0.5, np.random.default_rng(0))
        assert s.size == 3 and np.unique(s).size == 3

    def test_subbag_one(self):
        for a in (0.05, 0.5, 1.0):
            np.testing.assert_array_equal(make_subbag(1, a, np.random.default_rng(1)), [0])

    @settings(max_examples=200, deadline=None)
    @given(n=st.integers(1, 10**6), a=st.sampled_from(FACTORS), seed=st.integers(0, 2**32))
    def test_subbag_size_and_distinct(self, n, a, seed):
        s = make_subbag(n, a, np.random.default_rng(seed))
        assert s.size == max(1, int(np.floor(a * n)))
        assert np.unique(s).size == s.size
        assert s.min() >= 0 and s.max() < n

    def test_subbag_uniform(self):
        rng = np.random.default_rng(12)
        hits = np.zeros(1000)
        for _ in range(10_000):
            hits[make_subbag(1000, 0.5, rng)] += 1
        freq = hits / 10_000
        assert np.all(np.abs(freq - 0.5) <= 0.02)

    def test_bag(self):
        rng = np.random.default_rng(3)
        b = make_bag(50, rng)
        assert b.size == 50
        np.testing.assert_array_equal(make_bag(1, rng), [0])
        np.testing.assert_array_equal(make_bag(1, rng, unique=True), [0])
        np.testing.assert_array_equal(make_bag(40, np.random.default_rng(9)), make_bag(40, np.random.default_rng(9)))

    def test_bag_unique_fraction(self):
        rng = np.random.default_rng(2)
        frac = make_bag(10_000, rng, unique=True).size / 10_000
        assert abs(frac - 0.632) <= 0.015

    def test_draw_sample_dispatch(self):
        assert draw_sample(10, subbag(0.3), np.random.default_rng(0)).size == 3
        assert draw_sample(10, BAG, np.random.default_rng(0)).size == 10
        assert draw_sample(10, BAG_UNIQUE, np.random.default_rng(0)).size <= 10
        with pytest.raises(ValueError):
            SamplerMode("subbag", 0.0)

    def test_tree_streams_independent(self):
        a = tree_rng(42, 0).integers(0, 2**62, 4)
        b = tree_rng(42, 1).integers(0, 2**62, 4)
        assert not np.array_equal(a, b)
        np.testing.assert_array_equal(a, tree_rng(42, 0).integers(0, 2**62, 4))
        # seeds are taken mod 2**64
        np.testing.assert_array_equal(tree_rng(-1, 3).random(3), tree_rng(2**64 - 1, 3).random(3))


class TestConfig:
    def test_presets(self):
        rf = BuildConfig.random_forest()
        ff = BuildConfig.fastforest()
        assert (rf.sampler, rf.split_mode, rf.subspace_mode) == (BAG_UNIQUE, EXHAUSTIVE, STATIC)
        assert (ff.sampler, ff.split_mode, ff.subspace_mode) == (subbag(0.5), LSPS, drs(8))
        assert rf.num_trees == ff.num_trees == 100

    @pytest.mark.parametrize("kw", [{"num_trees": 0}, {"min_leaf": 0}, {"threads": 0}, {"threads": "many"}, {"fixed_k": 0}])
    def test_validation(self, kw):
        with pytest.raises(ValueError):
            BuildConfig(**kw)

    def test_trees_message(self):
        with pytest.raises(ValueError, match="trees must be ≥ 1"):
            BuildConfig(num_trees=0)

    def test_dict_round_trip(self):
        cfg = BuildConfig.random_forest(seed=7, max_depth=4, threads=3)
        d = cfg.to_dict()
        assert "threads" not in d
        assert BuildConfig.from_dict(d) == cfg.with_(threads=1)


class TestBuildForest:
    def test_threads_do_not_change_model(self, mortgage, tictactoe):
        for ds in (mortgage, tictactoe):
            one = build_forest(ds, BuildConfig.fastforest(seed=42, num_trees=20, threads=1))
            many = build_forest(ds, BuildConfig.fastforest(seed=42, num_trees=20, threads=8))
            assert one.to_json() == many.to_json()

    def test_full_subbag_one_tree_resubstitution(self, mortgage):
        cfg = BuildConfig(num_trees=1, sampler=subbag(1.0), split_mode=EXHAUSTIVE, fixed_k=2)
        model = build_forest(mortgage, cfg)
        np.testing.assert_array_equal(predict_batch(model, mortgage.values), mortgage.y)

    def test_fastforest_evaluates_fewer_candidates(self, mortgage):
        ff = build_forest(mortgage, BuildConfig.fastforest(seed=5))
        rf = build_forest(mortgage, BuildConfig.random_forest(seed=5))
        assert len(ff.trees) == len(rf.trees) == 100
        assert ff.split_evaluations < rf.split_evaluations
        assert ff.counters.split_evaluations == ff.split_evaluations

    def test_single_record(self, mortgage):
        model = build_forest(mortgage.subset([0]), BuildConfig(num_trees=3))
        assert all(t.n_nodes == 1 for t in model.trees)
        assert predict(model, mortgage.values[4]) == mortgage.y[0]

    def test_missing_class_rejected(self):
        ds = make_dataset(np.zeros((3, 1)), [0, 1, 0])
        vals = ds.values.copy()
        vals[1, 1] = np.nan
        bad = type(ds)(ds.attributes, ds.class_index, vals)
        with pytest.raises(ValueError, match="missing class"):
            build_forest(bad, BuildConfig(num_trees=2))

    def test_progress_callback(self, mortgage):
        seen = []
        build_forest(mortgage, BuildConfig(num_trees=4), progress=seen.append)
        assert sorted(seen) == [0, 1, 2, 3]


class TestVoting:
    def test_majority_and_ties(self):
        np.testing.assert_array_equal(vote(np.array([[0], [1], [0]]), 2), [0])
        np.testing.assert_array_equal(vote(np.array([[1], [0]]), 2), [0])
        np.testing.assert_array_equal(vote(np.array([[2, 1], [2, 1]]), 3), [2, 1])

    def test_recount(self, segment):
        model = build_forest(segment, BuildConfig.fastforest(num_trees=15, seed=3))
        rows = segment.values[np.random.default_rng(0).choice(segment.n, 60, replace=False)]
        votes = tree_votes(model, rows)
        got = predict_batch(model, rows)
        for j in range(rows.shape[0]):
            tally = np.bincount([predict_rows(t, rows[j])[0] for t in model.trees], minlength=7)
            assert got[j] == int(np.argmax(tally))
            np.testing.assert_array_equal(votes[:, j], [predict_rows(t, rows[j])[0] for t in model.trees])

    def test_schema_checks(self, mortgage, tictactoe):
        model = build_forest(mortgage, BuildConfig(num_trees=2))
        with pytest.raises(ValueError, match="schema"):
            predict_batch(model, mortgage.values, tictactoe)
        with pytest.raises(ValueError, match="cells"):
            predict(model, [1.0, 2.0])


def test_model_save_load(tmp_path, tictactoe):
    model = build_forest(tictactoe, BuildConfig.random_forest(num_trees=5, seed=8))
    path = tmp_path / "m.json"
    model.save(path)
    back = ForestModel.load(path)
    assert back.to_json() == model.to_json()
    np.testing.assert_array_equal(predict_batch(back, tictactoe.values, tictactoe), predict_batch(model, tictactoe.values))
    with pytest.raises(ValueError, match="schema"):
        ForestModel.from_dict({"schema": "nope"})
