import zlib

import numpy as np
import pytest

from nicecf.distance import heom
from nicecf.errors import ConfigError, NoUnlikeNeighborError
from nicecf.explainers import (
    Explanation,
    RewardKind,
    SearchContext,
    explain_cbr,
    explain_nice,
    explain_sedc,
    explain_wit,
    explanation_to_dict,
    reward,
)
from nicecf.model import train_logistic
from nicecf.synthetic import make_dataset
from nicecf.tabular import Dataset, FeatureKind, FeatureSpec, fit_stats

OPTIMIZED = (RewardKind.SPARSITY, RewardKind.PROXIMITY, RewardKind.PLAUSIBILITY)


def cat_schema(n):
    return [FeatureSpec(f"f{j}", FeatureKind.CATEGORICAL) for j in range(n)]


def num_schema(n):
    return [FeatureSpec(f"f{j}", FeatureKind.NUMERICAL) for j in range(n)]


class TestReward:
    def make_ctx(self, scripted_model_cls, schema, rows, table, scorer=None):
        train = Dataset(schema, rows)
        stats = fit_stats(train)
        return SearchContext(train, stats, scripted_model_cls(table), scorer=scorer)

    def test_sparsity_value(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.8, ("b",): 0.55},
        )
        # signed scores 0.6 and 0.1, so the drop is 0.5
        assert reward(RewardKind.SPARSITY, ("a",), ("b",), ctx, 1) == pytest.approx(0.5)

    def test_proximity_value(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, num_schema(1), [(0.0,), (4.0,)],
            {(0.0,): 0.8, (1.0,): 0.55},
        )
        # same 0.5 drop over a distance step of 1/4
        assert reward(RewardKind.PROXIMITY, (0.0,), (1.0,), ctx, 1) == pytest.approx(2.0)

    def test_proximity_zero_range_costs_full_step(self, scripted_model_cls):
        # zero training range degenerates to overlap distance 1, not epsilon
        ctx = self.make_ctx(
            scripted_model_cls, num_schema(1), [(1.0,), (1.0,)],
            {(1.0,): 0.8, (2.0,): 0.55},
        )
        assert reward(RewardKind.PROXIMITY, (1.0,), (2.0,), ctx, 1) == pytest.approx(0.5)

    def test_proximity_epsilon_guards_underflowed_step(self, scripted_model_cls):
        # 1e-320 / 1e10 underflows to exactly 0, so the guard divides by 1e-9
        ctx = self.make_ctx(
            scripted_model_cls, num_schema(1), [(0.0,), (1e10,)],
            {(0.0,): 0.8, (1e-320,): 0.55},
        )
        r = reward(RewardKind.PROXIMITY, (0.0,), (1e-320,), ctx, 1)
        assert r == pytest.approx(0.5 / 1e-9, rel=1e-12)

    def test_plausibility_value(self, scripted_model_cls):
        errors = {("a",): 0.03, ("b",): 0.01}
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.8, ("b",): 0.55},
            scorer=lambda x: errors[tuple(x)],
        )
        assert reward(
            RewardKind.PLAUSIBILITY, ("a",), ("b",), ctx, 1
        ) == pytest.approx(0.01)

    def test_sign_convention_for_class_zero(self, scripted_model_cls):
        # Source predicted class 0: an increase of the signed score is good.
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.2, ("b",): 0.45},
        )
        assert reward(RewardKind.SPARSITY, ("a",), ("b",), ctx, -1) == pytest.approx(0.5)

    def test_requires_exactly_one_differing_feature(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(2), [("a", "a"), ("b", "b")],
            {}, scorer=None,
        )
        with pytest.raises(ConfigError):
            reward(RewardKind.SPARSITY, ("a", "a"), ("b", "b"), ctx, 1)
        with pytest.raises(ConfigError):
            reward(RewardKind.SPARSITY, ("a", "a"), ("a", "a"), ctx, 1)

    def test_plausibility_needs_scorer(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.8, ("b",): 0.55},
        )
        with pytest.raises(ConfigError):
            reward(RewardKind.PLAUSIBILITY, ("a",), ("b",), ctx, 1)

    def test_kind_none_rejected(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.8, ("b",): 0.55},
        )
        with pytest.raises(ConfigError):
            reward(RewardKind.NONE, ("a",), ("b",), ctx, 1)

    def test_bad_y_hat(self, scripted_model_cls):
        ctx = self.make_ctx(
            scripted_model_cls, cat_schema(1), [("a",), ("b",)],
            {("a",): 0.8, ("b",): 0.55},
        )
        with pytest.raises(ConfigError):
            reward(RewardKind.SPARSITY, ("a",), ("b",), ctx, 0)


class TestSearchWalkthrough:
    """Scripted 6-feature search: two iterations, second one flips."""

    X0 = ("a", "a", "a", "a", "a", "a")
    XNN = ("a", "b", "b", "a", "b", "a")  # differs at features 1, 2, 4

    def make_ctx(self, scripted_model_cls):
        other = ("a", "a", "a", "a", "a", "b")
        train = Dataset(cat_schema(6), [self.XNN, other], labels=[0, 1])
        stats = fit_stats(train)
        table = {
            self.X0: 0.9,
            self.XNN: 0.2,
            other: 0.95,
            # iteration 1 candidates (copy one of features 1, 2, 4)
            ("a", "b", "a", "a", "a", "a"): 0.85,
            ("a", "a", "b", "a", "a", "a"): 0.8,
            ("a", "a", "a", "a", "b", "a"): 0.6,
            # iteration 2 candidates (feature 4 already copied)
            ("a", "b", "a", "a", "b", "a"): 0.55,
            ("a", "a", "b", "a", "b", "a"): 0.3,
        }
        return SearchContext(train, stats, scripted_model_cls(table))

    def test_two_iteration_walk(self, scripted_model_cls):
        ctx = self.make_ctx(scripted_model_cls)
        expl = explain_nice(self.X0, RewardKind.SPARSITY, ctx)
        assert expl.valid
        # iteration 1 picks the third candidate (feature 4) without flipping,
        # iteration 2 picks feature 2 and flips
        assert [s.feature for s in expl.trace] == [4, 2]
        assert expl.changed_features == {2, 4}
        assert expl.counterfactual == ("a", "a", "b", "a", "b", "a")
        assert expl.anchor == self.XNN
        assert expl.trace[0].score == pytest.approx(0.2)   # 2*0.6 - 1
        assert expl.trace[1].score == pytest.approx(-0.4)  # 2*0.3 - 1

    def test_proximity_same_walk_on_unit_steps(self, scripted_model_cls):
        # All categorical steps cost 1, so the proximity walk matches.
        ctx = self.make_ctx(scripted_model_cls)
        expl = explain_nice(self.X0, RewardKind.PROXIMITY, ctx)
        assert [s.feature for s in expl.trace] == [4, 2]

    def test_each_pick_matches_reward_recomputation(self, scripted_model_cls):
        ctx = self.make_ctx(scripted_model_cls)
        expl = explain_nice(self.X0, RewardKind.SPARSITY, ctx)
        state = list(self.X0)
        for step in expl.trace:
            remaining = [j for j in range(6) if state[j] != self.XNN[j]]
            rewards = {}
            for j in remaining:
                cand = list(state)
                cand[j] = self.XNN[j]
                rewards[j] = reward(RewardKind.SPARSITY, tuple(state), tuple(cand), ctx, 1)
            best = max(rewards.values())
            winners = [j for j in remaining if rewards[j] == best]
            assert step.feature == min(winners)
            assert step.reward == rewards[step.feature]
            state[step.feature] = self.XNN[step.feature]
        assert tuple(state) == expl.counterfactual


class TestNiceGeneral:
    def test_kind_none_returns_anchor(self, scripted_model_cls):
        train = Dataset(cat_schema(2), [("b", "b"), ("a", "b")], labels=[0, 1])
        stats = fit_stats(train)
        model = scripted_model_cls({("a", "a"): 0.9, ("b", "b"): 0.1, ("a", "b"): 0.8})
        ctx = SearchContext(train, stats, model)
        expl = explain_nice(("a", "a"), RewardKind.NONE, ctx)
        assert expl.valid
        assert expl.counterfactual == ("b", "b")
        assert expl.trace == ()
        assert expl.anchor_index == 0

    def test_single_difference_resolves_in_one_iteration(self, scripted_model_cls):
        train = Dataset(cat_schema(2), [("a", "b"), ("a", "a")], labels=[0, 1])
        stats = fit_stats(train)
        model = scripted_model_cls({("a", "a"): 0.9, ("a", "b"): 0.2})
        for kind in (RewardKind.NONE, RewardKind.SPARSITY, RewardKind.PROXIMITY,
                     RewardKind.PLAUSIBILITY):
            ctx = SearchContext(train, stats, model, scorer=lambda x: 1.0)
            expl = explain_nice(("a", "a"), kind, ctx)
            assert expl.valid
            assert expl.counterfactual == ("a", "b")
            assert expl.sparsity == 1
            if kind is not RewardKind.NONE:
                assert len(expl.trace) == 1

    def test_no_unlike_neighbor_propagates(self, scripted_model_cls):
        train = Dataset(cat_schema(1), [("a",), ("b",)], labels=[1, 1])
        stats = fit_stats(train)
        model = scripted_model_cls({}, default=0.9)
        ctx = SearchContext(train, stats, model)
        with pytest.raises(NoUnlikeNeighborError):
            explain_nice(("a",), RewardKind.SPARSITY, ctx)

    def test_plausibility_without_scorer_rejected(self, scripted_model_cls):
        train = Dataset(cat_schema(1), [("a",), ("b",)], labels=[0, 1])
        stats = fit_stats(train)
        ctx = SearchContext(train, stats, scripted_model_cls({}, default=0.9))
        with pytest.raises(ConfigError):
            explain_nice(("a",), RewardKind.PLAUSIBILITY, ctx)

    def test_scorer_substitutability(self, mixed_dataset):
        stats = fit_stats(mixed_dataset)
        model = train_logistic(stats, mixed_dataset)
        crc = lambda x: zlib.crc32(repr(tuple(x)).encode()) / 2**32
        for scorer in (lambda x: 1.0, crc):
            ctx = SearchContext(mixed_dataset, stats, model, scorer=scorer)
            for x0 in mixed_dataset.rows[:10]:
                expl = explain_nice(x0, RewardKind.PLAUSIBILITY, ctx)
                assert expl.valid


class TestNiceProperties:
    """Structural guarantees on real data with a trained model."""

    @pytest.fixture()
    def ctx(self, mixed_dataset):
        stats = fit_stats(mixed_dataset)
        model = train_logistic(stats, mixed_dataset)
        return SearchContext(mixed_dataset, stats, model, scorer=lambda x: 1.0)

    def test_validity_hybridity_and_trace_shape(self, ctx, mixed_dataset):
        for x0 in mixed_dataset.rows[:25]:
            c0 = ctx.model.predict(x0)
            for kind in RewardKind:
                expl = explain_nice(x0, kind, ctx)
                assert expl.valid
                assert ctx.model.predict(expl.counterfactual) != c0
                for j, value in enumerate(expl.counterfactual):
                    assert value == x0[j] or value == expl.anchor[j]
                assert expl.changed_features == frozenset(
                    j for j in range(len(x0)) if expl.counterfactual[j] != x0[j]
                )
                if kind is RewardKind.NONE:
                    assert expl.trace == ()
                else:
                    assert len(expl.trace) == len(expl.changed_features)

    def test_dominance_over_plain_anchor(self, ctx, mixed_dataset):
        for x0 in mixed_dataset.rows[:25]:
            none = explain_nice(x0, RewardKind.NONE, ctx)
            spars = explain_nice(x0, RewardKind.SPARSITY, ctx)
            prox = explain_nice(x0, RewardKind.PROXIMITY, ctx)
            assert spars.sparsity <= none.sparsity
            d_prox = heom(ctx.stats, x0, prox.counterfactual)
            d_none = heom(ctx.stats, x0, none.counterfactual)
            assert d_prox <= d_none


class TestWit:
    def test_ignores_correctness_filter(self, scripted_model_cls):
        train = Dataset(
            num_schema(1), [(2.0,), (9.0,), (0.5,)], labels=[1, 0, 1]
        )
        stats = fit_stats(train)
        model = scripted_model_cls({(1.0,): 0.9, (2.0,): 0.3, (9.0,): 0.2, (0.5,): 0.8})
        ctx = SearchContext(train, stats, model)
        wit = explain_wit((1.0,), ctx)
        assert wit.anchor_index == 0  # nearest opposite prediction, mislabeled
        nice = explain_nice((1.0,), RewardKind.NONE, ctx)
        assert nice.anchor_index == 1  # correctness filter skips row 0
        assert wit.valid
        assert wit.counterfactual == (2.0,)

    def test_std_normalization_changes_selection(self, scripted_model_cls):
        rows = [
            (0.0, 0.0), (100.0, 10.0), (40.0, 0.0), (40.0, 10.0),
            (40.0, 0.0), (40.0, 10.0), (100.0, 0.0), (40.0, 8.5),
        ]
        labels = [1, 1, 1, 1, 1, 1, 0, 0]
        train = Dataset(num_schema(2), rows, labels=labels)
        stats = fit_stats(train)
        table = {
            (0.0, 0.0): 0.9, (100.0, 10.0): 0.8, (40.0, 0.0): 0.7,
            (40.0, 10.0): 0.6, (100.0, 0.0): 0.2, (40.0, 8.5): 0.3,
        }
        ctx = SearchContext(train, stats, scripted_model_cls(table))
        x0 = (40.0, 0.0)
        # Per-std scaling favors the small f2 step; per-range favors f1.
        assert explain_wit(x0, ctx).anchor_index == 7
        assert explain_nice(x0, RewardKind.NONE, ctx).anchor_index == 6

    def test_no_opposite_prediction(self, scripted_model_cls):
        train = Dataset(num_schema(1), [(1.0,)], labels=[1])
        stats = fit_stats(train)
        ctx = SearchContext(train, stats, scripted_model_cls({}, default=0.9))
        with pytest.raises(NoUnlikeNeighborError):
            explain_wit((2.0,), ctx)


class TestSedc:
    def test_single_feature_from_mean_mode(self, scripted_model_cls):
        train = Dataset(
            [FeatureSpec("n", FeatureKind.NUMERICAL), FeatureSpec("c", FeatureKind.CATEGORICAL)],
            [(1.0, "x"), (3.0, "x"), (2.0, "y")],
            labels=[1, 1, 0],
        )
        stats = fit_stats(train)
        mean_mode = (2.0, "x")
        x0 = (5.0, "x")  # differs from mean/mode in the numeric feature only
        model = scripted_model_cls({x0: 0.9, mean_mode: 0.2})
        ctx = SearchContext(train, stats, model)
        expl = explain_sedc(x0, ctx)
        assert expl.valid
        assert expl.counterfactual == mean_mode
        assert expl.sparsity == 1
        assert [s.feature for s in expl.trace] == [0]

    def test_exhaustion_returns_invalid(self, scripted_model_cls):
        train = Dataset(cat_schema(2), [("a", "a"), ("b", "b")], labels=[1, 1])
        stats = fit_stats(train)
        ctx = SearchContext(train, stats, scripted_model_cls({}, default=0.9))
        x0 = ("b", "b")  # mode is ("a", "a")
        expl = explain_sedc(x0, ctx)
        assert not expl.valid
        assert expl.counterfactual == ("a", "a")  # everything replaced
        assert expl.changed_features == {0, 1}

    def test_max_iters_caps_search(self, scripted_model_cls):
        train = Dataset(cat_schema(2), [("a", "a"), ("b", "b")], labels=[1, 1])
        stats = fit_stats(train)
        ctx = SearchContext(train, stats, scripted_model_cls({}, default=0.9))
        expl = explain_sedc(("b", "b"), ctx, max_iters=1)
        assert not expl.valid
        assert len(expl.trace) == 1
        with pytest.raises(ConfigError):
            explain_sedc(("b", "b"), ctx, max_iters=0)

    def test_flip_guarantee_when_mean_mode_is_opposite(self, quantized_dataset):
        stats = fit_stats(quantized_dataset)
        model = train_logistic(stats, quantized_dataset)
        ctx = SearchContext(quantized_dataset, stats, model)
        target = ctx.model.predict(ctx.mean_mode_instance())
        for x0 in quantized_dataset.rows[:40]:
            if ctx.model.predict(x0) != target:
                expl = explain_sedc(x0, ctx)
                assert expl.valid


class TestCbr:
    def test_empty_case_base(self):
        # four continuous features: any two rows differ in all of them, so no
        # cross-class pair is within two feature changes
        data = make_dataset(60, 4, 0, seed=7)
        stats = fit_stats(data)
        model = train_logistic(stats, data)
        ctx = SearchContext(data, stats, model)
        assert ctx.case_base() == ()
        expl = explain_cbr(data.rows[0], ctx)
        assert not expl.valid
        assert expl.counterfactual == data.rows[0]

    def test_single_pair_copied(self, scripted_model_cls):
        a = ("x", "p")
        b = ("y", "p")
        train = Dataset(cat_schema(2), [a, b], labels=[1, 0])
        stats = fit_stats(train)
        model = scripted_model_cls({a: 0.9, b: 0.2})
        ctx = SearchContext(train, stats, model)
        assert ctx.case_base() == ((0, 1, (0,)),)
        expl = explain_cbr(a, ctx)
        assert expl.valid
        assert expl.counterfactual == b
        assert expl.sparsity == 1

    def test_sparsity_bound_on_fixture(self, quantized_dataset):
        stats = fit_stats(quantized_dataset)
        model = train_logistic(stats, quantized_dataset)
        ctx = SearchContext(quantized_dataset, stats, model)
        assert len(ctx.case_base()) > 0
        seen_valid = 0
        for x0 in quantized_dataset.rows[:50]:
            expl = explain_cbr(x0, ctx)
            if expl.valid:
                seen_valid += 1
                assert expl.sparsity <= 2
        assert seen_valid > 0

    def test_anchor_member_matches_source_class(self, scripted_model_cls):
        # x0 predicted 0: distance must be measured to the predicted-0 member.
        a = ("x", "p")   # predicted 1
        b = ("y", "p")   # predicted 0
        far = ("z", "q")  # predicted 0, part of a second, farther pair
        far_mate = ("w", "q")  # predicted 1
        train = Dataset(cat_schema(2), [a, b, far, far_mate], labels=[1, 0, 0, 1])
        stats = fit_stats(train)
        model = scripted_model_cls({a: 0.9, b: 0.2, far: 0.1, far_mate: 0.8,
                                    ("y", "q"): 0.3}, default=0.5)
        ctx = SearchContext(train, stats, model)
        x0 = b
        expl = explain_cbr(x0, ctx)
        # nearest predicted-0 member is b itself (distance 0) in pair (a, b)
        assert expl.counterfactual == a
        assert expl.valid


class TestSearchContext:
    def test_validation(self, mixed_dataset, scripted_model_cls):
        stats = fit_stats(mixed_dataset)
        model = scripted_model_cls({}, default=0.5)
        with pytest.raises(ConfigError):
            SearchContext(mixed_dataset, stats, model, epsilon=0.0)
        with pytest.raises(ConfigError):
            SearchContext(mixed_dataset, stats[:-1], model)

    def test_mean_mode_instance(self, tiny_dataset, tiny_stats, scripted_model_cls):
        ctx = SearchContext(tiny_dataset, tiny_stats, scripted_model_cls({}, default=0.5))
        assert ctx.mean_mode_instance() == (25.0, "red")

    def test_train_predictions_cached(self, tiny_dataset, tiny_stats, scripted_model_cls):
        ctx = SearchContext(tiny_dataset, tiny_stats, scripted_model_cls({}, default=0.4))
        preds = ctx.train_predictions()
        assert preds.tolist() == [0, 0, 0, 0]
        assert ctx.train_predictions() is preds


def test_explanation_to_dict(scripted_model_cls):
    train = Dataset(cat_schema(2), [("a", "b"), ("a", "a")], labels=[0, 1])
    stats = fit_stats(train)
    model = scripted_model_cls({("a", "a"): 0.9, ("a", "b"): 0.2})
    ctx = SearchContext(train, stats, model)
    expl = explain_nice(("a", "a"), RewardKind.SPARSITY, ctx)
    doc = explanation_to_dict(expl, ["first", "second"], metrics={"sparsity": 1})
    assert doc["explainer"] == "nice-spars"
    assert doc["valid"] is True
    assert doc["changes"] == [
        {"feature": "second", "index": 1, "old": "a", "new": "b"}
    ]
    assert doc["trace"][0]["feature"] == "second"
    assert doc["metrics"] == {"sparsity": 1}
    assert doc["anchor_index"] == 0
