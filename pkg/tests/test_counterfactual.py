import numpy as np
import pytest

from cfxeval import (
    FULL_RETRAIN,
    WARM_START,
    CounterfactualContext,
    DataError,
    Explanation,
    FactorModel,
    TrainConfig,
    build_context,
    cf_finetune,
    cf_qualitative,
    cf_retrain,
    cf_score,
    predict,
    rank,
    remove_interactions,
    score_context,
    train,
    validate_explanation,
)

from conftest import make_random_dataset


def dummy_model(item_ids):
    config = TrainConfig(embedding_dim=1, iterations=1, seed=0)
    return FactorModel((1,), tuple(sorted(item_ids)),
                       np.zeros((1, 1)), np.zeros((len(item_ids), 1)), config)


def hand_context(norm_scores, base=None):
    items = frozenset(norm_scores)
    return CounterfactualContext(
        base_candidates=frozenset(base) if base is not None else items,
        cf_candidates=items,
        cf_model=dummy_model(items),
        normalized_scores=dict(norm_scores),
    )


def brute_force_cf(dataset, cf_model, expl):
    """Independent oracle: materialize the whole counterfactual ranking
    list via predict(), min-max normalize, and subtract."""
    interacted = {row.item for row in dataset.interactions if row.user == expl.user}
    candidates = sorted((set(dataset.items) - interacted) | set(expl.items))
    raw = [predict(cf_model, expl.user, j) for j in candidates]
    lo, hi = min(raw), max(raw)
    if hi == lo:
        norm = [0.5] * len(raw)
    else:
        norm = [(s - lo) / (hi - lo) for s in raw]
    ranking = sorted(zip(candidates, norm), key=lambda jn: (-jn[1], jn[0]))
    i = expl.recommended_item
    benchmark = next(j for j, _ in ranking if j != i)
    score_i = norm[candidates.index(i)]
    score_b = norm[candidates.index(benchmark)]
    displaced = ranking[0][0] != i
    return score_b - score_i, displaced, benchmark


class TestRetrain:
    def test_empty_removal_reproduces_base(self, medium_dataset):
        config = TrainConfig(embedding_dim=4, iterations=5, seed=7)
        base = train(medium_dataset, config)
        user = medium_dataset.users[0]
        rec = next(i for i in medium_dataset.items
                   if i not in medium_dataset.user_items(user))
        expl = Explanation(user, rec, frozenset())
        model = cf_retrain(medium_dataset, config, expl)
        np.testing.assert_allclose(model.user_factors, base.user_factors, atol=1e-12)
        np.testing.assert_allclose(model.item_factors, base.item_factors, atol=1e-12)

    def test_equals_training_on_reduced_dataset(self, toy_dataset):
        config = TrainConfig(embedding_dim=2, iterations=6, seed=3)
        expl = Explanation(1, 40, frozenset({20}))
        via_cf = cf_retrain(toy_dataset, config, expl)
        reduced = remove_interactions(toy_dataset, 1, {20})
        direct = train(reduced, config)
        assert np.array_equal(via_cf.user_factors, direct.user_factors)
        assert np.array_equal(via_cf.item_factors, direct.item_factors)

    def test_removing_only_interactions_with_large_reg(self, toy_dataset):
        config = TrainConfig(embedding_dim=2, iterations=4,
                             regularization=1e9, seed=1)
        expl = Explanation(2, 20, frozenset({10, 40}))
        model = cf_retrain(toy_dataset, config, expl)
        assert np.linalg.norm(model.user_factor(2)) < 1e-6


class TestFinetune:
    def test_one_vs_five_iterations_identical(self, medium_dataset):
        config = TrainConfig(embedding_dim=4, iterations=5, seed=2)
        base = train(medium_dataset, config)
        user = medium_dataset.users[3]
        hist = sorted(medium_dataset.user_items(user))
        rec = next(i for i in medium_dataset.items
                   if i not in medium_dataset.user_items(user))
        expl = Explanation(user, rec, frozenset(hist[:1]))
        m1 = cf_finetune(base, medium_dataset, expl, iterations=1)
        m5 = cf_finetune(base, medium_dataset, expl, iterations=5)
        np.testing.assert_allclose(m1.user_factors, m5.user_factors, atol=1e-12)

    def test_item_factors_and_other_users_untouched(self, medium_dataset):
        config = TrainConfig(embedding_dim=4, iterations=5, seed=2)
        base = train(medium_dataset, config)
        user = medium_dataset.users[3]
        hist = sorted(medium_dataset.user_items(user))
        rec = next(i for i in medium_dataset.items
                   if i not in medium_dataset.user_items(user))
        expl = Explanation(user, rec, frozenset(hist[:1]))
        model = cf_finetune(base, medium_dataset, expl)
        assert model.item_factors is base.item_factors or \
            np.array_equal(model.item_factors, base.item_factors)
        uix = base.user_index(user)
        mask = np.ones(len(base.user_ids), dtype=bool)
        mask[uix] = False
        assert np.array_equal(model.user_factors[mask], base.user_factors[mask])

    def test_scalar_ridge_formula(self):
        # d=1, one remaining interaction (r, q): p = r q / (q^2 + reg)
        from cfxeval import Interaction, InteractionDataset
        ds = InteractionDataset(
            (1,), (10, 11), (Interaction(1, 10, 3.0, 0), Interaction(1, 11, 2.0, 0)),
            {10: frozenset(), 11: frozenset()})
        config = TrainConfig(embedding_dim=1, iterations=2,
                             regularization=0.5, seed=0)
        base = train(ds, config)
        expl = Explanation(1, 0, frozenset({11}))  # remove item 11's rating
        # recommended item irrelevant to the finetune itself
        model = cf_finetune(base, ds, expl)
        q = base.item_factor(10)[0]
        expected = 3.0 * q / (q * q + 0.5)
        np.testing.assert_allclose(model.user_factor(1)[0], expected, atol=1e-12)

    def test_no_remaining_interactions_gives_zero_vector(self, toy_dataset):
        config = TrainConfig(embedding_dim=2, iterations=3, seed=0)
        base = train(toy_dataset, config)
        expl = Explanation(2, 20, frozenset({10, 40}))
        model = cf_finetune(base, toy_dataset, expl)
        assert np.array_equal(model.user_factor(2), np.zeros(2))

    def test_unknown_user_errors(self, toy_dataset):
        config = TrainConfig(embedding_dim=2, iterations=2, seed=0)
        base = train(toy_dataset, config)
        with pytest.raises(DataError):
            cf_finetune(base, toy_dataset, Explanation(99, 20, frozenset()))


class TestScoreFromContext:
    def test_displaced_hand_numbers(self):
        ctx = hand_context({1: 0.3, 2: 1.0, 3: 0.1, 4: 0.0})
        expl = Explanation(7, 1, frozenset())
        res = score_context(ctx, expl, FULL_RETRAIN)
        assert res.score == pytest.approx(0.7)
        assert res.qualitative is True
        assert res.benchmark_item == 2

    def test_retained_hand_numbers(self):
        ctx = hand_context({1: 1.0, 2: 0.8, 3: 0.0})
        expl = Explanation(7, 1, frozenset())
        res = score_context(ctx, expl, FULL_RETRAIN)
        assert res.score == pytest.approx(-0.2)
        assert res.qualitative is False
        assert res.benchmark_item == 2

    def test_degenerate_all_equal(self):
        ctx = hand_context({1: 0.5, 2: 0.5, 3: 0.5})
        res = score_context(ctx, Explanation(7, 2, frozenset()), FULL_RETRAIN)
        assert res.score == 0.0
        assert res.qualitative is False

    def test_benchmark_never_recommended_item(self):
        ctx = hand_context({1: 1.0, 2: 0.2})
        res = score_context(ctx, Explanation(7, 1, frozenset()), FULL_RETRAIN)
        assert res.benchmark_item != 1


class TestQualitative:
    def test_strict_argmax_retained(self):
        ctx = hand_context({1: 1.0, 2: 0.5})
        assert cf_qualitative(ctx, 1) is False

    def test_strictly_second(self):
        ctx = hand_context({1: 0.5, 2: 1.0})
        assert cf_qualitative(ctx, 1) is True

    def test_exact_tie_lower_id_wins_argmax(self):
        ctx = hand_context({1: 0.8, 2: 0.8, 3: 0.1})
        assert cf_qualitative(ctx, 2) is True   # 1 wins the tie
        assert cf_qualitative(ctx, 1) is False

    def test_membership_checked(self):
        ctx = hand_context({1: 0.8})
        with pytest.raises(DataError):
            cf_qualitative(ctx, 99)


@pytest.fixture(scope="module")
def setup():
    ds = make_random_dataset(12, 20, 120, seed=21)
    config = TrainConfig(embedding_dim=4, iterations=8, seed=21)
    base = train(ds, config)
    return ds, config, base


class TestCfScoreEndToEnd:
    def _pick(self, ds, base, user, n_items=2):
        hist = sorted(ds.user_items(user))
        candidates = set(ds.items) - ds.user_items(user)
        rec = rank(base, user, candidates)[0][0]
        return Explanation(user, rec, frozenset(hist[:n_items]))

    def test_empty_explanation_score_nonpositive(self, setup):
        ds, config, base = setup
        expl = self._pick(ds, base, ds.users[0], n_items=0)
        res = cf_score(ds, config, base, expl, FULL_RETRAIN)
        assert res.score <= 0.0
        assert res.qualitative is False

    def test_matches_brute_force_oracle(self, setup):
        ds, config, base = setup
        for user in ds.users[:6]:
            expl = self._pick(ds, base, user)
            cf_model = cf_retrain(ds, config, expl)
            res = cf_score(ds, config, base, expl, FULL_RETRAIN)
            score, displaced, benchmark = brute_force_cf(ds, cf_model, expl)
            assert res.score == score
            assert res.benchmark_item == benchmark
            assert res.qualitative == displaced

    def test_sign_semantics_randomized(self, setup):
        ds, config, base = setup
        rng = np.random.default_rng(0)
        for _ in range(30):
            user = int(rng.choice(ds.users))
            hist = sorted(ds.user_items(user))
            k = int(rng.integers(1, min(3, len(hist)) + 1))
            picks = rng.choice(len(hist), size=k, replace=False)
            candidates = set(ds.items) - ds.user_items(user)
            rec = rank(base, user, candidates)[0][0]
            expl = Explanation(user, rec, frozenset(hist[p] for p in picks))
            res = cf_score(ds, config, base, expl, FULL_RETRAIN)
            assert -1.0 <= res.score <= 1.0
            assert (res.score > 0) == res.qualitative

    def test_strategies_agree_for_empty_explanation(self):
        # converged base model: the warm-start solve lands on the same factor
        ds = make_random_dataset(6, 10, 30, seed=5)
        config = TrainConfig(embedding_dim=2, iterations=500,
                             regularization=0.1, seed=5)
        base = train(ds, config)
        user = ds.users[0]
        rec = rank(base, user, set(ds.items) - ds.user_items(user))[0][0]
        expl = Explanation(user, rec, frozenset())
        full = cf_score(ds, config, base, expl, FULL_RETRAIN)
        warm = cf_score(ds, config, base, expl, WARM_START)
        assert abs(full.score - warm.score) < 1e-9

    def test_verify_recommendation_rejects_wrong_item(self, setup):
        ds, config, base = setup
        user = ds.users[0]
        candidates = sorted(set(ds.items) - ds.user_items(user))
        ranked = [i for i, _ in rank(base, user, candidates)]
        wrong = ranked[-1]
        expl = Explanation(user, wrong, frozenset())
        with pytest.raises(DataError):
            cf_score(ds, config, base, expl, FULL_RETRAIN)

    def test_unknown_strategy_rejected(self, setup):
        ds, config, base = setup
        expl = self._pick(ds, base, ds.users[1])
        with pytest.raises(DataError):
            cf_score(ds, config, base, expl, "sgd")


class TestValidation:
    def test_items_must_be_interacted(self, toy_dataset):
        with pytest.raises(DataError):
            validate_explanation(toy_dataset, Explanation(1, 40, frozenset({40})))

    def test_recommended_must_be_uninteracted(self, toy_dataset):
        with pytest.raises(DataError):
            validate_explanation(toy_dataset, Explanation(1, 10, frozenset({20})))

    def test_context_scores_must_cover_candidates(self):
        with pytest.raises(DataError):
            CounterfactualContext(frozenset({1}), frozenset({1, 2}),
                                  dummy_model({1, 2}), {1: 0.5})

    def test_score_out_of_range_rejected(self):
        from cfxeval import CfResult
        with pytest.raises(DataError):
            CfResult(1.5, True, 2, FULL_RETRAIN)


class TestBuildContext:
    def test_candidate_sets(self, toy_dataset):
        config = TrainConfig(embedding_dim=2, iterations=2, seed=0)
        model = train(toy_dataset, config)
        expl = Explanation(1, 40, frozenset({20}))
        ctx = build_context(toy_dataset, model, expl)
        assert ctx.base_candidates == frozenset({40})
        assert ctx.cf_candidates == frozenset({20, 40})
        assert set(ctx.normalized_scores) == {20, 40}
