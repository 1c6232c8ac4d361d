import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.tree import DecisionTreeRegressor

from scootflow.errors import DomainError, NotFittedError, SingularMatrixError, TrainingDivergedError
from scootflow.regress import (
    EvalReport,
    FeatureMatrix,
    ForestModel,
    ForestParams,
    NnConfig,
    compare_models,
    deviance,
    estimate_alpha,
    evaluate,
    feature_importance,
    fit_nbr,
    fit_nn,
    fit_poisson_irls,
    fit_rfr,
    fit_tree,
    grid_search,
    load_model,
    pearson,
    rank_models,
    read_matrix_csv,
    save_model,
    standardize,
    train_test_split,
    write_matrix_csv,
)
from scootflow.regress.nn import forward, init_params
from scootflow.regress.search import expand_grid
from scootflow.regress.serialize import dumps


def matrix(X, y, names=None):
    X = np.asarray(X, dtype=float).reshape(len(y), -1)
    return FeatureMatrix(names or tuple(f"x{j}" for j in range(X.shape[1])), X, y)


def random_matrix(seed, n=80, p=3):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    return matrix(X, X @ rng.normal(size=p) + rng.normal(size=n))


# --- matrix, split, standardize -----------------------------------------------------


def test_split_sizes_and_determinism():
    m = random_matrix(0, n=10)
    a, b = train_test_split(m, 0.7, seed=3)
    assert (a.n, b.n) == (7, 3)
    a2, _ = train_test_split(m, 0.7, seed=3)
    assert a.row_ids == a2.row_ids


@settings(max_examples=30, deadline=None)
@given(st.integers(10, 200), st.integers(0, 10_000))
def test_split_is_disjoint_and_exhaustive(n, seed):
    m = random_matrix(1, n=n)
    a, b = train_test_split(m, 0.7, seed)
    assert a.n == int(math.floor(0.7 * n + 0.5))
    assert sorted(a.row_ids + b.row_ids, key=int) == list(m.row_ids)


def test_split_too_small():
    with pytest.raises(DomainError):
        train_test_split(random_matrix(0, n=9))


def test_standardize_state_and_round_trip():
    m = random_matrix(2, n=60)
    tr, te = train_test_split(m, 0.7, 0)
    zt, ze, state = standardize(tr, te)
    np.testing.assert_allclose(zt.X.mean(axis=0), 0, atol=1e-12)
    np.testing.assert_allclose(zt.X.std(axis=0), 1, atol=1e-12)
    np.testing.assert_allclose(state.inverse(ze.X), te.X, atol=1e-12)
    np.testing.assert_allclose(state.inverse_target(ze.y), te.y, atol=1e-12)


def test_standardize_drops_constant_column(caplog):
    rng = np.random.default_rng(0)
    X = np.column_stack([rng.normal(size=30), np.full(30, 4.0)])
    tr, te = train_test_split(matrix(X, rng.normal(size=30), ("a", "const")), 0.7, 0)
    zt, ze, _ = standardize(tr, te)
    assert zt.column_names == ("a",) and "const" in caplog.text


def test_standardize_all_constant():
    m = matrix(np.ones((20, 2)), np.arange(20.0))
    tr, te = train_test_split(m)
    with pytest.raises(DomainError):
        standardize(tr, te)


def test_nan_rejected():
    with pytest.raises(DomainError):
        matrix([[1.0], [math.nan]], [1.0, 2.0])


def test_matrix_csv_round_trip(tmp_path):
    m = random_matrix(4, n=15)
    path = tmp_path / "m.csv"
    write_matrix_csv(path, m, "prov", "zone_id", "trip_density")
    assert path.read_text().startswith("# prov\nzone_id,")
    back = read_matrix_csv(path, "zone_id", "trip_density")
    np.testing.assert_array_equal(back.X, m.X)
    np.testing.assert_array_equal(back.y, m.y)
    assert back.row_ids == m.row_ids


# --- GLM ----------------------------------------------------------------------------


def test_poisson_intercept_only_is_log_mean():
    y = np.array([0, 1, 2, 3, 4, 2, 1, 3], dtype=float)
    model = fit_poisson_irls(FeatureMatrix((), np.empty((8, 0)), y))
    assert model.coef[0] == pytest.approx(math.log(y.mean()), abs=1e-10)


def test_poisson_recovery_and_monotone_deviance():
    rng = np.random.default_rng(7)
    x = rng.normal(size=5000)
    y = rng.poisson(np.exp(1.0 + 0.5 * x))
    model = fit_poisson_irls(matrix(x, y))
    np.testing.assert_allclose(model.coef, [1.0, 0.5], atol=0.05)
    assert np.all(np.diff(model.fit_trace) <= 0)
    assert model.converged


def test_alpha_near_zero_for_poisson_data():
    rng = np.random.default_rng(8)
    x = rng.normal(size=5000)
    y = rng.poisson(np.exp(1.0 + 0.5 * x))
    m = matrix(x, y)
    alpha = estimate_alpha(m.y, fit_poisson_irls(m).predict(m))
    assert abs(alpha) < 0.05


def test_alpha_clamped_at_zero():
    # underdispersed: every y equals its mean
    assert estimate_alpha(np.full(50, 3.0), np.full(50, 3.0)) == 0.0


def test_alpha_degenerate_mu():
    with pytest.raises(DomainError):
        estimate_alpha([1.0, 2.0], [0.0, 1.0])


def test_nbr_alpha_zero_reduces_to_poisson():
    rng = np.random.default_rng(9)
    X = rng.normal(size=(500, 2))
    y = rng.poisson(np.exp(0.3 + X @ [0.4, -0.2]))
    m = matrix(X, y)
    np.testing.assert_allclose(fit_nbr(m, alpha=0.0).coef, fit_poisson_irls(m).coef, atol=1e-6)


def test_nbr_test_deviance_finite():
    rng = np.random.default_rng(10)
    X = rng.normal(size=(400, 2))
    mu = np.exp(1.0 + X @ [0.5, -0.3])
    y = rng.poisson(rng.gamma(2.0, mu / 2.0))
    tr, te = train_test_split(matrix(X, y), 0.7, 0)
    model = fit_nbr(tr)
    assert math.isfinite(deviance(te.y, model.predict(te), model.alpha))


def test_collinear_columns_named():
    rng = np.random.default_rng(11)
    a = rng.normal(size=50)
    X = np.column_stack([a, rng.normal(size=50), 2 * a])
    with pytest.raises(SingularMatrixError) as exc:
        fit_poisson_irls(matrix(X, rng.poisson(2.0, 50), ("a", "b", "twice_a")))
    assert "twice_a" in exc.value.columns


def test_negative_and_all_zero_targets_rejected():
    with pytest.raises(DomainError):
        fit_poisson_irls(matrix([1.0, 2.0, 3.0], [1.0, -1.0, 0.0]))
    with pytest.raises(DomainError, match="all zero"):
        fit_poisson_irls(matrix([1.0, 2.0, 3.0], [0.0, 0.0, 0.0]))


# --- trees and forests -----------------------------------------------------------------


def test_constant_target_predicts_constant():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(50, 3))
    forest = fit_rfr(matrix(X, np.full(50, 4.25)), seed=1)
    assert np.all(forest.predict(rng.normal(size=(20, 3))) == 4.25)


def test_step_function_threshold_interval():
    x = np.linspace(-1, 1, 200)
    y = np.where(x < 0, 0.0, 10.0)
    tree = fit_tree(x[:, None], y, min_samples_leaf=1, min_samples_split=2)
    below, above = x[x < 0].max(), x[x >= 0].min()
    assert below < tree.threshold[0] <= above
    assert tree.node_count == 3


def test_forest_is_bit_identical_for_same_seed_and_any_jobs():
    m = random_matrix(5, n=120, p=4)
    a = fit_rfr(m, seed=3)
    b = fit_rfr(m, seed=3, n_jobs=4)
    assert dumps(a) == dumps(b)
    assert dumps(a) != dumps(fit_rfr(m, seed=4))


def test_forest_too_few_rows():
    with pytest.raises(DomainError):
        fit_rfr(random_matrix(0, n=10), ForestParams())


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10_000), st.integers(1, 20), st.integers(2, 30))
def test_tree_structure_respects_leaf_and_split_limits(seed, min_leaf, min_split):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(150, 3))
    y = X[:, 0] + rng.normal(size=150)
    t = fit_tree(X, y, min_leaf, min_split)
    leaf = t.feature < 0
    assert np.all(t.n_samples[leaf] >= min_leaf)
    assert np.all(t.n_samples[~leaf] >= min_split)
    assert np.all(t.n_samples[~leaf] == t.n_samples[t.left[~leaf]] + t.n_samples[t.right[~leaf]])


@pytest.mark.parametrize("seed", range(5))
def test_tree_matches_sklearn(seed):
    """Same CART rule as scikit-learn's exact splitter with all features."""
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(200, 4)).round(2)
    y = X[:, 0] ** 2 - X[:, 1] + rng.normal(size=200)
    ours = fit_tree(X, y, min_samples_leaf=17, min_samples_split=10)
    ref = DecisionTreeRegressor(min_samples_leaf=17, min_samples_split=10, random_state=0).fit(X, y)
    Q = rng.normal(size=(300, 4))
    np.testing.assert_allclose(ours.predict(Q), ref.predict(Q), atol=1e-12)
    assert ours.node_count == ref.tree_.node_count
    imp = ours.raw_importances(4)
    np.testing.assert_allclose(imp / imp.sum(), ref.feature_importances_, atol=1e-12)


def test_single_feature_importance_is_one():
    rng = np.random.default_rng(0)
    x = rng.normal(size=100)
    m = matrix(x, 3 * x + rng.normal(size=100))
    e = feature_importance(fit_rfr(m, seed=0), m)
    assert e[0].score == pytest.approx(1.0, abs=1e-12) and e[0].pearson_r > 0.9


@settings(max_examples=10, deadline=None)
@given(st.integers(0, 1000), st.permutations(range(4)))
def test_importance_permutes_with_columns(seed, perm):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(100, 4))
    y = 2 * X[:, 0] - X[:, 2] + rng.normal(size=100)
    base = fit_rfr(matrix(X, y), ForestParams(n_estimators=4, bootstrap=False), seed=0).importances()
    perm = list(perm)
    moved = fit_rfr(matrix(X[:, perm], y), ForestParams(n_estimators=4, bootstrap=False), seed=0).importances()
    assert np.all(base >= 0) and base.sum() == pytest.approx(1.0, abs=1e-9)
    np.testing.assert_allclose(moved, base[perm], atol=1e-12)


def test_unfitted_forest_importance():
    with pytest.raises(NotFittedError):
        ForestModel(("a",), (), ForestParams(), 0).importances()


# --- NN ---------------------------------------------------------------------------


def test_zero_epochs_leaves_init_unchanged():
    m = random_matrix(0, n=40, p=3)
    cfg = NnConfig(epochs=0, seed=5)
    model = fit_nn(m, cfg)
    init = init_params((3, 16, 8, 1), np.random.default_rng(5))
    for (W, b), (W0, b0) in zip(model.params, init):
        np.testing.assert_array_equal(W, W0)
        np.testing.assert_array_equal(b, b0)


def test_nn_two_hidden_layers_only():
    with pytest.raises(DomainError):
        NnConfig(hidden=(8,))


def test_nn_fits_linear_target_with_grid_selected_epochs():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(400, 3))
    m = matrix(X, X @ np.array([0.8, -0.5, 0.3]))

    def fit(mm, **kw):
        return fit_nn(mm, NnConfig(seed=0, **kw))

    res = grid_search(fit, {"batch_size": [16, 64], "epochs": [5, 1000]}, m, seed=0)
    assert res.best["epochs"] == 1000
    model = fit(m, **res.best)
    assert np.mean((model.predict(m) - m.y) ** 2) < 1e-3


def test_nn_deterministic():
    m = random_matrix(3, n=50)
    a = fit_nn(m, NnConfig(epochs=5, seed=2))
    b = fit_nn(m, NnConfig(epochs=5, seed=2))
    assert dumps(a) == dumps(b)


def test_nn_divergence_suggests_smaller_rate():
    rng = np.random.default_rng(1)
    X = rng.normal(size=(400, 3))
    m = matrix(X, X @ np.array([0.8, -0.5, 0.3]))
    with pytest.raises(TrainingDivergedError, match="smaller learning rate"):
        fit_nn(m, NnConfig(epochs=50, learning_rate=5.0))


# --- grid search ---------------------------------------------------------------------


def test_grid_expansion_order():
    pts = expand_grid({"a": [1, 2], "b": ["x", "y"]})
    assert pts == [{"a": 1, "b": "x"}, {"a": 1, "b": "y"}, {"a": 2, "b": "x"}, {"a": 2, "b": "y"}]


def test_singleton_and_empty_grid():
    m = random_matrix(0, n=30)
    res = grid_search(lambda mm, **kw: fit_nn(mm, NnConfig(**kw)), {"epochs": [1]}, m)
    assert res.best == {"epochs": 1}
    with pytest.raises(DomainError):
        grid_search(lambda mm, **kw: None, [], m)


def test_grid_never_sees_rows_outside_train():
    m = random_matrix(0, n=100)
    train, test = train_test_split(m, 0.7, 0)
    seen = set()

    class Mean:
        def __init__(self, v):
            self.v = v

        def predict(self, mm):
            seen.update(mm.row_ids)
            return np.full(mm.n, self.v)

    def fit(mm, shift):
        seen.update(mm.row_ids)
        return Mean(mm.y.mean() + shift)

    res = grid_search(fit, {"shift": [3.0, 0.0, -3.0]}, train)
    assert res.best == {"shift": 0.0}
    assert seen <= set(train.row_ids) and not seen & set(test.row_ids)


def test_grid_ties_go_to_first_point():
    m = random_matrix(0, n=40)

    class Zero:
        def predict(self, mm):
            return np.zeros(mm.n)

    assert grid_search(lambda mm, k: Zero(), {"k": [2, 1]}, m).best == {"k": 2}


# --- evaluation ----------------------------------------------------------------------


def test_perfect_predictions_all_zero():
    r = evaluate([1.0, 2.0], [1.0, 2.0])
    assert (r.mae, r.mse, r.rmse, r.mape) == (0.0, 0.0, 0.0, 0.0)


@settings(max_examples=50, deadline=None)
@given(st.lists(st.tuples(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3)), min_size=1, max_size=30))
def test_rmse_squared_is_mse(pairs):
    p, a = zip(*pairs)
    r = evaluate(p, a)
    assert r.rmse ** 2 == pytest.approx(r.mse, rel=1e-12, abs=1e-12)
    assert min(r.mae, r.mse, r.rmse) >= 0


def test_mape_excludes_zero_actuals():
    r = evaluate([1.0, 3.0], [0.0, 2.0])
    assert r.mape == 0.5 and r.n_mape_excluded == 1
    assert math.isnan(evaluate([1.0], [0.0]).mape)


def test_evaluate_length_mismatch():
    with pytest.raises(DomainError):
        evaluate([1.0], [1.0, 2.0])


def test_rank_single_and_ties():
    one = EvalReport("A", 1, 1, 1, 0, 5)
    assert rank_models([one]) == [one]
    a, b = EvalReport("A", 0.5, 0.3, 0.5, 0, 5), EvalReport("B", 0.5, 0.2, 0.6, 0, 5)
    assert [r.model_tag for r in rank_models([a, b])] == ["B", "A"]


def test_pearson_examples():
    x = np.arange(10.0)
    assert pearson(x, 2 * x) == pytest.approx(1.0)
    assert pearson(x, -x) == pytest.approx(-1.0)
    with pytest.raises(DomainError):
        pearson(x, np.ones(10))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10_000))
def test_pearson_against_covariance(seed):
    rng = np.random.default_rng(seed)
    x, y = rng.normal(size=30), rng.normal(size=30)
    c = np.cov(x, y)
    assert pearson(x, y) == pytest.approx(c[0, 1] / math.sqrt(c[0, 0] * c[1, 1]), abs=1e-12)


# --- harness and serialization ---------------------------------------------------------


def test_compare_singleton_model_list():
    rng = np.random.default_rng(0)
    X = rng.normal(size=(60, 3))
    res = compare_models(matrix(X, X[:, 0] + rng.normal(size=60)), ("RFR",), seed=0)
    assert [r.model_tag for r in res.reports] == ["RFR"] and res.best_tag == "RFR"


def test_compare_nbr_on_raw_scale_drops_collinear():
    rng = np.random.default_rng(1)
    a = rng.normal(size=80)
    X = np.column_stack([a, rng.normal(size=80), a * 3])
    y = rng.poisson(np.exp(0.5 + 0.3 * a))
    res = compare_models(matrix(X, y, ("a", "b", "a3")), ("NBR", "RFR"), seed=0)
    nbr = next(r for r in res.reports if r.model_tag == "NBR")
    assert nbr.scale == "raw" and res.nbr_dropped == ("a3",)
    assert [r.model_tag for r in res.ranked] == ["RFR"]


@pytest.mark.parametrize("kind", ["nbr", "rfr", "nn"])
def test_model_round_trip(tmp_path, kind):
    rng = np.random.default_rng(2)
    X = rng.normal(size=(60, 3))
    m = matrix(X, rng.poisson(2.0, 60))
    tr, te = train_test_split(m)
    zt, ze, state = standardize(tr, te)
    model = {"nbr": lambda: fit_nbr(tr), "rfr": lambda: fit_rfr(zt, seed=1),
             "nn": lambda: fit_nn(zt, NnConfig(epochs=3))}[kind]()
    save_model(tmp_path / "m.json", model, state)
    back, st_back = load_model(tmp_path / "m.json")
    Q = ze.X if kind != "nbr" else te.X
    np.testing.assert_array_equal(back.predict(Q), model.predict(Q))
    np.testing.assert_array_equal(st_back.mean, state.mean)
    assert (tmp_path / "m.json").read_text() == dumps(back, st_back)


def test_forward_shapes():
    params = init_params((3, 4, 2, 1), np.random.default_rng(0))
    out, _ = forward(params, np.zeros((5, 3)))
    assert out.shape == (5,)
