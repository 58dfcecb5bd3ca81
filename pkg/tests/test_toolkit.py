import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmlkit.circuits import HighDim, YzCx
from qmlkit.estimators import QSVC, Estimator, NotFittedError
from qmlkit.toolkit import (MinMaxScaler, Pipeline, SelectKBest, expand_grid, f_classif, grid_search_cv, kfold,
                            load_csv, make_classification, make_moons, save_csv, stratified_kfold, train_test_split)


class RangeProbe(Estimator):
    """Records the column ranges it was trained on; predicts the majority label."""

    _params = ("tag",)

    def __init__(self, tag=0):
        super().__init__()
        self.tag = tag

    def fit(self, X, y):
        self.seen_ = (X.min(axis=0), X.max(axis=0))
        RangeProbe.log.append(self.seen_)
        vals, counts = np.unique(y, return_counts=True)
        self.label_ = vals[np.argmax(counts)]
        self._fitted = True
        return self

    def predict(self, X):
        self._check_fitted()
        return np.full(len(X), self.label_)


RangeProbe.log = []


# -- datasets ------------------------------------------------------------------------------------------


def test_make_classification_shapes_balance_and_determinism():
    X, y = make_classification(100, 10, seed=0)
    assert X.shape == (100, 10) and y.shape == (100,)
    assert set(y) == {0, 1}
    assert 0.4 <= y.mean() <= 0.6
    X2, y2 = make_classification(100, 10, seed=0)
    assert np.array_equal(X, X2) and np.array_equal(y, y2)
    with pytest.raises(ValueError):
        make_classification(1, 10)
    with pytest.raises(ValueError):
        make_classification(10, 1)


def test_make_classification_has_two_informative_features():
    X, y = make_classification(400, 10, seed=3)
    F = f_classif(X, y)
    assert np.sort(F)[-2] > 10 * np.sort(F)[-3]


def test_make_moons_examples():
    X, y = make_moons(100, 0.3, seed=1)
    assert X.shape == (100, 2) and y.shape == (100,)
    X0, y0 = make_moons(7, 0.0, seed=0)
    assert np.bincount(y0).tolist() == [4, 3]
    upper = X0[y0 == 0]
    lower = X0[y0 == 1] - np.array([1.0, 0.5])
    assert np.allclose(np.hypot(*upper.T), 1.0) and np.all(upper[:, 1] >= -1e-12)
    assert np.allclose(np.hypot(*lower.T), 1.0) and np.all(lower[:, 1] <= 1e-12)
    with pytest.raises(ValueError):
        make_moons(10, -0.1)


def test_train_test_split_sizes():
    X, y = make_moons(10, 0.0)
    Xtr, Xte, ytr, yte = train_test_split(X, y, 0.25, seed=0)
    assert len(Xte) == 3 and len(Xtr) == 7
    assert sorted(map(tuple, np.vstack([Xtr, Xte]))) == sorted(map(tuple, X))


def test_csv_roundtrip(tmp_path):
    X, y = make_classification(20, 3, seed=2)
    path = tmp_path / "data.csv"
    save_csv(path, X, y, ["a", "b", "c"])
    assert path.read_text().splitlines()[0] == "a,b,c,label"
    X2, y2, names = load_csv(path)
    assert np.array_equal(X, X2) and np.array_equal(y, y2) and names == ["a", "b", "c"]
    reg = tmp_path / "reg.csv"
    save_csv(reg, X[:, 0], X[:, 1])
    assert np.array_equal(load_csv(reg)[1], X[:, 1])


# -- scaling and selection ------------------------------------------------------------------------------


def test_minmax_examples():
    s = MinMaxScaler((0.01, 0.99))
    out = s.fit_transform(np.array([[0.0, 3.0], [5.0, 3.0], [10.0, 3.0]]))
    assert np.allclose(out[:, 0], [0.01, 0.5, 0.99])
    assert out[0, 0] == 0.01 and out[2, 0] == 0.99
    assert np.all(out[:, 1] == 0.5)
    with pytest.raises(NotFittedError):
        MinMaxScaler().transform(np.zeros((2, 2)))
    with pytest.raises(ValueError):
        MinMaxScaler((1.0, 0.0)).fit(np.zeros((2, 1)))


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 20))
def test_minmax_hits_range_endpoints_exactly(seed, n):
    X = np.random.default_rng(seed).normal(size=(n, 3)) * 100
    out = MinMaxScaler((0.01, 0.99)).fit_transform(X)
    assert np.array_equal(out.min(axis=0), [0.01] * 3)
    assert np.array_equal(out.max(axis=0), [0.99] * 3)


def test_f_scores_by_hand():
    X = np.array([[0.0, 1.0, 5.0], [0.0, -1.0, 5.0], [1.0, 1.0, 5.0], [1.0, -1.0, 5.0]])
    y = np.array([0, 0, 1, 1])
    F = f_classif(X, y)
    assert F[0] == np.inf and F[1] == 0.0 and F[2] == 0.0
    X2 = np.array([[0.0], [1.0], [2.0], [3.0]])
    # class means 0.5 and 2.5: ssb = 4, ssw = 1, df (1, 2) -> F = 8
    assert f_classif(X2, y)[0] == pytest.approx(8.0)
    with pytest.raises(ValueError):
        f_classif(X2, np.zeros(4))


def test_select_k_best_examples():
    rng = np.random.default_rng(0)
    y = np.array([0, 1] * 10)
    X = np.column_stack([rng.normal(size=20), y.astype(float), rng.normal(size=20)])
    sel = SelectKBest(1).fit(X, y)
    assert sel.support_.tolist() == [1]
    assert np.array_equal(SelectKBest(3).fit_transform(X, y), X)
    tied = np.column_stack([y, y, y]).astype(float)
    assert SelectKBest(2).fit(tied, y).support_.tolist() == [0, 1]
    with pytest.raises(ValueError):
        SelectKBest(4).fit(X, y)


# -- pipelines -------------------------------------------------------------------------------------------


def test_pipeline_fit_transform_order_and_params():
    X, y = make_classification(30, 6, seed=1)
    pipe = Pipeline([("scaler", MinMaxScaler((0.01, 0.99))), ("select", SelectKBest(2)), ("model", RangeProbe())])
    pipe.fit(X, y)
    manual = SelectKBest(2).fit_transform(MinMaxScaler((0.01, 0.99)).fit_transform(X), y)
    assert np.array_equal(pipe._transform(X), manual)
    assert pipe.get_params()["select__k"] == 2
    pipe.set_params(select__k=3)
    assert pipe.named_steps["select"].k == 3
    with pytest.raises(ValueError):
        pipe.set_params(model__depth=1)
    with pytest.raises(ValueError):
        pipe.set_params(k=1)
    with pytest.raises(ValueError):
        Pipeline([("a", MinMaxScaler()), ("a", RangeProbe())])


# -- folds and grid search ---------------------------------------------------------------------------------


def test_kfold_partitions_and_is_seeded():
    folds = kfold(11, 3, seed=4)
    tests = np.concatenate([t for _, t in folds])
    assert sorted(tests.tolist()) == list(range(11))
    for tr, te in folds:
        assert not set(tr) & set(te)
    assert all(np.array_equal(a[1], b[1]) for a, b in zip(folds, kfold(11, 3, seed=4)))
    with pytest.raises(ValueError):
        kfold(3, 5)


def test_stratified_folds_keep_class_balance():
    y = np.array([0] * 10 + [1] * 5)
    for _, te in stratified_kfold(y, 5, seed=0):
        assert np.bincount(y[te], minlength=2).tolist() == [2, 1]


def test_expand_grid_order():
    grid = expand_grid({"a": [1, 2], "b": ["x", "y", "z"]})
    assert len(grid) == 6
    assert grid[0] == {"a": 1, "b": "x"} and grid[1] == {"a": 1, "b": "y"}


def test_scaling_is_fitted_inside_each_fold():
    # one huge outlier: a leaking scaler would squeeze the other folds far below the upper bound
    X = np.concatenate([np.linspace(0, 1, 9), [1000.0]]).reshape(-1, 1)
    y = np.array([0, 1] * 5)
    RangeProbe.log = []
    pipe = Pipeline([("scaler", MinMaxScaler((0.01, 0.99))), ("model", RangeProbe())])
    grid_search_cv(pipe, {"model__tag": [0]}, X, y, cv=5, seed=0)
    assert len(RangeProbe.log) == 6
    for lo, hi in RangeProbe.log:
        assert lo[0] == 0.01 and hi[0] == 0.99


def test_grid_search_table_and_ties():
    X, y = make_classification(20, 4, seed=0)
    res = grid_search_cv(RangeProbe(), {"tag": [0, 1, 2]}, X, y, cv=4, seed=0)
    assert len(res.table) == 12 and res.fold_fits == 12 and res.refits == 1
    assert res.best_params == {"tag": 0}  # all scores tie
    with pytest.raises(ValueError):
        grid_search_cv(RangeProbe(), {"depth": [1]}, X, y)


def test_grid_search_quantum_pipeline_is_deterministic():
    X, y = make_classification(24, 5, seed=0)
    grid = {"select__k": [2], "model__encoding_circuit": [YzCx(2, 2, 1), HighDim(2, 2, 1)],
            "model__C": [0.1, 1.0]}

    def search():
        pipe = Pipeline([("scaler", MinMaxScaler((0.01, 0.99))), ("select", SelectKBest(3)),
                         ("model", QSVC(YzCx(2, 1, 1)))])
        return grid_search_cv(pipe, grid, X, y, cv=3, seed=2)

    a, b = search(), search()
    assert len(a.table) == 4 * 3
    assert a.mean_scores == b.mean_scores and a.best_params == b.best_params
    singleton = grid_search_cv(Pipeline([("scaler", MinMaxScaler((0.01, 0.99))), ("select", SelectKBest(2)),
                                         ("model", QSVC(a.best_params["model__encoding_circuit"],
                                                        C=a.best_params["model__C"]))]),
                               {"model__C": [a.best_params["model__C"]]}, X, y, cv=3, seed=2)
    assert singleton.best_score == a.best_score
