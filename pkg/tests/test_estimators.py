import numpy as np
import pytest

from conftest import make_data
from vrsolve import (BinaryClassifier, DataMatrix, EstimatorConfig,
                     ModelFormatError, MultiClassifier, MultiVariateRegression,
                     OneVsAllError, PenaltyConfig, Problem, Regression,
                     auto_select, decision_function, fit, load, one_vs_all,
                     penalty_value, predict, save, synthesize)
from vrsolve.estimators import Model
from vrsolve.solvers import SolverParams, solve


def _config(task="binary-classifier", loss="logistic", penalty=None,
            intercept=False, solver="auto", **params):
    params.setdefault("tol", 1e-6)
    return EstimatorConfig(task, loss, penalty or PenaltyConfig("l2", 1e-3),
                           intercept, solver, SolverParams(**params))


@pytest.mark.parametrize("n,p,lam,expected", [
    (500, 10, 1e-3, "qning-ista"),
    (5000, 6000, 1e-3, "qning-ista"),
    (10 ** 6, 100, 1 / (100 * 10 ** 6), "qning-miso"),
    (10 ** 6, 100, 1 / (10000 * 10 ** 6), "catalyst-miso"),
])
def test_auto_select(n, p, lam, expected):
    assert auto_select(n, p, 0.25, lam) == expected


def test_config_validation():
    with pytest.raises(ValueError, match="valid names"):
        _config(task="ranking")
    with pytest.raises(ValueError, match="not available"):
        _config(task="regression", loss="logistic")
    with pytest.raises(ValueError, match="valid names"):
        _config(solver="sgd")
    assert _config(loss="sq-hinge").loss == "sqhinge"


def test_binary_fit_reaches_tolerance():
    X, y = make_data(2000, 20, 0)
    model = fit(_config(tol=1e-4), X, y)
    assert model.converged and model.relative_gap <= 1e-4
    assert model.solver == "qning-miso"


def test_sqhinge_l1_sparsity():
    # lambda frozen from a sweep on this instance (10% nonzeros)
    X, y = make_data(2000, 100, 8)
    clf = BinaryClassifier(loss="sqhinge", penalty="l1", verbose=False)
    clf.fit(X, y, lambd=0.016, tol=1e-4)
    frac = np.mean(np.abs(clf.W) > 0)
    assert 0.05 <= frac <= 0.20


def test_l1l2_multiclass_zeroes_whole_rows():
    X, y = make_data(600, 20, 4, task="multiclass", k=3)
    clf = MultiClassifier(penalty="l1l2", verbose=False)
    clf.fit(X, y, lambd=0.02, tol=1e-5)
    zero_rows = np.all(clf.W == 0, axis=1)
    assert 0 < zero_rows.sum() < 20
    partly = np.any(clf.W == 0, axis=1) & ~zero_rows
    assert not partly.any()


def test_predict_tie_rules():
    X = DataMatrix(np.array([[2.0, 5.0], [0.0, 0.0], [-1.0, 3.0]]))
    cfg = _config()
    binary = Model(np.array([[1.0], [0.0]]), np.zeros(1), cfg, [],
                   np.array([-1.0, 1.0]))
    np.testing.assert_array_equal(predict(binary, X), [1.0, 1.0, -1.0])
    multi = Model(np.zeros((2, 3)), np.zeros(3),
                  _config(task="multiclassifier"), [], np.array([1, 2, 3]))
    np.testing.assert_array_equal(predict(multi, X), [1, 1, 1])
    with pytest.raises(ValueError, match="p=2"):
        decision_function(binary, DataMatrix(np.ones((2, 3))))


def test_planted_model_accuracy():
    X, y = synthesize(3000, 20, noise=0.0, seed=3)
    clf = BinaryClassifier(verbose=False).fit(X, y, lambd=1e-5, tol=1e-4)
    assert clf.score(X, y) >= 0.9


def test_zero_one_labels_are_remapped():
    X, y = make_data(400, 8, 2)
    lines = []
    m01 = fit(_config(), X, (y + 1) / 2, log=lines.append)
    mpm = fit(_config(), X, y)
    assert any("{0,1}" in s for s in lines)
    np.testing.assert_array_equal(m01.W, mpm.W)
    assert set(np.unique(predict(m01, X))) <= {0.0, 1.0}
    with pytest.raises(ValueError):
        fit(_config(), X, y * 2)


def test_fit_does_not_mutate_or_copy_data():
    X, y = make_data(500, 10, 5, density=0.3)
    y0 = y.copy()
    before = X.checksum()
    raw = X.raw
    fit(_config(), X, y)
    fit(_config(task="multiclassifier", loss="logistic"), X,
        np.arange(500) % 3)
    assert X.checksum() == before and X.raw is raw
    np.testing.assert_array_equal(y, y0)


def test_intercept_is_unregularized():
    X, y = make_data(800, 10, 6)
    y = np.where(np.arange(800) % 5 == 0, -1.0, y)
    model = fit(_config(intercept=True, solver="fista", tol=1e-10,
                        max_epochs=5000), X, y)
    P = Problem(X, y, "logistic", model.config.penalty, True)
    base = P.primal(model.W, model.b)
    assert abs(model.b[0]) > 1e-3
    for f in (1 - 1e-3, 1 + 1e-3):
        assert P.primal(model.W, model.b * f) > base
    assert penalty_value(model.config.penalty, model.W) == \
        pytest.approx(0.5 * 1e-3 * float(np.sum(model.W ** 2)))


def test_lambda_is_not_rescaled():
    cfg = PenaltyConfig("l1", 0.3)
    w = np.array([1.0, -2.0])
    double = PenaltyConfig("l1", 0.6)
    assert penalty_value(double, w) == 2 * penalty_value(cfg, w)
    X, y = make_data(300, 5, 7)
    model = fit(_config(penalty=cfg, tol=1e-8), X, y)
    P = Problem(X, y, "logistic", cfg)
    res = solve(P, "qning-ista", SolverParams(tol=1e-8))
    np.testing.assert_allclose(model.W, res.W, atol=1e-12)


def test_regression_and_multivariate():
    X, y = make_data(400, 8, 1, task="regression")
    reg = Regression(verbose=False).fit(X, y, lambd=1e-3, tol=1e-6)
    assert reg.predict(X).shape == (400,)
    assert reg.model.relative_gap <= 1e-6
    X, Y = make_data(400, 8, 1, task="multivariate", k=3)
    mv = MultiVariateRegression(verbose=False).fit(X, Y, lambd=1e-3, tol=1e-6)
    assert mv.W.shape == (8, 3) and mv.predict(X).shape == (400, 3)
    for j in range(3):
        single = Regression(verbose=False).fit(X, Y[:, j], lambd=1e-3,
                                               tol=1e-9, solver="fista",
                                               nepochs=5000)
        np.testing.assert_allclose(mv.W[:, j], single.W[:, 0], atol=1e-3)


def test_native_multiclass():
    X, y = make_data(600, 10, 2, task="multiclass", k=4)
    clf = MultiClassifier(verbose=False).fit(X, y + 10, lambd=1e-3, tol=1e-5)
    assert clf.W.shape == (10, 4)
    assert set(np.unique(clf.predict(X))) <= {11.0, 12.0, 13.0, 14.0}
    assert clf.score(X, y + 10) > 0.5


@pytest.mark.parametrize("workers", [1, 3])
def test_one_vs_all_parallel_equals_sequential(workers):
    X, y = make_data(500, 10, 3, task="multiclass", k=4)
    cfg = _config(task="multiclassifier", solver="svrg", seed=7)
    W1, b1, res1, _ = one_vs_all(cfg, X, y, n_threads=1)
    Wp, bp, resp, _ = one_vs_all(cfg, X, y, n_threads=workers)
    assert np.array_equal(W1, Wp)
    assert [r.epochs for r in res1] == [r.epochs for r in resp]


def test_one_vs_all_traces_all_converge():
    X, y = make_data(800, 12, 4, task="multiclass", k=10)
    lines = []
    model = fit(_config(task="multiclassifier", loss="sqhinge", tol=1e-3), X,
                y, log=lines.append, n_threads=2)
    assert len(model.traces) == 10 and model.converged
    assert all(t.last.best_relative_gap <= 1e-3 for t in model.traces)
    done = sorted(int(s.split()[1]) for s in lines
                  if s.startswith("Solver ") and "terminated" in s)
    assert done == list(range(10))
    assert "Time for the one-vs-all strategy" in lines


def test_one_vs_all_with_two_classes_is_binary():
    X, y = make_data(400, 8, 5)
    cfg = _config(task="multiclassifier", loss="logistic", tol=1e-9,
                  solver="fista", max_epochs=5000)
    W, _, _, classes = one_vs_all(cfg, X, y)
    np.testing.assert_array_equal(classes, [-1.0, 1.0])
    binary = fit(_config(tol=1e-9, solver="fista", max_epochs=5000), X, y)
    P = Problem(X, y, "logistic", cfg.penalty)
    zero = np.zeros(1)
    target = P.primal(binary.W, zero)
    # column 1 is "+1 vs rest", column 0 is the same problem with flipped sign
    assert P.primal(W[:, 1:], zero) == pytest.approx(target, abs=1e-8)
    assert P.primal(-W[:, :1], zero) == pytest.approx(target, abs=1e-8)


def test_one_vs_all_failure_names_the_class(monkeypatch):
    import vrsolve.estimators as est

    real = est._run

    def boom(config, problem, params, log):
        if params.seed == 2:
            raise FloatingPointError("diverged")
        return real(config, problem, params, log)

    monkeypatch.setattr(est, "_run", boom)
    X, y = make_data(300, 5, 0, task="multiclass", k=3)
    with pytest.raises(OneVsAllError) as err:
        one_vs_all(_config(task="multiclassifier"), X, y, n_threads=1)
    assert err.value.klass == 2 and err.value.label == 3.0


def test_model_round_trip(tmp_path):
    X, y = make_data(300, 6, 1, task="multiclass", k=3)
    model = fit(_config(task="multiclassifier", loss="multiclass-logistic",
                        intercept=True), X, y)
    a, b = tmp_path / "a.model", tmp_path / "b.model"
    save(model, str(a))
    back = load(str(a))
    save(back, str(b))
    assert a.read_bytes() == b.read_bytes()
    assert np.array_equal(back.W, model.W) and np.array_equal(back.b, model.b)
    np.testing.assert_array_equal(predict(back, X), predict(model, X))
    assert back.config == model.config


def test_f32_model_round_trip(tmp_path):
    X64, y = make_data(300, 6, 2)
    X = DataMatrix(X64.raw.astype(np.float32))
    model = fit(_config(), X, y)
    assert model.W.dtype == np.float32
    path = tmp_path / "m"
    model.save(str(path))
    back = load(str(path))
    assert back.W.dtype == np.float32 and np.array_equal(back.W, model.W)


def test_corrupt_model_files(tmp_path):
    X, y = make_data(100, 4, 0)
    path = tmp_path / "m"
    save(fit(_config(), X, y), str(path))
    text = path.read_text()
    path.write_text(text[: len(text) // 2])
    with pytest.raises(ModelFormatError, match="truncated"):
        load(str(path))
    path.write_text(text.replace("version: 1", "version: 9"))
    with pytest.raises(ModelFormatError, match="version"):
        load(str(path))
    path.write_text(text.replace("epochs: ", "epochs: 1"))
    with pytest.raises(ModelFormatError, match="checksum"):
        load(str(path))
    path.write_text("hello\n")
    with pytest.raises(ModelFormatError):
        load(str(path))


def test_estimator_requires_fit():
    with pytest.raises(RuntimeError):
        BinaryClassifier().predict(np.ones((2, 2)))
