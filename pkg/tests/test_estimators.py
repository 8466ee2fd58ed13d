import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from prexpect import corpus
from prexpect.estimators import ErtEstimator, WlpEstimator, WpEstimator
from prexpect.semantics import Expectation
from prexpect.transformers import ert, wlp, wp

from conftest import expect, space_of


def test_params_round_trip():
    est = WpEstimator(max_iters=50, tol=1e-6, cost_model="calls")
    assert est.get_params() == {"max_iters": 50, "tol": 1e-6, "cost_model": "calls"}
    twin = clone(est)
    assert twin.get_params() == est.get_params() and not hasattr(twin, "env_")


def test_not_fitted():
    with pytest.raises(NotFittedError):
        WpEstimator().transform("1")


def test_fit_sets_attributes():
    est = WpEstimator().fit(corpus.load("rec3"))
    assert est.report_.converged and est.n_iter_ == est.report_.iterations
    assert est.env_.n == est.n_iter_


def test_transform_inputs_agree():
    prog = corpus.load("coins")
    sp = space_of(prog)
    est = WpEstimator().fit(prog)
    f = expect("[x = y]", prog, sp)
    a = est.transform(f).values
    b = est.transform(f.values).values
    c = est.transform("[x = y]").values
    assert np.allclose(a, 0.5) and np.array_equal(a, b) and np.array_equal(a, c)
    assert np.all(est.transform(2).values == 2)


def test_transform_rejects_bad_vectors():
    est = WpEstimator().fit(corpus.load("coins"))
    with pytest.raises(ValueError):
        est.transform([1.0, 2.0])
    with pytest.raises(ValueError):
        est.transform([-1.0, 0, 0, 0])


def test_fit_accepts_source_and_bindings():
    est = WpEstimator().fit(corpus.show("binsearch"), bindings=corpus.default_bindings("binsearch"))
    assert est.space_.size == 216


@pytest.mark.parametrize("name", ["rec3", "fact", "randomwalk", "evenodd", "binsearch"])
def test_matches_engines(name):
    prog = corpus.load(name)
    sp = space_of(prog, name)
    rng = np.random.default_rng(4)
    f = rng.random(sp.size)
    w = WpEstimator().fit(prog, bindings=corpus.default_bindings(name))
    assert np.allclose(w.transform(f).values, wp(prog, Expectation(sp, f))[0].values, atol=1e-8)
    l = WlpEstimator().fit(prog, bindings=corpus.default_bindings(name))
    assert np.allclose(l.transform(f).values, wlp(prog, Expectation(sp, f, "E<=1"))[0].values, atol=1e-8)
    if name != "rec3":
        e = ErtEstimator().fit(prog, bindings=corpus.default_bindings(name))
        ref = ert(prog, Expectation(sp, f, "T"))[0].values
        got = e.transform(f).values
        fin = np.isfinite(ref)
        assert np.array_equal(fin, np.isfinite(got))
        assert np.allclose(got[fin], ref[fin], atol=1e-7)


def test_ert_cost_model_param():
    est = ErtEstimator(cost_model="calls").fit(corpus.load("fact"))
    assert est.transform(0).at({"x": 0, "y": 0}) == 1.0
