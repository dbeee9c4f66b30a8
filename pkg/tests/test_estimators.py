import math

import numpy as np
import pytest
from sklearn.base import clone

from fmt_uncertainty import (
    DimensionMismatch,
    FMTransformer,
    GaussianChirp,
    Grid,
    MomentEstimator,
    SampledSignal,
    UncertaintyVerifier,
    analytic_gaussian_moments,
    normalize,
    sample_gaussian_chirp,
)
from fmt_uncertainty.battery import adapted_grid, example_pair
from fmt_uncertainty.estimators import NotFittedError, check_pairs, check_p_values, check_signal

from helpers import phase_aligned_residual


@pytest.fixture(scope="module")
def example_signal():
    g = GaussianChirp((1.0, 2.0), 1.0)
    pair = example_pair()
    return normalize(sample_gaussian_chirp(g, adapted_grid(g, [pair.m1, pair.m2])))


def test_params_and_clone():
    t = FMTransformer(matrix="frft:0.4", oversample=2)
    assert t.get_params() == {"matrix": "frft:0.4", "oversample": 2, "nyquist_tol": 1e-4, "seed": 0}
    c = clone(t)
    assert c.get_params() == t.get_params() and c is not t
    c.set_params(matrix="fourier")
    assert t.matrix == "frft:0.4"
    assert clone(UncertaintyVerifier(tol=1e-4)).tol == 1e-4


def test_transformer_round_trip(example_signal):
    t = FMTransformer(matrix="frft:0.6").fit(example_signal)
    out = t.transform(example_signal)
    assert out.grid.same_as(t.plan_.out_grid)
    back = t.inverse_transform(out)
    assert phase_aligned_residual(back.values, example_signal.values) < 1e-4
    # dict form and (grid, values) tuples are accepted too
    assert np.array_equal(t.transform(example_signal.to_dict()).values, out.values)
    assert np.array_equal(t.transform((example_signal.grid, example_signal.values)).values, out.values)


def test_transformer_guards(example_signal):
    with pytest.raises(NotFittedError):
        FMTransformer().transform(example_signal)
    t = FMTransformer().fit(example_signal)
    with pytest.raises(DimensionMismatch):
        t.transform(SampledSignal(Grid.box([16, 16], 2.0), np.ones((16, 16))))
    with pytest.raises(TypeError):
        check_signal(np.ones(4))


def test_moment_estimator_recenters():
    g = GaussianChirp((0.8, 1.2), 2.0)
    grid = adapted_grid(g, k=8.0)
    x = grid.coords()
    vals = g(x - np.array([0.5, -0.25]).reshape(2, 1, 1)) * np.exp(2j * math.pi * 0.3 * x[0])
    est = MomentEstimator().fit(SampledSignal(grid, vals))
    assert np.allclose(est.shift_["shift_x"], [0.5, -0.25], atol=1e-10)
    assert np.allclose(est.shift_["shift_w"], [0.3, 0.0], atol=1e-10)
    assert np.allclose(est.covariance_, analytic_gaussian_moments(g).Sigma, rtol=1e-6, atol=1e-8)
    with pytest.raises(Exception, match="recenter"):
        MomentEstimator(recenter=False).fit(SampledSignal(grid, vals))


def test_verifier_predict_and_score(example_signal):
    pair = example_pair()
    v = UncertaintyVerifier(pairs=[pair], p_values=(1.0, 2.0))
    with pytest.raises(NotFittedError):
        v.predict()
    assert v.predict(example_signal) is True
    score = v.score()
    assert 0 <= score < 1
    # the trace bound is the tightest family for the example pair
    lhs = (3 / (16 * math.pi**2)) * (6 + 3 / (16 * math.pi**2))
    comp = next(e for e in v.report_.entries if e.bound == "component")
    assert comp.lhs == pytest.approx(lhs, rel=1e-5)
    assert score <= (comp.lhs - comp.rhs) / comp.lhs


def test_validation_helpers():
    pairs = check_pairs([("fourier", "frft:0.5")], 2)
    assert pairs[0].name == "pair-0" and pairs[0].m1.name == "fourier"
    with pytest.raises(DimensionMismatch):
        check_pairs([example_pair(1)], 2)
    with pytest.raises(ValueError):
        check_pairs([], 2)
    assert check_p_values([1, 2]) == (1.0, 2.0)
    with pytest.raises(ValueError):
        check_p_values([0.5])
