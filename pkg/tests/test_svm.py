import math

import numpy as np
import pytest
from scipy.optimize import linprog

from flowagg.ml import svm
from flowagg.models.schemas import ObservationSample, SvmModel
from flowagg.utils.errors import DegenerateData, ModelFormatError, NoConvergence


def sample(f, delta_f, sign=None):
    return ObservationSample(f=f, delta_f=delta_f, sign=sign)


def separable(samples, f_cap):
    """LP feasibility: some (w, b) with y (w.x + b) >= 1 for every sample."""
    X = np.array([[s.f / f_cap, s.delta_f / f_cap] for s in samples])
    y = np.array([s.sign for s in samples], dtype=float)
    A_ub = -y[:, None] * np.hstack([X, np.ones((len(y), 1))])
    res = linprog(np.zeros(3), A_ub=A_ub, b_ub=-np.ones(len(y)), bounds=[(None, None)] * 3, method="highs")
    return res.status == 0


def scan_margin(samples, steps=72000):
    """Widest gap between the projected classes over a fine scan of directions."""
    pos = np.array([[s.f, s.delta_f] for s in samples if s.sign == 1], dtype=float)
    neg = np.array([[s.f, s.delta_f] for s in samples if s.sign == -1], dtype=float)
    theta = np.linspace(0.0, 2.0 * math.pi, steps, endpoint=False)
    u = np.stack([np.cos(theta), np.sin(theta)], axis=1)
    gap = (pos @ u.T).min(axis=0) - (neg @ u.T).max(axis=0)
    return float(gap.max())


@pytest.fixture
def two_point_model():
    return svm.train([sample(0, 0, 1), sample(2, 0, -1)], c_param=1e4)


def test_two_point_boundary(two_point_model):
    model = two_point_model
    assert model.converged
    assert model.w2 == pytest.approx(0.0, abs=1e-9)
    assert model.w1 < 0
    assert svm.decision_value(model, 1, 0) == pytest.approx(0.0, abs=1e-3)
    assert svm.decision_value(model, 0, 0) == pytest.approx(1.0, abs=1e-3)
    assert svm.decision_value(model, 2, 0) == pytest.approx(-1.0, abs=1e-3)


def test_two_point_classification(two_point_model):
    assert svm.decision_value(two_point_model, 0.5, 0) > 0
    assert svm.decision_value(two_point_model, 1.5, 0) < 0
    assert svm.classify(two_point_model, sample(0, 0)) == 1
    assert svm.classify(two_point_model, sample(2, 0)) == -1


def test_two_point_margin_equals_point_distance(two_point_model):
    # both points lie one scaled unit apart
    assert two_point_model.scale1 == 2.0
    assert svm.margin(two_point_model) == pytest.approx(1.0, rel=1e-3)


def test_classify_direct_evaluation():
    model = SvmModel(w1=0.0, w2=-1.0, b=0.0, scale1=1.0, scale2=1.0)
    assert svm.classify(model, sample(5, -3)) == 1
    assert svm.classify(model, sample(5, 0)) == -1


@pytest.mark.parametrize("w,expected", [((2.0, 0.0), 1.0), ((1.0, 1.0), math.sqrt(2.0))])
def test_margin(w, expected):
    model = SvmModel(w1=w[0], w2=w[1], b=0.0, scale1=1.0, scale2=1.0)
    assert svm.margin(model) == pytest.approx(expected)


def test_single_label_is_degenerate():
    with pytest.raises(DegenerateData):
        svm.train([sample(1, 0, 1), sample(5, 2, 1)])


def test_rule_labelled_set_is_learned_exactly():
    samples = svm.rule_labelled_samples(200, f_cap=300, seed=4, band=0.1)
    assert {s.sign for s in samples} == {1, -1}
    assert separable(samples, 300)

    model = svm.train(samples, c_param=1e4, f_cap=300)

    assert model.converged
    assert svm.accuracy(model, samples) == 1.0


@pytest.mark.parametrize("points", [
    [(0, 0, 1), (1, 2, 1), (0, 3, 1), (4, 1, -1), (5, 3, -1), (6, 0, -1)],
    [(1, 1, 1), (2, 0, 1), (4, 4, -1), (5, 2, -1)],
    [(0, 5, 1), (3, 6, 1), (2, 1, -1)],
])
def test_margin_matches_direction_scan(points):
    samples = [sample(f, d, s) for f, d, s in points]
    model = svm.train(samples, c_param=1e6, tol=1e-7, f_cap=1)
    assert svm.margin(model) == pytest.approx(scan_margin(samples), rel=0.01)
    assert svm.accuracy(model, samples) == 1.0


def test_common_scale_makes_training_scale_invariant():
    base = [sample(10, 2, 1), sample(40, -5, 1), sample(90, 30, -1), sample(120, 0, -1)]
    scaled = [sample(s.f * 3, s.delta_f * 3, s.sign) for s in base]

    a = svm.train(base)
    b = svm.train(scaled)

    assert (b.w1, b.w2, b.b) == pytest.approx((a.w1, a.w2, a.b))
    assert [svm.classify(a, s) for s in base] == [svm.classify(b, s) for s in scaled]


def test_iteration_limit():
    samples = svm.rule_labelled_samples(100, f_cap=300, seed=2)
    model = svm.train(samples, max_iter=1, f_cap=300)
    assert not model.converged
    with pytest.raises(NoConvergence) as info:
        svm.train(samples, max_iter=1, f_cap=300, strict=True)
    assert info.value.model is not None
    with pytest.raises(ValueError):
        svm.train(samples, max_iter=0)


def test_model_file(tmp_path, two_point_model):
    path = tmp_path / "svm.json"
    svm.save_model(two_point_model, str(path))
    assert svm.load_model(str(path)) == two_point_model

    path.write_text('{"w1": 1.0}')
    with pytest.raises(ModelFormatError):
        svm.load_model(str(path))


def test_sample_csv(tmp_path):
    samples = svm.rule_labelled_samples(20, f_cap=300, seed=9)
    path = tmp_path / "samples.csv"
    svm.write_samples(samples, str(path))
    assert path.read_text().splitlines()[0] == "f,delta_f,sign"
    assert [(s.f, s.delta_f, s.sign) for s in svm.read_samples(str(path))] == [
        (s.f, s.delta_f, s.sign) for s in samples
    ]
