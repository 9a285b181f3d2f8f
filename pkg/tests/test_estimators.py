import math

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from adaptive_qht import StateSpec, estimators, generate_dataset
from adaptive_qht.estimators import AdaptiveKernelEstimator, NullFeatures, exact_value, reconstruct_elements
from adaptive_qht.exceptions import IllConditionedError
from adaptive_qht.states import density_matrix_element


@pytest.fixture(scope="module")
def data():
    return generate_dataset(StateSpec.coherent(math.sqrt(3)), "random", 4, 2500, 21)


def test_params_and_clone():
    est = AdaptiveKernelEstimator("rho(1,1)", "III", 5, split=True)
    params = est.get_params()
    assert params["target"] == "rho(1,1)" and params["n_null"] == 5 and params["split"] is True
    copy = clone(est)
    assert copy.get_params() == params and not hasattr(copy, "kernel_")


def test_fit_transform(data):
    est = AdaptiveKernelEstimator("intensity", "I", 4)
    values = est.fit_transform(np.column_stack([data.x, data.phi]))
    assert values.shape == (len(data),)
    assert est.mu_.shape == (4,) and est.n_features_in_ == 2
    assert values.mean() == pytest.approx(est.base_values(data).mean(), abs=0.1)
    assert values.var() < est.base_values(data).var()


def test_transform_before_fit(data):
    with pytest.raises(NotFittedError):
        AdaptiveKernelEstimator().transform(data)


def test_split_mode(data):
    est = AdaptiveKernelEstimator("quadrature", "I", 4, split=True)
    base, opt = est.estimate(data)
    assert base.n_blocks == opt.n_blocks == 2
    assert est.result_.n_samples == 5000
    with pytest.raises(ValueError):
        est.estimate(data, n_blocks=1)


def test_null_features(data):
    F = NullFeatures("II", 3).fit_transform(data)
    assert F.shape == (len(data), 3) and np.iscomplexobj(F)
    assert np.allclose(F[:, 0], np.exp(2j * data.phi))


def test_exact_value():
    spec = StateSpec.coherent(0.5 + 1j)
    assert exact_value(spec, "intensity") == pytest.approx(1.25)
    assert exact_value(spec, "quadrature") == pytest.approx(0.5)
    assert exact_value(spec, "amplitude") == pytest.approx(0.5 + 1j)
    assert exact_value(StateSpec.coherent(1.0), "rho(0,0)") == pytest.approx(math.exp(-1))


def test_reconstruct_truth(data):
    rows = reconstruct_elements(data, [(0, 0), (1, 0), (2, 2)], n_null=4)
    for r in rows:
        truth = density_matrix_element(data.spec, r.n, r.m)
        for rep in (r.base, r.optimized):
            assert abs(rep.mean - truth) <= 4 * rep.std_error
    assert set(rows[0].row()) == {"n", "m", "re_base", "im_base", "err_base", "re_opt", "im_opt", "err_opt", "gamma"}


def test_reconstruct_fallback(data, monkeypatch):
    def boom(*args, **kwargs):
        raise IllConditionedError("singular", condition=math.inf)

    real_optimize = estimators.optimize
    monkeypatch.setattr(estimators, "optimize", lambda t, fam, *a, **k: boom() if fam.M else real_optimize(t, fam, *a, **k))
    (row,) = reconstruct_elements(data, [(0, 0)], n_null=4)
    assert "base kernel used" in row.note
    assert row.optimized is row.base and row.gamma == 0.0


def test_fock_no_gain():
    data = generate_dataset(StateSpec.fock(1), "random", 5, 2000, 3)
    for r in reconstruct_elements(data, [(0, 0), (1, 1), (2, 2)], n_null=6):
        assert r.optimized.std_error == pytest.approx(r.base.std_error, rel=0.1, abs=1e-3)
