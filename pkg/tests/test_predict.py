import numpy as np
import pytest

from odcreg import (
    InvalidConfigError,
    OdcConfig,
    fit_odc,
    odc_predict,
    predict_batch,
    rank_subdomains,
    synth_dataset,
)
from odcreg.machines import HyperParams, full_predict, nearest_indices, nn_local_predict, preset
from odcreg.predict import combination_weights, combine_predictions

from conftest import SMALL_HYPER


@pytest.fixture(scope="module")
def data():
    return synth_dataset(N=300, d_X=4, d_Y=3, seed=1)


@pytest.fixture(scope="module")
def tgp_model(data):
    return fit_odc(data.X, data.Y, OdcConfig(M=60, p=0.5, t=1), preset("synthetic"), seed=0)


def test_combination_examples():
    assert combine_predictions([[0.0], [8.0]], [1.0, 3.0])[0] == pytest.approx(2.0)
    np.testing.assert_allclose(combination_weights([1.0, 3.0]), [0.75, 0.25])
    np.testing.assert_allclose(combine_predictions([[1.0, 2.0], [3.0, 6.0]], [2.0, 2.0]), [2.0, 4.0])
    np.testing.assert_allclose(combination_weights([0.0, 0.0, 1.0]), [0.5, 0.5, 0.0])
    single = np.array([[1.5, -2.0]])
    out = combine_predictions(single, [4.0])
    np.testing.assert_array_equal(out, single[0])
    assert out is not single[0]


def test_combining_identical_outputs_is_idempotent():
    preds = np.tile([1.25, -3.0, 7.5], (2, 1))
    np.testing.assert_allclose(combine_predictions(preds, [0.3, 2.0]), preds[0], atol=1e-15)


def test_ranking_with_identity_precision(tgp_model):
    model = tgp_model
    object.__setattr__(model, "_precs", np.stack([np.eye(model.d_X)] * model.K))
    try:
        x = np.random.default_rng(0).standard_normal(model.d_X)
        order, dist = rank_subdomains(model, x)
        sq = ((model._mus - x) ** 2).sum(axis=1)
        np.testing.assert_array_equal(order, np.argsort(sq, kind="stable"))
        np.testing.assert_allclose(dist, np.sort(sq))
    finally:
        object.__setattr__(model, "_precs", np.stack([s.prec for s in model.subdomains]))


def test_query_at_mean_ranked_first(tgp_model):
    j = 2
    order, dist = rank_subdomains(tgp_model, tgp_model.subdomains[j].mu)
    assert order[0] == j and dist[0] == pytest.approx(0.0, abs=1e-9)


def test_degenerate_cover_equals_full_gpr(data):
    X, Y = data.X[:60], data.Y[:60]
    hyper = preset("synthetic")
    model = fit_odc(X, Y, OdcConfig(M=60, p=0.0, machine_kind="GPR"), hyper, seed=0)
    assert model.K == 1
    Xq = np.random.default_rng(2).standard_normal((10, 4))
    K = np.exp(-np.linalg.norm(X[:, None] - X[None], axis=2) / hyper.rho_x2)
    for x in Xq:
        k = np.exp(-np.linalg.norm(X - x, axis=1) / hyper.rho_x2)
        oracle = np.linalg.solve(K + hyper.sigma_n2 * np.eye(60), k) @ Y
        np.testing.assert_allclose(odc_predict(model, x), oracle, atol=1e-8)


def test_training_point_recovered(data):
    hyper = HyperParams(rho_x2=5.0, rho_y2=5.0, lambda_x=1e-6, lambda_y=1e-6)
    model = fit_odc(data.X, data.Y, OdcConfig(M=60, p=0.3), hyper, seed=0)
    rng = np.random.default_rng(3)
    for i in rng.choice(data.N, 5, replace=False):
        err = np.abs(odc_predict(model, data.X[i], Kprime=1) - data.Y[i]).max()
        assert err < 1e-2


def test_kprime_bounds(tgp_model):
    with pytest.raises(InvalidConfigError):
        odc_predict(tgp_model, np.zeros(4), Kprime=0)
    with pytest.raises(InvalidConfigError):
        predict_batch(tgp_model, np.zeros((2, 4)), Kprime=tgp_model.K + 1)


def test_batch_matches_single_and_threads(tgp_model, data):
    Xq = data.X[:15] + 0.01
    single = np.stack([odc_predict(tgp_model, x, Kprime=2) for x in Xq])
    np.testing.assert_array_equal(predict_batch(tgp_model, Xq, Kprime=2), single)
    np.testing.assert_array_equal(predict_batch(tgp_model, Xq, Kprime=2, n_jobs=3), single)


def test_iwtgp_batch(data):
    model = fit_odc(data.X, data.Y, OdcConfig(M=60, p=0.5, machine_kind="IWTGP"), preset("synthetic"),
                    seed=0)
    Xq = data.X[:8] + 0.02
    P = predict_batch(model, Xq, Kprime=2)
    assert P.shape == (8, 3) and np.all(np.isfinite(P))
    np.testing.assert_array_equal(odc_predict(model, Xq[0], Kprime=2, X_batch=Xq), P[0])


def test_rpc_and_imda_models(data):
    for kind in ("RPC", "IMDA"):
        model = fit_odc(data.X, data.Y, OdcConfig(M=80, p=0.4, clustering_kind=kind), SMALL_HYPER, seed=0)
        assert predict_batch(model, data.X[:3]).shape == (3, 3)


def test_fit_rejects_oversized_subdomain(data):
    with pytest.raises(InvalidConfigError):
        fit_odc(data.X[:10], data.Y[:10], OdcConfig(M=11))


# per-query local scheme

def test_nearest_indices_ties_by_index():
    X = np.array([[1.0], [-1.0], [1.0], [3.0]])
    np.testing.assert_array_equal(nearest_indices(X, np.array([0.0]), 2), [0, 1])


def test_nn_scheme_m_equals_n_is_full_model(data):
    X, Y = data.X[:50], data.Y[:50]
    x = data.X[60]
    for kind in ("GPR", "TGP"):
        np.testing.assert_allclose(
            nn_local_predict(X, Y, x, 50, kind, SMALL_HYPER),
            full_predict(X, Y, x[None], kind, SMALL_HYPER)[0], atol=1e-10)


def test_nn_scheme_single_neighbour_returns_its_output(data):
    hyper = HyperParams(sigma_n2=0.0)
    out = nn_local_predict(data.X, data.Y, data.X[7], 1, "GPR", hyper)
    np.testing.assert_allclose(out, data.Y[7], atol=1e-12)
