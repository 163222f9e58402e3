import math

import numpy as np
import pytest

import persalign


def test_metrics_on_identical_samples():
    x = np.random.default_rng(0).normal(size=(200, 3))
    assert persalign.amw(x, x) == 0.0
    assert persalign.mmd_squared(x, x) <= 1e-12
    report = persalign.metric_report(x, x, sw_projections=64)
    assert report["sw"] == 0.0
    assert report["n"] == 200


def test_frechet_distance_of_a_shift():
    x = np.random.default_rng(1).normal(size=(300, 4))
    delta = np.array([0.5, -1.0, 2.0, 0.0])
    assert math.isclose(persalign.frechet_distance(x, x + delta), float(delta @ delta), abs_tol=1e-8)


def test_sinkhorn_marginals():
    rng = np.random.default_rng(2)
    cost = persalign.cost_matrix(rng.normal(size=(20, 2)), rng.normal(size=(30, 2)))
    plan = persalign.sinkhorn(cost, epsilon=0.08 * float(np.median(cost)), max_iters=5000)
    assert plan["converged"]
    assert np.allclose(plan["gamma"].sum(axis=1), 1 / 20, atol=1e-6)
    assert np.allclose(plan["gamma"].sum(axis=0), 1 / 30, atol=1e-6)


def test_entropic_gap_swap_instance():
    g = persalign.entropic_gap(np.array([[0.0, 1.0], [1.0, 0.0]]), [0.5, 0.5], [0.5, 0.5], 0.1)
    assert g["exact_cost"] == pytest.approx(0.0, abs=1e-15)
    assert 0.0 < g["entropic_cost"] <= 0.1 * math.log(4) + 1e-6
    assert g["holds"]


def test_retrieval_and_contrastive_loss():
    ranked = persalign.top_k([1.0, 0.0], ["a", "b", "c"], [[1, 0], [0, 1], [1, 1]], 2)
    assert [r[0] for r in ranked] == ["a", "c"]
    assert persalign.contrastive_loss([1, 0], [2, 0], [[-3, 0]]) == pytest.approx(math.log1p(math.exp(-2)), abs=1e-12)


def test_align_moves_toward_the_reference():
    rng = np.random.default_rng(3)
    pool = rng.normal(loc=1.0, size=(4000, 2))
    reference = rng.normal(size=(500, 2))
    config = {"n_is_candidates": 1000, "n_final": 500, "seed": 7, "sw_projections": 64}
    ids, report = persalign.align(pool, reference, config=config)
    assert len(ids) == 500
    assert report["metrics_after"]["amw"] < report["metrics_before"]["amw"]
    again, report2 = persalign.align(pool, reference, config=config)
    assert again == ids and report2 == report


def test_errors_carry_a_code():
    with pytest.raises(persalign.PersalignError) as info:
        persalign.align(np.zeros((10, 2)), np.zeros((5, 3)))
    assert info.value.code == "DimensionMismatch"
    with pytest.raises(persalign.PersalignError) as info:
        persalign.align(np.ones((10, 2)), np.ones((5, 2)), config={"n_final": 50, "n_is_candidates": 20})
    assert info.value.code == "InvalidConfig"
    assert persalign.default_config()["bandwidth"] == 0.2
