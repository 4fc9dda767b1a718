import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from aimdalloc import AimdAllocator, CentralizedAllocator, CostFunction, sample_paper_cost


def test_centralized_allocator_closed_form():
    costs = [CostFunction.from_terms([(a, [2])]) for a in (1, 2, 4)]
    est = CentralizedAllocator(capacities=[7.0]).fit(costs)
    np.testing.assert_allclose(est.predict()[:, 0], [4, 2, 1], atol=1e-6)
    assert est.n_iter_ == est.solution_.iterations


def test_aimd_allocator_params_and_clone():
    est = AimdAllocator(capacities=[0.6, 0.4, 0.5], alpha=[0.025, 0.02, 0.0225], horizon=500, seed=4)
    params = est.get_params()
    assert params["horizon"] == 500 and params["seed"] == 4
    twin = clone(est).set_params(seed=5)
    assert twin.seed == 5 and est.seed == 4
    with pytest.raises(NotFittedError):
        est.predict()


def test_aimd_allocator_fit_tracks_oracle():
    rng = np.random.default_rng(0)
    costs = [sample_paper_cost(rng) for _ in range(8)]
    caps = [0.8, 0.5, 0.6]
    ref = CentralizedAllocator(capacities=caps).fit(costs).allocation_
    est = AimdAllocator(capacities=caps, alpha=[0.0025, 0.002, 0.00225], beta=[0.7, 0.85, 0.75],
                        horizon=20000, seed=1).fit(costs)
    assert est.allocation_.shape == (8, 3)
    assert est.clamp_count_ == 0
    assert np.all(est.event_counts_ > 0)
    assert est.score(costs, ref) > -0.15
    report = est.report(ref)
    assert report.rel_error.shape == (3,)
    again = clone(est).fit(costs)
    np.testing.assert_array_equal(again.allocation_, est.allocation_)
