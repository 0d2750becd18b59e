import numpy as np

from domain.series_utils import true_runs


def test_true_runs_inclusive_bounds():
    mask = np.array([False, True, True, False, True, False, False, True])
    assert true_runs(mask) == [(1, 2), (4, 4), (7, 7)]


def test_true_runs_edges_and_empty():
    assert true_runs(np.array([True, True, True])) == [(0, 2)]
    assert true_runs(np.array([False, False])) == []
    assert true_runs(np.array([], dtype=bool)) == []
