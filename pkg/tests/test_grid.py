import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from selfsup.grid import (Partition, as_image, gather, partition_grid, partition_random,
                          partition_singletons, scatter)


def test_as_image_rejects_bad_input():
    with pytest.raises(ValueError):
        as_image(np.zeros(4))
    with pytest.raises(ValueError):
        as_image([[0.0, np.nan]])


def test_singletons():
    p = partition_singletons(5)
    assert len(p) == 5
    assert [list(J) for J in p] == [[0], [1], [2], [3], [4]]


def test_grid_4x4_on_8x8():
    p = partition_grid(8, 8, 4, 4)
    assert len(p) == 16
    assert all(J.size == 4 for J in p)
    # pixel (r, c) sits in subset (r % 4) * 4 + c % 4
    assert p.labels[5 * 8 + 6] == (5 % 4) * 4 + 6 % 4


def test_grid_needs_fitting_period():
    with pytest.raises(ValueError):
        partition_grid(3, 3, 4, 4)


def test_partition_validation():
    with pytest.raises(ValueError):
        Partition(3, (np.array([0, 1]), np.array([1, 2])))  # overlap
    with pytest.raises(ValueError):
        Partition(3, (np.array([0]), np.array([1])))  # does not cover
    with pytest.raises(ValueError):
        Partition(2, (np.array([0, 1]), np.array([], dtype=int)))  # empty subset


def test_random_partition_deterministic():
    a = partition_random(100, 7, seed=3)
    b = partition_random(100, 7, seed=3)
    assert np.array_equal(a.labels, b.labels)
    assert len(a) == 7


def test_random_partition_too_many_subsets():
    with pytest.raises(ValueError):
        partition_random(3, 4)


def test_gather_scatter_round_trip():
    img = np.arange(12.0).reshape(3, 4)
    J = np.array([0, 5, 11])
    assert list(gather(img, J)) == [0.0, 5.0, 11.0]
    out = scatter(img, J, [-1, -2, -3])
    assert out.ravel()[5] == -2 and img.ravel()[5] == 5.0
    with pytest.raises(IndexError):
        gather(img, [12])


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 12), st.integers(1, 12), st.integers(1, 4), st.integers(1, 4))
def test_grid_partition_is_a_partition(w, h, gw, gh):
    if gw > w or gh > h:
        return
    p = partition_grid(w, h, gw, gh)
    allidx = np.sort(np.concatenate(list(p)))
    assert np.array_equal(allidx, np.arange(w * h))
    assert len(p) == gw * gh


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 200), st.integers(1, 200), st.integers(0, 1000))
def test_random_partition_is_a_partition(m, k, seed):
    if k > m:
        return
    p = partition_random(m, k, seed)
    sizes = [J.size for J in p]
    assert sum(sizes) == m and min(sizes) >= 1
    assert np.array_equal(np.sort(np.concatenate(list(p))), np.arange(m))
