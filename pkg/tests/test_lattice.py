import numpy as np
import pytest

from pollkernel.lattice import c_bruteforce, c_closed_form, c_recurrence, c_table_float, zero_region


def test_base_case_n1():
    t = c_recurrence(1, 8, 8)
    for i in range(1, 9):
        for j in range(1, 9):
            assert t(i, j) == (1 if (i == 1 or j >= i - 1) else 0)


@pytest.mark.parametrize("n", range(0, 7))
def test_three_routes_agree(n):
    t = c_recurrence(n, 12, 12)
    for i in range(1, 13):
        for j in range(1, 13):
            assert t(i, j) == c_closed_form(n, i, j) == c_bruteforce(n, i, j)


def test_zero_region_is_exact():
    for n in range(1, 6):
        t = c_recurrence(n, 14, 14)
        for i in range(1, 15):
            for j in range(1, 15):
                assert (t(i, j) == 0) == zero_region(n, i, j)


def test_boundary_of_zero_region_is_nonzero():
    # the first non-zero entry of row i = n + 2 sits at j = i - n
    assert c_recurrence(2, 6, 6)(4, 2) == 1


def test_float_table_matches_exact():
    exact = c_recurrence(5, 10, 30)
    approx = c_table_float(5, 10, 30)
    assert np.array_equal(approx, exact.values.astype(float))


def test_generating_series_partial_sums_monotone():
    t = c_recurrence(3, 6, 80)
    for q in (0.2, 0.5, 0.9):
        for i in range(1, 7):
            partial = np.cumsum([t(i, j) * q**j for j in range(1, 81)])
            assert np.all(np.diff(partial) >= 0)
            assert np.isfinite(partial[-1])


def test_bruteforce_bound_check():
    with pytest.raises(ValueError):
        c_bruteforce(2, 5, 5, graph_bound=3)
    # a larger graph gives the same count
    assert c_bruteforce(3, 2, 4) == c_bruteforce(3, 2, 4, graph_bound=40)
