import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from grdr import covmodel, factor, schedule
from grdr.errors import ScheduleError
from grdr.rng import RngStream


def test_harmonic_examples():
    s1 = schedule.harmonic(1)
    assert s1.q.tolist() == [1.0] and s1.n_iterations == 1
    s4 = schedule.harmonic(4)
    np.testing.assert_array_equal(s4.q, [1, 1 / 2, 1 / 3, 1 / 4])
    assert s4.expected_N == pytest.approx(25 / 12)
    assert s4.n_iterations == 2  # ceil(48/25)
    assert schedule.harmonic(2).n_iterations == 2  # ceil(2/1.5)


def test_from_factor_examples():
    fac = factor.FactorMatrix(np.diag([2.0, 1.0]), factor.CHOLESKY, np.array([4.0, 1.0]))
    np.testing.assert_array_equal(schedule.from_factor(fac).q, [1.0, 0.5])
    eye = factor.cholesky_factor(covmodel.make_eigen_decay(5, 0.0))
    flat = schedule.from_factor(eye)
    np.testing.assert_array_equal(flat.q, np.ones(5))
    assert flat.n_iterations == 1
    pca = factor.pca_factor(covmodel.make_eigen_decay(4, -2.0))
    np.testing.assert_array_equal(schedule.from_factor(pca).q, [1, 1 / 2, 1 / 3, 1 / 4])


def test_from_factor_errors():
    unsorted = factor.FactorMatrix(np.diag([1.0, 2.0]), factor.CHOLESKY, np.array([1.0, 4.0]))
    with pytest.raises(ScheduleError, match="permute_decreasing"):
        schedule.from_factor(unsorted)
    singular = factor.cholesky_factor(covmodel.from_matrix(np.ones((2, 2))))
    with pytest.raises(ScheduleError, match="zero norm"):
        schedule.from_factor(singular)


def test_explicit_examples():
    assert schedule.explicit([1.0]).n_iterations == 1
    with pytest.raises(ScheduleError, match="non-increasing"):
        schedule.explicit([1.0, 0.5, 0.6])
    with pytest.raises(ScheduleError, match="q_0"):
        schedule.explicit([0.9, 0.5])
    with pytest.raises(ScheduleError):
        schedule.explicit([1.0, 0.0])
    with pytest.raises(ScheduleError):
        schedule.explicit([])


def test_sample_depth_examples():
    assert schedule.explicit([1.0]).sample_depth(0.3) == 1
    s = schedule.explicit([1.0, 0.5])
    assert s.sample_depth(0.25) == 2
    assert s.sample_depth(0.75) == 1
    assert s.sample_depth(0.5) == 2  # u <= q_1 means N > 1
    s3 = schedule.explicit([1.0, 1.0, 1.0])
    assert set(s3.sample_depth(np.linspace(0.01, 0.99, 50)).tolist()) == {3}


def test_sample_depth_brute_force():
    # N = #{i : q_i >= u}, checked against a direct scan
    q = np.array([1.0, 0.8, 0.8, 0.3, 0.05])
    s = schedule.explicit(q)
    u = RngStream(1, 0).uniform(2000)
    expect = np.array([int(np.sum(q >= x)) for x in u])
    np.testing.assert_array_equal(s.sample_depth(u), expect)


def test_cum_mass():
    s = schedule.harmonic(3)
    np.testing.assert_allclose(s.cum_mass, [1 - 1 / 2, 1 - 1 / 3, 1.0])


@given(st.lists(st.floats(1e-6, 1.0), min_size=0, max_size=60))
def test_iteration_count_ceiling(tail):
    q = np.concatenate([[1.0], np.sort(tail)[::-1]])
    s = schedule.explicit(q)
    n = s.n_iterations
    total = sum(Fraction(float(x)) for x in q)
    assert n * total >= len(q)
    assert (n - 1) * total < len(q)


def test_expected_depth_and_tail_law():
    draws = 1_000_000
    sched = schedule.harmonic(10)
    depth = sched.sample_depth(RngStream(7, 0).uniform(draws))
    assert depth.min() >= 1 and depth.max() <= 10
    se = depth.std(ddof=1) / math.sqrt(draws)
    assert abs(depth.mean() - sched.expected_N) <= 4 * se
    for i in range(10):
        p_hat = float(np.mean(depth > i))
        assert abs(p_hat - sched.q[i]) <= 4 * math.sqrt(sched.q[i] * (1 - sched.q[i]) / draws) + 1e-15


@pytest.mark.parametrize("d", [4, 16, 64, 256, 1024])
def test_pca_inverse_square_reproduces_harmonic(d):
    q = schedule.from_factor(factor.pca_factor(covmodel.make_eigen_decay(d, -2.0))).q
    h = schedule.harmonic(d).q
    np.testing.assert_array_max_ulp(q, h, maxulp=1)
    if d <= 16:
        np.testing.assert_array_equal(q, h)


def test_from_factor_clamps_rounding_noise():
    c = np.array([1.0, 0.25, 0.25 * (1 + 1e-15), 0.1])
    fac = factor.FactorMatrix(np.diag(np.sqrt(c)), factor.PCA, c)
    with pytest.raises(ScheduleError):
        schedule.from_factor(fac)  # increasing norms are rejected before sqrt
    q = np.array([1.0, 0.5, 0.5 + 5e-15, 0.2])
    with pytest.raises(ScheduleError):
        schedule.explicit(q)


def test_n_override_and_file_roundtrip(tmp_path):
    s = schedule.QSchedule(schedule.harmonic(5).q, "harmonic", n_override=7)
    assert s.n_iterations == 7
    p = tmp_path / "q.txt"
    schedule.harmonic(5).save(p)
    loaded = schedule.load(p)
    np.testing.assert_array_equal(loaded.q, schedule.harmonic(5).q)
    assert loaded.kind == "file"
    p.write_text("1\n0.5\n0.6\n")
    with pytest.raises(ScheduleError):
        schedule.load(p)
