import numpy as np

from shearlab.rng import RandomStream, gaussian_pair, uniform_points


def test_bitwise_reproducible():
    a = gaussian_pair(42, np.arange(1000), 7)
    b = gaussian_pair(42, np.arange(1000), 7)
    assert np.array_equal(a, b)
    # and partition-independent
    c = np.concatenate([gaussian_pair(42, np.arange(500), 7),
                        gaussian_pair(42, np.arange(500, 1000), 7)])
    assert np.array_equal(a, c)


def test_distinct_streams_and_counters():
    a = gaussian_pair(42, 0, np.arange(4096))
    b = gaussian_pair(42, 1, np.arange(4096))
    assert not np.array_equal(a, b)
    assert not np.array_equal(gaussian_pair(1, 0, 0), gaussian_pair(2, 0, 0))


def test_gaussian_moments():
    g = gaussian_pair(9, np.arange(200000), 3).ravel()
    n = g.size
    assert abs(g.mean()) < 4.0 / np.sqrt(n)
    assert abs(g.std() - 1.0) < 4.0 / np.sqrt(n)
    assert abs((g**3).mean()) < 5 * np.sqrt(15.0 / n)


def test_uniform_points_in_unit_square():
    u = uniform_points(3, np.arange(100000), 1)
    assert u.min() >= 0.0 and u.max() < 1.0
    assert abs(u.mean() - 0.5) < 0.005


def test_stream_counter_advances():
    s = RandomStream.for_particles(5, 10)
    g1 = s.next_gaussians()
    g2 = s.next_gaussians()
    assert s.counter == 2
    assert not np.array_equal(g1, g2)
    assert np.array_equal(g1, s.peek(0))
