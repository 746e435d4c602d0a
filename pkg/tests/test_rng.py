import numpy as np
from scipy import stats

from mimc.rng import stream_key, uniforms


def test_range_and_shape():
    u = uniforms(0, (1, 2), np.arange(1000), 3)
    assert u.shape == (1000, 3)
    assert np.all((u >= 0) & (u < 1))


def test_batch_independence():
    full = uniforms(7, (3, 0), np.arange(100), 2)
    part = uniforms(7, (3, 0), np.arange(40, 60), 2)
    np.testing.assert_array_equal(full[40:60], part)
    one = uniforms(7, (3, 0), [55], 2)
    np.testing.assert_array_equal(full[55], one[0])


def test_keys_and_seeds_give_distinct_streams():
    keys = {int(stream_key(s, k)) for s in range(4) for k in [(0,), (1,), (0, 0), (0, 1), (1, 0)]}
    assert len(keys) == 20


def test_uniformity_and_decorrelation():
    u = uniforms(1, (2, 2), np.arange(20000), 2).ravel()
    assert stats.kstest(u, "uniform").pvalue > 1e-3
    a = uniforms(1, (2, 2), np.arange(20000), 1)[:, 0]
    b = uniforms(1, (2, 3), np.arange(20000), 1)[:, 0]
    c = uniforms(2, (2, 2), np.arange(20000), 1)[:, 0]
    assert abs(np.corrcoef(a, b)[0, 1]) < 0.03
    assert abs(np.corrcoef(a, c)[0, 1]) < 0.03
