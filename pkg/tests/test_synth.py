import numpy as np
import pytest

from spectralmc.core import Dataset, Mask, Shape, metric_nmse
from spectralmc.synth import (
    SynthConfig,
    add_noise,
    column_mean_fill,
    gen_mask_uniform,
    gen_setting1,
    gen_setting2,
    make_dataset,
    smooth_image,
    soft_impute_init,
)


def test_config_validation():
    with pytest.raises(ValueError):
        SynthConfig(5, 5, 6, 0.2)
    with pytest.raises(ValueError):
        SynthConfig(5, 5, 2, 1.0)
    with pytest.raises(ValueError):
        SynthConfig(5, 5, 2, 0.2, setting=3)


def test_setting1_rank_and_determinism():
    cfg = SynthConfig(2, 2, 1, 0.2, seed=4)
    truth, _ = gen_setting1(cfg)
    s = np.linalg.svd(truth, compute_uv=False)
    assert np.count_nonzero(s > 1e-8 * s[0]) == 1
    np.testing.assert_array_equal(truth, gen_setting1(cfg)[0])
    for seed in range(10):
        truth, _ = gen_setting1(SynthConfig(30, 20, 3, 0.2, seed=seed))
        s = np.linalg.svd(truth, compute_uv=False)
        assert np.count_nonzero(s > 1e-8 * s[0]) == 3


def test_setting1_factors_look_standard_normal():
    _, (U, V) = gen_setting1(SynthConfig(200, 150, 4, 0.2, seed=1))
    vals = np.concatenate([U.ravel(), V.ravel()])
    assert abs(np.mean(np.abs(vals)) - np.sqrt(2 / np.pi)) < 4 / np.sqrt(vals.size)


def test_setting2_degenerate_weight_and_scale():
    cfg = SynthConfig(60, 70, 2, 0.2, setting=2, seed=8)
    np.testing.assert_array_equal(gen_setting2(cfg, weight=0.0), gen_setting1(cfg)[0])
    np.testing.assert_array_equal(gen_setting2(cfg), gen_setting2(cfg))
    ratios = []
    for seed in range(20):
        c = SynthConfig(60, 70, 2, 0.2, setting=2, seed=seed)
        low = gen_setting1(c)[0]
        ratios.append(np.linalg.norm(gen_setting2(c) - low) / np.linalg.norm(low))
    target = 0.1 * np.sqrt(50 / 2)
    assert 0.5 * target < np.mean(ratios) < 1.5 * target


def test_mask_exact_count():
    shape = Shape(10, 10)
    assert gen_mask_uniform(shape, 0.0, 1).n == 100
    assert gen_mask_uniform(shape, 0.5, 1).n == 50
    with pytest.raises(ValueError):
        gen_mask_uniform(Shape(2, 2), 0.9, 1)


def test_mask_inclusion_frequencies():
    shape = Shape(4, 4)
    counts = np.zeros((4, 4))
    for seed in range(2000):
        counts += gen_mask_uniform(shape, 0.5, seed).to_bool()
    assert np.all(np.abs(counts / 2000 - 0.5) < 0.05)


def test_noise():
    truth = np.arange(12.0).reshape(3, 4)
    mask = gen_mask_uniform(Shape(3, 4), 0.25, 0)
    data = add_noise(truth, mask, 0.0, 0)
    np.testing.assert_array_equal(data.y, truth[mask.rows, mask.cols])
    big = np.zeros((100, 50))
    d = add_noise(big, Mask.full(Shape(100, 50)), 1.0, 3)
    assert 0.9 <= np.var(d.y) <= 1.1
    np.testing.assert_array_equal(d.y, add_noise(big, Mask.full(Shape(100, 50)), 1.0, 3).y)


def test_replicate_streams_differ():
    a = make_dataset(SynthConfig(10, 10, 2, 0.3, seed=1))
    b = make_dataset(SynthConfig(10, 10, 2, 0.3, seed=2))
    assert not np.array_equal(a.truth, b.truth)
    c = make_dataset(SynthConfig(10, 10, 2, 0.3, seed=1))
    np.testing.assert_array_equal(a.y, c.y)


def test_soft_impute_trivial_cases(rng):
    Y = rng.standard_normal((5, 6))
    full = Dataset(Mask.full(Shape(5, 6)), Y.ravel())
    np.testing.assert_allclose(soft_impute_init(full, shrink=0.0, iters=1), Y, atol=1e-12)
    top = np.linalg.svd(Y, compute_uv=False)[0]
    np.testing.assert_array_equal(soft_impute_init(full, shrink=top + 1, iters=5), 0.0)


def test_soft_impute_recovers_rank_one():
    rng = np.random.default_rng(2)
    truth = np.outer(rng.standard_normal(20), rng.standard_normal(20))
    mask = gen_mask_uniform(Shape(20, 20), 0.2, 5)
    data = add_noise(truth, mask, 0.0, 0)
    est = soft_impute_init(data, shrink=0.1, iters=100, tol=1e-8)
    assert metric_nmse(est, truth) < 0.05


def test_soft_impute_objective_decreases():
    data = make_dataset(SynthConfig(30, 25, 3, 0.4, seed=6))
    trace = []
    soft_impute_init(data, shrink=3.0, iters=60, tol=0.0, trace=trace)
    assert len(trace) == 60
    assert np.all(np.diff(trace) <= 1e-9 * np.abs(trace[1:]))


def test_column_mean_fill():
    mask = Mask(Shape(2, 3), [0, 1, 0], [0, 0, 1])
    data = Dataset(mask, [1.0, 3.0, 5.0])
    out = column_mean_fill(data)
    np.testing.assert_allclose(out, [[1.0, 5.0, 3.0], [3.0, 5.0, 3.0]])


def test_smooth_image_range():
    img = smooth_image(64)
    assert img.shape == (64, 64)
    assert img.min() >= 0 and img.max() <= 255
