import numpy as np
import pytest

from bdsdelab.errors import CapacityError, InvalidArgument
from bdsdelab.grids import make_uniform_grid
from bdsdelab.noise import (
    NoiseConfig,
    antithetic_extend,
    b_node_values,
    cumulative,
    dump_bundle,
    generate,
    load_bundle,
    w_node_values,
)


@pytest.fixture(scope="module")
def big_bundle():
    """Cloud big enough (>= 1e4 samples) for the statistical invariants."""
    grid = make_uniform_grid(1.0, 20)
    return generate(grid, NoiseConfig(seed=3, m_outer=10, n_inner=1200))


def test_same_config_twice_identical(small_grid):
    cfg = NoiseConfig(seed=99, m_outer=3, n_inner=10)
    b1 = generate(small_grid, cfg)
    b2 = generate(small_grid, cfg)
    assert np.array_equal(b1.dW, b2.dW)
    assert np.array_equal(b1.dB, b2.dB)


def test_different_seeds_differ(small_grid):
    b1 = generate(small_grid, NoiseConfig(seed=1, m_outer=2, n_inner=5))
    b2 = generate(small_grid, NoiseConfig(seed=2, m_outer=2, n_inner=5))
    assert not np.array_equal(b1.dW, b2.dW)


def test_dW_mean_within_four_standard_errors(big_bundle):
    dt = big_bundle.grid.dt
    n_entries = big_bundle.dW.size
    se = np.sqrt(dt / n_entries)
    assert abs(big_bundle.dW.mean()) <= 4 * se


def test_dW_variance_within_ten_percent(big_bundle):
    dt = big_bundle.grid.dt
    assert big_bundle.dW.var() == pytest.approx(dt, rel=0.10)
    assert big_bundle.dB.var() == pytest.approx(dt, rel=0.10)


def test_w_dB_independence_proxy(big_bundle):
    # pair each dW entry with its outer sample's dB entry at the same step
    dW = big_bundle.dW[:, :, :, 0]  # (m, nin, n)
    dB = big_bundle.dB[:, :, 0]  # (m, n)
    paired = dW * dB[:, None, :]
    corr = paired.mean() / (dW.std() * dB.std())
    se = 1.0 / np.sqrt(paired.size)
    assert abs(corr) <= 4 * se


def test_capacity_error_names_cap(small_grid):
    cfg = NoiseConfig(seed=0, m_outer=10, n_inner=100)
    with pytest.raises(CapacityError) as exc:
        generate(small_grid, cfg, mem_cap_bytes=1024)
    assert "1024" in str(exc.value)


def test_config_validation():
    with pytest.raises(InvalidArgument):
        NoiseConfig(seed=0, m_outer=0, n_inner=10)
    with pytest.raises(InvalidArgument):
        NoiseConfig(seed=0, m_outer=1, n_inner=1)
    with pytest.raises(InvalidArgument):
        NoiseConfig(seed=-1, m_outer=1, n_inner=2)


def test_cumulative_paths(small_bundle):
    w, b = cumulative(small_bundle, 1, 3)
    assert w[0, 0] == 0.0 and b[0, 0] == 0.0
    assert w[-1, 0] == pytest.approx(small_bundle.dW[1, 3, :, 0].sum(), abs=1e-15)
    assert b[-1, 0] == pytest.approx(small_bundle.dB[1, :, 0].sum(), abs=1e-15)


def test_b_path_shared_across_inner(small_bundle):
    _, b0 = cumulative(small_bundle, 2, 0)
    _, b1 = cumulative(small_bundle, 2, 7)
    assert np.array_equal(b0, b1)


def test_cumulative_rejects_bad_index(small_bundle):
    with pytest.raises(IndexError):
        cumulative(small_bundle, 99, 0)
    with pytest.raises(IndexError):
        cumulative(small_bundle, 0, 9999)


def test_node_value_helpers_match_cumulative(small_bundle):
    W = w_node_values(small_bundle)
    B = b_node_values(small_bundle)
    w, b = cumulative(small_bundle, 0, 1)
    assert np.allclose(W[0, 1], w)
    assert np.allclose(B[0], b)


def test_antithetic_extend(small_bundle):
    ext = antithetic_extend(small_bundle)
    nin = small_bundle.config.n_inner
    assert ext.config.n_inner == 2 * nin
    assert np.array_equal(ext.dW[:, nin:], -small_bundle.dW)
    # pairwise cancellation is exact; the grand mean only up to summation order
    assert np.all(ext.dW[:, :nin] + ext.dW[:, nin:] == 0.0)
    assert abs(ext.dW.mean()) < 1e-15
    assert np.array_equal(ext.dB, small_bundle.dB)  # bit-identical


def test_dump_load_roundtrip(small_bundle, tmp_path):
    path = tmp_path / "bundle.bin"
    dump_bundle(small_bundle, path)
    back = load_bundle(path)
    assert np.array_equal(back.dW, small_bundle.dW)
    assert np.array_equal(back.dB, small_bundle.dB)
    assert back.config == small_bundle.config
    assert back.grid == small_bundle.grid


def test_load_rejects_non_bundle(tmp_path):
    path = tmp_path / "junk.bin"
    path.write_bytes(b"\x00" * 64)
    with pytest.raises(InvalidArgument):
        load_bundle(path)


def test_increments_read_only(small_bundle):
    with pytest.raises(ValueError):
        small_bundle.dW[0, 0, 0, 0] = 1.0
