"""Exact-law and determinism tests for the fGn sampler."""
import numpy as np
import pytest

from fracvolt.errors import ValidationError
from fracvolt.fgn import (
    HurstParam,
    SimGrid,
    circulant_eigenvalues,
    fbm_from_fgn,
    fgn_autocovariance,
    generate_fgn,
    write_path_csv,
)
from oracles import fgn_autocov_ref


def test_autocovariance_matches_reference_formula():
    lags = np.arange(0, 64)
    for h in (0.55, 0.6, 0.7, 0.74, 0.9):
        got = fgn_autocovariance(lags, h)
        ref = fgn_autocov_ref(lags, h)
        assert np.allclose(got, ref, rtol=1e-14, atol=0)
    assert fgn_autocovariance(0, 0.6) == 1.0


def test_autocovariance_rejects_negative_lag():
    with pytest.raises(ValidationError):
        fgn_autocovariance(-1, 0.6)


def test_hurst_param_range():
    assert HurstParam(0.61).h == 0.61
    for bad in (0.5, 1.0, 0.3, 1.2):
        with pytest.raises(ValidationError):
            HurstParam(bad)


def test_circulant_eigenvalues_nonnegative_small_sweep():
    for h in (0.55, 0.6, 0.65, 0.7, 0.74):
        for n in (2, 3, 8, 64, 257):
            lam = circulant_eigenvalues(n, h)
            assert lam.shape == (2 * (n - 1),) if n > 1 else True
            assert lam.min() > -1e-12 * lam.max()


def test_circulant_eigenvalues_sum_recovers_covariance():
    # the inverse DFT of the eigenvalue vector is the embedded row
    n, h = 33, 0.68
    lam = circulant_eigenvalues(n, h)
    row = np.fft.ifft(lam).real
    ref = fgn_autocov_ref(np.arange(n), h)
    assert np.allclose(row[:n], ref, rtol=0, atol=1e-12)


def test_generate_fgn_deterministic_and_stream_separated():
    grid = SimGrid(dt=0.25, n_steps=32)
    a = generate_fgn(grid, 0.7, seed=42, path_index=3)
    b = generate_fgn(grid, 0.7, seed=42, path_index=3)
    c = generate_fgn(grid, 0.7, seed=42, path_index=4)
    d = generate_fgn(grid, 0.7, seed=43, path_index=3)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    assert not np.array_equal(a, d)
    assert a.shape == (32,)


def test_generate_fgn_single_step_scale():
    grid = SimGrid(dt=0.0625, n_steps=1)
    h = 0.7
    draws = np.array([generate_fgn(grid, h, 9, i)[0] for i in range(4000)])
    var = draws.var()
    target = grid.dt ** (2 * h)
    # chi-square spread of a 4000-sample variance stays within 4 sigma
    se = target * np.sqrt(2.0 / 4000)
    assert abs(var - target) < 4 * se


def test_generate_fgn_covariance_within_four_se():
    h = 0.62
    grid = SimGrid(dt=0.5, n_steps=8)
    n_paths = 4000
    incs = np.stack([generate_fgn(grid, h, 2024, i) for i in range(n_paths)])
    scale = grid.dt ** (2 * h)
    cov_target = scale * fgn_autocov_ref(np.arange(grid.n_steps), h)
    prods = incs[:, :1] * incs  # inc_0 * inc_k per path
    est = prods.mean(axis=0)
    # Isserlis: Var(inc_0 inc_k) = c_00 c_kk + c_0k^2
    var_prod = scale**2 * 1.0 + cov_target**2
    se = np.sqrt(var_prod / n_paths)
    assert np.all(np.abs(est - cov_target) < 4 * se)


def test_fbm_from_fgn_and_csv_roundtrip(tmp_path):
    inc = np.array([0.5, -0.25, 1.0])
    path = fbm_from_fgn(inc, dt=0.5)
    assert path.values[0] == 0.0
    assert np.allclose(path.values, [0.0, 0.5, 0.25, 1.25])
    dest = tmp_path / "path.csv"
    write_path_csv(path, dest)
    rows = dest.read_text().strip().split("\n")
    assert rows[0] == "t,value"
    body = np.array([[float(v) for v in r.split(",")] for r in rows[1:]])
    assert np.array_equal(body[:, 0], path.grid.times)
    assert np.array_equal(body[:, 1], path.values)


def test_simgrid_validation():
    with pytest.raises(ValidationError):
        SimGrid(dt=0.0, n_steps=4)
    with pytest.raises(ValidationError):
        SimGrid(dt=0.5, n_steps=-1)
    g = SimGrid(dt=0.5, n_steps=4)
    assert g.horizon == 2.0
    assert np.array_equal(g.times, [0.0, 0.5, 1.0, 1.5, 2.0])
