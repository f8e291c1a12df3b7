import warnings

import numpy as np
import pytest
from scipy.linalg import subspace_angles

from morpipe import dmd
from morpipe.dmd import DMDModel, SnapshotSeries
from morpipe.errors import ArgumentError, InputError


def linear_series(A, x1, m, t0=0.0, dt=1.0):
    cols = [np.asarray(x1, dtype=float)]
    for _ in range(m - 1):
        cols.append(A @ cols[-1])
    return SnapshotSeries(np.column_stack(cols), t0, dt)


def embedded_operator(rng, n, r, radius=0.95):
    """Rank-r operator ``Q B Q^T`` and a start vector inside range(Q)."""
    Q, _ = np.linalg.qr(rng.standard_normal((n, r)))
    B = rng.standard_normal((r, r))
    B *= radius / np.max(np.abs(np.linalg.eigvals(B)))
    return Q @ B @ Q.T, Q @ rng.standard_normal(r), np.linalg.eigvals(B)


def match_sorted(a, b):
    key = lambda z: (round(z.real, 6), round(z.imag, 6))
    return np.array(sorted(a, key=key)), np.array(sorted(b, key=key))


def test_scalar_growth():
    v = np.array([1.0, -2.0, 0.5])
    series = SnapshotSeries(np.column_stack([2.0**k * v for k in range(1, 6)]))
    model = dmd.fit(series, rank=1)
    assert model.rank == 1
    assert abs(model.eigenvalues[0] - 2) <= 1e-10
    mode = model.modes[:, 0]
    assert abs(abs(np.vdot(mode, v)) - np.linalg.norm(mode) * np.linalg.norm(v)) <= 1e-10


def test_rotation_eigenvalues():
    A = np.array([[0.0, -1.0], [1.0, 0.0]])
    model = dmd.fit(linear_series(A, [1.0, 0.0], 6), rank=2)
    got, want = match_sorted(model.eigenvalues, [1j, -1j])
    np.testing.assert_allclose(got, want, atol=1e-10)


@pytest.mark.parametrize("kind", ["exact", "projected"])
def test_embedded_rank_four(rng, kind):
    A, x1, lam = embedded_operator(rng, 100, 4)
    series = linear_series(A, x1, 12)
    model = dmd.fit(series, rank=4, mode_kind=kind)
    got, want = match_sorted(model.eigenvalues, lam)
    np.testing.assert_allclose(got, want, atol=1e-8)
    assert dmd.relative_error(model, series) <= 1e-8


def test_rank_too_large():
    series = SnapshotSeries(np.random.default_rng(0).standard_normal((3, 10)))
    with pytest.raises(ArgumentError):
        dmd.fit(series, rank=4)
    short = SnapshotSeries(np.random.default_rng(0).standard_normal((10, 3)))
    with pytest.raises(ArgumentError):
        dmd.fit(short, rank=3)


def test_zero_singular_values_reduce_rank(rng):
    A, x1, _ = embedded_operator(rng, 20, 2)
    series = linear_series(A, x1, 8)
    with pytest.warns(UserWarning, match="reduced to 2"):
        model = dmd.fit(series, rank=5)
    assert model.rank == 2


def test_series_validation():
    with pytest.raises(InputError):
        SnapshotSeries(np.ones((3, 1)))
    with pytest.raises(InputError):
        SnapshotSeries(np.ones((3, 4)), dt=0.0)
    with pytest.raises(ArgumentError):
        dmd.fit(SnapshotSeries(np.eye(3)), mode_kind="fancy")


def test_reconstruct_first_and_identity():
    v = np.array([3.0, 1.0, -1.0])
    series = SnapshotSeries(np.column_stack([v] * 4))
    model = dmd.fit(series, rank=1)
    np.testing.assert_allclose(model.eigenvalues, [1.0], atol=1e-12)
    for k in range(1, 8):
        np.testing.assert_allclose(dmd.reconstruct(model, k), v, atol=1e-10)


def test_reconstruct_training_window(rng):
    A, x1, _ = embedded_operator(rng, 30, 5, radius=1.0)
    series = linear_series(A, x1, 15)
    model = dmd.fit(series, rank=5)
    rec = dmd.reconstruct(model, np.arange(1, 16))
    err = np.linalg.norm(rec - series.data, axis=0) / np.linalg.norm(series.data, axis=0)
    assert err.max() <= 1e-8
    np.testing.assert_allclose(dmd.reconstruct(model, 1), x1, atol=1e-8 * np.linalg.norm(x1))


def test_reconstruct_rejects_zero_index():
    model = dmd.fit(SnapshotSeries(np.ones((2, 3))), rank=1)
    with pytest.raises(ArgumentError):
        dmd.reconstruct(model, 0)


def test_forecast_at_t0_matches_first(rng):
    A, x1, _ = embedded_operator(rng, 12, 3)
    model = dmd.fit(linear_series(A, x1, 10, t0=2.5, dt=0.2), rank=3)
    np.testing.assert_allclose(dmd.forecast(model, 2.5), dmd.reconstruct(model, 1), atol=1e-12)
    # integer steps agree with discrete powers
    np.testing.assert_allclose(dmd.forecast(model, 2.5 + 7 * 0.2), dmd.reconstruct(model, 8), atol=1e-10)
    with pytest.raises(ArgumentError):
        dmd.forecast(model, 2.0)


def test_forecast_decays():
    v = np.array([1.0, 2.0])
    series = SnapshotSeries(np.column_stack([0.5**k * v for k in range(5)]), dt=1.0)
    model = dmd.fit(series, rank=1)
    norms = [np.linalg.norm(dmd.forecast(model, t)) for t in np.linspace(0, 60, 31)]
    assert np.all(np.diff(norms) < 0)
    assert norms[-1] < 1e-15


def test_forecast_sinusoid_twice_horizon(rng):
    v, w = rng.standard_normal(40), rng.standard_normal(40)
    dt, m = 0.1, 30
    signal = lambda t: np.sin(t) * v + np.cos(t) * w
    k = np.arange(1, m + 1)
    series = SnapshotSeries(np.column_stack([signal(kk * dt) for kk in k]), t0=dt, dt=dt)
    model = dmd.fit(series, rank=2)
    t = 2 * m * dt
    truth = signal(t)
    pred = dmd.forecast(model, t)
    assert np.linalg.norm(pred - truth) / np.linalg.norm(truth) <= 1e-6
    np.testing.assert_allclose(np.abs(model.frequencies.imag), [1.0, 1.0], atol=1e-8)


def test_forecast_drops_zero_modes():
    model = DMDModel(
        modes=np.array([[1.0, 0.0], [0.0, 1.0]], dtype=complex),
        eigenvalues=np.array([1.0, 0.0], dtype=complex),
        amplitudes=np.array([1.0, 1.0], dtype=complex),
        mode_kind="exact",
        t0=0.0,
        dt=1.0,
    )
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        np.testing.assert_allclose(dmd.forecast(model, 0.0), [1.0, 1.0])
    with pytest.warns(UserWarning, match="zero-eigenvalue"):
        np.testing.assert_allclose(dmd.forecast(model, 3.0), [1.0, 0.0])


def test_negative_eigenvalue_frequency():
    series = SnapshotSeries(np.array([[1.0, -0.5, 0.25, -0.125]]), dt=2.0)
    model = dmd.fit(series, rank=1)
    omega = model.frequencies[0]
    assert abs(omega.imag - np.pi / 2.0) <= 1e-12
    assert abs(omega.real - np.log(0.5) / 2.0) <= 1e-12


def test_spectrum_rows_and_order(rng):
    model = dmd.fit(SnapshotSeries(np.column_stack([2.0**k * np.ones(3) for k in range(4)])), rank=1)
    assert len(dmd.spectrum(model)) == 1
    A, x1, _ = embedded_operator(rng, 20, 4)
    model = dmd.fit(linear_series(A, x1, 10), rank=4)
    amps = [row[2] for row in dmd.spectrum(model)]
    assert amps == sorted(amps, reverse=True)
    table = dmd.spectrum_table(model)
    assert table.shape == (4, 5)


def test_relative_error_with_orthogonal_noise(rng):
    n, r, eps = 60, 3, 1e-4
    A, x1, _ = embedded_operator(rng, n, r, radius=1.0)
    clean = linear_series(A, x1, 20).data
    Q, _ = np.linalg.qr(clean)
    N = rng.standard_normal(clean.shape)
    N -= Q[:, :r] @ (Q[:, :r].T @ N)
    N *= eps * np.linalg.norm(clean) / np.linalg.norm(N)
    noisy = SnapshotSeries(clean + N)
    err = dmd.relative_error(dmd.fit(noisy, rank=r), noisy)
    assert eps / 10 <= err <= 10 * eps


def test_exact_modes_are_operator_eigenvectors(rng):
    data = rng.standard_normal((12, 9))
    series = SnapshotSeries(data)
    X, Y = data[:, :-1], data[:, 1:]
    A = Y @ np.linalg.pinv(X)
    model = dmd.fit(series, rank="full")
    Phi, lam = model.modes, model.eigenvalues
    assert np.linalg.norm(A @ Phi - Phi * lam) <= 1e-6 * np.linalg.norm(A)


def test_projected_and_exact_span_same_subspace(rng):
    A, x1, _ = embedded_operator(rng, 50, 4)
    series = linear_series(A, x1, 10)
    ex = dmd.fit(series, rank=4, mode_kind="exact").modes
    pr = dmd.fit(series, rank=4, mode_kind="projected").modes
    # complex spans compared through their real stacked representation
    stack = lambda M: np.vstack([np.hstack([M.real, -M.imag]), np.hstack([M.imag, M.real])])
    assert subspace_angles(stack(ex), stack(pr)).max() <= 1e-8


def test_conjugate_symmetry(rng):
    data = rng.standard_normal((15, 12))
    model = dmd.fit(SnapshotSeries(data), rank="full")
    lam = model.eigenvalues
    for z in lam:
        assert np.min(np.abs(lam - np.conj(z))) <= 1e-9 * max(1, abs(z))
    full = model.modes @ dmd.dynamics(model, np.arange(1, 13))
    assert np.abs(full.imag).max() <= 1e-9 * np.abs(full.real).max()


def test_model_json_round_trip(tmp_path, rng):
    A, x1, _ = embedded_operator(rng, 10, 3)
    model = dmd.fit(linear_series(A, x1, 8, t0=1.0, dt=0.5), rank=3)
    path = tmp_path / "model.json"
    dmd.save_model(path, model)
    back = dmd.load_model(path)
    np.testing.assert_array_equal(back.modes, model.modes)
    np.testing.assert_array_equal(back.eigenvalues, model.eigenvalues)
    np.testing.assert_array_equal(back.amplitudes, model.amplitudes)
    assert (back.mode_kind, back.t0, back.dt) == (model.mode_kind, 1.0, 0.5)


def test_series_round_trip(tmp_path, rng):
    series = SnapshotSeries(rng.standard_normal((7, 5)), t0=0.25, dt=0.125)
    series.save(tmp_path / "series.csv")
    back = SnapshotSeries.load(tmp_path / "series.csv")
    np.testing.assert_array_equal(back.data, series.data)
    assert (back.t0, back.dt) == (0.25, 0.125)
    (tmp_path / "series.json").write_text('{"t0": 0, "dt": 1, "n": 7, "m": 4}')
    with pytest.raises(InputError):
        SnapshotSeries.load(tmp_path / "series.csv")
