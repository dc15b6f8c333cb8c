import numpy as np
import pytest
from hypothesis import given, strategies as st

from tdse_toolkit import (
    QuantumModel,
    ToolkitError,
    ValueGrid,
    build_correctors,
    build_pair_toolkit,
    build_rigid_rotor,
    build_toolkit,
    commutator,
    fractional_power,
    load_toolkit,
    make_grid,
    random_model,
    save_toolkit,
    spectral_factorize,
    unitarity_defect,
)
from oracles import expm_series


def scalar_model(h=2.0, m=1.0):
    return QuantumModel(np.array([[h]]), np.array([[m]]), np.array([1.0]))


def test_scalar_entries():
    tk = build_toolkit(scalar_model(), make_grid(0, 1, 1), 0.5)
    np.testing.assert_allclose(tk.matrices[:, 0, 0], [np.exp(-1j), np.exp(-0.5j)], atol=1e-15)
    assert tk.build_cost.eigendecompositions == 2


def test_single_value_grid():
    tk = build_toolkit(scalar_model(), ValueGrid([0.25]), 0.5)
    assert tk.grid.m == 0 and tk.matrices.shape == (1, 1, 1)
    np.testing.assert_allclose(tk.entry(0).matrix, [[np.exp(-0.5j * 1.75)]])


def test_rotor_entries_unitary():
    tk = build_toolkit(build_rigid_rotor(3), make_grid(-2, 2, 16), 0.3)
    assert len(tk.matrices) == 17
    assert max(unitarity_defect(U) for U in tk.matrices) <= 1e-12


def test_entries_against_series_and_eigenvectors():
    model = build_rigid_rotor(4)
    g = make_grid(-1, 1, 4)
    tk = build_toolkit(model, g, 0.05)
    for ell, v in enumerate(g.values):
        H = model.hamiltonian(v)
        np.testing.assert_allclose(tk.matrices[ell], expm_series(-0.05j * H), atol=1e-13)
        f = spectral_factorize(H)
        for k in range(model.dim):
            vec = f.eigenvectors[:, k]
            np.testing.assert_allclose(tk.matrices[ell] @ vec, np.exp(-0.05j * f.eigenvalues[k]) * vec, atol=1e-10)


def test_partial_build_matches_full():
    model = random_model(5, 2)
    g = make_grid(-1, 1, 20)
    full = build_toolkit(model, g, 0.2, keep_factors=True)
    part = build_toolkit(model, g, 0.2, keep_factors=True, indices=[3, 7, 7, 19])
    np.testing.assert_array_equal(part.indices, [3, 7, 19])
    for ell in (3, 7, 19):
        assert np.array_equal(part.entry(ell).matrix, full.entry(ell).matrix)
    with pytest.raises(ToolkitError, match="grid index 4"):
        part.rows([4])
    assert not part.is_complete and full.is_complete


def test_threaded_build_is_identical():
    model = build_rigid_rotor(6)
    g = make_grid(-3, 3, 1500)
    a = build_toolkit(model, g, 0.1)
    b = build_toolkit(model, g, 0.1, jobs=3)
    assert np.array_equal(a.matrices, b.matrices)


def test_build_rejects_bad_step():
    with pytest.raises(ValueError):
        build_toolkit(scalar_model(), make_grid(0, 1, 1), 0.0)


def test_fractional_power_endpoints():
    tk = build_toolkit(random_model(4, 1), make_grid(-1, 1, 3), 0.7, keep_factors=True)
    np.testing.assert_allclose(fractional_power(tk, 2, 1.0).matrix, tk.matrices[2], atol=1e-13)
    np.testing.assert_allclose(fractional_power(tk, 2, 0.0).matrix, np.eye(4), atol=1e-14)
    with pytest.raises(ValueError):
        fractional_power(tk, 2, 1.5)
    with pytest.raises(ToolkitError):
        fractional_power(build_toolkit(random_model(4, 1), make_grid(-1, 1, 3), 0.7), 0, 0.5)


@given(st.floats(0, 1), st.integers(0, 8))
def test_fractional_power_semigroup(alpha, ell):
    tk = _fractional_tk()
    S = tk.matrices[ell]
    prod = fractional_power(tk, ell, alpha).matrix @ fractional_power(tk, ell, 1 - alpha).matrix
    assert np.max(np.abs(prod - S)) <= 1e-12


_TK_CACHE = {}


def _fractional_tk():
    if "tk" not in _TK_CACHE:
        _TK_CACHE["tk"] = build_toolkit(build_rigid_rotor(8), make_grid(-4, 4, 8), 0.9, keep_factors=True)
    return _TK_CACHE["tk"]


def test_correctors_commuting_pair():
    model = QuantumModel(np.diag([0.0, 1.0, 3.0]), np.diag([1.0, -2.0, 0.5]), np.array([1.0, 0, 0]))
    corr = build_correctors(model, 1.0)
    for a in (-3.0, 0.4, 7.0):
        np.testing.assert_allclose(corr.omega_power(a).matrix, np.eye(3), atol=1e-15)
    d = np.diag(model.mu)
    for b in (-2.0, 0.5, 3.0):
        np.testing.assert_allclose(corr.theta_power(b).matrix, np.diag(np.exp(1j * b * d / 24)), atol=1e-15)


def test_corrector_generators_and_powers():
    model = build_rigid_rotor(5)
    dt = 0.3
    corr = build_correctors(model, dt)
    C = commutator(model.H0, model.mu)
    np.testing.assert_allclose(corr.omega_generator, -C * dt ** 3 / 12)
    np.testing.assert_allclose(corr.theta_generator, 1j * model.mu * dt ** 3 / 24)
    for a in (-10.0, -1.0, 0.5, 10.0):
        W = corr.omega_power(a).matrix
        assert unitarity_defect(W) <= 1e-12
        np.testing.assert_allclose(W, expm_series(a * corr.omega_generator), atol=1e-13)
        Th = corr.theta_power(a).matrix
        assert unitarity_defect(Th) <= 1e-12
        np.testing.assert_allclose(Th, expm_series(a * corr.theta_generator), atol=1e-13)
    np.testing.assert_allclose(corr.omega_power(0).matrix, np.eye(6), atol=1e-13)
    np.testing.assert_allclose(corr.theta_power(0).matrix, np.eye(6), atol=1e-13)
    plus = build_correctors(model, dt, sign=+1)
    np.testing.assert_allclose(plus.omega_power(1).matrix, expm_series(C * dt ** 3 / 12), atol=1e-13)


def test_omega_scales_as_dt_cubed():
    model = build_rigid_rotor(6)
    gaps = [np.linalg.norm(build_correctors(model, dt).omega_power(1).matrix - np.eye(7), 2)
            for dt in (0.2, 0.1, 0.05)]
    assert gaps[0] / gaps[1] == pytest.approx(8, rel=1e-3)
    assert gaps[1] / gaps[2] == pytest.approx(8, rel=1e-3)


def test_pair_toolkit_endpoints():
    tk = build_toolkit(random_model(4, 9), make_grid(-1, 1, 5), 0.6, keep_factors=True)
    ptk = build_pair_toolkit(tk, 2)
    for ell in range(5):
        np.testing.assert_allclose(ptk.combos[ell, 1], tk.matrices[ell], atol=1e-12)
        np.testing.assert_allclose(ptk.combos[ell, 0], tk.matrices[ell + 1], atol=1e-12)
    assert ptk.build_cost.matrix_products == 10


def test_pair_toolkit_scalar_closed_form():
    model = scalar_model(2.0, 1.0)
    dt = 0.5
    tk = build_toolkit(model, make_grid(0, 1, 1), dt, keep_factors=True)
    ptk = build_pair_toolkit(tk, 100)
    assert ptk.K == 100
    a = np.linspace(0, 1, 100)
    lam0, lam1 = 2.0, 1.0
    np.testing.assert_allclose(ptk.combos[0, :, 0, 0], np.exp(-1j * dt * (a * lam0 + (1 - a) * lam1)), atol=1e-14)


def test_pair_toolkit_snap_and_partial():
    tk = build_toolkit(random_model(3, 4), make_grid(-1, 1, 10), 0.2, keep_factors=True, indices=[4, 5, 6, 9])
    ptk = build_pair_toolkit(tk, 5)
    np.testing.assert_array_equal(ptk.brackets, [4, 5])
    np.testing.assert_array_equal(ptk.snap([0.0, 0.125, 0.13, 1.0]), [0, 0, 1, 4])
    with pytest.raises(ToolkitError):
        ptk.rows([6])
    with pytest.raises(ValueError):
        build_pair_toolkit(tk, 1)


def test_save_load_round_trip(tmp_path):
    model = build_rigid_rotor(3)
    tk = build_toolkit(model, make_grid(-1, 1, 6), 0.25)
    save_toolkit(tk, tmp_path, model)
    back = load_toolkit(tmp_path, model)
    assert np.array_equal(back.matrices, tk.matrices)
    assert back.grid == tk.grid and back.dt == tk.dt
    with pytest.raises(ToolkitError, match="different model"):
        load_toolkit(tmp_path, build_rigid_rotor(4))


def test_save_load_with_factors(tmp_path):
    model = build_rigid_rotor(3)
    tk = build_toolkit(model, ValueGrid([0.1, 0.4]), 0.25, keep_factors=True)
    save_toolkit(tk, tmp_path, model)
    back = load_toolkit(tmp_path, model)
    assert back.has_factors
    np.testing.assert_array_equal(back.matrices, tk.matrices)
