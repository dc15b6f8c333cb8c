import numpy as np
import pytest

from tdse_toolkit import (
    HermiticityError,
    QuantumModel,
    ToolkitError,
    build_rigid_rotor,
    hermiticity_defect,
    load_model,
    random_model,
    save_model,
)
from tdse_toolkit.errors import ConfigError, DimensionError
from tdse_toolkit.matrix_io import write_matrix, write_vector
from tdse_toolkit.model import model_from_config


def test_rotor_two_levels():
    m = build_rigid_rotor(1, B=1.0, mu0=1.0)
    np.testing.assert_array_equal(m.H0, np.diag([0.0, 2.0]))
    c = 1 / np.sqrt(3)
    np.testing.assert_allclose(m.mu, [[0, c], [c, 0]], rtol=0, atol=1e-16)
    np.testing.assert_array_equal(m.psi0, [1, 0])


def test_rotor_second_coupling():
    m = build_rigid_rotor(2)
    assert m.mu[1, 2] == pytest.approx(2 / np.sqrt(15), abs=1e-16)
    assert m.H0[2, 2] == 6.0


@pytest.mark.parametrize("j_max", [1, 5, 20, 31])
def test_rotor_dipole_is_exactly_symmetric(j_max):
    m = build_rigid_rotor(j_max, B=0.7, mu0=-1.3)
    assert hermiticity_defect(m.mu) == 0.0
    assert m.dim == j_max + 1
    assert np.count_nonzero(m.mu) == 2 * j_max


@pytest.mark.parametrize("kwargs", [dict(j_max=0), dict(j_max=2.5), dict(j_max=3, B=0.0), dict(j_max=3, mu0=0.0)])
def test_rotor_rejects_degenerate_parameters(kwargs):
    with pytest.raises(ValueError):
        build_rigid_rotor(**kwargs)


def test_hamiltonian_is_affine_in_field(rotor3):
    np.testing.assert_allclose(rotor3.hamiltonian(0.5), rotor3.H0 - 0.5 * rotor3.mu)
    stack = rotor3.hamiltonians([0.0, 1.0])
    np.testing.assert_allclose(stack[1], rotor3.H0 - rotor3.mu)


def test_save_load_round_trip(tmp_path):
    m = random_model(6, seed=3)
    paths = [tmp_path / n for n in ("h0.txt", "mu.txt", "psi0.txt")]
    save_model(m, *paths)
    back = load_model(*paths)
    assert np.array_equal(back.H0, m.H0)
    assert np.array_equal(back.mu, m.mu)
    assert np.array_equal(back.psi0, m.psi0)
    assert back.fingerprint() == m.fingerprint()


def test_load_rejects_non_hermitian_dipole(tmp_path):
    write_matrix(tmp_path / "h0.txt", np.eye(2))
    write_matrix(tmp_path / "mu.txt", np.array([[0, 1], [1.001, 0]]))
    write_vector(tmp_path / "psi0.txt", np.array([1, 0]))
    with pytest.raises(HermiticityError, match="mu.*1.000e-03"):
        load_model(tmp_path / "h0.txt", tmp_path / "mu.txt", tmp_path / "psi0.txt")


def test_load_small_two_level(tmp_path):
    write_matrix(tmp_path / "h0.txt", np.eye(2))
    write_matrix(tmp_path / "mu.txt", np.array([[0, 1], [1, 0]]))
    write_vector(tmp_path / "psi0.txt", np.array([1, 0]))
    assert load_model(tmp_path / "h0.txt", tmp_path / "mu.txt", tmp_path / "psi0.txt").dim == 2


def test_load_renormalizes_slightly_off_state(tmp_path):
    write_matrix(tmp_path / "h0.txt", np.eye(2))
    write_matrix(tmp_path / "mu.txt", np.array([[0, 1], [1, 0]]))
    write_vector(tmp_path / "psi0.txt", np.array([1 + 1e-8, 0]))
    m = load_model(tmp_path / "h0.txt", tmp_path / "mu.txt", tmp_path / "psi0.txt")
    assert np.linalg.norm(m.psi0) == pytest.approx(1, abs=1e-15)
    write_vector(tmp_path / "psi0.txt", np.array([1.1, 0]))
    with pytest.raises(ToolkitError, match="norm"):
        load_model(tmp_path / "h0.txt", tmp_path / "mu.txt", tmp_path / "psi0.txt")


def test_load_rejects_mismatched_dimensions(tmp_path):
    write_matrix(tmp_path / "h0.txt", np.eye(3))
    write_matrix(tmp_path / "mu.txt", np.eye(2))
    write_vector(tmp_path / "psi0.txt", np.array([1, 0]))
    with pytest.raises(DimensionError):
        load_model(tmp_path / "h0.txt", tmp_path / "mu.txt", tmp_path / "psi0.txt")


def test_model_requires_unit_state():
    with pytest.raises(ToolkitError):
        QuantumModel(np.eye(2), np.eye(2), np.array([1.0, 1.0]))


def test_random_model_determinism():
    a, b, c = random_model(8, 5), random_model(8, 5), random_model(8, 6)
    assert np.array_equal(a.H0, b.H0) and np.array_equal(a.psi0, b.psi0)
    assert not np.allclose(a.H0, c.H0)
    assert hermiticity_defect(a.H0) == 0 and hermiticity_defect(a.mu) == 0


def test_model_from_config(tmp_path):
    assert model_from_config({"kind": "rotor", "j_max": 4}).dim == 5
    assert model_from_config({"kind": "random", "dim": 3, "seed": 1}).dim == 3
    m = random_model(3, 2)
    save_model(m, tmp_path / "a", tmp_path / "b", tmp_path / "c")
    loaded = model_from_config({"kind": "file", "h0": "a", "mu": "b", "psi0": "c"}, tmp_path)
    assert loaded.fingerprint() == m.fingerprint()
    with pytest.raises(ConfigError):
        model_from_config({"kind": "spin"})
    with pytest.raises(ConfigError):
        model_from_config({"kind": "random"})
