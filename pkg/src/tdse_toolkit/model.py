"""Finite-dimensional models ``(H0, mu, psi0)`` for ``i dpsi/dt = (H0 - mu eps(t)) psi``."""

import hashlib
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import matrix_io
from .errors import ConfigError, DimensionError, ToolkitError
from .operators import as_hermitian, as_state

PSI0_RENORM_TOL = 1e-6


@dataclass(frozen=True)
class QuantumModel:
    H0: np.ndarray
    mu: np.ndarray
    psi0: np.ndarray
    label: str = ""

    def __post_init__(self):
        H0 = as_hermitian(self.H0, what="H0")
        mu = as_hermitian(self.mu, what="mu")
        if H0.shape != mu.shape:
            raise DimensionError(f"H0 is {H0.shape} but mu is {mu.shape}")
        psi0 = as_state(self.psi0, H0.shape[0])
        if abs(np.linalg.norm(psi0) - 1.0) > 1e-12:
            raise ToolkitError(f"psi0 must have unit norm, got {np.linalg.norm(psi0):.15g}")
        object.__setattr__(self, "H0", H0)
        object.__setattr__(self, "mu", mu)
        object.__setattr__(self, "psi0", psi0)

    @property
    def dim(self):
        return self.H0.shape[0]

    def hamiltonian(self, eps):
        """``H0 - eps * mu``."""
        return self.H0 - eps * self.mu

    def hamiltonians(self, eps_values):
        eps_values = np.asarray(eps_values, dtype=float)
        return self.H0[None] - eps_values[:, None, None] * self.mu[None]

    def fingerprint(self):
        """Short hash of the exact model contents, stored in toolkit manifests."""
        h = hashlib.sha256()
        for arr in (self.H0, self.mu, self.psi0):
            h.update(np.ascontiguousarray(arr, dtype=complex).tobytes())
        return h.hexdigest()[:16]


def build_rigid_rotor(j_max, B=1.0, mu0=1.0, label=None):
    """Linear rigid rotor restricted to the ``m = 0`` ladder ``j = 0..j_max``.

    ``H0 = diag(B j (j+1))`` and the dipole couples neighbouring ``j`` with
    ``<j|mu|j+1> = mu0 (j+1) / sqrt((2j+1)(2j+3))``.  The initial state is the
    ground state ``|j=0>``.
    """
    if int(j_max) != j_max or j_max < 1:
        raise ValueError(f"j_max must be an integer >= 1 (j_max=0 has no dipole coupling), got {j_max}")
    if not B > 0:
        raise ValueError(f"rotational constant must be positive, got B={B}")
    if mu0 == 0:
        raise ValueError("dipole strength mu0 must be nonzero")
    j = np.arange(int(j_max) + 1, dtype=float)
    H0 = np.diag(B * j * (j + 1))
    jj = j[:-1]
    coupling = mu0 * (jj + 1) / np.sqrt((2 * jj + 1) * (2 * jj + 3))
    mu = np.diag(coupling, 1) + np.diag(coupling, -1)
    psi0 = np.zeros(len(j), dtype=complex)
    psi0[0] = 1.0
    if label is None:
        label = f"rotor(j_max={int(j_max)}, B={B:g}, mu0={mu0:g})"
    return QuantumModel(H0, mu, psi0, label)


def random_model(dim, seed=0):
    """Random Hermitian ``H0`` and ``mu`` with Gaussian entries and a random unit ``psi0``."""
    if dim < 2:
        raise ValueError(f"dim must be >= 2, got {dim}")
    rng = np.random.default_rng(seed)

    def herm():
        A = rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))
        return 0.5 * (A + A.conj().T)

    H0 = herm()
    mu = herm()
    psi0 = rng.standard_normal(dim) + 1j * rng.standard_normal(dim)
    psi0 /= np.linalg.norm(psi0)
    return QuantumModel(H0, mu, psi0, f"random(dim={dim}, seed={seed})")


def save_model(model, h0_path, mu_path, psi0_path):
    matrix_io.write_matrix(h0_path, model.H0)
    matrix_io.write_matrix(mu_path, model.mu)
    matrix_io.write_vector(psi0_path, model.psi0)


def load_model(h0_path, mu_path, psi0_path, label=None):
    """Read a model from three text files and validate it.

    ``psi0`` is renormalized when its norm is within 1e-6 of one and rejected
    otherwise.
    """
    H0 = matrix_io.read_matrix(h0_path)
    mu = matrix_io.read_matrix(mu_path)
    psi0 = matrix_io.read_vector(psi0_path)
    if H0.shape != mu.shape or psi0.shape[0] != H0.shape[0]:
        raise DimensionError(
            f"inconsistent dimensions: H0 {H0.shape}, mu {mu.shape}, psi0 {psi0.shape}"
        )
    norm = np.linalg.norm(psi0)
    if abs(norm - 1.0) > PSI0_RENORM_TOL:
        raise ToolkitError(f"psi0 norm {norm:.6g} is not within {PSI0_RENORM_TOL:g} of 1")
    if abs(norm - 1.0) > 8 * np.finfo(float).eps:
        # states written by save_model are unit to rounding and stay bit-identical
        psi0 = psi0 / norm
    return QuantumModel(H0, mu, psi0, label or f"file({Path(h0_path).name})")


def model_from_config(spec, base_dir="."):
    """Build a model from the ``model`` section of an experiment config."""
    spec = dict(spec)
    kind = spec.pop("kind", "rotor")
    try:
        if kind == "rotor":
            return build_rigid_rotor(spec.get("j_max", 20), spec.get("B", 1.0), spec.get("mu0", 1.0))
        if kind == "random":
            return random_model(spec["dim"], spec.get("seed", 0))
        if kind == "file":
            base = Path(base_dir)
            return load_model(base / spec["h0"], base / spec["mu"], base / spec["psi0"])
    except KeyError as exc:
        raise ConfigError(f"model section of kind {kind!r} is missing key {exc}") from None
    raise ConfigError(f"unknown model kind {kind!r}; expected rotor, random or file")
