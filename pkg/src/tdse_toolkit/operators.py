"""Dense Hermitian operators, their spectral factorization and unitary exponentials.

Operators and states are plain numpy arrays.  Exponentials are always formed
from the eigendecomposition of the Hermitian generator, so that a single
factorization serves every duration ``t`` (and hence every fractional power of
a propagator).
"""

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import DimensionError, HermiticityError, SpectralError

HERMITICITY_TOL = 1e-10
RECONSTRUCTION_TOL = 1e-10


def hermiticity_defect(H):
    """Max-entry norm of ``H - H^dagger``."""
    H = np.asarray(H)
    if H.size == 0:
        return 0.0
    return float(np.max(np.abs(H - H.conj().T)))


def unitarity_defect(U):
    """Max-entry norm of ``U^dagger U - I``."""
    U = np.asarray(U)
    if U.size == 0:
        return 0.0
    return float(np.max(np.abs(U.conj().T @ U - np.eye(U.shape[0]))))


def _check_square(H, what="operator"):
    if H.ndim != 2 or H.shape[0] != H.shape[1] or H.shape[0] < 1:
        raise DimensionError(f"{what} must be a non-empty square matrix, got shape {H.shape}")


def as_hermitian(H, tol=HERMITICITY_TOL, what="operator"):
    """Validate ``H`` and return its symmetrized copy ``(H + H^dagger)/2``.

    Real input stays real.  A defect above ``tol`` raises
    :class:`HermiticityError`; anything below it is silently repaired.
    """
    H = np.array(H, copy=True)
    if not np.iscomplexobj(H):
        H = H.astype(float)
    _check_square(H, what)
    if not np.all(np.isfinite(H)):
        raise HermiticityError(np.inf, what)
    defect = hermiticity_defect(H)
    if defect > tol:
        raise HermiticityError(defect, what)
    H = 0.5 * (H + H.conj().T)
    if np.iscomplexobj(H) and not np.any(H.imag):
        H = H.real.copy()
    return H


def as_state(psi, dim=None):
    psi = np.asarray(psi, dtype=complex).reshape(-1)
    if dim is not None and psi.shape[0] != dim:
        raise DimensionError(f"state has dimension {psi.shape[0]}, expected {dim}")
    return psi


def _fix_phases(V):
    # first non-negligible component of each column made real positive
    mag = np.abs(V)
    idx = np.argmax(mag > 1e-10 * mag.max(axis=-2, keepdims=True), axis=-2)
    lead = np.take_along_axis(V, idx[..., None, :], axis=-2)
    return V * (np.abs(lead) / lead)


@dataclass(frozen=True)
class SpectralFactors:
    """Eigendecomposition ``H = V diag(eigenvalues) V^dagger`` of a Hermitian matrix."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def dim(self):
        return self.eigenvalues.shape[0]

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T

    def phases(self, t):
        phase = -t * self.eigenvalues
        if not np.all(np.isfinite(phase)):
            raise SpectralError(f"non-finite phase for t={t!r}")
        return np.exp(1j * phase)

    def propagator_matrix(self, t):
        """``exp(-i t H)`` as a dense matrix."""
        V = self.eigenvectors
        return (V * self.phases(t)) @ V.conj().T

    def apply_exp(self, t, psi):
        """``exp(-i t H) psi`` without forming the matrix."""
        V = self.eigenvectors
        return V @ (self.phases(t) * (V.conj().T @ psi))


def _factor_stack(Hs):
    try:
        w, V = np.linalg.eigh(Hs)
    except np.linalg.LinAlgError as exc:
        raise SpectralError(f"eigensolver did not converge: {exc}") from exc
    residual = np.max(np.abs(Hs @ V - V * w[..., None, :]), axis=(-2, -1))
    return w, _fix_phases(V.astype(complex)), residual


def spectral_factorize(H, tol=HERMITICITY_TOL):
    """Factorize a Hermitian matrix; eigenvalues ascending, eigenvectors orthonormal.

    Eigenvector phases are fixed so that the first non-negligible component of
    each column is real positive (reproducible output across runs).
    """
    H = as_hermitian(H, tol)
    scale = max(1.0, float(np.max(np.abs(H))))
    w, V, residual = _factor_stack(H)
    if not residual <= RECONSTRUCTION_TOL * scale:
        raise SpectralError("eigendecomposition failed the residual check", residual)
    return SpectralFactors(w, V)


def spectral_factorize_many(Hs):
    """Factorize a stack of Hermitian matrices of shape ``(n, d, d)``.

    Inputs are assumed Hermitian (they are built, not ingested); this is the
    batched path used for toolkit construction.
    """
    Hs = np.asarray(Hs)
    Hs = 0.5 * (Hs + np.conj(np.swapaxes(Hs, -1, -2)))
    scale = np.maximum(1.0, np.max(np.abs(Hs), axis=(-2, -1)))
    w, V, residual = _factor_stack(Hs)
    bad = np.flatnonzero(~(residual <= RECONSTRUCTION_TOL * scale))
    if bad.size:
        k = int(bad[0])
        raise SpectralError(f"eigendecomposition of stack entry {k} failed", residual[k])
    return [SpectralFactors(w[k], V[k]) for k in range(Hs.shape[0])]


@dataclass(frozen=True)
class UnitaryPropagator:
    """Dense unitary ``exp(-i t H)``, optionally carrying the factors of ``H``."""

    matrix: np.ndarray
    generator: Optional[SpectralFactors] = None
    duration: Optional[float] = None

    @property
    def dim(self):
        return self.matrix.shape[0]

    def power(self, alpha):
        """``exp(-i alpha t H)``: the power generated by the stored Hamiltonian."""
        if self.generator is None:
            raise ValueError("propagator carries no spectral factors; cannot take powers")
        return expm_unitary(self.generator, alpha * self.duration)


def expm_unitary(factors, t):
    """Return ``exp(-i t H)`` built from the spectral factors of ``H``."""
    t = float(t)
    if not np.isfinite(t):
        raise SpectralError(f"non-finite duration t={t!r}")
    return UnitaryPropagator(factors.propagator_matrix(t), factors, t)


def commutator(A, B):
    """``AB - BA``."""
    A = np.asarray(A)
    B = np.asarray(B)
    if A.shape != B.shape or A.ndim != 2:
        raise DimensionError(f"commutator of shapes {A.shape} and {B.shape}")
    return A @ B - B @ A


def apply(U, psi, counter=None):
    """Matrix-vector product ``U psi``; bumps ``counter.matrix_vector_applies``."""
    M = U.matrix if isinstance(U, UnitaryPropagator) else np.asarray(U)
    psi = np.asarray(psi)
    if M.shape[1] != psi.shape[0]:
        raise DimensionError(f"cannot apply {M.shape} operator to state of size {psi.shape[0]}")
    if counter is not None:
        counter.matrix_vector_applies += 1
    return M @ psi
