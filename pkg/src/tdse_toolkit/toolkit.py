"""Precomputed one-step propagators and the auxiliary tables built from them.

A :class:`Toolkit` stores ``S_l(dt) = exp(-i dt (H0 - mu eps_l))`` for the
values ``eps_l`` of a field grid.  Entries may be built for a subset of grid
indices (``indices=...``); a run only ever touches the entries its field
visits, and the result is identical to that of a full build.
"""

import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field as dc_field
from pathlib import Path
from typing import Optional

import numpy as np

from . import matrix_io
from .errors import SpectralError, ToolkitError
from .field import FieldGrid, ValueGrid
from .operators import SpectralFactors, UnitaryPropagator, commutator, spectral_factorize, spectral_factorize_many

BUILD_CHUNK = 512


@dataclass
class BuildCost:
    eigendecompositions: int = 0
    matrix_products: int = 0


@dataclass(frozen=True)
class Toolkit:
    grid: object
    dt: float
    indices: np.ndarray
    matrices: np.ndarray
    eigenvalues: Optional[np.ndarray] = None
    eigenvectors: Optional[np.ndarray] = None
    build_cost: BuildCost = dc_field(default_factory=BuildCost)

    def __post_init__(self):
        lookup = np.full(self.grid.size, -1, dtype=np.int64)
        lookup[self.indices] = np.arange(len(self.indices))
        object.__setattr__(self, "_lookup", lookup)

    @property
    def dim(self):
        return self.matrices.shape[-1]

    @property
    def has_factors(self):
        return self.eigenvectors is not None

    @property
    def is_complete(self):
        return len(self.indices) == self.grid.size

    def rows(self, ells):
        """Storage rows of grid indices ``ells``; raises if any entry was not built."""
        rows = self._lookup[np.asarray(ells)]
        if np.any(rows < 0):
            missing = np.asarray(ells)[rows < 0]
            raise ToolkitError(f"toolkit has no entry for grid index {int(np.ravel(missing)[0])}")
        return rows

    def factors(self, ell):
        if not self.has_factors:
            raise ToolkitError("toolkit was built without spectral factors (keep_factors=False)")
        r = int(self.rows(ell))
        return SpectralFactors(self.eigenvalues[r], self.eigenvectors[r])

    def entry(self, ell):
        r = int(self.rows(ell))
        gen = self.factors(ell) if self.has_factors else None
        return UnitaryPropagator(self.matrices[r], gen, self.dt)

    @property
    def entries(self):
        return [self.entry(ell) for ell in self.indices]


def _factor_chunk(model, eps_values, dt, offset):
    try:
        facs = spectral_factorize_many(model.hamiltonians(eps_values))
    except SpectralError as exc:
        # the batched solver reports positions relative to the chunk
        raise SpectralError(f"toolkit entry near grid position {offset}: {exc}", exc.residual) from exc
    w = np.stack([f.eigenvalues for f in facs])
    V = np.stack([f.eigenvectors for f in facs])
    phases = np.exp(-1j * dt * w)
    U = (V * phases[:, None, :]) @ np.conj(np.swapaxes(V, -1, -2))
    return w, V, U


def build_toolkit(model, grid, dt, keep_factors=False, indices=None, jobs=1):
    """Precompute ``S_l(dt)`` for every grid value (or only for ``indices``).

    The spectral factors of each ``H0 - mu eps_l`` are kept when
    ``keep_factors`` is set; the schemes that take fractional powers need them.
    Chunks are factorized concurrently when ``jobs > 1``; the output order is
    the grid order regardless.
    """
    if not dt > 0:
        raise ValueError(f"time step must be positive, got dt={dt}")
    if indices is None:
        indices = np.arange(grid.size)
    indices = np.unique(np.asarray(indices, dtype=np.int64))
    if indices.size and (indices[0] < 0 or indices[-1] >= grid.size):
        raise ToolkitError("toolkit indices outside the grid")
    eps = grid.values[indices]
    starts = range(0, len(indices), BUILD_CHUNK)
    work = [(model, eps[s:s + BUILD_CHUNK], dt, int(indices[s])) for s in starts]
    if jobs > 1 and len(work) > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            parts = list(pool.map(lambda a: _factor_chunk(*a), work))
    else:
        parts = [_factor_chunk(*a) for a in work]
    d = model.dim
    if parts:
        w = np.concatenate([p[0] for p in parts])
        V = np.concatenate([p[1] for p in parts])
        U = np.concatenate([p[2] for p in parts])
    else:
        w, V, U = np.empty((0, d)), np.empty((0, d, d), complex), np.empty((0, d, d), complex)
    cost = BuildCost(eigendecompositions=len(indices), matrix_products=len(indices))
    if not keep_factors:
        w = V = None
    return Toolkit(grid, float(dt), indices, U, w, V, cost)


def fractional_power(tk, ell, alpha):
    """``S_l(dt)**alpha``, defined as ``S_l(alpha * dt)`` through the stored factors.

    Taking the power through the Hamiltonian avoids the branch ambiguity of a
    matrix logarithm of the unitary when ``dt * ||H||`` exceeds pi.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"fractional power exponent must lie in [0, 1], got {alpha}")
    f = tk.factors(ell)
    return UnitaryPropagator(f.propagator_matrix(alpha * tk.dt), f, alpha * tk.dt)


@dataclass(frozen=True)
class CorrectorPair:
    """Powers of ``Omega = exp(s/12 [H0, mu] dt^3)`` and ``Theta = exp(i/24 mu dt^3)``.

    ``s = -1`` (the default) is the sign for which ``S Omega^a Theta^b``
    cancels the local third-order error of the midpoint toolkit step; with
    ``s = +1`` the correction adds to that error instead and the scheme stays
    second order.  Both generators are anti-Hermitian, so every power is
    unitary; powers are evaluated as phase scalings in stored eigenbases.
    """

    omega_generator: np.ndarray
    theta_generator: np.ndarray
    commutator_factors: SpectralFactors
    mu_factors: SpectralFactors
    dt: float
    sign: int = -1

    @property
    def _omega_time(self):
        # s/12 [H0, mu] = -i (s/12) (i[H0, mu]), so Omega^a = exp(-i (s a dt^3/12) (i[H0, mu]))
        return self.sign * self.dt ** 3 / 12.0

    @property
    def _theta_time(self):
        # Theta^b = exp(-i * (-b dt^3 / 24) * mu)
        return -self.dt ** 3 / 24.0

    def omega_power(self, alpha):
        return UnitaryPropagator(self.commutator_factors.propagator_matrix(alpha * self._omega_time))

    def theta_power(self, beta):
        return UnitaryPropagator(self.mu_factors.propagator_matrix(beta * self._theta_time))

    def apply_omega(self, alpha, psi):
        return self.commutator_factors.apply_exp(alpha * self._omega_time, psi)

    def apply_theta(self, beta, psi):
        return self.mu_factors.apply_exp(beta * self._theta_time, psi)


def build_correctors(model, dt, sign=-1):
    if not dt > 0:
        raise ValueError(f"time step must be positive, got dt={dt}")
    if sign not in (-1, 1):
        raise ValueError(f"corrector sign must be -1 or +1, got {sign}")
    C = commutator(model.H0, model.mu)
    omega_gen = sign * C * dt ** 3 / 12.0
    theta_gen = 1j * model.mu * dt ** 3 / 24.0
    comm_factors = spectral_factorize(1j * C)
    mu_factors = spectral_factorize(model.mu)
    return CorrectorPair(omega_gen, theta_gen, comm_factors, mu_factors, float(dt), sign)


@dataclass(frozen=True)
class PairToolkit:
    """Products ``S_{l+1}(dt)**(1 - a_k) S_l(dt)**a_k`` on a uniform grid of ``K`` weights."""

    base: Toolkit
    alpha_grid: np.ndarray
    brackets: np.ndarray
    combos: np.ndarray
    build_cost: BuildCost = dc_field(default_factory=BuildCost)

    def __post_init__(self):
        lookup = np.full(max(self.base.grid.size - 1, 1), -1, dtype=np.int64)
        lookup[self.brackets] = np.arange(len(self.brackets))
        object.__setattr__(self, "_lookup", lookup)

    @property
    def K(self):
        return self.alpha_grid.size

    @property
    def size(self):
        """Number of stored products (the memory footprint is ``size * d**2`` complex numbers)."""
        return self.combos.shape[0] * self.combos.shape[1]

    def snap(self, alpha):
        """Nearest weight index, ties to the lower index."""
        pos = np.asarray(alpha, dtype=float) * (self.K - 1)
        return np.clip(np.ceil(pos - 0.5), 0, self.K - 1).astype(int)

    def rows(self, ells):
        rows = self._lookup[np.asarray(ells)]
        if np.any(rows < 0):
            raise ToolkitError("pair toolkit has no products for a requested bracket")
        return rows

    def combo(self, ell, k):
        return UnitaryPropagator(self.combos[int(self.rows(ell)), k])


def build_pair_toolkit(tk, K, brackets=None):
    """Tabulate the two-entry products for every bracket ``[l, l+1]`` (or only ``brackets``).

    By default every bracket whose two endpoints are present in ``tk`` is used.

    Memory use is ``len(brackets) * K * d**2`` complex numbers.
    """
    if K < 2:
        raise ValueError(f"pair toolkit needs K >= 2 weights, got {K}")
    if not tk.has_factors:
        raise ToolkitError("pair toolkit needs a toolkit built with keep_factors=True")
    if brackets is None:
        have = np.asarray(tk.indices)
        brackets = have[np.isin(have + 1, have)]
    brackets = np.unique(np.asarray(brackets, dtype=np.int64))
    alphas = np.linspace(0.0, 1.0, K)
    d = tk.dim
    combos = np.empty((len(brackets), K, d, d), dtype=complex)
    for i, ell in enumerate(brackets):
        lo, hi = tk.factors(ell), tk.factors(ell + 1)
        P_lo = _power_stack(lo, alphas * tk.dt)
        P_hi = _power_stack(hi, (1.0 - alphas) * tk.dt)
        combos[i] = P_hi @ P_lo
    cost = BuildCost(matrix_products=len(brackets) * K)
    return PairToolkit(tk, alphas, brackets, combos, cost)


def _power_stack(f, times):
    V = f.eigenvectors
    ph = np.exp(-1j * np.outer(times, f.eigenvalues))
    return (V[None] * ph[:, None, :]) @ V.conj().T[None]


# -- persistence -----------------------------------------------------------


def _grid_to_json(grid):
    if isinstance(grid, FieldGrid):
        return {"kind": "uniform", "eps_min": grid.eps_min, "eps_max": grid.eps_max, "m": grid.m}
    return {"kind": "values", "values": [float(v) for v in grid.values]}


def _grid_from_json(d):
    if d["kind"] == "uniform":
        return FieldGrid(d["eps_min"], d["eps_max"], d["m"])
    return ValueGrid(np.array(d["values"]))


def save_toolkit(tk, out_dir, model=None):
    """Write one matrix file per entry plus ``manifest.json``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = []
    for r, ell in enumerate(tk.indices):
        name = f"entry_{int(ell):06d}.txt"
        matrix_io.write_matrix(out / name, tk.matrices[r])
        files.append(name)
    manifest = {
        "grid": _grid_to_json(tk.grid),
        "dt": tk.dt,
        "indices": [int(i) for i in tk.indices],
        "files": files,
        "keep_factors": tk.has_factors,
        "model_hash": model.fingerprint() if model is not None else None,
        "model_label": model.label if model is not None else None,
        "build_cost": {"eigendecompositions": tk.build_cost.eigendecompositions,
                       "matrix_products": tk.build_cost.matrix_products},
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2) + "\n")
    return out / "manifest.json"


def load_toolkit(out_dir, model=None):
    """Read a saved toolkit.  Factors are recomputed from ``model`` when the manifest asks for them."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text())
    if model is not None and manifest.get("model_hash") not in (None, model.fingerprint()):
        raise ToolkitError("toolkit on disk was built for a different model")
    grid = _grid_from_json(manifest["grid"])
    indices = np.array(manifest["indices"], dtype=np.int64)
    if manifest.get("keep_factors") and model is not None:
        return build_toolkit(model, grid, manifest["dt"], keep_factors=True, indices=indices)
    mats = np.stack([matrix_io.read_matrix(out / f) for f in manifest["files"]])
    cost = BuildCost(**manifest.get("build_cost", {}))
    return Toolkit(grid, float(manifest["dt"]), indices, mats, None, None, cost)
