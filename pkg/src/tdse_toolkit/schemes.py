"""Time-stepping drivers with cost accounting.

Every scheme advances ``psi_{j+1} = (product of unitaries) psi_j`` over the
uniform time grid ``t_j = j dt``, ``j = 0..N``, and reports a
:class:`CostCounter`.  Per-step counts of matrix-vector applications are fixed
by construction: toolkit 1, improved_low 3, improved_high 2,
quantified_high 1, strang 3.
"""

import enum
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from ._kernels import midpoint_taylor
from .errors import HorizonError, ReferenceNotConverged, ToolkitError
from .field import derivative_stencils, midpoint_values
from .operators import spectral_factorize, spectral_factorize_many


class SchemeKind(str, enum.Enum):
    TOOLKIT = "toolkit"
    IMPROVED_LOW = "improved_low"
    IMPROVED_HIGH = "improved_high"
    QUANTIFIED_HIGH = "quantified_high"
    STRANG = "strang"
    REFERENCE = "reference"

    @classmethod
    def parse(cls, name):
        return cls(str(name).replace("-", "_"))


APPLIES_PER_STEP = {
    SchemeKind.TOOLKIT: 1,
    SchemeKind.IMPROVED_LOW: 3,
    SchemeKind.IMPROVED_HIGH: 2,
    SchemeKind.QUANTIFIED_HIGH: 1,
    SchemeKind.STRANG: 3,
}

IMPROVED_LOW_INITS = ("per_step", "double_initial")


@dataclass
class CostCounter:
    matrix_vector_applies: int = 0
    matrix_matrix_products: int = 0
    online_exponentials: int = 0
    toolkit_entries_used: int = 0
    steps: int = 0

    def as_dict(self):
        return dict(self.__dict__)


@dataclass
class PropagationResult:
    final_state: np.ndarray
    cost: CostCounter
    scheme: SchemeKind
    dt: float
    n_steps: int
    T: float
    m: Optional[int] = None
    delta_eps: Optional[float] = None
    trajectory: Optional[np.ndarray] = None
    info: dict = dc_field(default_factory=dict)


def _run_length(field, n_steps, dt):
    if n_steps < 1:
        raise ValueError(f"need at least one step, got N={n_steps}")
    T = n_steps * dt
    if T > field.horizon * (1 + 1e-12):
        raise HorizonError(f"N*dt = {T} overruns the field horizon {field.horizon}")
    return T


def _dt_for(field, n_steps, T):
    T = field.horizon if T is None else float(T)
    if T > field.horizon * (1 + 1e-12):
        raise HorizonError(f"T = {T} overruns the field horizon {field.horizon}")
    return T / n_steps


class _Stepper:
    """Holds the state, optional trajectory and the counter of one run."""

    def __init__(self, psi0, n_steps, record):
        self.psi = np.array(psi0, dtype=complex)
        self.traj = None
        if record:
            self.traj = np.empty((n_steps + 1, self.psi.shape[0]), dtype=complex)
            self.traj[0] = self.psi
        self.cost = CostCounter()


def propagate_toolkit(model, field, tk, n_steps, record_trajectory=False):
    """Nearest-value toolkit scheme: ``psi_{j+1} = S_{l_j}(dt) psi_j``.

    ``l_j`` is the grid value nearest to ``eps(t_{j+1/2})``.
    """
    T = _run_length(field, n_steps, tk.dt)
    mids = midpoint_values(field, n_steps, tk.dt)
    ells = tk.grid.nearest_indices(mids)
    rows = tk.rows(ells)
    mats = tk.matrices
    st = _Stepper(model.psi0, n_steps, record_trajectory)
    psi = st.psi
    for j in range(n_steps):
        psi = mats[rows[j]] @ psi
        if st.traj is not None:
            st.traj[j + 1] = psi
    st.cost.matrix_vector_applies = n_steps
    st.cost.toolkit_entries_used = int(np.unique(rows).size)
    st.cost.steps = n_steps
    return PropagationResult(psi, st.cost, SchemeKind.TOOLKIT, tk.dt, n_steps, T,
                             tk.grid.m, tk.grid.delta, st.traj,
                             {"max_midpoint_residual": float(np.max(np.abs(mids - tk.grid.values[ells])))})


def propagate_improved_low(model, field, tk, corr, n_steps, beta_divisor="half_step",
                           initial="per_step", record_trajectory=False):
    """Toolkit step preceded by the corrector powers: ``S_{l_j} Omega^{a_j} Theta^{b_j}``.

    ``a_j``, ``b_j`` are finite-difference estimates of the first and second
    field derivatives at ``t_{j+1/2}``.  With ``initial="double_initial"`` the
    state is additionally pre-multiplied by ``Omega^{a_0} Theta^{b_0}`` before
    the first step, which applies the first correction twice.
    """
    if initial not in IMPROVED_LOW_INITS:
        raise ValueError(f"initial must be one of {IMPROVED_LOW_INITS}, got {initial!r}")
    if abs(corr.dt - tk.dt) > 1e-12 * tk.dt:
        raise ToolkitError(f"corrector built for dt={corr.dt}, toolkit for dt={tk.dt}")
    T = _run_length(field, n_steps, tk.dt)
    mids = midpoint_values(field, n_steps, tk.dt)
    rows = tk.rows(tk.grid.nearest_indices(mids))
    alphas, betas = derivative_stencils(field, n_steps, tk.dt, beta_divisor)
    mats = tk.matrices
    st = _Stepper(model.psi0, n_steps, record_trajectory)
    psi = st.psi
    extra = 0
    if initial == "double_initial":
        psi = corr.apply_omega(alphas[0], corr.apply_theta(betas[0], psi))
        extra = 2
    for j in range(n_steps):
        psi = corr.apply_theta(betas[j], psi)
        psi = corr.apply_omega(alphas[j], psi)
        psi = mats[rows[j]] @ psi
        if st.traj is not None:
            st.traj[j + 1] = psi
    st.cost.matrix_vector_applies = 3 * n_steps + extra
    st.cost.online_exponentials = 2 * n_steps + extra
    st.cost.toolkit_entries_used = int(np.unique(rows).size)
    st.cost.steps = n_steps
    return PropagationResult(psi, st.cost, SchemeKind.IMPROVED_LOW, tk.dt, n_steps, T,
                             tk.grid.m, tk.grid.delta, st.traj,
                             {"beta_divisor": beta_divisor, "initial": initial, "corrector_sign": corr.sign})


def propagate_improved_high(model, field, tk, n_steps, record_trajectory=False):
    """Two-entry step ``S_{l+1}(dt)**b S_l(dt)**a`` with ``a eps_l + b eps_{l+1} = eps(t_{j+1/2})``.

    The lower-bracket factor acts first.
    """
    if not tk.has_factors:
        raise ToolkitError("improved_high needs a toolkit built with keep_factors=True")
    T = _run_length(field, n_steps, tk.dt)
    mids = midpoint_values(field, n_steps, tk.dt)
    ells, alphas, betas = tk.grid.brackets(mids)
    lo_rows = tk.rows(ells)
    hi_rows = tk.rows(ells + 1)
    w, V = tk.eigenvalues, tk.eigenvectors
    Vh = np.conj(np.swapaxes(V, -1, -2))
    dt = tk.dt
    st = _Stepper(model.psi0, n_steps, record_trajectory)
    psi = st.psi
    for j in range(n_steps):
        r = lo_rows[j]
        psi = V[r] @ (np.exp(-1j * alphas[j] * dt * w[r]) * (Vh[r] @ psi))
        r = hi_rows[j]
        psi = V[r] @ (np.exp(-1j * betas[j] * dt * w[r]) * (Vh[r] @ psi))
        if st.traj is not None:
            st.traj[j + 1] = psi
    st.cost.matrix_vector_applies = 2 * n_steps
    st.cost.online_exponentials = 2 * n_steps
    st.cost.toolkit_entries_used = int(np.unique(np.concatenate([lo_rows, hi_rows])).size)
    st.cost.steps = n_steps
    return PropagationResult(psi, st.cost, SchemeKind.IMPROVED_HIGH, dt, n_steps, T,
                             tk.grid.m, tk.grid.delta, st.traj)


def propagate_quantified_high(model, field, ptk, n_steps, record_trajectory=False):
    """Like :func:`propagate_improved_high` with the weight snapped to a precomputed product."""
    tk = ptk.base
    T = _run_length(field, n_steps, tk.dt)
    mids = midpoint_values(field, n_steps, tk.dt)
    ells, alphas, _ = tk.grid.brackets(mids)
    rows = ptk.rows(ells)
    ks = ptk.snap(alphas)
    combos = ptk.combos
    st = _Stepper(model.psi0, n_steps, record_trajectory)
    psi = st.psi
    for j in range(n_steps):
        psi = combos[rows[j], ks[j]] @ psi
        if st.traj is not None:
            st.traj[j + 1] = psi
    st.cost.matrix_vector_applies = n_steps
    st.cost.toolkit_entries_used = int(np.unique(rows * ptk.K + ks).size)
    st.cost.steps = n_steps
    return PropagationResult(psi, st.cost, SchemeKind.QUANTIFIED_HIGH, tk.dt, n_steps, T,
                             tk.grid.m, tk.grid.delta, st.traj,
                             {"K": ptk.K, "max_alpha_snap": float(np.max(np.abs(ptk.alpha_grid[ks] - alphas)))})


@dataclass(frozen=True)
class StrangFactors:
    """``exp(-i H0 dt/2)`` and the eigenbasis of ``mu``, built once per time step."""

    half_kinetic: np.ndarray
    mu_eigenvalues: np.ndarray
    mu_eigenvectors: np.ndarray
    dt: float


def strang_factors(model, dt):
    h0 = spectral_factorize(model.H0)
    mu = spectral_factorize(model.mu)
    return StrangFactors(h0.propagator_matrix(dt / 2), mu.eigenvalues, mu.eigenvectors, float(dt))


def propagate_strang(model, field, n_steps, T=None, precomputed=None, record_trajectory=False):
    """Strang splitting ``e^{-i H0 dt/2} e^{+i eps(t_{j+1/2}) mu dt} e^{-i H0 dt/2}``."""
    dt = _dt_for(field, n_steps, T)
    if precomputed is None or abs(precomputed.dt - dt) > 1e-12 * dt:
        precomputed = strang_factors(model, dt)
    T = _run_length(field, n_steps, dt)
    mids = midpoint_values(field, n_steps, dt)
    K = precomputed.half_kinetic
    V = precomputed.mu_eigenvectors
    Vh = V.conj().T
    lam = precomputed.mu_eigenvalues
    st = _Stepper(model.psi0, n_steps, record_trajectory)
    psi = st.psi
    for j in range(n_steps):
        psi = K @ psi
        psi = V @ (np.exp(1j * mids[j] * dt * lam) * (Vh @ psi))
        psi = K @ psi
        if st.traj is not None:
            st.traj[j + 1] = psi
    st.cost.matrix_vector_applies = 3 * n_steps
    st.cost.online_exponentials = n_steps
    st.cost.steps = n_steps
    return PropagationResult(psi, st.cost, SchemeKind.STRANG, dt, n_steps, T, trajectory=st.traj)


REFERENCE_METHODS = ("taylor", "spectral")


def _midpoint_exact(model, mids, dt, method, psi0=None):
    psi0 = model.psi0 if psi0 is None else psi0
    if method == "taylor":
        H0 = np.ascontiguousarray(model.H0, dtype=complex)
        mu = np.ascontiguousarray(model.mu, dtype=complex)
        n0 = float(np.max(np.sum(np.abs(H0), axis=0)))
        n1 = float(np.max(np.sum(np.abs(mu), axis=0)))
        return midpoint_taylor(H0, mu, np.ascontiguousarray(mids, dtype=float), float(dt),
                               np.array(psi0, dtype=complex), n0, n1)
    if method == "spectral":
        psi = np.array(psi0, dtype=complex)
        for s in range(0, len(mids), 1024):
            for f in spectral_factorize_many(model.hamiltonians(mids[s:s + 1024])):
                psi = f.apply_exp(dt, psi)
        return psi
    raise ValueError(f"unknown reference method {method!r}; expected one of {REFERENCE_METHODS}")


def propagate_reference(model, field, n_ref=None, T=None, tol=1e-11, n_start=1024,
                        max_n=2 ** 22, method="taylor"):
    """Exact-exponential midpoint rule, refined by doubling until it settles.

    Each step applies ``exp(-i dt (H0 - eps(t_{j+1/2}) mu))`` to working
    precision.  With ``tol`` set, the step count doubles from ``n_start`` (or
    ``n_ref``) until two successive results differ by less than ``tol``; the
    finer of the two is returned.  With ``tol=None`` a single run at ``n_ref``
    is made.  ``method="taylor"`` evaluates each exponential's action by a
    truncated series in compiled code; ``"spectral"`` by an eigendecomposition.
    """
    T = field.horizon if T is None else float(T)
    _dt_for(field, 1, T)

    def run(n):
        dt = T / n
        return _midpoint_exact(model, midpoint_values(field, n, dt), dt, method)

    if tol is None:
        if n_ref is None:
            raise ValueError("a single reference run needs n_ref")
        psi = run(n_ref)
        cost = CostCounter(online_exponentials=n_ref, steps=n_ref)
        return PropagationResult(psi, cost, SchemeKind.REFERENCE, T / n_ref, n_ref, T, info={"method": method})
    n = int(n_ref or n_start)
    prev = run(n)
    gaps = []
    while True:
        if 2 * n > max_n:
            raise ReferenceNotConverged(gaps[-1][1] if gaps else np.nan, n, tol)
        cur = run(2 * n)
        gap = float(np.linalg.norm(cur - prev))
        gaps.append((n, gap))
        if gap < tol:
            break
        n *= 2
        prev = cur
    cost = CostCounter(online_exponentials=2 * n, steps=2 * n)
    return PropagationResult(cur, cost, SchemeKind.REFERENCE, T / (2 * n), 2 * n, T,
                             info={"method": method, "accepted_n_ref": n, "gap": gap, "gaps": gaps,
                                   "tol": tol})
