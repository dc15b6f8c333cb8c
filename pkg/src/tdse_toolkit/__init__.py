"""Toolkit propagators for the controlled Schrödinger equation ``i dpsi/dt = (H0 - mu eps(t)) psi``."""

from .errors import (
    ConfigError,
    DimensionError,
    FieldBoundsError,
    HermiticityError,
    HorizonError,
    ParseError,
    ReferenceNotConverged,
    SpectralError,
    SweepError,
    ToolkitError,
)
from .field import (
    CallableField,
    ControlField,
    ConvexWeights,
    DerivativeStencil,
    FieldGrid,
    PiecewiseConstant,
    Sinusoid,
    Tabulated,
    ValueGrid,
    bracket_weights,
    derivative_stencil,
    make_grid,
    midpoint_value,
    nearest_index,
)
from .model import QuantumModel, build_rigid_rotor, load_model, random_model, save_model
from .operators import (
    SpectralFactors,
    UnitaryPropagator,
    apply,
    commutator,
    expm_unitary,
    hermiticity_defect,
    spectral_factorize,
    unitarity_defect,
)
from .schemes import (
    CostCounter,
    PropagationResult,
    SchemeKind,
    propagate_improved_high,
    propagate_improved_low,
    propagate_quantified_high,
    propagate_reference,
    propagate_strang,
    propagate_toolkit,
)
from .toolkit import (
    CorrectorPair,
    PairToolkit,
    Toolkit,
    build_correctors,
    build_pair_toolkit,
    build_toolkit,
    fractional_power,
    load_toolkit,
    save_toolkit,
)

__version__ = "0.1.0"
