"""Transient stability toolkit for two-inverter infinite-bus systems.

Builds reduced-order models of GFM/GFL/GSP inverter pairs, locates their
equilibria, traces exact domain-of-attraction boundaries via stable-manifold
backward integration, and evaluates clearing metrics (CCR, t_CCR, CCT, CCA)
for fault scenarios.
"""

from .network import (
    DegenerateFaultError,
    DerivedImpedances,
    FaultKind,
    FaultSpec,
    GeneralizedCoefficients,
    InverterConfig,
    InverterKind,
    NetworkParams,
    TwoInverterSystem,
    UnsupportedCombinationError,
    apply_fault,
    derive_impedances,
    gfl,
    gfm,
    gfm_replacement,
    gsp,
    matched_pll_gain,
    to_generalized,
)
from .dynamics import (
    Event,
    FullOrderModel,
    IntegrationFailure,
    IntegratorSettings,
    ReducedModel,
    RhsMode,
    Trajectory,
    build_model,
    integrate,
    reduced_vs_full_check,
    rhs,
    state2,
    state4,
)
from .equilibria import (
    EnergyFunction,
    Equilibrium,
    EquilibriumKind,
    energy_function,
    find_equilibria,
    jacobian,
    pick_sep,
)

__version__ = "0.1.0"
