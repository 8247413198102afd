"""Spacetime event packets, mass-shell transition amplitudes and related checks."""

__version__ = "0.1.0"

from .errors import (
    AllCandidatesDisallowed,
    ConfigError,
    DimensionMismatch,
    GridMismatch,
    PhysicallyDisallowed,
    QEventsError,
    QuadratureFailure,
    StabilityError,
    UnitMismatch,
)
from .geometry import FourVector, MetricSignature, minkowski_dot, minkowski_square
from .packets import (
    EnergyProjected,
    GaussianEventPacket,
    inner_product,
    log_inner_product,
    observable_center_and_uncertainty,
)
from .quadrature import ShellQuadrature
from .massshell import (
    Propagator,
    energy_sign_project,
    evaluate_orbit,
    is_physically_allowed,
    log_transition_amplitude,
    transition_amplitude,
    transition_probability,
)
from .poincare import PoincareElement, apply, boost, invariance_report, rotation, translation
from .emfield import (
    FieldTensorGrid,
    GridField,
    current_and_continuity,
    extract_EB,
    field_tensor,
    gauge_transform,
    homogeneous_maxwell_residual,
)
from .nonrel import SchrodingerOracle, TimeProjectedState, limit_convergence_study, sharp_time_probability
from .histories import CandidateLattice, EventHistory, sample_ensemble, sample_history
from .units import NATURAL, SI, Quantity, UnitSystem, convert_units

__all__ = [name for name in dir() if not name.startswith("_")]
