"""Global trajectories of two relativistic point charges coupled through
retarded/advanced Lienard-Wiechert fields, computed via a convergent
sequence of ODE systems approximating the delay system."""

from .errors import (
    ConvergenceError,
    DegenerateConfigurationError,
    DomainError,
    FlowTooShortError,
    IntegrationStallError,
    NoRootError,
    NotApplicableError,
    SimulationError,
    SingularityError,
    SuperluminalError,
    ValidationError,
)
from .instantaneous import AccelPair, accel_linear_solve, h0_accels, h0_field
from .kernels import (
    BRANCH_ADVANCED,
    BRANCH_RETARDED,
    FieldEvalInput,
    ForceKernel,
    alpha_mix,
    force_kernel,
    mass_matrix,
    mass_matrix_inverse,
    planar_force_kernel,
    unit_separation,
)
from .levels import LevelConfig, Termination, Trajectory, h_field, make_field, trajectory
from .lightcone import DelayTimes, bracket_delay, solve_advanced, solve_retarded
from .observables import (
    DistanceReport,
    self_force,
    self_force_at,
    singularity_time,
    total_momentum,
    trajectory_distance,
)
from .params import (
    ExtendedState,
    StateVector,
    SystemParams,
    circular_initial_condition,
    dimensionless_to_physical,
    length_scale,
    make_params,
    physical_to_dimensionless,
    time_scale,
)
from .rkf45 import (
    StopCondition,
    TrajectorySegment,
    eval_dense,
    eval_flow,
    extend_segment,
    integrate,
)

__version__ = "0.1.0"
