"""zitterlab: numerical laboratory for a deterministic extended-particle model.

Four complex vertex processes vibrate around a common gravity center; their
cycle averages carry spin +-hbar/2 and saturate Heisenberg's bound exactly,
the mean converges to the classical drift path, and when the drift is read
from a Schrodinger wave field the gravity center follows the de Broglie-Bohm
trajectory.  See README.md for the scenario runner.
"""

__version__ = "0.1.0"

from .errors import (
    ConfigError,
    EnsembleFailure,
    EpsilonUnderflow,
    LeftDomain,
    MisalignedCycle,
    MissingRequired,
    NodeRegion,
    NonFiniteVelocity,
    OutOfRange,
    PacketTooNarrow,
    PacketTouchesBoundary,
    ResolutionLoss,
    UnknownField,
    UnknownScenario,
    ZitterlabError,
)
from .process import (
    CircularVelocity,
    ClassicalPath,
    ConstantVelocity,
    EpsilonMode,
    Permutation,
    PhysParams,
    PolynomialVelocity,
    ProcessRun,
    ProcessState,
    SampledVelocity,
    Sense,
    VelocityProgram,
    classical_trajectory,
    gamma,
    initial_state,
    run_process,
    step,
    vertex_offset,
    zero_velocity,
)
from .observables import (
    CycleObservables,
    cycle_spin,
    cycle_uncertainties,
    intrinsic_spin_closed_form,
    measure_cycle,
    measure_run,
    observables_to_csv,
    string_length,
)
from .schrodinger import (
    Grid2D,
    Potential,
    WaveFunction,
    analytic_free_gaussian,
    density_and_phase_gradients,
    energy,
    evolve_frames,
    free_potential,
    harmonic_ground_state,
    harmonic_potential,
    init_gaussian,
    moments,
    split_step_evolve,
)
from .pilot import (
    EquivarianceReport,
    FrameInterpolator,
    Trajectory,
    VelocityField,
    bohm_velocity_at,
    ensemble_equivariance,
    guide_process,
    integrate_trajectory,
    sample_from_density,
    velocity_field,
)
from .verification import (
    CATALOG,
    RateReport,
    complex_hj_residual,
    cycle_increment_residuals,
    dynkin_apply,
    least_action_saddle_check,
    fit_rate,
    generator_identity_check,
    process_convergence_rates,
)
from .scenarios import SCENARIOS, ScenarioConfig, ScenarioResult, run_scenario
from .cli import parse_config
