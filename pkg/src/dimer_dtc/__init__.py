"""Simulation toolkit for a coherently driven, lossy two-site Kerr dimer.

Subpackages cover the full analysis chain: truncated Fock-space operators
(`fock`), the Hamiltonian and Liouvillian (`model`), steady states and
master-equation integration (`steady_state`), Liouvillian spectra
(`spectrum`), correlation observables (`observables`), mean-field fixed
points and limit cycles (`meanfield`), stochastic phase-space trajectories
(`twa`), damped-oscillation fits (`fitting`), and the batch runner (`cli`).
"""

from .errors import (
    BlowUpError,
    ConfigError,
    CutoffError,
    DegenerateSteadyStateError,
    DimensionError,
    DimerDtcError,
    MemoryBudgetError,
    PositivityError,
    SolverConvergenceError,
    StepSizeError,
)
from .fock import FockCutoff, annihilation, creation, identity, kron, number_operator
from .model import (
    DimerParams,
    LiouvillianOperator,
    ScalingPoint,
    apply_liouvillian,
    build_hamiltonian,
    build_liouvillian,
)
from .states import DensityMatrix
from .steady_state import evolve_master_equation, solve_steady_state
from .spectrum import (
    BandStructure,
    SpectrumResult,
    detect_band_structure,
    leading_eigenvalues,
    liouvillian_gap,
)
from .observables import (
    ObservableReport,
    expectation,
    log_negativity,
    time_averaged_rho,
    trace_distance,
    von_neumann_entropy,
)
from .meanfield import (
    GPParams,
    GPSolution,
    GPState,
    PhaseDiagramCell,
    Stability,
    classify_stability,
    find_steady_states,
    gp_rhs,
    integrate_gp,
    limit_cycle_period,
    linearize,
    scan_phase_diagram,
)
from .twa import (
    SdeConfig,
    TrajectoryEnsemble,
    ensemble_observables,
    integrate_trajectory,
    phase_space_histogram,
    run_ensemble,
)
from .fitting import DampedOscillationFit, GapScalingResult, fit_damped_oscillations, gap_scaling

__version__ = "0.1.0"
