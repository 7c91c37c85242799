"""Structure-preserving spectral simulator for the periodic nonlinear string
equation, with a toolkit for coisotropic rigidity experiments: camel-point
searches, symplectic reduction, certified norm bounds, capacity oracles, and
truncation-convergence studies."""

__version__ = "0.1.0"

from .camel import (
    Ball,
    BallBase,
    CamelBoundReport,
    CamelPointSet,
    CapacityOracleEntry,
    CloudBase,
    CoisotropicCylinder,
    DisplacementProfile,
    DisplacementReport,
    ModeSearchResult,
    PolydiskBase,
    SwapReport,
    TorusBase,
    arctan_profile,
    camel_bound_check,
    camel_fiber_bound,
    capacity_oracle,
    capacity_table,
    compose_hamiltonians,
    coupled_oscillator,
    cutoff_hamiltonian,
    displacement_demo,
    displacement_system,
    exact_displacement_map,
    find_camel_points,
    harmonic_oscillator,
    invert_hamiltonian,
    maximize_mode,
    min_enclosing_ball,
    reduce_points,
    sample_cylinder,
    swap_counterexample,
    thread_count,
    verify_camel_bisection,
    verify_composition,
    verify_inverse,
)
from .galerkin import (
    ConvergenceReport,
    approx_error,
    epsilon_curve,
    isotonic_decreasing,
    load_report,
    sample_ball_coeffs,
    sample_states,
    save_report,
)
from .integrators import (
    FlowConfig,
    FlowDivergenceError,
    GenericHamiltonianSystem,
    Trajectory,
    flow,
    flow_map,
    integrate_generic,
    interaction_flow,
    jacobian_fd,
    kick_step,
    lie_step,
    load_trajectory,
    make_strang_step_map,
    midpoint_step_generic,
    picard_mild,
    quadratic_energy,
    save_trajectory,
    state_flatten,
    state_unflatten,
    strang_step,
    symplectic_matrix_generic,
    symplectic_matrix_state,
    total_energy,
)
from .linear_ops import (
    LinearBlock,
    apply_J,
    apply_diag,
    apply_exp_tJA,
    apply_exp_tJA_arrays,
    exp_block,
    exp_coeff_arrays,
    group_norm_bound,
    lam,
)
from .nonlinearity import (
    NonlinearitySpec,
    custom_bounded,
    get_spec,
    grad_h,
    grad_h_arrays,
    grad_h_trunc,
    grad_h_trunc_arrays,
    h_value,
    h_value_arrays,
    sine_gordon,
    zero_nonlinearity,
)
from .phase_space import (
    GridFunction,
    PhaseVector,
    basis_state,
    coeffs_from_samples,
    e_norm,
    f_theta_norm,
    from_grid,
    grid_points,
    lambda_weights,
    load_state,
    make_state,
    mode_amplitude,
    mode_numbers,
    project,
    samples_from_coeffs,
    save_state,
    state_from_csv,
    state_to_csv,
    symplectic_form,
    to_grid,
    zero_state,
)
from .integrators import apply_J_generic

__all__ = [name for name in dir() if not name.startswith("_")]
