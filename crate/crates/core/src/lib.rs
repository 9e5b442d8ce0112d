//! Simulation and verification toolkit for mean-field Gibbs measures with
//! k-body interactions: interacting-particle samplers, U-statistics,
//! free-energy and rate functionals, critical-equation fixed points, and
//! exact optimal-transport distances.

pub mod error;
pub mod free_energy;
pub mod gibbs;
pub mod measure;
pub mod mgf;
pub mod numeric;
pub mod potentials;
pub mod space;
pub mod ustats;
pub mod wasserstein;

pub use error::{Error, Result};
pub use free_energy::{
    critical_map, fixed_point, free_energy, interaction_energy, minimize, rate_identification,
    spin_free_energy, stationary_residual, FreeEnergyBreakdown, InteractionEnergy,
    MinimizerResult, SearchSpec,
};
pub use gibbs::{
    grad_hamiltonian, hamiltonian, log_partition_estimate, log_partition_exact, run_chain,
    sample_mcmc, simulate_sde, spin_magnetization, GibbsModel, LangevinConfig, McmcConfig,
    McmcRun, SdeTrajectory, TiEstimate, TiPoint,
};
pub use measure::{
    build_reference, empirical_measure, relative_entropy, DiscreteMeasure, EmpiricalMeasure,
    ReferenceMeasure,
};
pub use mgf::{iterated_log_mgf_sides, log_mgf_exact, log_mgf_key_bound, TupleKernelTable};
pub use potentials::{
    check_exp_integrability, select_truncation_level, truncate, ConfinementPotential,
    ExpIntegrability, FnKernel, InteractionFamily, InteractionPotential, Kernel,
    TruncatedPotential, TruncationLevel,
};
pub use space::{Configuration, EuclideanSpace, FiniteSpace, Point, PointRef, StateSpace};
pub use ustats::{
    decoupled_u_sum, decoupling_constant, u_statistic, u_statistic_update, MoveDelta, UStatCache,
};
pub use wasserstein::{
    tail_condition_check, wasserstein_1d, wasserstein_exact, TailCheck, TransportPlan,
};
