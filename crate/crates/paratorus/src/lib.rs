//! Spectral toolkit for paradifferential calculus on the periodic torus and
//! a paralinearized mollified-flow solver for quasilinear Hamiltonian
//! KdV-type equations.

pub mod config;
pub mod error;
pub mod flow;
pub mod grid;
pub mod hamiltonian;
pub mod paracalc;
pub mod paralin;
pub mod quantize;
pub mod scalar;
pub mod solver;
pub mod symbol;

pub use config::{parse_config, ExperimentConfig, InitialData};
pub use error::{Error, Result};
pub use hamiltonian::{
    build_density, ellipticity_margin, hamiltonian_value, kdv_density, nonlinear_rhs,
    quasilinear_density, EllipticityReport, HamiltonianDensity, Monomial,
};
pub use flow::{
    advance_linear, cancellation_check, conjugator, energy_apparatus, energy_value,
    modified_energy, mollify_symbol, solve_linear, Conjugator, EnergyApparatus, GrowthReport,
    GrowthRow, ModifiedEnergy, MollifiedGenerator,
};
pub use paracalc::{
    compose_bw, compose_with_remainder, paraproduct, paraproduct_weights, sharp_rho,
    CompositionResult, ParaproductSplit,
};
pub use paralin::{
    build_generator_symbol, generator_coeff_trunc, residual_remainder, GeneratorSymbol,
};
pub use solver::{
    continuity_probe, iterate_once, oracle_solve, oracle_step_cap, safeguard_mollification, solve,
    trajectory_to_text, ContinuityReport, ContinuityRow, IterationLedger, IterationRow,
    SolverConfig, Trajectory,
};
pub use quantize::{
    apply_operator, operator_band_norm, quantize_bw, quantize_weyl, Provenance, SpectralOperator,
};
pub use grid::{analyze, analyze_complex, quadrature, Dft, GridFunction, SobolevIndex};
pub use scalar::{Cx, Scalar};
pub use symbol::{
    chi, chi_eps, dyadic_probe, ChiModulation, CutoffChi, FrequencyMultiplier, MultMonomial,
    PeriodicFn, Symbol, SymbolTerm,
};

/// Concrete double-precision aliases.
pub type GridFunction64 = GridFunction<f64>;
pub type Symbol64 = Symbol<f64>;
pub type PeriodicFn64 = PeriodicFn<f64>;
