//! Stationary states of boundary-driven dissipative Heisenberg chains.
//!
//! Two routes to the steady state of `d rho/dt = L rho`:
//!
//! * [`oracle`]: dense fourth-order Runge-Kutta integration of the full
//!   density matrix, usable up to about a dozen sites;
//! * [`ndo`] + [`sampling`] + [`training`]: a restricted-Boltzmann-machine
//!   neural density operator trained by stochastic gradient descent on
//!   `||L rho||^2`, with exact, Metropolis, accept-only and hybrid
//!   (edge-exact) sampling.
//!
//! All numerics are generic over [`Real`] (`f32` or `f64`); the `*64`
//! aliases below fix the scalar to `f64`.

pub mod error;
pub mod model;
pub mod ndo;
pub mod oracle;
pub mod sampling;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use model::{
    build_dense_liouvillian, enumerate_configurations, hamiltonian_action, liouvillian_row,
    ChainParameters, DenseLiouvillian, LiouvillianStencil, SamplePair, SpinConfiguration,
};
pub use ndo::{LogDerivatives, NdoCheckpoint, NdoParameters, ParameterLayout};
pub use oracle::{
    find_steady_state, observables_from_dense, rk4_step, DenseDensityMatrix, OracleReport,
    SteadyStateResult,
};
pub use sampling::{
    acceptance_probability, draw_batch, propose, sample_accept_only, sample_exact, sample_hybrid,
    sample_metropolis, Acceptance, BatchKind, SampleBatch, SamplerConfig, Strategy,
};
pub use scalar::Real;
pub use training::{
    estimate_cost, estimate_diagonal_observable, estimate_gradient, local_liouvillian_estimator,
    run_training, sgd_step, IterationRecord, TrainingConfig,
};

pub use num_complex::Complex;

pub type Complex64 = num_complex::Complex<f64>;
pub type ChainParameters64 = ChainParameters<f64>;
pub type LiouvillianStencil64 = LiouvillianStencil<f64>;
pub type DenseLiouvillian64 = DenseLiouvillian<f64>;
pub type DenseDensityMatrix64 = DenseDensityMatrix<f64>;
pub type SteadyStateResult64 = SteadyStateResult<f64>;
pub type NdoParameters64 = NdoParameters<f64>;
pub type LogDerivatives64 = LogDerivatives<f64>;
pub type SampleBatch64 = SampleBatch<f64>;
pub type TrainingConfig64 = TrainingConfig<f64>;
pub type IterationRecord64 = IterationRecord<f64>;

pub type ChainParameters32 = ChainParameters<f32>;
pub type NdoParameters32 = NdoParameters<f32>;
pub type DenseDensityMatrix32 = DenseDensityMatrix<f32>;
