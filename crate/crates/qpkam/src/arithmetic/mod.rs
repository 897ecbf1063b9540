//! Exact integer and rational arithmetic for frequencies.
//!
//! Continued fractions are kept over arbitrary-precision integers so that
//! every inequality on denominators is decided exactly. Real inputs carry an
//! explicit error radius ([`HpReal`]); anything that cannot be resolved at
//! that radius is reported as [`ArithError::PrecisionExhausted`].

mod bridges;
mod cf;
mod diophantine;
mod hpreal;
mod lattice;
mod omega;
mod smalldiv;
pub mod xprec;

pub use bridges::{cmp_pow, select_cd_bridges, u_tilde, validate_bridges, BridgeSelection, BridgeViolation};
pub use cf::{cf_expand, cf_laws, CfLawReport, CfLawRow, torus_norm, torus_norm_f64, ContinuedFraction, FreqCoord, FrequencyPair, FrequencyRecord};
pub(crate) use cf::torus_norm_lower;
pub use diophantine::{beta_estimate, check_rho_diophantine, check_rho_diophantine_f64, DiophantineReport};
pub use hpreal::HpReal;
pub use lattice::{l1_norm, lattice_ball, lattice_half_ball};
pub use omega::{construct_omega_chi, Growth, OmegaChiFrequency, OmegaProperties, OmegaRecord, OmegaStep, StepWitness};
pub use smalldiv::{
    verify_small_divisors, DivisorMode, SmallDivisorReport, VerificationRow, DEFAULT_BRUTE_FORCE_CAP,
};

use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ArithError {
    #[error("precision exhausted after {depth_reached} quotients")]
    PrecisionExhausted { depth_reached: usize },
    #[error("need at least 3 convergents, got {0}")]
    TooFewConvergents(usize),
    #[error("exact growth exceeds digit budget at step {failed_step}; feasible prefix has {feasible_steps} steps")]
    GrowthOverflow { feasible_steps: usize, failed_step: usize },
    #[error("no coprime witness in window at step {step} ({which})")]
    NoWitness { step: usize, which: &'static str },
    #[error("brute-force cap exceeded; largest verifiable n is {largest_feasible:?}")]
    CapExceeded { largest_feasible: Option<usize> },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}
