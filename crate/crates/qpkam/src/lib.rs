//! Numerical laboratory for quasiperiodic SL(2,R) cocycles over
//! Liouvillean frequencies.
//!
//! The crate is organised bottom-up:
//!
//! * [`arithmetic`]: continued fractions, CD bridges, the Omega(chi)
//!   frequency constructor and exact small-divisor checks.
//! * [`fourier`]: sparse trigonometric polynomials, analytic norms and
//!   sl(2,R) matrix utilities.
//! * [`cocycle`]: iteration, Lyapunov exponent, fibered rotation number.
//! * [`homological`]: scalar and twisted homological equations.
//! * [`kam`]: the multifrequency and two-frequency KAM engines.
//! * [`spectrum`]: energy sweeps built on the layers above.
//!
//! With the default `parallel` feature, enumerations and sweeps run on
//! rayon; [`par::set_serial`] forces the sequential path at run time.

pub mod arithmetic;
pub mod cocycle;
pub mod fourier;
pub mod homological;
pub mod kam;
pub mod par;
pub mod spectrum;
