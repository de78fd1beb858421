//! Relational-graph inflation, Fiedler projection and order-book liquidity
//! geometry.
//!
//! The pipeline runs in four stages, each a module:
//!
//! * [`graph`]: a fixed vertex set grown by degree-proportional edge additions,
//! * [`spectral`]: the one-dimensional Fiedler projection of that graph and
//!   the return / risk / balance observables defined on it,
//! * [`book`]: order-book snapshots (simulated from a projection, or ingested
//!   through [`ingest`]) turned into binned and cumulative liquidity profiles,
//! * [`fit`]: least-squares fits of cumulative and differential liquidity
//!   models, AIC-based comparison and residual diagnostics, on top of the
//!   special functions in [`specfun`].
//!
//! Numeric code is generic over [`Real`] (`f32` or `f64`); the `*64` aliases
//! below fix the double-precision instantiation used by the CLI.

pub mod book;
pub mod fit;
pub mod graph;
pub mod ingest;
pub mod scalar;
pub mod sim;
pub mod specfun;
pub mod spectral;

pub use scalar::Real;

pub type Projection64 = spectral::Projection<f64>;
pub type BookSnapshot64 = book::BookSnapshot<f64>;
pub type SideProfile64 = book::SideProfile<f64>;
pub type CumulativeProfile64 = book::CumulativeProfile<f64>;
pub type FitResult64 = fit::FitResult<f64>;
pub type FitOptions64 = fit::FitOptions<f64>;
