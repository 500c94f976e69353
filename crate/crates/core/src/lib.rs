//! Noisy binary search over monotone coins.
//!
//! Given `n` coins whose heads probabilities are nondecreasing, find an
//! interval `[i, i + 1]` whose probability range meets `(tau - eps, tau + eps)`.
//! The main algorithm is a Bayesian screening search: a learner that spends
//! close to `lg n / C` flips (where `C` is the capacity of the asymmetric
//! channel a coin flip represents), followed by a cheap verification pass
//! over a handful of candidates. Baselines and a benchmark harness for
//! comparing sample budgets live alongside it.
//!
//! The channel math and the posterior are generic over the float type; the
//! aliases below fix it to `f64`, which everything else uses.

pub mod bac;
pub mod baselines;
pub mod error;
pub mod harness;
pub mod learner;
pub mod oracle;
pub mod posterior;
pub mod rng;
pub mod scalar;
pub mod screening;

pub use error::{Error, Result};
pub use oracle::{CoinOracle, Oracle, ProblemInstance, RunReport};
pub use scalar::Scalar;

pub type ChannelParams = bac::ChannelParams<f64>;
pub type ChannelParams32 = bac::ChannelParams<f32>;
pub type Posterior = posterior::PosteriorWeights<f64>;
pub type Posterior32 = posterior::PosteriorWeights<f32>;
pub type LearnTranscript = learner::LearnTranscript<f64>;
