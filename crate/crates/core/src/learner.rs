//! The Bayesian learner: repeatedly query the capacity-achieving quantile
//! of the posterior, flip the nearer coin, and update as if the fractional
//! coin had been flipped.

use std::fmt;

use crate::bac::{channel_params, ChannelParams};
use crate::error::{Error, Result};
use crate::oracle::Oracle;
use crate::posterior::PosteriorWeights;
use crate::scalar::Scalar;

/// Everything one learner run produced.
#[derive(Clone, Debug)]
pub struct LearnTranscript<T> {
    /// Interval chosen in each round (the list `L`).
    pub intervals: Vec<u64>,
    pub outcomes: Vec<bool>,
    pub final_posterior: PosteriorWeights<T>,
}

impl<T> LearnTranscript<T> {
    pub fn rounds(&self) -> usize {
        self.intervals.len()
    }
}

/// A learner run cut short by an oracle error, with the rounds completed so far.
#[derive(Debug)]
pub struct Interrupted<T> {
    pub partial: LearnTranscript<T>,
    pub error: Error,
}

impl<T> fmt::Display for Interrupted<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "learner interrupted after {} rounds: {}",
            self.partial.intervals.len(),
            self.error
        )
    }
}

impl<T: fmt::Debug> std::error::Error for Interrupted<T> {}

impl<T> From<Box<Interrupted<T>>> for Error {
    fn from(e: Box<Interrupted<T>>) -> Self {
        e.error
    }
}

/// Runs the learner for `rounds` flips over all coins of `oracle`.
pub fn bayes_learn<T: Scalar, O: Oracle + ?Sized>(
    oracle: &mut O,
    tau: T,
    eps: T,
    rounds: u64,
) -> Result<LearnTranscript<T>, Box<Interrupted<T>>> {
    let params = channel_params(tau, eps).map_err(|error| {
        Box::new(Interrupted {
            partial: LearnTranscript {
                intervals: Vec::new(),
                outcomes: Vec::new(),
                final_posterior: PosteriorWeights::new_uniform(1).expect("one interval"),
            },
            error,
        })
    })?;
    bayes_learn_with(oracle, &params, rounds)
}

/// [`bayes_learn`] with precomputed channel parameters.
pub fn bayes_learn_with<T: Scalar, O: Oracle + ?Sized>(
    oracle: &mut O,
    params: &ChannelParams<T>,
    rounds: u64,
) -> Result<LearnTranscript<T>, Box<Interrupted<T>>> {
    let n = oracle.coins();
    let posterior = match n.checked_sub(1).filter(|&m| m >= 1) {
        Some(m) => PosteriorWeights::new_uniform(m),
        None => Err(Error::param(format!("learner needs at least two coins, got {n}"))),
    };
    let mut transcript = LearnTranscript {
        intervals: Vec::with_capacity(rounds.min(1 << 20) as usize),
        outcomes: Vec::with_capacity(rounds.min(1 << 20) as usize),
        final_posterior: match posterior {
            Ok(p) => p,
            Err(error) => {
                return Err(Box::new(Interrupted {
                    partial: LearnTranscript {
                        intervals: Vec::new(),
                        outcomes: Vec::new(),
                        final_posterior: PosteriorWeights::new_uniform(1).expect("one interval"),
                    },
                    error,
                }))
            }
        },
    };
    let q = params.q;
    for _ in 0..rounds {
        let at = transcript.final_posterior.locate(q);
        let coin = at.coin(q);
        let outcome = match oracle.flip(coin) {
            Ok(y) => y,
            Err(error) => {
                return Err(Box::new(Interrupted {
                    partial: transcript,
                    error,
                }))
            }
        };
        transcript.intervals.push(at.interval);
        transcript.outcomes.push(outcome);
        transcript.final_posterior.apply_located(&at, outcome, params, q);
    }
    Ok(transcript)
}

/// Learner round count
/// `ceil((1 + 7 gamma) / C * (lg n + c1 sqrt(lg n lg(1/delta)) + c2 lg(1/delta)))`.
pub fn bayes_learn_iterations(n: u64, delta: f64, gamma: f64, capacity: f64, c1: f64, c2: f64) -> Result<u64> {
    if n < 2 {
        return Err(Error::param(format!("n must be at least 2, got {n}")));
    }
    if !(delta > 0.0 && delta <= 1.0) {
        return Err(Error::param(format!("delta must lie in (0, 1], got {delta}")));
    }
    if !(gamma > 0.0 && gamma <= 1.0 / 7.0 + 1e-12) {
        return Err(Error::param(format!("gamma must lie in (0, 1/7], got {gamma}")));
    }
    if !(capacity > 0.0) || c1 < 0.0 || c2 < 0.0 {
        return Err(Error::param("capacity must be positive and constants nonnegative"));
    }
    let lg_n = (n as f64).log2();
    let lg_inv_delta = (1.0 / delta).log2();
    let bits = lg_n + c1 * (lg_n * lg_inv_delta).sqrt() + c2 * lg_inv_delta;
    Ok(((1.0 + 7.0 * gamma) / capacity * bits).ceil() as u64)
}
