//! Binary asymmetric channel quantities.
//!
//! A coin on the wrong side of the threshold reads as `tau - eps`, a coin on
//! the right side as `tau + eps`; querying through that channel carries at
//! most [`ChannelParams::capacity`] bits per flip. Everything the learner
//! needs (the query quantile and the multiplicative update factors) is
//! derived here once per `(tau, eps)`.

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Identity tolerance for the closed forms before falling back to the
/// numerically maximized quantile.
const CLOSED_FORM_TOL: f64 = 1e-8;
/// Agreement required between the closed form and the maximization.
const MAXIMIZATION_TOL: f64 = 1e-6;

/// Side of the flipped coin an interval lies on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Side {
    Left,
    Right,
}

/// Derived constants of a `(tau, eps)` asymmetric channel.
///
/// `d(x, y)` is the factor applied to posterior mass on side `y` of the
/// flipped coin after observing outcome `x`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ChannelParams<T> {
    pub tau: T,
    pub eps: T,
    pub z: T,
    pub q: T,
    pub capacity: T,
    pub d00: T,
    pub d01: T,
    pub d10: T,
    pub d11: T,
}

impl<T: Scalar> ChannelParams<T> {
    pub fn new(tau: T, eps: T) -> Result<Self> {
        channel_params(tau, eps)
    }

    pub fn d(&self, outcome: bool, side: Side) -> T {
        match (outcome, side) {
            (false, Side::Left) => self.d00,
            (false, Side::Right) => self.d01,
            (true, Side::Left) => self.d10,
            (true, Side::Right) => self.d11,
        }
    }

    /// `(d_{y,0}, d_{y,1})`: factors for mass left and right of the flipped coin.
    pub fn update_factors(&self, outcome: bool) -> (T, T) {
        (self.d(outcome, Side::Left), self.d(outcome, Side::Right))
    }

    /// Probability of heads when the crossing lies left of the query point
    /// with probability `q`: `tau + (2q - 1) eps`.
    pub fn heads_rate(&self) -> T {
        self.tau + (T::lit(2.0) * self.q - T::one()) * self.eps
    }
}

/// Binary entropy in bits, with `0 lg 0 = 0`.
pub fn binary_entropy<T: Scalar>(p: T) -> Result<T> {
    if !(p >= T::zero() && p <= T::one()) {
        return Err(Error::Domain {
            value: p.as_f64(),
            domain: "[0, 1]",
        });
    }
    Ok(entropy(p))
}

pub(crate) fn entropy<T: Scalar>(p: T) -> T {
    let term = |x: T| if x <= T::zero() { T::zero() } else { -x * x.log2() };
    term(p) + term(T::one() - p)
}

fn validate<T: Scalar>(tau: T, eps: T) -> Result<()> {
    if !(tau > T::zero() && tau < T::one()) {
        return Err(Error::param(format!("tau must lie in (0, 1), got {:?}", tau)));
    }
    let limit = tau.min(T::one() - tau) / T::lit(2.0);
    // The calibration meta-search runs at the boundary (tau = 0.9, eps = 0.05),
    // so equality is admitted.
    if !(eps > T::zero() && eps <= limit + T::tolerance(1e-12)) {
        return Err(Error::param(format!(
            "eps must lie in (0, min(tau, 1 - tau) / 2], got {:?} for tau {:?}",
            eps, tau
        )));
    }
    Ok(())
}

/// Mutual information of the channel when a `tau + eps` coin is flipped with
/// probability `q`.
pub fn information<T: Scalar>(tau: T, eps: T, q: T) -> T {
    let lo = tau - eps;
    let hi = tau + eps;
    entropy((T::one() - q) * lo + q * hi) - (T::one() - q) * entropy(lo) - q * entropy(hi)
}

/// Golden-section maximization of [`information`] over `q` in `(0, 1)`.
/// Returns `(argmax, max)`.
pub fn maximize_information<T: Scalar>(tau: T, eps: T) -> Result<(T, T)> {
    validate(tau, eps)?;
    let ratio = T::lit(0.618_033_988_749_894_8);
    let (mut a, mut b) = (T::zero(), T::one());
    let mut x1 = b - ratio * (b - a);
    let mut x2 = a + ratio * (b - a);
    let mut f1 = information(tau, eps, x1);
    let mut f2 = information(tau, eps, x2);
    let stop = T::epsilon().sqrt() * T::lit(1e-3);
    for _ in 0..200 {
        if b - a <= stop {
            break;
        }
        if f1 < f2 {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + ratio * (b - a);
            f2 = information(tau, eps, x2);
        } else {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - ratio * (b - a);
            f1 = information(tau, eps, x1);
        }
    }
    let q = (a + b) / T::lit(2.0);
    Ok((q, information(tau, eps, q)))
}

/// Channel capacity computed by direct maximization; the independent
/// counterpart of the closed form in [`channel_params`].
pub fn capacity_by_maximization<T: Scalar>(tau: T, eps: T) -> Result<T> {
    maximize_information(tau, eps).map(|(_, c)| c)
}

fn factors<T: Scalar>(tau: T, eps: T, q: T) -> (T, T, T, T) {
    let shift = (T::lit(2.0) * q - T::one()) * eps;
    let heads = tau + shift;
    let tails = T::one() - tau - shift;
    (
        (T::one() - tau - eps) / tails,
        (T::one() - tau + eps) / tails,
        (tau + eps) / heads,
        (tau - eps) / heads,
    )
}

fn consistent<T: Scalar>(p: &ChannelParams<T>) -> bool {
    let tol = T::tolerance(CLOSED_FORM_TOL);
    let half = T::lit(0.5);
    let two = T::lit(2.0);
    let (tau, eps) = (p.tau, p.eps);
    if !(p.q > T::zero() && p.q < T::one()) || !p.capacity.is_finite() {
        return false;
    }
    if (p.q - half).abs() > two * eps / (tau * (T::one() - tau)) + tol {
        return false;
    }
    let upper = (tau + eps) * p.d10.log2() + (T::one() - tau - eps) * p.d00.log2();
    let lower = (tau - eps) * p.d11.log2() + (T::one() - tau + eps) * p.d01.log2();
    (upper - p.capacity).abs() <= tol && (lower - p.capacity).abs() <= tol
}

/// All derived constants of the `(tau, eps)` channel.
///
/// `z`, `q` and the capacity come from the explicit formulas, evaluated in
/// log space. If those fail their own consistency checks the quantile is
/// taken from the numeric maximization instead, and in every case the
/// capacity must agree with the maximization to `1e-6`.
pub fn channel_params<T: Scalar>(tau: T, eps: T) -> Result<ChannelParams<T>> {
    validate(tau, eps)?;
    let one = T::one();
    let two = T::lit(2.0);
    let h_lo = entropy(tau - eps);
    let h_hi = entropy(tau + eps);

    let log2_z = (h_lo - h_hi) / (two * eps);
    // 1 / (1 + z) and lg(1 + z) without forming z when it is huge or tiny.
    let (inv_one_plus_z, lg_one_plus_z) = if log2_z > T::zero() {
        let r = (-log2_z).exp2();
        (r / (one + r), log2_z + r.ln_1p() / T::lit(std::f64::consts::LN_2))
    } else {
        let z = log2_z.exp2();
        (one / (one + z), z.ln_1p() / T::lit(std::f64::consts::LN_2))
    };
    let z = log2_z.exp2();
    let q = ((one - tau + eps) - inv_one_plus_z) / (two * eps);
    let capacity = lg_one_plus_z + (tau - eps) / (two * eps) * h_hi - (tau + eps) / (two * eps) * h_lo;
    let (d00, d01, d10, d11) = factors(tau, eps, q);
    let mut params = ChannelParams {
        tau,
        eps,
        z,
        q,
        capacity,
        d00,
        d01,
        d10,
        d11,
    };

    let (q_max, c_max) = maximize_information(tau, eps)?;
    if !consistent(&params) {
        let (d00, d01, d10, d11) = factors(tau, eps, q_max);
        params = ChannelParams {
            q: q_max,
            capacity: c_max,
            d00,
            d01,
            d10,
            d11,
            ..params
        };
    }
    if (params.capacity - c_max).abs() > T::tolerance(MAXIMIZATION_TOL) {
        return Err(Error::Numeric(format!(
            "closed-form capacity {:?} disagrees with maximization {:?} at tau={:?} eps={:?}",
            params.capacity, c_max, tau, eps
        )));
    }
    Ok(params)
}

/// Expected-query floor `(1 - delta)(lg(n - 2) - 1) / C`, clamped at zero.
pub fn expectation_floor<T: Scalar>(n: u64, tau: T, eps: T, delta: T) -> Result<T> {
    if n < 3 {
        return Err(Error::param(format!("expectation floor needs n >= 3, got {n}")));
    }
    let capacity = channel_params(tau, eps)?.capacity;
    let bits = T::from_count(n - 2).log2() - T::one();
    Ok(((T::one() - delta) * bits / capacity).max(T::zero()))
}
