//! Posterior weights over candidate intervals.
//!
//! The weights live in a lazily materialized segment tree over intervals
//! `1..=n_intervals`. A node without children stands for a block whose mass
//! is spread uniformly over its intervals, so a fresh posterior is a single
//! node no matter how many intervals it covers. Range multiplications are
//! recorded as pending tags on inner nodes.

use crate::bac::ChannelParams;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

const NO_CHILDREN: u32 = 0;
const RENORMALIZE_AT: f64 = 1e-9;

#[derive(Clone, Copy, Debug)]
struct Node<T> {
    /// Mass of the subtree, exact up to the pending tags of its ancestors.
    sum: T,
    /// Factor not yet pushed into the children. Always one on leaf blocks.
    tag: T,
    /// Index of the left child; the right child follows it.
    left: u32,
}

/// Where a quantile falls: the interval holding it, the mass strictly before
/// that interval, and the interval's own mass.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Located<T> {
    pub interval: u64,
    pub before: T,
    pub mass: T,
}

impl<T: Scalar> Located<T> {
    /// Coin to flip for quantile `q`: the interval's left coin when the
    /// fractional position `(q - W(j-1)) / w(j)` is at most `q`, else the right one.
    pub fn coin(&self, q: T) -> u64 {
        if self.mass <= T::zero() {
            return self.interval;
        }
        let fraction = (q - self.before) / self.mass;
        if fraction <= q {
            self.interval
        } else {
            self.interval + 1
        }
    }
}

/// Normalized weights over the `n - 1` intervals between `n` coins.
#[derive(Clone, Debug)]
pub struct PosteriorWeights<T> {
    n_intervals: u64,
    nodes: Vec<Node<T>>,
    path: Vec<u32>,
    renormalizations: u64,
}

impl<T: Scalar> PosteriorWeights<T> {
    pub fn new_uniform(n_intervals: u64) -> Result<Self> {
        if n_intervals == 0 {
            return Err(Error::param("posterior needs at least one interval"));
        }
        Ok(Self {
            n_intervals,
            nodes: vec![Node {
                sum: T::one(),
                tag: T::one(),
                left: NO_CHILDREN,
            }],
            path: Vec::new(),
            renormalizations: 0,
        })
    }

    pub fn n_intervals(&self) -> u64 {
        self.n_intervals
    }

    pub fn total(&self) -> T {
        self.nodes[0].sum
    }

    /// Number of tree nodes allocated so far.
    pub fn materialized_nodes(&self) -> usize {
        self.nodes.len()
    }

    pub fn renormalizations(&self) -> u64 {
        self.renormalizations
    }

    fn check_interval(&self, i: u64) -> Result<()> {
        if i == 0 || i > self.n_intervals {
            return Err(Error::Index {
                index: i,
                max: self.n_intervals,
            });
        }
        Ok(())
    }

    /// `W(i)`, the mass of intervals `1..=i`; `W(0) = 0`.
    pub fn prefix_weight(&self, i: u64) -> Result<T> {
        if i > self.n_intervals {
            return Err(Error::Index {
                index: i,
                max: self.n_intervals,
            });
        }
        if i == 0 {
            return Ok(T::zero());
        }
        let (mut idx, mut lo, mut hi) = (0usize, 1u64, self.n_intervals);
        let (mut scale, mut acc) = (T::one(), T::zero());
        loop {
            let node = self.nodes[idx];
            if node.left == NO_CHILDREN {
                let share = node.sum * scale / T::from_count(hi - lo + 1);
                return Ok(acc + share * T::from_count(i - lo + 1));
            }
            if i == hi {
                return Ok(acc + node.sum * scale);
            }
            scale = scale * node.tag;
            let mid = lo + (hi - lo) / 2;
            let l = node.left as usize;
            if i <= mid {
                idx = l;
                hi = mid;
            } else {
                acc = acc + self.nodes[l].sum * scale;
                idx = l + 1;
                lo = mid + 1;
            }
        }
    }

    /// `w(i)`.
    pub fn weight(&self, i: u64) -> Result<T> {
        self.check_interval(i)?;
        let (mut idx, mut lo, mut hi) = (0usize, 1u64, self.n_intervals);
        let mut scale = T::one();
        loop {
            let node = self.nodes[idx];
            if node.left == NO_CHILDREN {
                return Ok(node.sum * scale / T::from_count(hi - lo + 1));
            }
            scale = scale * node.tag;
            let mid = lo + (hi - lo) / 2;
            if i <= mid {
                idx = node.left as usize;
                hi = mid;
            } else {
                idx = node.left as usize + 1;
                lo = mid + 1;
            }
        }
    }

    /// Minimal interval `i` with `W(i) >= q`, together with `W(i-1)` and `w(i)`.
    pub fn locate(&self, q: T) -> Located<T> {
        let (mut idx, mut lo, mut hi) = (0usize, 1u64, self.n_intervals);
        let (mut scale, mut acc) = (T::one(), T::zero());
        loop {
            let node = self.nodes[idx];
            if node.left == NO_CHILDREN {
                let len = hi - lo + 1;
                let share = node.sum * scale / T::from_count(len);
                let k = if share > T::zero() {
                    let steps = ((q - acc) / share).ceil();
                    if steps < T::one() {
                        1
                    } else {
                        steps.to_u64().unwrap_or(len).min(len)
                    }
                } else {
                    1
                };
                return Located {
                    interval: lo + k - 1,
                    before: acc + share * T::from_count(k - 1),
                    mass: share,
                };
            }
            scale = scale * node.tag;
            let mid = lo + (hi - lo) / 2;
            let l = node.left as usize;
            let left_sum = self.nodes[l].sum * scale;
            if acc + left_sum >= q {
                idx = l;
                hi = mid;
            } else {
                acc = acc + left_sum;
                idx = l + 1;
                lo = mid + 1;
            }
        }
    }

    pub fn interval_at_quantile(&self, q: T) -> u64 {
        self.locate(q).interval
    }

    /// Coin to flip for interval `j` chosen at quantile `q`.
    pub fn round_to_coin(&self, j: u64, q: T) -> Result<u64> {
        self.check_interval(j)?;
        let located = Located {
            interval: j,
            before: self.prefix_weight(j - 1)?,
            mass: self.weight(j)?,
        };
        Ok(located.coin(q))
    }

    /// Bayesian update after flipping the coin nearest the `q`-quantile of
    /// interval `j` and observing `outcome`: intervals left of `j` scale by
    /// `d_{y,0}`, intervals right of it by `d_{y,1}`, and `j` itself takes
    /// `d_{y,0}(q - W(j-1)) + d_{y,1}(W(j) - q)`.
    pub fn apply_update(&mut self, j: u64, outcome: bool, params: &ChannelParams<T>, q: T) -> Result<()> {
        self.check_interval(j)?;
        let located = Located {
            interval: j,
            before: self.prefix_weight(j - 1)?,
            mass: self.weight(j)?,
        };
        self.apply_located(&located, outcome, params, q);
        Ok(())
    }

    pub(crate) fn apply_located(&mut self, at: &Located<T>, outcome: bool, params: &ChannelParams<T>, q: T) {
        let (left, right) = params.update_factors(outcome);
        let below = (q - at.before).max(T::zero());
        let above = (at.before + at.mass - q).max(T::zero());
        self.rescale(at.interval, left, right, left * below + right * above);
    }

    /// Multiplies intervals before `j` by `left`, intervals after it by
    /// `right`, and sets `w(j) = center`; renormalizes if the total drifted.
    pub fn rescale(&mut self, j: u64, left: T, right: T, center: T) {
        self.rescale_unnormalized(j, left, right, center);
        let total = self.total();
        if (total - T::one()).abs() > T::tolerance(RENORMALIZE_AT) {
            self.renormalize();
        }
    }

    fn rescale_unnormalized(&mut self, j: u64, left: T, right: T, center: T) {
        debug_assert!(j >= 1 && j <= self.n_intervals);
        let mut path = std::mem::take(&mut self.path);
        path.clear();
        let (mut idx, mut lo, mut hi) = (0usize, 1u64, self.n_intervals);
        while lo < hi {
            self.split(idx, lo, hi);
            let mid = lo + (hi - lo) / 2;
            let l = self.nodes[idx].left as usize;
            path.push(idx as u32);
            if j <= mid {
                self.scale_node(l + 1, right);
                idx = l;
                hi = mid;
            } else {
                self.scale_node(l, left);
                idx = l + 1;
                lo = mid + 1;
            }
        }
        self.nodes[idx].sum = center;
        for &p in path.iter().rev() {
            let l = self.nodes[p as usize].left as usize;
            self.nodes[p as usize].sum = self.nodes[l].sum + self.nodes[l + 1].sum;
        }
        self.path = path;
    }

    /// Divides every weight by the current total.
    pub fn renormalize(&mut self) {
        let total = self.total();
        if total > T::zero() && total.is_finite() {
            let factor = T::one() / total;
            self.scale_node(0, factor);
            self.renormalizations += 1;
        }
    }

    fn scale_node(&mut self, idx: usize, factor: T) {
        let node = &mut self.nodes[idx];
        node.sum = node.sum * factor;
        if node.left != NO_CHILDREN {
            node.tag = node.tag * factor;
        }
    }

    /// Ensures `idx` (covering `lo..=hi`, `lo < hi`) has children with no
    /// pending tag above them.
    fn split(&mut self, idx: usize, lo: u64, hi: u64) {
        let node = self.nodes[idx];
        if node.left == NO_CHILDREN {
            let mid = lo + (hi - lo) / 2;
            let len = T::from_count(hi - lo + 1);
            let left_sum = node.sum * T::from_count(mid - lo + 1) / len;
            let right_sum = node.sum * T::from_count(hi - mid) / len;
            let left = self.nodes.len();
            assert!(left + 1 < u32::MAX as usize, "posterior tree exceeds u32 node indices");
            self.nodes.push(Node {
                sum: left_sum,
                tag: T::one(),
                left: NO_CHILDREN,
            });
            self.nodes.push(Node {
                sum: right_sum,
                tag: T::one(),
                left: NO_CHILDREN,
            });
            self.nodes[idx].left = left as u32;
        } else if node.tag != T::one() {
            let l = node.left as usize;
            self.scale_node(l, node.tag);
            self.scale_node(l + 1, node.tag);
            self.nodes[idx].tag = T::one();
        }
    }
}
