//! Scalar entropy kernels and information measures over finite distributions.
//!
//! Every quantity is reported in bits. The convention `0 · log 0 = 0` is used
//! throughout, so deterministic outcomes contribute nothing.

use std::collections::BTreeMap;
use std::f64::consts::LN_2;
use std::fmt;

use serde::Serialize;

use crate::error::{Error, Result};

/// Slack allowed outside `[0, 1]` before a value is rejected as a probability.
pub const PROB_SLACK: f64 = 1e-12;

/// Tolerance on the total mass of a distribution before it is renormalized.
pub const NORMALIZATION_TOL: f64 = 1e-9;

/// Default bound on the marginals in the union-closed entropy theorem.
pub const MU: f64 = 0.01;

/// Default split point between "small" and "large" conditional probabilities.
pub const THRESHOLD: f64 = 0.1;

/// Default ratio claimed by the union-closed entropy theorem.
pub const RATIO: f64 = 1.26;

/// The fixed point `(3 - √5) / 2` where `H(2p - p²) = H(p)`.
pub fn fixed_point() -> f64 {
    (3.0 - 5f64.sqrt()) / 2.0
}

/// A probability in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct Prob(f64);

impl Prob {
    pub const ZERO: Prob = Prob(0.0);
    pub const ONE: Prob = Prob(1.0);

    /// Validates `value`, clamping anything within [`PROB_SLACK`] of the unit
    /// interval.
    pub fn new(value: f64) -> Result<Self> {
        if !value.is_finite() || !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&value) {
            return Err(Error::Domain(format!("probability {value} outside [0, 1]")));
        }
        Ok(Prob(value.clamp(0.0, 1.0)))
    }

    /// Clamps without checking. For values produced by arithmetic on probabilities.
    pub(crate) fn clamped(value: f64) -> Self {
        Prob(value.clamp(0.0, 1.0))
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

impl TryFrom<f64> for Prob {
    type Error = Error;

    fn try_from(value: f64) -> Result<Self> {
        Prob::new(value)
    }
}

impl fmt::Display for Prob {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// Binary entropy `H(p) = -p log₂ p - (1-p) log₂ (1-p)`.
pub fn binary_entropy(p: Prob) -> f64 {
    h(p.0)
}

/// Unchecked binary entropy on a raw `f64`, clamped into `[0, 1]`.
///
/// The smaller of `p` and `1 - p` is taken as the exactly-known quantity and
/// the other logarithm goes through `ln_1p`, so neither end of the interval
/// loses digits to cancellation.
#[inline]
pub fn h(p: f64) -> f64 {
    if p <= 0.0 || p >= 1.0 {
        return 0.0;
    }
    let nats = if p <= 0.5 {
        p * p.ln() + (1.0 - p) * (-p).ln_1p()
    } else {
        let r = 1.0 - p;
        p * (-r).ln_1p() + r * r.ln()
    };
    -nats / LN_2
}

/// `Pr[X ∪ X' = 1]` for independent bits with `Pr[X = 1] = p` and `Pr[X' = 1] = p2`.
pub fn union_prob(p: Prob, p2: Prob) -> Prob {
    Prob::clamped(union_raw(p.0, p2.0))
}

/// Raw form of [`union_prob`]. Symmetric bit-for-bit in its arguments and exact
/// whenever either argument is 0 or 1.
#[inline]
pub fn union_raw(p: f64, p2: f64) -> f64 {
    let (hi, lo) = if p >= p2 { (p, p2) } else { (p2, p) };
    hi + lo * (1.0 - hi)
}

fn plogp_sum<'a>(masses: impl IntoIterator<Item = &'a f64>) -> f64 {
    let mut acc = 0.0;
    for &m in masses {
        if m > 0.0 {
            acc -= m * m.log2();
        }
    }
    acc
}

/// A distribution over a finite set of labels.
///
/// Labels with zero mass are kept: they are part of the label space, which
/// matters for [`kl_divergence`].
#[derive(Debug, Clone, PartialEq)]
pub struct FiniteDistribution<L: Ord> {
    masses: BTreeMap<L, f64>,
    residual: f64,
}

impl<L: Ord + Clone> FiniteDistribution<L> {
    /// Builds a distribution from possibly unnormalized weights. Repeated labels
    /// are merged by summing their weights.
    pub fn new(weights: impl IntoIterator<Item = (L, f64)>) -> Result<Self> {
        let mut masses = BTreeMap::new();
        for (label, w) in weights {
            if !w.is_finite() || w < -PROB_SLACK {
                return Err(Error::Domain(format!("invalid mass {w}")));
            }
            *masses.entry(label).or_insert(0.0) += w.max(0.0);
        }
        let total: f64 = masses.values().sum();
        if total <= 0.0 {
            return Err(Error::Domain("total mass is zero".into()));
        }
        for m in masses.values_mut() {
            *m /= total;
        }
        Ok(FiniteDistribution {
            masses,
            residual: total - 1.0,
        })
    }

    pub fn uniform(labels: impl IntoIterator<Item = L>) -> Result<Self> {
        Self::new(labels.into_iter().map(|l| (l, 1.0)))
    }

    pub fn mass(&self, label: &L) -> f64 {
        self.masses.get(label).copied().unwrap_or(0.0)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&L, f64)> {
        self.masses.iter().map(|(l, &m)| (l, m))
    }

    pub fn len(&self) -> usize {
        self.masses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masses.is_empty()
    }

    /// Deviation of the original total mass from 1.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    pub fn support_size(&self) -> usize {
        self.masses.values().filter(|&&m| m > 0.0).count()
    }
}

/// Shannon entropy in bits.
pub fn entropy<L: Ord + Clone>(d: &FiniteDistribution<L>) -> f64 {
    plogp_sum(d.masses.values())
}

/// `D(p ‖ q)` in bits; `f64::INFINITY` when `p` puts mass where `q` has none.
///
/// Both distributions must be over the same label space.
pub fn kl_divergence<L: Ord + Clone>(p: &FiniteDistribution<L>, q: &FiniteDistribution<L>) -> Result<f64> {
    if p.masses.len() != q.masses.len() || !p.masses.keys().eq(q.masses.keys()) {
        return Err(Error::Usage("KL divergence over mismatched label spaces".into()));
    }
    let mut acc = 0.0;
    for ((_, &pm), (_, &qm)) in p.masses.iter().zip(q.masses.iter()) {
        if pm <= 0.0 {
            continue;
        }
        if qm <= 0.0 {
            return Ok(f64::INFINITY);
        }
        acc += pm * (pm / qm).log2();
    }
    Ok(acc)
}

/// Joint distribution of a pair `(X, Y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointDistribution<X: Ord, Y: Ord> {
    table: BTreeMap<(X, Y), f64>,
}

impl<X: Ord + Clone, Y: Ord + Clone> JointDistribution<X, Y> {
    /// Builds a joint table. Repeated `(x, y)` pairs are merged; masses are
    /// normalized.
    pub fn new(entries: impl IntoIterator<Item = (X, Y, f64)>) -> Result<Self> {
        let inner = FiniteDistribution::new(entries.into_iter().map(|(x, y, m)| ((x, y), m)))?;
        Ok(JointDistribution { table: inner.masses })
    }

    /// Joint law of `X` paired with an independent `Y`.
    pub fn independent(x: &FiniteDistribution<X>, y: &FiniteDistribution<Y>) -> Result<Self> {
        Self::new(
            x.iter()
                .flat_map(|(xl, xm)| y.iter().map(move |(yl, ym)| (xl.clone(), yl.clone(), xm * ym))),
        )
    }

    pub fn iter(&self) -> impl Iterator<Item = (&X, &Y, f64)> {
        self.table.iter().map(|((x, y), &m)| (x, y, m))
    }

    pub fn marginal_x(&self) -> FiniteDistribution<X> {
        let mut masses = BTreeMap::new();
        for ((x, _), &m) in &self.table {
            *masses.entry(x.clone()).or_insert(0.0) += m;
        }
        FiniteDistribution { masses, residual: 0.0 }
    }

    pub fn marginal_y(&self) -> FiniteDistribution<Y> {
        let mut masses = BTreeMap::new();
        for ((_, y), &m) in &self.table {
            *masses.entry(y.clone()).or_insert(0.0) += m;
        }
        FiniteDistribution { masses, residual: 0.0 }
    }

    /// `H(X, Y)`.
    pub fn joint_entropy(&self) -> f64 {
        plogp_sum(self.table.values())
    }

    /// Relabels `X` through `f`, summing the masses of collapsed labels.
    pub fn map_x<X2: Ord + Clone>(&self, f: impl Fn(&X) -> X2) -> JointDistribution<X2, Y> {
        let mut table = BTreeMap::new();
        for ((x, y), &m) in &self.table {
            *table.entry((f(x), y.clone())).or_insert(0.0) += m;
        }
        JointDistribution { table }
    }

    /// Joint law of `((X, X'), (Y, Y'))` where `(X', Y')` is drawn
    /// independently from `other`.
    pub fn product<X2: Ord + Clone, Y2: Ord + Clone>(
        &self,
        other: &JointDistribution<X2, Y2>,
    ) -> JointDistribution<(X, X2), (Y, Y2)> {
        let mut table = BTreeMap::new();
        for ((x, y), &m) in &self.table {
            for ((x2, y2), &m2) in &other.table {
                *table
                    .entry(((x.clone(), x2.clone()), (y.clone(), y2.clone())))
                    .or_insert(0.0) += m * m2;
            }
        }
        JointDistribution { table }
    }
}

/// `H(X | Y) = Σ_y Pr[y] · H(X | Y = y)`.
pub fn conditional_entropy<X: Ord + Clone, Y: Ord + Clone>(j: &JointDistribution<X, Y>) -> f64 {
    let mut by_y: BTreeMap<&Y, Vec<f64>> = BTreeMap::new();
    for ((_, y), &m) in &j.table {
        by_y.entry(y).or_default().push(m);
    }
    let mut acc = 0.0;
    for column in by_y.values() {
        let py: f64 = column.iter().sum();
        if py <= 0.0 {
            continue;
        }
        let mut hy = 0.0;
        for &m in column {
            if m > 0.0 {
                let c = m / py;
                hy -= c * c.log2();
            }
        }
        acc += py * hy;
    }
    acc
}

/// Joint of `(X, f(Y))`: the conditioning variable is coarsened through `f`.
pub fn map_condition<X: Ord + Clone, Y: Ord + Clone, Z: Ord + Clone>(
    j: &JointDistribution<X, Y>,
    f: impl Fn(&Y) -> Z,
) -> JointDistribution<X, Z> {
    let mut table = BTreeMap::new();
    for ((x, y), &m) in &j.table {
        *table.entry((x.clone(), f(y))).or_insert(0.0) += m;
    }
    JointDistribution { table }
}
