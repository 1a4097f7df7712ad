//! Distributions over subsets of `[n]`, the law of the union of two iid draws,
//! and the bit-by-bit chain-rule decomposition of their entropy.
//!
//! Element `i` of the ground set (1-based) is bit `i - 1` of a [`SubsetMask`].
//! The chain rule is applied in element order: bit `i` is revealed after the
//! prefix of bits `1..i`.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;
use serde_json::json;

use crate::entropy::{h, PROB_SLACK};
use crate::error::{Error, Result};
use crate::lemma::LemmaInstance;
use crate::report::{real, VerificationReport};

/// Largest ground set supported. Dense tables hold `2^n` reals.
pub const MAX_N: usize = 24;

/// Slack on marginal-bound hypotheses such as `Pr[i ∈ A] ≤ mu`.
pub const MARGINAL_SLACK: f64 = 1e-12;

/// A subset of `[n]` as a bit mask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
#[serde(transparent)]
pub struct SubsetMask(u32);

impl SubsetMask {
    pub const EMPTY: SubsetMask = SubsetMask(0);

    pub fn new(bits: u32, n: usize) -> Result<Self> {
        check_n(n)?;
        if bits >> n != 0 {
            return Err(Error::Domain(format!("mask {bits:#b} has bits beyond n = {n}")));
        }
        Ok(SubsetMask(bits))
    }

    /// The full ground set `[n]`.
    pub fn full(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(SubsetMask(full_bits(n)))
    }

    /// From 1-based element indices.
    pub fn from_elements(elements: &[usize], n: usize) -> Result<Self> {
        check_n(n)?;
        let mut bits = 0u32;
        for &e in elements {
            if e == 0 || e > n {
                return Err(Error::Domain(format!("element {e} outside [1, {n}]")));
            }
            bits |= 1 << (e - 1);
        }
        Ok(SubsetMask(bits))
    }

    pub(crate) fn raw(bits: u32) -> Self {
        SubsetMask(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    /// 1-based element indices in increasing order.
    pub fn elements(self) -> Vec<usize> {
        (0..32).filter(|b| self.0 >> b & 1 == 1).map(|b| b + 1).collect()
    }

    /// Membership of the 1-based element `i`.
    pub fn contains(self, i: usize) -> bool {
        (1..=32).contains(&i) && self.0 >> (i - 1) & 1 == 1
    }

    pub fn len(self) -> u32 {
        self.0.count_ones()
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    pub fn union(self, other: SubsetMask) -> SubsetMask {
        SubsetMask(self.0 | other.0)
    }

    pub fn is_subset_of(self, other: SubsetMask) -> bool {
        self.0 & !other.0 == 0
    }
}

pub(crate) fn check_n(n: usize) -> Result<()> {
    if n == 0 || n > MAX_N {
        return Err(Error::Capability(format!("ground set size {n} outside [1, {MAX_N}]")));
    }
    Ok(())
}

pub(crate) fn full_bits(n: usize) -> u32 {
    if n >= 32 {
        u32::MAX
    } else {
        (1u32 << n) - 1
    }
}

/// Storage of a [`SubsetDistribution`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    /// A full table of `2^n` masses indexed by mask.
    Dense,
    /// The support only, sorted by mask, every mass positive.
    Sparse,
}

#[derive(Debug, Clone, PartialEq)]
enum Storage {
    Dense(Vec<f64>),
    Sparse(Vec<(SubsetMask, f64)>),
}

/// A probability distribution over subsets of `[n]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SubsetDistribution {
    n: usize,
    storage: Storage,
    residual: f64,
}

impl SubsetDistribution {
    /// Dense distribution from a table of `2^n` nonnegative weights.
    pub fn from_dense(n: usize, mut table: Vec<f64>) -> Result<Self> {
        check_n(n)?;
        if table.len() != 1usize << n {
            return Err(Error::Usage(format!(
                "dense table of length {} for n = {n}",
                table.len()
            )));
        }
        let mut total = 0.0;
        for w in &mut table {
            if !w.is_finite() || *w < -PROB_SLACK {
                return Err(Error::Domain(format!("invalid mass {w}")));
            }
            *w = w.max(0.0);
            total += *w;
        }
        if total <= 0.0 {
            return Err(Error::Domain("total mass is zero".into()));
        }
        table.iter_mut().for_each(|w| *w /= total);
        Ok(SubsetDistribution {
            n,
            storage: Storage::Dense(table),
            residual: total - 1.0,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn representation(&self) -> Representation {
        match self.storage {
            Storage::Dense(_) => Representation::Dense,
            Storage::Sparse(_) => Representation::Sparse,
        }
    }

    /// Deviation of the input's total mass from 1 before normalization.
    pub fn residual(&self) -> f64 {
        self.residual
    }

    /// Positive-mass entries in increasing mask order.
    pub fn support(&self) -> Vec<(SubsetMask, f64)> {
        match &self.storage {
            Storage::Dense(t) => t
                .iter()
                .enumerate()
                .filter(|(_, &m)| m > 0.0)
                .map(|(s, &m)| (SubsetMask(s as u32), m))
                .collect(),
            Storage::Sparse(v) => v.clone(),
        }
    }

    pub fn support_len(&self) -> usize {
        match &self.storage {
            Storage::Dense(t) => t.iter().filter(|&&m| m > 0.0).count(),
            Storage::Sparse(v) => v.len(),
        }
    }

    pub fn mass(&self, mask: SubsetMask) -> f64 {
        match &self.storage {
            Storage::Dense(t) => t.get(mask.0 as usize).copied().unwrap_or(0.0),
            Storage::Sparse(v) => v.binary_search_by_key(&mask, |e| e.0).map_or(0.0, |i| v[i].1),
        }
    }

    /// The full `2^n` table.
    pub fn dense_table(&self) -> Vec<f64> {
        match &self.storage {
            Storage::Dense(t) => t.clone(),
            Storage::Sparse(v) => {
                let mut t = vec![0.0; 1 << self.n];
                for &(m, w) in v {
                    t[m.0 as usize] = w;
                }
                t
            }
        }
    }

    pub fn to_dense(&self) -> SubsetDistribution {
        SubsetDistribution {
            n: self.n,
            storage: Storage::Dense(self.dense_table()),
            residual: self.residual,
        }
    }

    pub fn to_sparse(&self) -> SubsetDistribution {
        SubsetDistribution {
            n: self.n,
            storage: Storage::Sparse(self.support()),
            residual: self.residual,
        }
    }

    /// `Pr[i ∈ A]` for every element, in element order.
    pub fn marginals(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n];
        for (m, w) in self.support() {
            for (b, o) in out.iter_mut().enumerate() {
                if m.0 >> b & 1 == 1 {
                    *o += w;
                }
            }
        }
        out
    }

    pub fn max_marginal(&self) -> f64 {
        self.marginals().into_iter().fold(0.0, f64::max)
    }
}

/// Validated, normalized sparse distribution. Repeated masks are merged by
/// summing their masses; zero-mass entries are dropped.
pub fn make_distribution(n: usize, pairs: impl IntoIterator<Item = (SubsetMask, f64)>) -> Result<SubsetDistribution> {
    check_n(n)?;
    let mut acc: BTreeMap<SubsetMask, f64> = BTreeMap::new();
    for (mask, w) in pairs {
        if mask.0 >> n != 0 {
            return Err(Error::Domain(format!("mask {:#b} has bits beyond n = {n}", mask.0)));
        }
        if !w.is_finite() || w < -PROB_SLACK {
            return Err(Error::Domain(format!("invalid mass {w}")));
        }
        *acc.entry(mask).or_insert(0.0) += w.max(0.0);
    }
    let total: f64 = acc.values().sum();
    if total <= 0.0 {
        return Err(Error::Domain("total mass is zero".into()));
    }
    let support = acc
        .into_iter()
        .filter(|&(_, w)| w > 0.0)
        .map(|(m, w)| (m, w / total))
        .collect();
    Ok(SubsetDistribution {
        n,
        storage: Storage::Sparse(support),
        residual: total - 1.0,
    })
}

/// Every element independently present with probability `p`.
pub fn product_bernoulli(n: usize, p: f64) -> Result<SubsetDistribution> {
    check_n(n)?;
    let p = crate::entropy::Prob::new(p)?.get();
    let table = (0..1u32 << n)
        .map(|s| {
            let k = s.count_ones() as i32;
            p.powi(k) * (1.0 - p).powi(n as i32 - k)
        })
        .collect();
    SubsetDistribution::from_dense(n, table)
}

/// `[n]` with probability `p`, otherwise `∅`.
pub fn two_point(n: usize, p: f64) -> Result<SubsetDistribution> {
    let p = crate::entropy::Prob::new(p)?.get();
    make_distribution(n, [(SubsetMask::EMPTY, 1.0 - p), (SubsetMask::full(n)?, p)])
}

/// Element 1 present with probability `p`; if present, every other element
/// independently with probability `q`, otherwise nothing else.
pub fn gated_product(n: usize, p: f64, q: f64) -> Result<SubsetDistribution> {
    check_n(n)?;
    if n < 2 {
        return Err(Error::Domain("gated product needs n >= 2".into()));
    }
    let p = crate::entropy::Prob::new(p)?.get();
    let q = crate::entropy::Prob::new(q)?.get();
    let rest = n as i32 - 1;
    let table = (0..1u32 << n)
        .map(|s| {
            if s & 1 == 0 {
                if s == 0 {
                    1.0 - p
                } else {
                    0.0
                }
            } else {
                let k = (s >> 1).count_ones() as i32;
                p * q.powi(k) * (1.0 - q).powi(rest - k)
            }
        })
        .collect();
    SubsetDistribution::from_dense(n, table)
}

/// Closed-form entropies of the three generators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ClosedForms {
    pub h_a: f64,
    /// Exact `H(A ∪ B)`.
    pub h_union: f64,
    /// `H(A ∪ B)` conditioned on which of the two gates opened. Equals
    /// `h_union` for generators 1 and 2; for the gated product it is
    /// `H(2p - p²) + 2p(1 - p)H(q)(n - 1) + p²H(2q - q²)(n - 1)`, which falls
    /// short of the exact value by the information the other elements carry
    /// about the gate pattern.
    pub h_union_given_gates: f64,
}

/// Closed forms for `which` = 1 ([`product_bernoulli`]), 2 ([`two_point`]) or
/// 3 ([`gated_product`]).
pub fn example_closed_forms(which: u8, n: usize, p: f64, q: f64) -> Result<ClosedForms> {
    let p = crate::entropy::Prob::new(p)?.get();
    let q = crate::entropy::Prob::new(q)?.get();
    let pu = 2.0 * p - p * p;
    let nf = n as f64;
    let (h_a, h_union) = match which {
        1 => (nf * h(p), nf * h(pu)),
        2 => (h(p), h(pu)),
        3 => {
            // Given the union gate is open, the other n - 1 bits are iid
            // Bernoulli(q) or Bernoulli(2q - q²) with odds 2p(1-p) : p²; the
            // count of ones is sufficient, so sum over it.
            let rest = n as i32 - 1;
            let q2 = 2.0 * q - q * q;
            let mut mix = 0.0;
            if pu > 0.0 {
                let (w1, w2) = (2.0 * p * (1.0 - p) / pu, p * p / pu);
                let mut binom = 1.0;
                for k in 0..=rest {
                    let pr = w1 * q.powi(k) * (1.0 - q).powi(rest - k) + w2 * q2.powi(k) * (1.0 - q2).powi(rest - k);
                    if pr > 0.0 {
                        mix -= binom * pr * pr.log2();
                    }
                    binom = binom * f64::from(rest - k) / f64::from(k + 1);
                }
            }
            (h(p) + p * h(q) * (nf - 1.0), h(pu) + pu * mix)
        }
        w => return Err(Error::Usage(format!("generator must be 1, 2 or 3, got {w}"))),
    };
    let h_union_given_gates = if which == 3 {
        h(pu) + 2.0 * p * (1.0 - p) * h(q) * (nf - 1.0) + p * p * h(2.0 * q - q * q) * (nf - 1.0)
    } else {
        h_union
    };
    Ok(ClosedForms {
        h_a,
        h_union,
        h_union_given_gates,
    })
}

/// Law of `A ∪ B` for `A, B` iid with law `d`.
///
/// Picks the dense transform when `d` is already dense or the pairwise
/// sparse accumulation would cost more than `2^n · n`.
pub fn union_distribution(d: &SubsetDistribution) -> SubsetDistribution {
    let m = d.support_len() as f64;
    let lattice = (1u64 << d.n) as f64 * d.n as f64;
    if d.representation() == Representation::Dense || m * m > lattice {
        union_dense(d)
    } else {
        union_sparse(d)
    }
}

/// Sum over subsets: `t[S] ← Σ_{T ⊆ S} t[T]`.
fn zeta<T: Copy>(t: &mut [T], add: impl Fn(T, T) -> T) {
    let mut bit = 1;
    while bit < t.len() {
        for s in 0..t.len() {
            if s & bit != 0 {
                t[s] = add(t[s], t[s ^ bit]);
            }
        }
        bit <<= 1;
    }
}

/// Inverse of [`zeta`].
fn mobius<T: Copy>(t: &mut [T], sub: impl Fn(T, T) -> T) {
    let mut bit = 1;
    while bit < t.len() {
        for s in 0..t.len() {
            if s & bit != 0 {
                t[s] = sub(t[s], t[s ^ bit]);
            }
        }
        bit <<= 1;
    }
}

/// Unevaluated sum `hi + lo` of two doubles, carrying about 106 bits.
#[derive(Clone, Copy)]
struct DoubleDouble {
    hi: f64,
    lo: f64,
}

impl DoubleDouble {
    fn new(x: f64) -> Self {
        DoubleDouble { hi: x, lo: 0.0 }
    }

    fn add(self, o: Self) -> Self {
        // Knuth's two-sum on the leading parts, then fold in the tails.
        let s = self.hi + o.hi;
        let v = s - self.hi;
        let e = (self.hi - (s - v)) + (o.hi - v);
        let lo = e + self.lo + o.lo;
        let hi = s + lo;
        DoubleDouble { hi, lo: lo - (hi - s) }
    }

    fn neg(self) -> Self {
        DoubleDouble {
            hi: -self.hi,
            lo: -self.lo,
        }
    }

    fn square(self) -> Self {
        let p = self.hi * self.hi;
        let e = self.hi.mul_add(self.hi, -p) + 2.0 * self.hi * self.lo;
        let hi = p + e;
        DoubleDouble { hi, lo: e - (hi - p) }
    }
}

/// Dense union via `Pr[A ∪ B ⊆ S] = Pr[A ⊆ S]²`: zeta transform, pointwise
/// square, Möbius inversion. `O(2^n · n)`.
///
/// The inversion subtracts squares of cumulative masses close to one, so the
/// float transform runs in double-double arithmetic; plain doubles lose
/// about `1e-12` by `n = 10`. The same transform on support indicators, in
/// wrapping integer arithmetic, counts the pairs producing each mask; masks
/// with no pair are set to exactly zero so that rounding residue never leaks
/// outside the true support.
pub fn union_dense(d: &SubsetDistribution) -> SubsetDistribution {
    let dense = d.dense_table();
    let mut count: Vec<u64> = dense.iter().map(|&m| u64::from(m > 0.0)).collect();
    let mut table: Vec<DoubleDouble> = dense.into_iter().map(DoubleDouble::new).collect();
    zeta(&mut table, DoubleDouble::add);
    zeta(&mut count, u64::wrapping_add);
    table.iter_mut().for_each(|x| *x = x.square());
    count.iter_mut().for_each(|x| *x = x.wrapping_mul(*x));
    mobius(&mut table, |a, b| a.add(b.neg()));
    mobius(&mut count, u64::wrapping_sub);
    let table = table
        .iter()
        .zip(&count)
        .map(|(x, &c)| {
            let v = x.hi + x.lo;
            if c == 0 || v < 0.0 {
                0.0
            } else {
                v
            }
        })
        .collect();
    SubsetDistribution::from_dense(d.n, table).expect("union of a distribution is a distribution")
}

/// Sparse union by accumulating every pair of support masks. `O(m²)`.
pub fn union_sparse(d: &SubsetDistribution) -> SubsetDistribution {
    let support = d.support();
    let mut acc: BTreeMap<SubsetMask, f64> = BTreeMap::new();
    for (i, &(a, wa)) in support.iter().enumerate() {
        *acc.entry(a).or_insert(0.0) += wa * wa;
        for &(b, wb) in &support[i + 1..] {
            *acc.entry(a.union(b)).or_insert(0.0) += 2.0 * wa * wb;
        }
    }
    make_distribution(d.n, acc).expect("union of a distribution is a distribution")
}

/// `Pr[i ∈ A]` for the 1-based element `i`.
pub fn marginal(d: &SubsetDistribution, i: usize) -> Result<f64> {
    if i == 0 || i > d.n {
        return Err(Error::Domain(format!("element {i} outside [1, {}]", d.n)));
    }
    Ok(d.support().iter().filter(|(m, _)| m.contains(i)).map(|(_, w)| w).sum())
}

/// `H(A)` in bits.
pub fn dist_entropy(d: &SubsetDistribution) -> f64 {
    let mut acc = 0.0;
    match &d.storage {
        Storage::Dense(t) => {
            for &m in t {
                if m > 0.0 {
                    acc -= m * m.log2();
                }
            }
        }
        Storage::Sparse(v) => {
            for &(_, m) in v {
                acc -= m * m.log2();
            }
        }
    }
    acc
}

/// One revealed bit of the chain rule.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitStep {
    /// 1-based element index.
    pub element: usize,
    /// `H(A_i | A_{<i})`.
    pub h_bit: f64,
    /// Histories `A_{<i} = c` with positive probability, in increasing prefix
    /// order, as `(Pr[c], Pr[A_i = 1 | c])`.
    pub instance: LemmaInstance,
}

/// `H(A) = Σ_i H(A_i | A_{<i})`, with the conditional law of every bit.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BitChainDecomposition {
    pub per_bit: Vec<BitStep>,
}

impl BitChainDecomposition {
    pub fn total(&self) -> f64 {
        self.per_bit.iter().map(|b| b.h_bit).sum()
    }

    pub fn h_bits(&self) -> Vec<f64> {
        self.per_bit.iter().map(|b| b.h_bit).collect()
    }
}

/// Groups the support by the prefix `A_{<i}` for every bit `i` and computes
/// the exact conditional probabilities of the next bit.
pub fn bit_chain(d: &SubsetDistribution) -> BitChainDecomposition {
    let support = d.support();
    let mut per_bit = Vec::with_capacity(d.n);
    for b in 0..d.n {
        let low = (1u32 << b) - 1;
        // (Pr[c], Pr[c and bit set]) per prefix c, in prefix order.
        let groups: Vec<(f64, f64)> = if (1usize << b) <= 8 * support.len().max(1) {
            let mut t = vec![(0.0, 0.0); 1 << b];
            for &(m, w) in &support {
                let g = &mut t[(m.0 & low) as usize];
                g.0 += w;
                if m.0 >> b & 1 == 1 {
                    g.1 += w;
                }
            }
            t.into_iter().filter(|g| g.0 > 0.0).collect()
        } else {
            let mut t: BTreeMap<u32, (f64, f64)> = BTreeMap::new();
            for &(m, w) in &support {
                let g = t.entry(m.0 & low).or_insert((0.0, 0.0));
                g.0 += w;
                if m.0 >> b & 1 == 1 {
                    g.1 += w;
                }
            }
            t.into_values().collect()
        };
        let entries: Vec<(f64, f64)> = groups
            .into_iter()
            .map(|(pc, p1)| (pc, (p1 / pc).clamp(0.0, 1.0)))
            .collect();
        let h_bit = entries.iter().map(|&(q, p)| q * h(p)).sum();
        let instance = LemmaInstance::new(entries).expect("prefix groups form a distribution");
        per_bit.push(BitStep {
            element: b + 1,
            h_bit,
            instance,
        });
    }
    BitChainDecomposition { per_bit }
}

/// Tolerance on every inequality of the end-to-end union bound.
pub const THEOREM_TOL: f64 = 1e-9;

/// Checks `H(A ∪ B) ≥ ratio · H(A)` together with the per-bit chain
///
/// ```text
/// H((A∪B)_i | (A∪B)_{<i})  ≥  H((A∪B)_i | A_{<i}, B_{<i})  ≥  ratio · H(A_i | A_{<i}).
/// ```
///
/// The first inequality holds for every distribution; the second and the
/// global bound are only claimed when every marginal is at most `mu`, which is
/// recorded in `hypothesis_ok`.
pub fn check_theorem1(d: &SubsetDistribution, ratio: f64, mu: f64) -> VerificationReport {
    let marginals = d.marginals();
    let max_marginal = marginals.iter().copied().fold(0.0, f64::max);
    let u = union_distribution(d);
    let chain_a = bit_chain(d);
    let chain_u = bit_chain(&u);
    let h_a = dist_entropy(d);
    let h_u = dist_entropy(&u);

    let mut rep = VerificationReport::new("theorem1");
    rep.hypothesis_ok = max_marginal <= mu + MARGINAL_SLACK;
    let mut rows = Vec::with_capacity(d.n);
    for (sa, su) in chain_a.per_bit.iter().zip(&chain_u.per_bit) {
        let outer = su.h_bit;
        let inner = sa.instance.h_union_given_pair();
        let rhs = ratio * sa.h_bit;
        rep.check(format!("bit {}: outer >= inner", sa.element), outer, inner, THEOREM_TOL);
        rep.check(
            format!("bit {}: inner >= ratio * h_bit", sa.element),
            inner,
            rhs,
            THEOREM_TOL,
        );
        rows.push(json!({
            "element": sa.element,
            "h_bit": real(sa.h_bit),
            "lhs_inner": real(inner),
            "lhs_outer": real(outer),
            "rhs": real(rhs),
            "histories": sa.instance.len(),
        }));
    }
    rep.check("H(A u B) >= ratio * H(A)", h_u, ratio * h_a, THEOREM_TOL);
    rep.set("n", d.n as u64)
        .set_real("ratio", ratio)
        .set_real("mu", mu)
        .set_real("max_marginal", max_marginal)
        .set_real("h_a", h_a)
        .set_real("h_union", h_u)
        .set(
            "observed_ratio",
            if h_a > 0.0 {
                real(h_u / h_a)
            } else {
                serde_json::Value::Null
            },
        )
        .set("per_bit", rows);
    if let Some(w) = &rep.worst {
        rep.witness = Some(json!({ "check": w.name, "margin": real(w.margin) }));
    }
    rep
}

/// Mixes `d` with the point mass on `∅` just enough that every marginal is at
/// most `cap`. Conditioning on more `∅` scales every marginal by the same factor.
pub fn cap_marginals(d: &SubsetDistribution, cap: f64) -> SubsetDistribution {
    let max = d.max_marginal();
    if max <= cap {
        return d.clone();
    }
    let keep = cap / max;
    let mut pairs: Vec<(SubsetMask, f64)> = d.support().into_iter().map(|(m, w)| (m, w * keep)).collect();
    pairs.push((SubsetMask::EMPTY, 1.0 - keep));
    let mut out = make_distribution(d.n, pairs).expect("mixture is a distribution");
    // Rounding can leave a marginal an ulp above the cap.
    while out.max_marginal() > cap {
        let pairs: Vec<(SubsetMask, f64)> = out
            .support()
            .into_iter()
            .map(|(m, w)| if m.is_empty() { (m, w * (1.0 + 1e-12)) } else { (m, w) })
            .collect();
        out = make_distribution(d.n, pairs).expect("mixture is a distribution");
    }
    out
}

/// Random sparse distribution: `support` masks drawn uniformly from `2^[n]`
/// with exponential weights, then capped with [`cap_marginals`] when `mu` is
/// given. Deterministic per seed.
pub fn random_distribution(n: usize, support: usize, mu: Option<f64>, seed: u64) -> Result<SubsetDistribution> {
    check_n(n)?;
    if support == 0 {
        return Err(Error::Domain("support size must be at least 1".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs: Vec<(SubsetMask, f64)> = (0..support)
        .map(|_| {
            let m = SubsetMask(rng.gen_range(0..=full_bits(n)));
            (m, -(1.0 - rng.gen::<f64>()).ln())
        })
        .collect();
    let d = make_distribution(n, pairs)?;
    Ok(match mu {
        Some(cap) => cap_marginals(&d, cap),
        None => d,
    })
}

/// Total-variation style check used by tests: largest per-mask difference.
pub fn max_abs_difference(a: &SubsetDistribution, b: &SubsetDistribution) -> f64 {
    let ta = a.dense_table();
    let tb = b.dense_table();
    ta.iter().zip(&tb).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// `|Σ masses - 1|` of the stored, normalized masses.
pub fn normalization_error(d: &SubsetDistribution) -> f64 {
    (d.support().iter().map(|e| e.1).sum::<f64>() - 1.0).abs()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::entropy::h;

    fn mask(e: &[usize], n: usize) -> SubsetMask {
        SubsetMask::from_elements(e, n).unwrap()
    }

    #[test]
    fn masks() {
        assert!(SubsetMask::new(0b100, 2).is_err());
        assert!(SubsetMask::new(0, 25).is_err());
        let m = mask(&[1, 3], 4);
        assert_eq!(m.bits(), 0b101);
        assert_eq!(m.elements(), vec![1, 3]);
        assert!(m.contains(3) && !m.contains(2));
        assert!(SubsetMask::from_elements(&[5], 4).is_err());
        assert!(m.is_subset_of(SubsetMask::full(4).unwrap()));
    }

    #[test]
    fn make_distribution_examples() {
        let d = make_distribution(2, [(SubsetMask::EMPTY, 1.0)]).unwrap();
        assert_eq!(dist_entropy(&d), 0.0);

        let p = 0.3;
        let d = make_distribution(1, [(mask(&[1], 1), p), (SubsetMask::EMPTY, 1.0 - p)]).unwrap();
        assert!((dist_entropy(&d) - h(p)).abs() < 1e-15);
        assert!((marginal(&d, 1).unwrap() - p).abs() < 1e-15);

        let m = mask(&[2], 2);
        let d = make_distribution(2, [(m, 0.3), (m, 0.2), (SubsetMask::EMPTY, 0.5)]).unwrap();
        assert_eq!(d.support_len(), 2);
        assert!((d.mass(m) - 0.5).abs() < 1e-15);

        assert!(make_distribution(2, [(SubsetMask::raw(0b100), 1.0)]).is_err());
        assert!(make_distribution(2, [(SubsetMask::EMPTY, 0.0)]).is_err());
        assert!(make_distribution(2, [(SubsetMask::EMPTY, -0.5), (m, 1.0)]).is_err());
    }

    #[test]
    fn product_bernoulli_examples() {
        let d = product_bernoulli(4, 0.1).unwrap();
        // mpmath: 4 H(0.1) = 1.8759823743571248...
        assert!((dist_entropy(&d) - 1.875_982_374_357_125).abs() < 1e-9);
        let d = product_bernoulli(5, 0.0).unwrap();
        assert_eq!(d.support(), vec![(SubsetMask::EMPTY, 1.0)]);
        let d = product_bernoulli(3, 0.5).unwrap();
        assert_eq!(d.support_len(), 8);
        assert!((dist_entropy(&d) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn two_point_examples() {
        let d = two_point(5, 0.1).unwrap();
        assert!((dist_entropy(&d) - 0.468_995_593_589_281_2).abs() < 1e-12);
        let d0 = two_point(5, 0.0).unwrap();
        assert_eq!(d0.support(), vec![(SubsetMask::EMPTY, 1.0)]);
        let u = union_distribution(&d);
        // mpmath: H(0.19) = 0.70147145988389742...
        assert!((dist_entropy(&u) - 0.701_471_459_883_897_4).abs() < 1e-12);
    }

    #[test]
    fn gated_product_examples() {
        let (n, p, q) = (6, 0.2, 0.9);
        let d = gated_product(n, p, q).unwrap();
        let expect = h(p) + p * h(q) * (n - 1) as f64;
        assert!((dist_entropy(&d) - expect).abs() < 1e-9);
        let u = union_distribution(&d);
        let cf = example_closed_forms(3, n, p, q).unwrap();
        assert!((dist_entropy(&u) - cf.h_union).abs() < 1e-9);
        assert!(dist_entropy(&u) > cf.h_union_given_gates + 1e-6);
        // Independent Python summation over the count of ones, n=8, p=0.01, q=0.99.
        let cf = example_closed_forms(3, 8, 0.01, 0.99).unwrap();
        assert!((cf.h_union - 0.152_087_219_390_830_14).abs() < 1e-12);
        assert!((cf.h_union_given_gates - 0.152_077_662_679_223_18).abs() < 1e-12);
        let closed = gated_product(n, 0.0, q).unwrap();
        assert_eq!(closed.support(), vec![(SubsetMask::EMPTY, 1.0)]);
        assert!(gated_product(1, 0.1, 0.5).is_err());
    }

    #[test]
    fn union_examples() {
        let s = mask(&[1, 4], 5);
        let d = make_distribution(5, [(s, 1.0)]).unwrap();
        assert_eq!(union_distribution(&d).support(), vec![(s, 1.0)]);

        let (n, p) = (5, 0.13);
        let u = union_distribution(&product_bernoulli(n, p).unwrap());
        let expect = product_bernoulli(n, 2.0 * p - p * p).unwrap();
        assert!(max_abs_difference(&u, &expect) < 1e-12);

        let u = union_distribution(&two_point(n, p).unwrap());
        let expect = two_point(n, 2.0 * p - p * p).unwrap();
        assert!(max_abs_difference(&u, &expect) < 1e-12);
        assert_eq!(u.support_len(), 2);
    }

    #[test]
    fn dense_union_has_exact_zeros_off_support() {
        let d = make_distribution(6, [(mask(&[1], 6), 0.3), (mask(&[2, 3], 6), 0.7)]).unwrap();
        let u = union_dense(&d);
        assert_eq!(u.support_len(), 3);
        assert_eq!(u.mass(mask(&[4], 6)), 0.0);
    }

    #[test]
    fn marginal_examples() {
        let d = product_bernoulli(4, 0.3).unwrap();
        for i in 1..=4 {
            assert!((marginal(&d, i).unwrap() - 0.3).abs() < 1e-12);
        }
        let empty = make_distribution(3, [(SubsetMask::EMPTY, 1.0)]).unwrap();
        assert_eq!(marginal(&empty, 2).unwrap(), 0.0);
        let g = gated_product(5, 0.2, 0.7).unwrap();
        for i in 2..=5 {
            // Direct summation over the table, independent of `marginal`.
            let t = g.dense_table();
            let direct: f64 = (0..t.len()).filter(|s| s >> (i - 1) & 1 == 1).map(|s| t[s]).sum();
            assert!((marginal(&g, i).unwrap() - direct).abs() < 1e-15);
            assert!((direct - 0.2 * 0.7).abs() < 1e-12);
        }
        assert!(marginal(&d, 0).is_err());
        assert!(marginal(&d, 5).is_err());
    }

    #[test]
    fn bit_chain_examples() {
        let p = 0.17;
        let c = bit_chain(&product_bernoulli(5, p).unwrap());
        for step in &c.per_bit {
            assert!((step.h_bit - h(p)).abs() < 1e-12);
            assert!(step.instance.entries().iter().all(|&(_, pc)| (pc - p).abs() < 1e-12));
        }

        let c = bit_chain(&two_point(6, p).unwrap());
        assert!((c.per_bit[0].h_bit - h(p)).abs() < 1e-15);
        assert!(c.per_bit[1..].iter().all(|s| s.h_bit == 0.0));

        let (p, q) = (0.2, 0.9);
        let c = bit_chain(&gated_product(6, p, q).unwrap());
        assert!((c.per_bit[0].h_bit - h(p)).abs() < 1e-12);
        for s in &c.per_bit[1..] {
            assert!((s.h_bit - p * h(q)).abs() < 1e-12);
        }
    }

    #[test]
    fn check_theorem1_examples() {
        let point = make_distribution(4, [(mask(&[2], 4), 1.0)]).unwrap();
        let rep = check_theorem1(&point, 1.26, 0.01);
        assert!(!rep.hypothesis_ok);
        assert!(rep.passed);
        assert_eq!(rep.get_f64("h_a"), Some(0.0));

        let rep = check_theorem1(&product_bernoulli(6, 0.01).unwrap(), 1.26, 0.01);
        assert!(rep.hypothesis_ok && rep.passed, "{rep:?}");
        assert!((rep.get_f64("observed_ratio").unwrap() - 1.743_696_433_594_053).abs() < 1e-9);

        let rep = check_theorem1(&two_point(8, 0.01).unwrap(), 1.26, 0.01);
        assert!(rep.hypothesis_ok && rep.passed);
        assert!((rep.get_f64("observed_ratio").unwrap() - 1.743_696_433_594_053).abs() < 1e-9);
    }

    #[test]
    fn marginal_at_exactly_mu_satisfies_hypothesis() {
        let rep = check_theorem1(&two_point(3, 0.01).unwrap(), 1.26, 0.01);
        assert!(rep.hypothesis_ok);
    }

    #[test]
    fn hypothesis_violation_is_reported() {
        let rep = check_theorem1(&two_point(3, 0.45).unwrap(), 1.26, 0.01);
        assert!(!rep.hypothesis_ok);
        assert!(!rep.passed);
        assert!(!rep.violated());
    }

    #[test]
    fn capped_random_distributions() {
        for seed in 0..50 {
            let d = random_distribution(7, 20, Some(0.01), seed).unwrap();
            assert!(d.max_marginal() <= 0.01);
        }
        let a = random_distribution(9, 30, Some(0.01), 4).unwrap();
        let b = random_distribution(9, 30, Some(0.01), 4).unwrap();
        assert_eq!(a, b);
    }
}
