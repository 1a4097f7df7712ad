//! The per-bit inequality behind the entropy bound for unions.
//!
//! A [`LemmaInstance`] is a weighted list of pairs `(q_c, p_c)`: a history `c`
//! occurs with probability `q_c`, and given that history the next bit is 1
//! with probability `p_c`. For two independent histories `c, c'` the union of
//! the two bits is 1 with probability `p_c + p_{c'} - p_c p_{c'}`, and the
//! inequality of interest is
//!
//! ```text
//! E_{c,c'} H(p_c + p_{c'} - p_c p_{c'})  ≥  1.26 · E_c H(p_c)     whenever E_c p_c ≤ 0.01.
//! ```
//!
//! [`verify_instance`] evaluates both sides, and also the intermediate bounds
//! obtained by splitting histories at `p_c ≤ 0.1` into a "small" class `C₀`
//! and a "large" class `C₁`. The remaining functions scan the two scalar
//! inequalities the split relies on, emit the ratio surface, draw random
//! instances and search adversarially for instances with a small ratio.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::entropy::{h, union_raw, MU, PROB_SLACK, THRESHOLD};
use crate::error::{Error, Result};
use crate::report::{real, ser_opt_real, VerificationReport};

/// Factor in the bound on the `C₀ × C₀` event.
pub const SMALL_PAIR_FACTOR: f64 = 1.26;
/// Factor in the bound on the mixed `C₀ × C₁` events.
pub const MIXED_PAIR_FACTOR: f64 = 1.62;
/// Lower bound on the ratio surface over `[0, 0.1]²`.
pub const SURFACE_BOUND: f64 = 1.4;

/// Tolerance on the inequality margins of a verified instance.
pub const MARGIN_TOL: f64 = 1e-9;
/// Tolerance on the three-event decomposition identity.
pub const IDENTITY_TOL: f64 = 1e-12;

/// A weighted list of conditional bit probabilities.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LemmaInstance {
    entries: Vec<(f64, f64)>,
    mu: f64,
    threshold: f64,
}

impl LemmaInstance {
    /// Builds an instance with the default constraint `mu = 0.01` and
    /// threshold `0.1`. Weights are normalized.
    pub fn new(entries: Vec<(f64, f64)>) -> Result<Self> {
        Self::with_params(entries, MU, THRESHOLD)
    }

    pub fn with_params(entries: Vec<(f64, f64)>, mu: f64, threshold: f64) -> Result<Self> {
        if entries.is_empty() {
            return Err(Error::Domain("empty lemma instance".into()));
        }
        let mut total = 0.0;
        let mut clean = Vec::with_capacity(entries.len());
        for (q, p) in entries {
            if !q.is_finite() || q < -PROB_SLACK {
                return Err(Error::Domain(format!("invalid weight {q}")));
            }
            if !p.is_finite() || !(-PROB_SLACK..=1.0 + PROB_SLACK).contains(&p) {
                return Err(Error::Domain(format!("probability {p} outside [0, 1]")));
            }
            let q = q.max(0.0);
            total += q;
            clean.push((q, p.clamp(0.0, 1.0)));
        }
        if total <= 0.0 {
            return Err(Error::Domain("total weight is zero".into()));
        }
        for e in &mut clean {
            e.0 /= total;
        }
        if !(0.0..=1.0).contains(&mu) || !(0.0..=1.0).contains(&threshold) {
            return Err(Error::Domain("mu and threshold must lie in [0, 1]".into()));
        }
        Ok(LemmaInstance {
            entries: clean,
            mu,
            threshold,
        })
    }

    pub fn entries(&self) -> &[(f64, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn with_mu(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn with_threshold(mut self, threshold: f64) -> Self {
        self.threshold = threshold;
        self
    }

    /// `E_c[p_c]`, the probability that the bit is 1.
    pub fn mean_p(&self) -> f64 {
        self.entries.iter().map(|(q, p)| q * p).sum()
    }

    pub fn hypothesis_ok(&self) -> bool {
        self.mean_p() <= self.mu + PROB_SLACK
    }

    /// `H(X | C) = E_c H(p_c)`.
    pub fn h_x_given_c(&self) -> f64 {
        self.entries.iter().map(|&(q, p)| q * h(p)).sum()
    }

    /// `H(X ∪ X' | C, C') = E_{c,c'} H(p_c + p_{c'} - p_c p_{c'})`.
    pub fn h_union_given_pair(&self) -> f64 {
        let merged = merge_equal_p(&self.entries);
        let mut acc = 0.0;
        for (i, &(qi, pi)) in merged.iter().enumerate() {
            acc += qi * qi * h(union_raw(pi, pi));
            for &(qj, pj) in &merged[i + 1..] {
                acc += 2.0 * qi * qj * h(union_raw(pi, pj));
            }
        }
        acc
    }
}

/// Sorts by `p` and merges entries with identical `p`. Both sides of the
/// inequality depend only on the law of `p_c`, so this is exact.
fn merge_equal_p(entries: &[(f64, f64)]) -> Vec<(f64, f64)> {
    let mut sorted: Vec<(f64, f64)> = entries.iter().copied().filter(|e| e.0 > 0.0).collect();
    sorted.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.total_cmp(&b.0)));
    let mut out: Vec<(f64, f64)> = Vec::with_capacity(sorted.len());
    for (q, p) in sorted {
        match out.last_mut() {
            Some(last) if last.1 == p => last.0 += q,
            _ => out.push((q, p)),
        }
    }
    out
}

/// `f(p, p') = 2 H(p + p' - pp') / (H(p) + H(p'))`.
pub fn ratio_f(p: f64, p2: f64) -> Result<f64> {
    for v in [p, p2] {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::Domain(format!("probability {v} outside [0, 1]")));
        }
    }
    let den = h(p) + h(p2);
    if den == 0.0 {
        return Err(Error::Domain(format!("f({p}, {p2}) has a vanishing denominator")));
    }
    Ok(2.0 * h(union_raw(p, p2)) / den)
}

/// `g(p) = H(0.9 p) / H(0.5 p)` on `(0, 0.2]`.
pub fn ratio_g(p: f64) -> Result<f64> {
    if !(p > 0.0 && p <= 0.2) {
        return Err(Error::Domain(format!("g is defined on (0, 0.2], got {p}")));
    }
    Ok(h(0.9 * p) / h(0.5 * p))
}

fn grid_axis(hi: f64, step: f64) -> Result<Vec<f64>> {
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::Domain(format!("grid step must be positive, got {step}")));
    }
    let cells = (hi / step).round().max(1.0) as usize;
    Ok((0..=cells).map(|i| hi * i as f64 / cells as f64).collect())
}

#[derive(Debug, Clone, Copy)]
struct RowMin {
    f: f64,
    p: f64,
    p2: f64,
    violations: u64,
    chained_margin: f64,
    chained_at: (f64, f64),
}

fn better(a: (f64, f64, f64), b: (f64, f64, f64)) -> bool {
    // Minimum value, ties broken lexicographically on (p, p').
    a.0 < b.0 || (a.0 == b.0 && (a.1, a.2) < (b.1, b.2))
}

/// Pattern search for the minimum of `f` over `[0, hi]² \ {(0,0)}`, starting
/// from `start` with initial cell size `cell` and stopping at `min_cell`.
fn refine_min(start: (f64, f64), hi: f64, cell: f64, min_cell: f64) -> (f64, f64, f64) {
    let eval = |p: f64, q: f64| ratio_f(p, q).unwrap_or(f64::INFINITY);
    let (mut p, mut q) = start;
    let mut best = eval(p, q);
    let mut c = cell;
    while c > min_cell {
        let mut moved = false;
        for (dp, dq) in [
            (-1.0, -1.0),
            (-1.0, 0.0),
            (-1.0, 1.0),
            (0.0, -1.0),
            (0.0, 1.0),
            (1.0, -1.0),
            (1.0, 0.0),
            (1.0, 1.0),
        ] {
            let np = (p + dp * c).clamp(0.0, hi);
            let nq = (q + dq * c).clamp(0.0, hi);
            let v = eval(np, nq);
            if better((v, np, nq), (best, p, q)) {
                best = v;
                p = np;
                q = nq;
                moved = true;
            }
        }
        if !moved {
            c *= 0.5;
        }
    }
    (best, p, q)
}

/// Scans `f(p, p') ≥ 1.4` on the grid of `[0, 0.1]² \ {(0,0)}`, together with
/// the intermediate bound `f(p, p') ≥ H(0.9 (p+p')) / H(0.5 (p+p'))`, and
/// refines the grid minimum by local search down to `1e-10` cells.
pub fn scan_lemma_l1(step: f64) -> Result<VerificationReport> {
    if step > 1e-2 {
        return Err(Error::Domain(format!("step must be at most 1e-2, got {step}")));
    }
    let hi = THRESHOLD;
    let axis = grid_axis(hi, step)?;
    let rows: Vec<RowMin> = axis
        .par_iter()
        .map(|&p| {
            let mut row = RowMin {
                f: f64::INFINITY,
                p: 0.0,
                p2: 0.0,
                violations: 0,
                chained_margin: f64::INFINITY,
                chained_at: (0.0, 0.0),
            };
            for &p2 in &axis {
                if p == 0.0 && p2 == 0.0 {
                    continue;
                }
                let f = ratio_f(p, p2).expect("grid point in domain");
                if f < SURFACE_BOUND {
                    row.violations += 1;
                }
                if better((f, p, p2), (row.f, row.p, row.p2)) {
                    row.f = f;
                    row.p = p;
                    row.p2 = p2;
                }
                let s = p + p2;
                let chained = h(0.9 * s) / h(0.5 * s);
                if f - chained < row.chained_margin {
                    row.chained_margin = f - chained;
                    row.chained_at = (p, p2);
                }
            }
            row
        })
        .collect();

    let mut grid_min = (f64::INFINITY, 0.0, 0.0);
    let mut violations = 0;
    let mut chained = (f64::INFINITY, (0.0, 0.0));
    for r in &rows {
        violations += r.violations;
        if better((r.f, r.p, r.p2), grid_min) {
            grid_min = (r.f, r.p, r.p2);
        }
        if r.chained_margin < chained.0 {
            chained = (r.chained_margin, r.chained_at);
        }
    }
    let refined = refine_min((grid_min.1, grid_min.2), hi, step, 1e-10);
    let g_end = ratio_g(2.0 * hi)?;

    let mut rep = VerificationReport::new("lemma-l1");
    rep.check("grid minimum of f >= 1.4", grid_min.0, SURFACE_BOUND, 0.0)
        .check("refined minimum of f >= 1.4", refined.0, SURFACE_BOUND, 0.0)
        .check("f >= H(0.9 s)/H(0.5 s)", chained.0, 0.0, MARGIN_TOL)
        .check("g(0.2) >= 1.4", g_end, SURFACE_BOUND, 0.0);
    rep.set("step", step)
        .set("grid_points", (axis.len() * axis.len() - 1) as u64)
        .set("violations", violations)
        .set_real("grid_min", grid_min.0)
        .set("grid_argmin", json!([grid_min.1, grid_min.2]))
        .set_real("refined_min", refined.0)
        .set("refined_argmin", json!([refined.1, refined.2]))
        .set_real("chained_min_margin", chained.0)
        .set("chained_argmin", json!([chained.1 .0, chained.1 .1]))
        .set_real("g_at_0_2", g_end);
    if violations > 0 {
        rep.passed = false;
    }
    rep.witness = Some(json!({ "p": refined.1, "p_prime": refined.2, "f": real(refined.0) }));
    Ok(rep)
}

/// Scans `H(p + p' - pp') - (1-p) H(p') ≥ 0` on the full unit square, and
/// checks that the margin vanishes on the edges `p = 0` and `p = 1`.
pub fn scan_lemma_l2(step: f64) -> Result<VerificationReport> {
    if step > 1e-2 {
        return Err(Error::Domain(format!("step must be at most 1e-2, got {step}")));
    }
    let axis = grid_axis(1.0, step)?;
    let margin = |p: f64, p2: f64| h(union_raw(p, p2)) - (1.0 - p) * h(p2);

    let rows: Vec<(f64, f64, f64)> = axis
        .par_iter()
        .map(|&p| {
            let mut best = (f64::INFINITY, p, 0.0);
            for &p2 in &axis {
                let m = margin(p, p2);
                if better((m, p, p2), best) {
                    best = (m, p, p2);
                }
            }
            best
        })
        .collect();
    let mut min = (f64::INFINITY, 0.0, 0.0);
    for &r in &rows {
        if better(r, min) {
            min = r;
        }
    }
    let mut edge_max = 0.0f64;
    for &p2 in &axis {
        edge_max = edge_max.max(margin(0.0, p2).abs()).max(margin(1.0, p2).abs());
    }

    let mut rep = VerificationReport::new("lemma-l2");
    rep.check("H(p+p'-pp') - (1-p)H(p') >= 0", min.0, 0.0, IDENTITY_TOL)
        .check("edge |margin| <= 1e-12", IDENTITY_TOL, edge_max, 0.0);
    rep.set("step", step)
        .set("grid_points", (axis.len() * axis.len()) as u64)
        .set_real("min_margin", min.0)
        .set("argmin", json!([min.1, min.2]))
        .set_real("edge_max_abs_margin", edge_max);
    rep.witness = Some(json!({ "p": min.1, "p_prime": min.2 }));
    Ok(rep)
}

/// Every term of the three-event decomposition of one instance.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecompositionReport {
    pub size: usize,
    pub mu: f64,
    pub threshold: f64,
    pub ratio: f64,
    pub mean_p: f64,
    pub hypothesis_ok: bool,
    pub pr_c0: f64,
    pub pr_c1: f64,
    /// `Pr[C₀]² H(X ∪ X' | C₀, C₀')`.
    pub term_00: f64,
    /// `2 Pr[C₀] Pr[C₁] H(X ∪ X' | C₀, C₁')`, both orders together.
    pub term_01: f64,
    /// `Pr[C₁]² H(X ∪ X' | C₁, C₁')`.
    pub term_11: f64,
    pub h_x_given_c: f64,
    pub h_x_given_c0: f64,
    pub h_x_given_c1: f64,
    pub lhs_total: f64,
    pub rhs_total: f64,
    #[serde(serialize_with = "ser_opt_real")]
    pub observed_ratio: Option<f64>,
    /// `mean_p / t - Pr[C₁]`.
    pub markov_margin: f64,
    /// `term_00 - 1.26 Pr[C₀] H(X | C₀)`.
    pub small_pair_margin: f64,
    /// `term_01 - 1.62 Pr[C₁] H(X | C₁)`.
    pub mixed_pair_margin: f64,
    /// `lhs_total - ratio · H(X | C)`.
    pub main_margin: f64,
    /// `lhs_total - (term_00 + term_01 + term_11)`.
    pub decomposition_residual: f64,
    pub passed: bool,
}

impl DecompositionReport {
    pub fn min_margin(&self) -> f64 {
        self.markov_margin
            .min(self.small_pair_margin)
            .min(self.mixed_pair_margin)
            .min(self.main_margin)
    }

    pub fn violated(&self) -> bool {
        self.hypothesis_ok && !self.passed
    }
}

/// Evaluates both sides of the inequality for `inst` and every intermediate
/// bound of the `C₀ / C₁` split.
pub fn verify_instance(inst: &LemmaInstance, ratio: f64) -> DecompositionReport {
    let t = inst.threshold;
    let merged = merge_equal_p(&inst.entries);
    let small: Vec<bool> = merged.iter().map(|&(_, p)| p <= t).collect();

    let mut pr_c0 = 0.0;
    let mut pr_c1 = 0.0;
    let mut hc0 = 0.0;
    let mut hc1 = 0.0;
    for (&(q, p), &s) in merged.iter().zip(&small) {
        if s {
            pr_c0 += q;
            hc0 += q * h(p);
        } else {
            pr_c1 += q;
            hc1 += q * h(p);
        }
    }

    let (mut t00, mut t01, mut t11, mut lhs) = (0.0, 0.0, 0.0, 0.0);
    for i in 0..merged.len() {
        let (qi, pi) = merged[i];
        for j in i..merged.len() {
            let (qj, pj) = merged[j];
            let w = if i == j { qi * qi } else { 2.0 * qi * qj };
            let v = w * h(union_raw(pi, pj));
            lhs += v;
            match (small[i], small[j]) {
                (true, true) => t00 += v,
                (false, false) => t11 += v,
                _ => t01 += v,
            }
        }
    }

    let mean_p = inst.mean_p();
    let h_x_given_c = hc0 + hc1;
    let rhs_total = ratio * h_x_given_c;
    let markov_margin = mean_p / t - pr_c1;
    let small_pair_margin = t00 - SMALL_PAIR_FACTOR * hc0;
    let mixed_pair_margin = t01 - MIXED_PAIR_FACTOR * hc1;
    let main_margin = lhs - rhs_total;
    let decomposition_residual = lhs - (t00 + t01 + t11);
    let passed = markov_margin >= -IDENTITY_TOL
        && small_pair_margin >= -MARGIN_TOL
        && mixed_pair_margin >= -MARGIN_TOL
        && main_margin >= -MARGIN_TOL
        && decomposition_residual.abs() <= IDENTITY_TOL;

    DecompositionReport {
        size: inst.entries.len(),
        mu: inst.mu,
        threshold: t,
        ratio,
        mean_p,
        hypothesis_ok: inst.hypothesis_ok(),
        pr_c0,
        pr_c1,
        term_00: t00,
        term_01: t01,
        term_11: t11,
        h_x_given_c,
        h_x_given_c0: if pr_c0 > 0.0 { hc0 / pr_c0 } else { 0.0 },
        h_x_given_c1: if pr_c1 > 0.0 { hc1 / pr_c1 } else { 0.0 },
        lhs_total: lhs,
        rhs_total,
        observed_ratio: (h_x_given_c > 0.0).then(|| lhs / h_x_given_c),
        markov_margin,
        small_pair_margin,
        mixed_pair_margin,
        main_margin,
        decomposition_residual,
        passed,
    }
}

/// Shape of the `p_c` values drawn by [`random_instance`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Profile {
    /// `p_c` spread over a few multiples of `mu`; the mean is fixed by rescaling.
    Smooth,
    /// Mostly tiny `p_c` plus a few near-certain entries with little weight.
    Spiky,
    /// `p_c` clustered around the threshold, with entries exactly at it and at 0.
    Boundary,
}

impl Profile {
    pub const ALL: [Profile; 3] = [Profile::Smooth, Profile::Spiky, Profile::Boundary];
}

fn exp_weight(rng: &mut ChaCha8Rng) -> f64 {
    -(1.0 - rng.gen::<f64>()).ln()
}

/// Draws an instance whose mean satisfies `mean_p ≤ mu`.
///
/// `Spiky` and `Boundary` enforce the mean by appending a `(q, 0)` sink entry,
/// so they may return `size + 1` entries.
pub fn random_instance(size: usize, mu: f64, seed: u64, profile: Profile) -> Result<LemmaInstance> {
    if size == 0 {
        return Err(Error::Domain("instance size must be at least 1".into()));
    }
    if !(0.0..=1.0).contains(&mu) {
        return Err(Error::Domain(format!("mu {mu} outside [0, 1]")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut q: Vec<f64> = (0..size).map(|_| exp_weight(&mut rng)).collect();
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= total);

    let mut p: Vec<f64> = match profile {
        Profile::Smooth => (0..size).map(|_| rng.gen::<f64>() * (3.0 * mu).min(1.0)).collect(),
        Profile::Spiky => {
            let spikes = 1 + rng.gen_range(0..3usize.min(size));
            let mut p: Vec<f64> = (0..size).map(|_| rng.gen::<f64>() * 2.0 * mu).collect();
            for _ in 0..spikes {
                let i = rng.gen_range(0..size);
                p[i] = 0.9 + 0.1 * rng.gen::<f64>();
                q[i] *= mu * rng.gen::<f64>();
            }
            p
        }
        Profile::Boundary => (0..size)
            .map(|_| match rng.gen_range(0..4u8) {
                0 => THRESHOLD,
                1 => 0.0,
                _ => THRESHOLD * (0.5 + rng.gen::<f64>()),
            })
            .collect(),
    };
    let total: f64 = q.iter().sum();
    q.iter_mut().for_each(|x| *x /= total);

    let mean: f64 = q.iter().zip(&p).map(|(a, b)| a * b).sum();
    let mut entries: Vec<(f64, f64)> = if mean <= mu {
        q.into_iter().zip(p).collect()
    } else {
        match profile {
            Profile::Smooth => {
                let s = mu / mean;
                p.iter_mut().for_each(|x| *x *= s);
                q.into_iter().zip(p).collect()
            }
            Profile::Spiky | Profile::Boundary => {
                // Mix with a sink at p = 0 so that the mean lands exactly on mu.
                let keep = mu / mean;
                let mut e: Vec<(f64, f64)> = q.into_iter().map(|x| x * keep).zip(p).collect();
                e.push((1.0 - keep, 0.0));
                e
            }
        }
    };
    // Rounding (here or in the weight normalization of the constructor) can
    // leave the mean a few ulps above mu; shave it off.
    loop {
        let inst = LemmaInstance::with_params(entries.clone(), mu, THRESHOLD)?;
        if inst.mean_p() <= mu {
            return Ok(inst);
        }
        entries.iter_mut().for_each(|e| e.1 *= 1.0 - 1e-15);
    }
}

/// Outcome of [`adversarial_minimize`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MinimizeResult {
    pub instance: LemmaInstance,
    pub min_ratio: f64,
    pub restart_minima: Vec<f64>,
    pub best_restart: usize,
    /// The ratio dropped below 1.26 with `mu ≤ 0.01`, which the inequality rules out.
    pub critical: bool,
}

/// Number of independent annealing runs used by default.
pub const DEFAULT_RESTARTS: usize = 8;

struct Annealer {
    logit: Vec<f64>,
    logw: Vec<f64>,
    mu: f64,
}

impl Annealer {
    fn project(&self) -> Vec<(f64, f64)> {
        let wmax = self.logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let w: Vec<f64> = self.logw.iter().map(|x| (x - wmax).exp()).collect();
        let total: f64 = w.iter().sum();
        let mut e: Vec<(f64, f64)> = w
            .iter()
            .zip(&self.logit)
            .map(|(wi, &l)| (wi / total, 1.0 / (1.0 + (-l).exp())))
            .collect();
        let mean: f64 = e.iter().map(|(q, p)| q * p).sum();
        if mean > self.mu {
            let s = self.mu / mean;
            e.iter_mut().for_each(|x| x.1 *= s);
        }
        e
    }

    fn objective(&self) -> f64 {
        let e = self.project();
        let base: f64 = e.iter().map(|&(q, p)| q * h(p)).sum();
        if base < 1e-300 {
            return f64::INFINITY;
        }
        let inst = LemmaInstance {
            entries: e,
            mu: self.mu,
            threshold: THRESHOLD,
        };
        inst.h_union_given_pair() / base
    }
}

fn anneal(size: usize, mu: f64, seed: u64, restart: u64, iters: usize) -> (f64, Vec<(f64, f64)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let mut state = Annealer {
        logit: (0..size).map(|_| rng.gen_range(-6.0..2.0)).collect(),
        logw: (0..size).map(|_| rng.gen_range(-2.0..2.0)).collect(),
        mu,
    };
    let mut current = state.objective();
    let mut best = (current, state.project());
    let (t0, t1) = (0.05f64, 1e-6f64);
    let (s0, s1) = (1.5f64, 1e-3f64);
    for it in 0..iters {
        let frac = it as f64 / iters.max(1) as f64;
        let temp = t0 * (t1 / t0).powf(frac);
        let sigma = s0 * (s1 / s0).powf(frac);
        let i = rng.gen_range(0..size);
        let (old_logit, old_logw) = (state.logit[i], state.logw[i]);
        match rng.gen_range(0..3u8) {
            0 => state.logit[i] += sigma * gauss(&mut rng),
            1 => state.logw[i] += sigma * gauss(&mut rng),
            _ => {
                let j = rng.gen_range(0..size);
                state.logit[i] = state.logit[j];
            }
        }
        let cand = state.objective();
        let accept = cand <= current || (cand.is_finite() && rng.gen::<f64>() < ((current - cand) / temp).exp());
        if accept {
            current = cand;
            if cand < best.0 {
                best = (cand, state.project());
            }
        } else {
            state.logit[i] = old_logit;
            state.logw[i] = old_logw;
        }
    }
    best
}

fn gauss(rng: &mut ChaCha8Rng) -> f64 {
    // Box-Muller; one variate per call keeps the stream layout simple.
    let u1: f64 = 1.0 - rng.gen::<f64>();
    let u2: f64 = rng.gen();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Simulated annealing over instances of `size` entries with `mean_p ≤ mu`,
/// minimizing `E H(p_c ∪ p_{c'}) / E H(p_c)`. Restarts run in parallel; the
/// winner is the smallest ratio, ties going to the lower restart index.
pub fn adversarial_minimize(size: usize, mu: f64, seed: u64, iters: usize, restarts: usize) -> Result<MinimizeResult> {
    if size == 0 || iters == 0 || restarts == 0 {
        return Err(Error::Domain("size, iters and restarts must be at least 1".into()));
    }
    if !(mu > 0.0 && mu <= 1.0) {
        return Err(Error::Domain(format!("mu must lie in (0, 1], got {mu}")));
    }
    let runs: Vec<(f64, Vec<(f64, f64)>)> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| anneal(size, mu, seed, r, iters))
        .collect();
    let mut best_restart = 0;
    for (i, r) in runs.iter().enumerate() {
        if r.0 < runs[best_restart].0 {
            best_restart = i;
        }
    }
    let (min_ratio, entries) = runs[best_restart].clone();
    let instance = LemmaInstance::with_params(entries, mu, THRESHOLD)?;
    Ok(MinimizeResult {
        critical: mu <= MU && min_ratio < SMALL_PAIR_FACTOR,
        instance,
        min_ratio,
        restart_minima: runs.iter().map(|r| r.0).collect(),
        best_restart,
    })
}

/// One point of the ratio surface.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GridRow {
    pub p: f64,
    pub p_prime: f64,
    pub f: f64,
}

/// The ratio surface `f` over `[0, 0.1]²`, rows in `p`-major order, skipping
/// `(0, 0)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Figure1Grid {
    pub rows: Vec<GridRow>,
    pub min: GridRow,
}

pub fn figure1_grid(step: f64) -> Result<Figure1Grid> {
    let axis = grid_axis(THRESHOLD, step)?;
    let rows: Vec<GridRow> = axis
        .iter()
        .flat_map(|&p| axis.iter().map(move |&p_prime| (p, p_prime)))
        .filter(|&(p, q)| !(p == 0.0 && q == 0.0))
        .map(|(p, p_prime)| GridRow {
            p,
            p_prime,
            f: ratio_f(p, p_prime).expect("grid point in domain"),
        })
        .collect();
    let mut min = rows[0];
    for r in &rows {
        if better((r.f, r.p, r.p_prime), (min.f, min.p, min.p_prime)) {
            min = *r;
        }
    }
    Ok(Figure1Grid { rows, min })
}
