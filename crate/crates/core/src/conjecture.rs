//! KL-augmented entropy of unions.
//!
//! For `A, B` iid the quantity `gap(A) = H(A ∪ B) + D(A ∪ B ‖ A) - H(A)` is
//! zero when `A` is uniform over a union-closed family, and the open
//! conjecture claims it is strictly positive whenever every marginal is below
//! one half and `H(A) > 0`. A positive gap certifies that `A` is either not
//! uniform or not supported on a union-closed family.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::entropy::{conditional_entropy, entropy, kl_divergence, FiniteDistribution, JointDistribution};
use crate::error::{Error, Result};
use crate::family::{union_closed_witness, union_closure, SetFamily};
use crate::report::{real, ser_real, VerificationReport};
use crate::subset::{
    check_n, dist_entropy, full_bits, make_distribution, union_distribution, SubsetDistribution, SubsetMask,
};

/// Residual allowed in `D + H(A ∪ B) = log₂ |F|`.
pub const IDENTITY_TOL: f64 = 1e-9;

/// Marginal cap enforced by the search, strictly below one half.
pub const SEARCH_MARGINAL_CAP: f64 = 0.5 - 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GapReport {
    #[serde(serialize_with = "ser_real")]
    pub h_union: f64,
    #[serde(serialize_with = "ser_real")]
    pub kl: f64,
    #[serde(serialize_with = "ser_real")]
    pub h_a: f64,
    #[serde(serialize_with = "ser_real")]
    pub gap: f64,
    pub marginal_max: f64,
    /// Every marginal below one half and `H(A) > 0`.
    pub hypothesis_ok: bool,
}

/// `D(A ∪ B ‖ A)` over the union of both supports.
pub fn union_kl(d: &SubsetDistribution, u: &SubsetDistribution) -> f64 {
    let labels: Vec<SubsetMask> = {
        let mut v: Vec<SubsetMask> = u
            .support()
            .into_iter()
            .map(|e| e.0)
            .chain(d.support().into_iter().map(|e| e.0))
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    };
    let p = FiniteDistribution::new(labels.iter().map(|&m| (m, u.mass(m)))).expect("union law");
    let q = FiniteDistribution::new(labels.iter().map(|&m| (m, d.mass(m)))).expect("base law");
    kl_divergence(&p, &q).expect("shared label space")
}

pub fn conjecture1_gap(d: &SubsetDistribution) -> GapReport {
    let u = union_distribution(d);
    let h_union = dist_entropy(&u);
    let h_a = dist_entropy(d);
    let kl = union_kl(d, &u);
    let marginal_max = d.max_marginal();
    GapReport {
        h_union,
        kl,
        h_a,
        gap: h_union + kl - h_a,
        marginal_max,
        hypothesis_ok: marginal_max < 0.5 && h_a > 0.0,
    }
}

/// Checks `D(A ∪ B ‖ A) + H(A ∪ B) = log₂ |F|` for `A` uniform over a
/// union-closed `F`. Non-closed input is a usage error naming a witness pair.
pub fn kl_identity_check(f: &SetFamily) -> Result<VerificationReport> {
    if let Some((a, b)) = union_closed_witness(f) {
        return Err(Error::Usage(format!(
            "family is not union-closed: {} u {} is missing",
            crate::format::format_set(a),
            crate::format::format_set(b)
        )));
    }
    let d = crate::family::uniform_distribution(f);
    let g = conjecture1_gap(&d);
    let log_f = (f.len() as f64).log2();
    let residual = (g.kl + g.h_union - log_f).abs();
    let mut rep = VerificationReport::new("kl-identity");
    rep.check("|D + H(A u B) - log|F|| <= 1e-9", IDENTITY_TOL, residual, 0.0);
    rep.set("family_size", f.len() as u64)
        .set("n", f.n() as u64)
        .set_real("kl", g.kl)
        .set_real("h_union", g.h_union)
        .set_real("h_a", g.h_a)
        .set_real("log2_family_size", log_f)
        .set_real("residual", residual);
    Ok(rep)
}

/// Best point found by [`search_conjecture1`].
#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub best: GapReport,
    pub witness: SubsetDistribution,
    pub restart_gaps: Vec<f64>,
    pub best_restart: usize,
    /// Gap below `-IDENTITY_TOL` under the hypothesis.
    pub refutes_conjecture: bool,
}

pub const MAX_SEARCH_N: usize = 12;
/// Candidates with less entropy are rejected: near a point mass every term of
/// the gap vanishes and rounding noise would dominate the ranking.
pub const MIN_SEARCH_ENTROPY: f64 = 1e-3;
pub const MAX_SEARCH_SUPPORT: usize = 512;

#[derive(Clone)]
struct SearchState {
    n: usize,
    masks: Vec<SubsetMask>,
    logw: Vec<f64>,
}

impl SearchState {
    fn distribution(&self) -> Option<SubsetDistribution> {
        let wmax = self.logw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let d = make_distribution(
            self.n,
            self.masks.iter().zip(&self.logw).map(|(&m, &l)| (m, (l - wmax).exp())),
        )
        .ok()?;
        Some(crate::subset::cap_marginals(&d, SEARCH_MARGINAL_CAP))
    }

    fn evaluate(&self) -> Option<(GapReport, SubsetDistribution)> {
        let d = self.distribution()?;
        let g = conjecture1_gap(&d);
        (g.hypothesis_ok && g.gap.is_finite() && g.h_a >= MIN_SEARCH_ENTROPY).then_some((g, d))
    }
}

/// Search objective: the gap per bit of `H(A)`.
fn score(g: &GapReport) -> f64 {
    g.gap / g.h_a
}

fn random_start(n: usize, support: usize, rng: &mut ChaCha8Rng) -> SearchState {
    // Random union-closed support containing ∅, grown generator by generator
    // while it fits.
    let mut fam = SetFamily::new(n, [SubsetMask::EMPTY]).expect("valid");
    let gens = rng.gen_range(1..=n.max(2));
    for _ in 0..gens {
        let g = SubsetMask::raw(rng.gen_range(1..=full_bits(n)));
        let mut members = fam.members().to_vec();
        members.push(g);
        let next = union_closure(&SetFamily::new(n, members).expect("valid"));
        if next.len() > support {
            break;
        }
        fam = next;
    }
    if fam.len() < 2 {
        // A single extra set keeps H(A) > 0.
        let g = SubsetMask::raw(1 << rng.gen_range(0..n));
        fam = SetFamily::new(n, [SubsetMask::EMPTY, g]).expect("valid");
    }
    let masks = fam.members().to_vec();
    let logw = masks.iter().map(|_| rng.gen_range(-1.0..1.0)).collect();
    SearchState { n, masks, logw }
}

fn search_restart(
    n: usize,
    support: usize,
    seed: u64,
    restart: u64,
    iters: usize,
) -> Option<(GapReport, SubsetDistribution)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart);
    let mut state = random_start(n, support, &mut rng);
    let mut current = state.evaluate();
    let mut best = current.clone();
    let (t0, t1) = (0.05f64, 1e-5f64);
    for it in 0..iters {
        let frac = it as f64 / iters.max(1) as f64;
        let temp = t0 * (t1 / t0).powf(frac);
        let mut cand = state.clone();
        let k = cand.masks.len();
        match rng.gen_range(0..10u8) {
            // Mass transfer between two support masks.
            0..=6 => {
                let i = rng.gen_range(0..k);
                let j = rng.gen_range(0..k);
                let delta = rng.gen_range(0.0..1.0) * (1.0 - frac * 0.9);
                cand.logw[i] -= delta;
                cand.logw[j] += delta;
            }
            // Add a mask and close the support under unions.
            7 | 8 => {
                let g = SubsetMask::raw(rng.gen_range(1..=full_bits(n)));
                let mut members = cand.masks.clone();
                members.push(g);
                let closed = union_closure(&SetFamily::new(n, members).expect("valid"));
                if closed.len() > support {
                    continue;
                }
                let base = cand.logw.iter().copied().fold(f64::INFINITY, f64::min);
                let mut logw = Vec::with_capacity(closed.len());
                for &m in closed.members() {
                    match cand.masks.binary_search(&m) {
                        Ok(idx) => logw.push(cand.logw[idx]),
                        Err(_) => logw.push(base - rng.gen_range(0.0..2.0)),
                    }
                }
                cand.masks = closed.members().to_vec();
                cand.logw = logw;
            }
            // Remove a nonempty mask; a non-closed result scores +∞ and is rejected.
            _ => {
                if k <= 2 {
                    continue;
                }
                let i = rng.gen_range(1..k);
                cand.masks.remove(i);
                cand.logw.remove(i);
            }
        }
        let Some(value) = cand.evaluate() else { continue };
        let accept = match &current {
            None => true,
            Some((cur, _)) => {
                let (a, b) = (score(cur), score(&value.0));
                b <= a || rng.gen::<f64>() < ((a - b) / temp).exp()
            }
        };
        if accept {
            if best.as_ref().is_none_or(|b| score(&value.0) < score(&b.0)) {
                best = Some(value.clone());
            }
            current = Some(value);
            state = cand;
        }
    }
    best
}

/// Seeded annealing search for a distribution with a small gap among
/// distributions with every marginal at most `0.5 - 1e-6` and
/// `H(A) >= MIN_SEARCH_ENTROPY`.
///
/// Candidates are ranked by `gap / H(A)`, since the raw gap shrinks to zero
/// with `H(A)` along any path towards a point mass. Supports are kept
/// union-closed; anything else has `D = +∞`. Restarts run in parallel and the
/// winner is the smallest ratio, ties to the lower restart. A gap below
/// `-IDENTITY_TOL` counts as a refutation.
pub fn search_conjecture1(n: usize, support: usize, seed: u64, iters: usize, restarts: usize) -> Result<SearchResult> {
    check_n(n)?;
    if n > MAX_SEARCH_N {
        return Err(Error::Capability(format!("search supports n <= {MAX_SEARCH_N}")));
    }
    if !(2..=MAX_SEARCH_SUPPORT).contains(&support) {
        return Err(Error::Domain(format!(
            "support size must lie in [2, {MAX_SEARCH_SUPPORT}]"
        )));
    }
    if restarts == 0 {
        return Err(Error::Domain("need at least one restart".into()));
    }
    let runs: Vec<Option<(GapReport, SubsetDistribution)>> = (0..restarts as u64)
        .into_par_iter()
        .map(|r| search_restart(n, support, seed, r, iters))
        .collect();
    let gap_of = |r: &Option<(GapReport, SubsetDistribution)>| r.as_ref().map_or(f64::INFINITY, |x| x.0.gap);
    let score_of = |r: &Option<(GapReport, SubsetDistribution)>| r.as_ref().map_or(f64::INFINITY, |x| score(&x.0));
    let mut best_restart: Option<usize> = None;
    for (i, r) in runs.iter().enumerate() {
        if r.is_some() && best_restart.is_none_or(|b| score_of(r) < score_of(&runs[b])) {
            best_restart = Some(i);
        }
    }
    let b = best_restart.ok_or_else(|| Error::Usage("search found no admissible distribution".into()))?;
    let (best, witness) = runs[b].clone().expect("selected restart has a value");
    Ok(SearchResult {
        refutes_conjecture: best.hypothesis_ok && best.gap < -IDENTITY_TOL,
        restart_gaps: runs.iter().map(gap_of).collect(),
        best_restart: b,
        best,
        witness,
    })
}

/// Entropies of the mod-2 construction showing that a generic function of the
/// pair does not inherit the union bound.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Section4Report {
    /// `H(f(X, X'))` with `f(x, x') = (x mod 2, x' mod 2)`.
    pub h_f_xx: f64,
    pub h_x: f64,
    pub h_x_given_c: f64,
    pub h_f_given_cc: f64,
}

/// `C` uniform on `{0,1,2,3}`; `X | C` uniform on `{0, 2}` for even `C` and on
/// `{1, 3}` for odd `C`. `(X', C')` is an independent copy.
pub fn section4_counterexample() -> Section4Report {
    let xc = JointDistribution::new((0u8..4).flat_map(|c| {
        let base = c % 2;
        [(base, c, 0.125), (base + 2, c, 0.125)]
    }))
    .expect("valid joint");
    let pair = xc.product(&xc);
    let f_pair = pair.map_x(|&(x, x2)| (x % 2, x2 % 2));
    Section4Report {
        h_f_xx: entropy(&f_pair.marginal_x()),
        h_x: entropy(&xc.marginal_x()),
        h_x_given_c: conditional_entropy(&xc),
        h_f_given_cc: conditional_entropy(&f_pair),
    }
}

/// Gap of the single-bit distribution with `Pr[1 ∈ A] = p`, in closed form:
/// `H(2p - p²) + D(Bern(2p - p²) ‖ Bern(p)) - H(p)`.
pub fn single_bit_gap(p: f64) -> f64 {
    use crate::entropy::h;
    let u = 2.0 * p - p * p;
    let kl = |a: f64, b: f64| {
        let t = |x: f64, y: f64| if x > 0.0 { x * (x / y).log2() } else { 0.0 };
        t(a, b) + t(1.0 - a, 1.0 - b)
    };
    h(u) + kl(u, p) - h(p)
}

pub(crate) fn gap_json(g: &GapReport) -> serde_json::Value {
    json!({
        "h_union": real(g.h_union),
        "kl": real(g.kl),
        "h_a": real(g.h_a),
        "gap": real(g.gap),
        "marginal_max": real(g.marginal_max),
        "hypothesis_ok": g.hypothesis_ok,
    })
}
