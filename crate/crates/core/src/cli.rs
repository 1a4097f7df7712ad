//! The `uclab` command line.
//!
//! Every command prints one JSON [`RunReport`] on stdout. Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | no inequality violated, hypotheses hold |
//! | 1 | usage, parse or I/O error |
//! | 2 | the input violates the hypothesis of the checked statement |
//! | 3 | a proven inequality failed (implementation bug or counterexample witness) |

use std::ffi::OsString;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::conjecture::{self, gap_json};
use crate::entropy::{binary_entropy, fixed_point, h, Prob, MU, RATIO, THRESHOLD};
use crate::error::{Error, Result};
use crate::family::{self, SetFamily};
use crate::format;
use crate::lemma::{self, ratio_f, ratio_g};
use crate::report::{real, RunReport, VerificationReport};
use crate::subset::{self, SubsetDistribution};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_HYPOTHESIS: i32 = 2;
pub const EXIT_CRITICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "uclab",
    version,
    about = "Entropy checks for unions of random sets and union-closed families"
)]
pub struct Cli {
    /// Worker threads for grid scans, batches and restarts.
    #[arg(long, global = true, env = "UCLAB_JOBS")]
    pub jobs: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate H(p), the ratio f(p, p') or g(p) at given points.
    Entropy(EntropyArgs),
    /// Scalar inequality scans, instance verification, adversarial search.
    #[command(subcommand)]
    Lemma(LemmaCmd),
    /// Distributions over subsets of [n].
    #[command(subcommand)]
    Dist(DistCmd),
    /// Set families.
    #[command(subcommand)]
    Family(FamilyCmd),
    /// The KL-augmented gap and its search harness.
    #[command(subcommand)]
    Conjecture1(ConjectureCmd),
}

#[derive(Debug, Args, Serialize)]
pub struct EntropyArgs {
    /// Binary entropy H(p).
    #[arg(long = "h", num_args = 1..)]
    pub h: Vec<f64>,
    /// f(p, p') = 2H(p + p' - pp') / (H(p) + H(p')).
    #[arg(long = "f", num_args = 2, value_names = ["P", "P_PRIME"])]
    pub f: Vec<f64>,
    /// g(p) = H(0.9p) / H(0.5p).
    #[arg(long = "g", num_args = 1..)]
    pub g: Vec<f64>,
}

#[derive(Debug, Subcommand)]
pub enum LemmaCmd {
    /// Scan f >= 1.4 over [0, 0.1]^2.
    ScanL1(StepArgs),
    /// Scan H(p + p' - pp') >= (1 - p) H(p') over [0, 1]^2.
    ScanL2(StepArgs),
    /// Verify an instance file of `q p` lines.
    Verify(VerifyArgs),
    /// Seeded adversarial minimization of the instance ratio.
    Minimize(MinimizeArgs),
    /// Write the ratio surface over [0, 0.1]^2 as CSV.
    Figure1(Figure1Args),
}

#[derive(Debug, Args, Serialize)]
pub struct StepArgs {
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct VerifyArgs {
    pub file: PathBuf,
    #[arg(long, default_value_t = MU)]
    pub mu: f64,
    #[arg(long, default_value_t = THRESHOLD)]
    pub threshold: f64,
    #[arg(long, default_value_t = RATIO)]
    pub ratio: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct MinimizeArgs {
    #[arg(long, default_value_t = MU)]
    pub mu: f64,
    /// Use the fixed point (3 - sqrt 5)/2 as mu.
    #[arg(long, conflicts_with = "mu")]
    pub fixed_point: bool,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 10_000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub size: usize,
    #[arg(long, default_value_t = lemma::DEFAULT_RESTARTS)]
    pub restarts: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Figure1Args {
    #[arg(long, default_value_t = 1e-3)]
    pub step: f64,
    #[arg(long)]
    pub out: PathBuf,
}

/// A distribution from a file or one of the three built-in generators.
#[derive(Debug, Args, Serialize)]
pub struct DistSource {
    /// Distribution file (`n=<int>` header, then `<set> <mass>` lines).
    pub file: Option<PathBuf>,
    /// Generator: 1 = iid bits, 2 = all-or-nothing, 3 = gated iid bits.
    #[arg(long, conflicts_with = "file")]
    pub which: Option<u8>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long, default_value_t = 0.99)]
    pub q: f64,
}

#[derive(Debug, Subcommand)]
pub enum DistCmd {
    Entropy(DistSource),
    Union(UnionArgs),
    Marginals(DistSource),
    CheckThm1(CheckThm1Args),
    BitChain(DistSource),
    /// Entropies of a generator against their closed forms.
    Example(ExampleArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct UnionArgs {
    #[command(flatten)]
    pub source: DistSource,
    /// Also write the union law in the distribution format.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct CheckThm1Args {
    #[command(flatten)]
    pub source: DistSource,
    #[arg(long, default_value_t = RATIO)]
    pub ratio: f64,
    #[arg(long, default_value_t = MU)]
    pub mu: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct ExampleArgs {
    #[arg(long)]
    pub which: u8,
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub p: f64,
    #[arg(long, default_value_t = 0.99)]
    pub q: f64,
}

#[derive(Debug, Subcommand)]
pub enum FamilyCmd {
    /// Is the family union-closed?
    Check(FileArg),
    Closure(ClosureArgs),
    Freq(FileArg),
    SelfUnion(FileArg),
    /// All union-closed families for n <= 4.
    Enumerate(EnumerateArgs),
    /// Union closure of k random generators.
    Random(RandomArgs),
    /// Element frequencies over every union-closed family, n <= 4.
    FranklBrute(NArg),
    /// D(A u B || A) + H(A u B) = log2 |F| for A uniform over F.
    KlIdentity(KlIdentityArgs),
}

#[derive(Debug, Args, Serialize)]
pub struct FileArg {
    pub file: PathBuf,
}

#[derive(Debug, Args, Serialize)]
pub struct ClosureArgs {
    pub file: PathBuf,
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct NArg {
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct EnumerateArgs {
    #[arg(long)]
    pub n: usize,
    /// Include every family in the report.
    #[arg(long)]
    pub list: bool,
}

#[derive(Debug, Args, Serialize)]
pub struct RandomArgs {
    #[arg(long)]
    pub n: usize,
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub seed: u64,
}

#[derive(Debug, Args, Serialize)]
pub struct KlIdentityArgs {
    /// Family file; otherwise a seeded random closure from --n, --k, --seed.
    pub file: Option<PathBuf>,
    #[arg(long, conflicts_with = "file", requires_all = ["k", "seed"])]
    pub n: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
pub enum ConjectureCmd {
    /// Gap of a distribution file.
    Gap(FileArg),
    /// Seeded search for a small gap.
    Search(SearchArgs),
    /// Entropies of the mod-2 pair construction.
    Section4,
}

#[derive(Debug, Args, Serialize)]
pub struct SearchArgs {
    #[arg(long, default_value_t = 6)]
    pub n: usize,
    #[arg(long, default_value_t = 32)]
    pub support: usize,
    #[arg(long)]
    pub seed: u64,
    #[arg(long, default_value_t = 2000)]
    pub iters: usize,
    #[arg(long, default_value_t = 8)]
    pub restarts: usize,
}

/// What a command produced: the report, its exit code, and progress lines for stderr.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: RunReport,
    pub exit_code: i32,
    pub notes: Vec<String>,
}

impl Outcome {
    fn new(report: RunReport) -> Self {
        Outcome {
            report,
            exit_code: EXIT_OK,
            notes: Vec::new(),
        }
    }

    fn escalate(&mut self, code: i32) {
        self.exit_code = self.exit_code.max(code);
    }

    fn verdict(&mut self, rep: &VerificationReport) {
        if rep.violated() {
            self.escalate(EXIT_CRITICAL);
            self.notes.push(format!("CRITICAL: {} failed", rep.name));
        } else if !rep.hypothesis_ok {
            self.escalate(EXIT_HYPOTHESIS);
            self.notes.push(format!("{}: hypothesis does not hold", rep.name));
        }
    }
}

fn params<T: Serialize>(args: &T) -> Map<String, Value> {
    match serde_json::to_value(args) {
        Ok(Value::Object(m)) => m,
        _ => Map::new(),
    }
}

fn read(path: &Path) -> Result<String> {
    std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

fn with_file<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Parse { line, message } => Error::Parse {
            line,
            message: format!("{}: {message}", path.display()),
        },
        other => other,
    })
}

/// Value formatted with 12 significant digits.
fn sig12(x: f64) -> String {
    if x == 0.0 || !x.is_finite() {
        return x.to_string();
    }
    let decimals = (11 - x.abs().log10().floor() as i32).max(0) as usize;
    format!("{x:.decimals$}")
}

fn dist_from(src: &DistSource) -> Result<SubsetDistribution> {
    if let Some(path) = &src.file {
        return with_file(path, format::parse_distribution(&read(path)?));
    }
    let which = src
        .which
        .ok_or_else(|| Error::Usage("give a distribution file or --which with --n and --p".into()))?;
    let n = src
        .n
        .ok_or_else(|| Error::Usage("--n is required with --which".into()))?;
    let p = src
        .p
        .ok_or_else(|| Error::Usage("--p is required with --which".into()))?;
    generator(which, n, p, src.q)
}

fn generator(which: u8, n: usize, p: f64, q: f64) -> Result<SubsetDistribution> {
    match which {
        1 => subset::product_bernoulli(n, p),
        2 => subset::two_point(n, p),
        3 => subset::gated_product(n, p, q),
        w => Err(Error::Usage(format!("--which must be 1, 2 or 3, got {w}"))),
    }
}

fn support_json(d: &SubsetDistribution) -> Value {
    Value::Array(
        d.support()
            .into_iter()
            .map(|(m, w)| json!({ "set": format::format_set(m), "mass": real(w) }))
            .collect(),
    )
}

fn family_json(f: &SetFamily) -> Value {
    Value::Array(
        f.members()
            .iter()
            .map(|&m| Value::String(format::format_set(m)))
            .collect(),
    )
}

fn cmd_entropy(args: &EntropyArgs) -> Result<Outcome> {
    if args.h.is_empty() && args.f.is_empty() && args.g.is_empty() {
        return Err(Error::Usage("give at least one of --h, --f, --g".into()));
    }
    let mut rows = Vec::new();
    for &p in &args.h {
        let v = binary_entropy(Prob::new(p)?);
        rows.push(json!({ "fn": "h", "args": [p], "value": real(v), "display": sig12(v) }));
    }
    if !args.f.is_empty() {
        let v = ratio_f(args.f[0], args.f[1])?;
        rows.push(json!({ "fn": "f", "args": [args.f[0], args.f[1]], "value": real(v), "display": sig12(v) }));
    }
    for &p in &args.g {
        let v = ratio_g(p)?;
        rows.push(json!({ "fn": "g", "args": [p], "value": real(v), "display": sig12(v) }));
    }
    let mut r = RunReport::new("entropy");
    r.parameters = params(args);
    r.results = Value::Array(rows);
    Ok(Outcome::new(r))
}

fn cmd_lemma(cmd: &LemmaCmd) -> Result<Outcome> {
    match cmd {
        LemmaCmd::ScanL1(a) => {
            let rep = lemma::scan_lemma_l1(a.step)?;
            let mut r = RunReport::new("lemma scan-l1");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
        LemmaCmd::ScanL2(a) => {
            let rep = lemma::scan_lemma_l2(a.step)?;
            let mut r = RunReport::new("lemma scan-l2");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
        LemmaCmd::Verify(a) => {
            let inst = with_file(&a.file, format::parse_instance(&read(&a.file)?, a.mu, a.threshold))?;
            let rep = lemma::verify_instance(&inst, a.ratio);
            let mut r = RunReport::new("lemma verify");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            if rep.violated() {
                o.escalate(EXIT_CRITICAL);
                o.notes
                    .push("CRITICAL: instance violates an inequality under its hypothesis".into());
            } else if !rep.hypothesis_ok {
                o.escalate(EXIT_HYPOTHESIS);
                o.notes.push(format!("mean p = {} exceeds mu = {}", rep.mean_p, rep.mu));
            }
            Ok(o)
        }
        LemmaCmd::Minimize(a) => {
            let mu = if a.fixed_point { fixed_point() } else { a.mu };
            let res = lemma::adversarial_minimize(a.size, mu, a.seed, a.iters, a.restarts)?;
            let single_point = h(2.0 * mu - mu * mu) / h(mu);
            let mut r = RunReport::new("lemma minimize");
            r.parameters = params(a);
            r.param("mu_effective", mu);
            r.seed = Some(a.seed);
            r.results = json!({
                "min_ratio": real(res.min_ratio),
                "single_point_ratio": real(single_point),
                "restart_minima": res.restart_minima.iter().map(|&x| real(x)).collect::<Vec<_>>(),
                "best_restart": res.best_restart,
                "critical": res.critical,
                "instance": format::write_instance(&res.instance),
                "verification": lemma::verify_instance(&res.instance, 1.0),
            });
            let mut o = Outcome::new(r);
            if res.critical {
                o.escalate(EXIT_CRITICAL);
                o.notes
                    .push(format!("CRITICAL: ratio {} below 1.26 at mu = {mu}", res.min_ratio));
            }
            Ok(o)
        }
        LemmaCmd::Figure1(a) => {
            let g = lemma::figure1_grid(a.step)?;
            write(&a.out, &format::write_figure1_csv(&g))?;
            let mut r = RunReport::new("lemma figure1");
            r.parameters = params(a);
            r.results = json!({
                "rows": g.rows.len(),
                "min": { "p": g.min.p, "p_prime": g.min.p_prime, "f": real(g.min.f) },
                "csv": a.out.display().to_string(),
            });
            Ok(Outcome::new(r))
        }
    }
}

fn cmd_dist(cmd: &DistCmd) -> Result<Outcome> {
    match cmd {
        DistCmd::Entropy(src) => {
            let d = dist_from(src)?;
            let mut r = RunReport::new("dist entropy");
            r.parameters = params(src);
            r.results = json!({
                "n": d.n(),
                "support": d.support_len(),
                "entropy": real(subset::dist_entropy(&d)),
                "normalization_residual": real(d.residual()),
            });
            Ok(Outcome::new(r))
        }
        DistCmd::Union(a) => {
            let d = dist_from(&a.source)?;
            let u = subset::union_distribution(&d);
            if let Some(out) = &a.out {
                write(out, &format::write_distribution(&u))?;
            }
            let mut r = RunReport::new("dist union");
            r.parameters = params(a);
            r.results = json!({
                "n": u.n(),
                "h_a": real(subset::dist_entropy(&d)),
                "h_union": real(subset::dist_entropy(&u)),
                "union": support_json(&u),
            });
            Ok(Outcome::new(r))
        }
        DistCmd::Marginals(src) => {
            let d = dist_from(src)?;
            let m = d.marginals();
            let u = subset::union_distribution(&d).marginals();
            let mut r = RunReport::new("dist marginals");
            r.parameters = params(src);
            r.results = json!({
                "marginals": m.iter().map(|&x| real(x)).collect::<Vec<_>>(),
                "union_marginals": u.iter().map(|&x| real(x)).collect::<Vec<_>>(),
                "max_marginal": real(d.max_marginal()),
            });
            Ok(Outcome::new(r))
        }
        DistCmd::CheckThm1(a) => {
            let d = dist_from(&a.source)?;
            let rep = subset::check_theorem1(&d, a.ratio, a.mu);
            let mut r = RunReport::new("dist check-thm1");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
        DistCmd::BitChain(src) => {
            let d = dist_from(src)?;
            let c = subset::bit_chain(&d);
            let mut r = RunReport::new("dist bit-chain");
            r.parameters = params(src);
            r.results = json!({
                "entropy": real(subset::dist_entropy(&d)),
                "chain_total": real(c.total()),
                "per_bit": c.per_bit.iter().map(|s| json!({
                    "element": s.element,
                    "h_bit": real(s.h_bit),
                    "histories": s.instance.len(),
                    "mean_p": real(s.instance.mean_p()),
                })).collect::<Vec<_>>(),
            });
            Ok(Outcome::new(r))
        }
        DistCmd::Example(a) => {
            let d = generator(a.which, a.n, a.p, a.q)?;
            let cf = subset::example_closed_forms(a.which, a.n, a.p, a.q)?;
            let got_a = subset::dist_entropy(&d);
            let got_u = subset::dist_entropy(&subset::union_distribution(&d));
            let mut rep = VerificationReport::new("example");
            rep.check("|H(A) - closed form| <= 1e-9", 1e-9, (got_a - cf.h_a).abs(), 0.0)
                .check(
                    "|H(A u B) - closed form| <= 1e-9",
                    1e-9,
                    (got_u - cf.h_union).abs(),
                    0.0,
                )
                .check("H(A u B) >= H(A u B | gates)", got_u, cf.h_union_given_gates, 1e-9);
            rep.set_real("h_a", got_a)
                .set_real("h_a_closed_form", cf.h_a)
                .set_real("h_union", got_u)
                .set_real("h_union_closed_form", cf.h_union)
                .set_real("h_union_given_gates", cf.h_union_given_gates);
            let mut r = RunReport::new("dist example");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
    }
}

/// Sweep of every union-closed family over `[n]`: two enumeration strategies,
/// and the smallest maximum element frequency over `F ≠ {∅}`.
pub fn frankl_brute(n: usize) -> Result<VerificationReport> {
    let by_filter = family::enumerate_by_filter(n)?;
    let by_closure = family::enumerate_by_closure(n)?;
    let mut rep = VerificationReport::new("frankl-brute");
    let agree = by_filter == by_closure;
    rep.check("enumeration strategies agree", f64::from(u8::from(agree)), 1.0, 0.0);
    let mut worst: Option<(f64, &SetFamily)> = None;
    let mut checked = 0u64;
    for f in by_closure.iter().filter(|f| !f.is_empty_set_only()) {
        let prof = family::frequency_profile(f);
        checked += 1;
        if worst.is_none_or(|(w, _)| prof.max_fraction < w) {
            worst = Some((prof.max_fraction, f));
        }
    }
    let (min_max, worst_family) = worst.expect("n >= 1 has a family other than {∅}");
    rep.check("min over F of max frequency >= 0.01", min_max, MU, 0.0);
    rep.set("n", n as u64)
        .set("families", by_closure.len() as u64)
        .set("families_by_filter", by_filter.len() as u64)
        .set("families_checked", checked)
        .set_real("min_max_fraction", min_max)
        .set("worst_family", family_json(worst_family));
    rep.witness = Some(family_json(worst_family));
    Ok(rep)
}

fn cmd_family(cmd: &FamilyCmd) -> Result<Outcome> {
    let load = |path: &PathBuf| -> Result<SetFamily> { with_file(path, format::parse_family(&read(path)?)) };
    match cmd {
        FamilyCmd::Check(a) => {
            let f = load(&a.file)?;
            let w = family::union_closed_witness(&f);
            let mut r = RunReport::new("family check");
            r.parameters = params(a);
            r.results = json!({
                "n": f.n(),
                "size": f.len(),
                "union_closed": w.is_none(),
                "witness": w.map(|(a, b)| json!([format::format_set(a), format::format_set(b)])),
            });
            Ok(Outcome::new(r))
        }
        FamilyCmd::Closure(a) => {
            let f = load(&a.file)?;
            let c = family::union_closure(&f);
            if let Some(out) = &a.out {
                write(out, &format::write_family(&c))?;
            }
            let mut r = RunReport::new("family closure");
            r.parameters = params(a);
            r.results = json!({ "n": c.n(), "size": c.len(), "members": family_json(&c) });
            Ok(Outcome::new(r))
        }
        FamilyCmd::Freq(a) => {
            let f = load(&a.file)?;
            let mut r = RunReport::new("family freq");
            r.parameters = params(a);
            r.results = serde_json::to_value(family::frequency_profile(&f)).expect("serializable");
            Ok(Outcome::new(r))
        }
        FamilyCmd::SelfUnion(a) => {
            let f = load(&a.file)?;
            let s = family::family_self_union(&f);
            let mut r = RunReport::new("family self-union");
            r.parameters = params(a);
            r.results = json!({
                "size": f.len(),
                "self_union_size": s.len(),
                "equals_input": s == f,
                "members": family_json(&s),
            });
            Ok(Outcome::new(r))
        }
        FamilyCmd::Enumerate(a) => {
            let all: Vec<SetFamily> = family::enumerate_union_closed(a.n)?.collect();
            let mut by_size = std::collections::BTreeMap::new();
            for f in &all {
                *by_size.entry(f.len()).or_insert(0u64) += 1;
            }
            let mut r = RunReport::new("family enumerate");
            r.parameters = params(a);
            r.results = json!({
                "count": all.len(),
                "by_size": by_size.iter().map(|(k, v)| json!([k, v])).collect::<Vec<_>>(),
                "families": a.list.then(|| all.iter().map(family_json).collect::<Vec<_>>()),
            });
            Ok(Outcome::new(r))
        }
        FamilyCmd::Random(a) => {
            let f = family::random_union_closed(a.n, a.k, a.seed)?;
            let mut r = RunReport::new("family random");
            r.parameters = params(a);
            r.seed = Some(a.seed);
            r.results = json!({
                "n": f.n(),
                "size": f.len(),
                "union_closed": family::is_union_closed(&f),
                "members": family_json(&f),
            });
            Ok(Outcome::new(r))
        }
        FamilyCmd::FranklBrute(a) => {
            let rep = frankl_brute(a.n)?;
            let mut r = RunReport::new("family frankl-brute");
            r.parameters = params(a);
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
        FamilyCmd::KlIdentity(a) => {
            let f = match (&a.file, a.n) {
                (Some(path), _) => load(path)?,
                (None, Some(n)) => family::random_union_closed(
                    n,
                    a.k.ok_or_else(|| Error::Usage("--k is required".into()))?,
                    a.seed.ok_or_else(|| Error::Usage("--seed is required".into()))?,
                )?,
                (None, None) => return Err(Error::Usage("give a family file or --n --k --seed".into())),
            };
            let rep = conjecture::kl_identity_check(&f)?;
            let mut r = RunReport::new("family kl-identity");
            r.parameters = params(a);
            r.seed = a.seed;
            r.results = serde_json::to_value(&rep).expect("serializable");
            let mut o = Outcome::new(r);
            o.verdict(&rep);
            Ok(o)
        }
    }
}

fn cmd_conjecture(cmd: &ConjectureCmd) -> Result<Outcome> {
    match cmd {
        ConjectureCmd::Gap(a) => {
            let d = with_file(&a.file, format::parse_distribution(&read(&a.file)?))?;
            let g = conjecture::conjecture1_gap(&d);
            let mut r = RunReport::new("conjecture1 gap");
            r.parameters = params(a);
            r.results = gap_json(&g);
            Ok(Outcome::new(r))
        }
        ConjectureCmd::Search(a) => {
            let res = conjecture::search_conjecture1(a.n, a.support, a.seed, a.iters, a.restarts)?;
            let mut r = RunReport::new("conjecture1 search");
            r.parameters = params(a);
            r.seed = Some(a.seed);
            r.results = json!({
                "best": gap_json(&res.best),
                "best_gap_per_bit": real(res.best.gap / res.best.h_a),
                "refutes_conjecture": res.refutes_conjecture,
                "best_restart": res.best_restart,
                "restart_gaps": res.restart_gaps.iter().map(|&x| real(x)).collect::<Vec<_>>(),
                "witness": format::write_distribution(&res.witness),
            });
            let mut o = Outcome::new(r);
            if res.refutes_conjecture {
                o.notes
                    .push(format!("negative gap {} found; witness in report", res.best.gap));
            }
            Ok(o)
        }
        ConjectureCmd::Section4 => {
            let s = conjecture::section4_counterexample();
            let mut r = RunReport::new("conjecture1 section4");
            r.results = json!({
                "h_f_xx": real(s.h_f_xx),
                "h_x": real(s.h_x),
                "h_x_given_c": real(s.h_x_given_c),
                "h_f_given_cc": real(s.h_f_given_cc),
            });
            Ok(Outcome::new(r))
        }
    }
}

/// Runs a parsed command line.
pub fn execute(cli: &Cli) -> Result<Outcome> {
    let run = || match &cli.command {
        Command::Entropy(a) => cmd_entropy(a),
        Command::Lemma(c) => cmd_lemma(c),
        Command::Dist(c) => cmd_dist(c),
        Command::Family(c) => cmd_family(c),
        Command::Conjecture1(c) => cmd_conjecture(c),
    };
    let start = Instant::now();
    let mut out = match cli.jobs {
        Some(j) => rayon::ThreadPoolBuilder::new()
            .num_threads(j)
            .build()
            .map_err(|e| Error::Usage(format!("--jobs: {e}")))?
            .install(run)?,
        None => run()?,
    };
    out.report.timing_ms = start.elapsed().as_millis() as u64;
    Ok(out)
}

/// What the binary prints and returns.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invocation {
    pub stdout: String,
    pub stderr: String,
    pub exit_code: i32,
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> Invocation
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => EXIT_OK,
                _ => EXIT_USAGE,
            };
            let text = e.render().to_string();
            return if code == EXIT_OK {
                Invocation {
                    stdout: text,
                    stderr: String::new(),
                    exit_code: code,
                }
            } else {
                Invocation {
                    stdout: String::new(),
                    stderr: text,
                    exit_code: code,
                }
            };
        }
    };
    match execute(&cli) {
        Ok(o) => Invocation {
            stdout: o.report.to_json() + "\n",
            stderr: o.notes.iter().map(|n| format!("{n}\n")).collect(),
            exit_code: o.exit_code,
        },
        Err(e) => Invocation {
            stdout: String::new(),
            stderr: format!("error: {e}\n"),
            exit_code: EXIT_USAGE,
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn results(args: &[&str]) -> (Value, i32) {
        let mut full = vec!["uclab"];
        full.extend_from_slice(args);
        let inv = run(full);
        let v = if inv.stdout.is_empty() {
            Value::Null
        } else {
            serde_json::from_str::<Value>(&inv.stdout).unwrap()["results"].clone()
        };
        (v, inv.exit_code)
    }

    #[test]
    fn entropy_command() {
        let (v, code) = results(&["entropy", "--h", "0.5", "--f", "0.1", "0.1", "--g", "0.2"]);
        assert_eq!(code, 0);
        assert_eq!(v[0]["value"], 1.0);
        assert_eq!(v[1]["display"], "1.49568880704");
        assert_eq!(v[2]["display"], "1.45007129070");
        let (_, code) = results(&["entropy", "--h", "1.5"]);
        assert_eq!(code, EXIT_USAGE);
        let (_, code) = results(&["entropy", "--g", "0"]);
        assert_eq!(code, EXIT_USAGE);
    }

    #[test]
    fn sig12_formatting() {
        assert_eq!(sig12(1.0), "1.00000000000");
        assert_eq!(sig12(0.4689955935892812), "0.468995593589");
        assert_eq!(sig12(0.0), "0");
    }

    #[test]
    fn usage_errors_exit_one() {
        assert_eq!(results(&["lemma", "minimize"]).1, EXIT_USAGE);
        assert_eq!(results(&["nonsense"]).1, EXIT_USAGE);
        assert_eq!(results(&["dist", "entropy"]).1, EXIT_USAGE);
        assert_eq!(results(&["family", "enumerate", "--n", "5"]).1, EXIT_USAGE);
    }

    #[test]
    fn example_closed_forms_match() {
        let (v, code) = results(&[
            "dist", "example", "--which", "3", "--n", "8", "--p", "0.01", "--q", "0.99",
        ]);
        assert_eq!(code, 0, "{v}");
        assert_eq!(v["passed"], true);
    }

    #[test]
    fn section4_command() {
        let (v, code) = results(&["conjecture1", "section4"]);
        assert_eq!(code, 0);
        assert!((v["h_x_given_c"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
}
