//! End-to-end acceptance criteria. Each criterion prints one
//! `criterion N: PASS` or `criterion N: FAIL` line; the process exits nonzero
//! if any failed.

use std::panic;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde_json::Value;

use uclab::conjecture::{kl_identity_check, section4_counterexample};
use uclab::entropy::{conditional_entropy, entropy, fixed_point, h, map_condition, JointDistribution};
use uclab::family::{enumerate_by_closure, enumerate_by_filter, random_union_closed};
use uclab::lemma::{
    adversarial_minimize, figure1_grid, random_instance, scan_lemma_l1, scan_lemma_l2, verify_instance, Profile,
};
use uclab::subset::{
    check_theorem1, dist_entropy, example_closed_forms, gated_product, max_abs_difference, product_bernoulli,
    random_distribution, two_point, union_dense, union_distribution, union_sparse,
};

/// Prints the verdict line, then fails the test with the collected details.
fn verdict(n: u32, elapsed: Duration, budget: Duration, failures: Vec<String>) {
    let ok = failures.is_empty() && elapsed <= budget;
    println!(
        "criterion {n}: {} ({:.2}s of {:.0}s budget)",
        if ok { "PASS" } else { "FAIL" },
        elapsed.as_secs_f64(),
        budget.as_secs_f64()
    );
    assert!(failures.is_empty(), "criterion {n}: {failures:#?}");
    assert!(elapsed <= budget, "criterion {n}: took {elapsed:?}, budget {budget:?}");
}

fn expect(failures: &mut Vec<String>, ok: bool, what: impl FnOnce() -> String) {
    if !ok {
        failures.push(what());
    }
}

fn criterion_01_ratio_surface_minimum() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let g = figure1_grid(1e-3).unwrap();
    let rep = scan_lemma_l1(1e-3).unwrap();
    let refined = rep.get_f64("refined_min").unwrap();
    let argmin = rep.get("refined_argmin").unwrap().as_array().unwrap().clone();
    let (p, p2) = (argmin[0].as_f64().unwrap(), argmin[1].as_f64().unwrap());
    expect(&mut fails, (g.min.f - 1.496).abs() <= 1e-3, || {
        format!("grid min {}", g.min.f)
    });
    expect(&mut fails, (refined - 1.496).abs() <= 1e-3, || {
        format!("refined min {refined}")
    });
    expect(
        &mut fails,
        (g.min.p - 0.1).abs() <= 1e-3 && (g.min.p_prime - 0.1).abs() <= 1e-3,
        || format!("grid argmin ({}, {})", g.min.p, g.min.p_prime),
    );
    expect(&mut fails, (p - 0.1).abs() <= 1e-3 && (p2 - 0.1).abs() <= 1e-3, || {
        format!("refined argmin ({p}, {p2})")
    });
    verdict(1, start.elapsed(), Duration::from_secs(5), fails);
}

fn criterion_02_pairwise_ratio_bound() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let rep = scan_lemma_l1(1e-3).unwrap();
    let violations = rep.get("violations").and_then(Value::as_u64).unwrap();
    let chained = rep.get_f64("chained_min_margin").unwrap();
    let g = rep.get_f64("g_at_0_2").unwrap();
    expect(&mut fails, rep.passed, || "report not passed".into());
    expect(&mut fails, violations == 0, || {
        format!("{violations} violations of f >= 1.4")
    });
    expect(&mut fails, chained >= -1e-9, || {
        format!("chained bound margin {chained}")
    });
    expect(&mut fails, (g - 1.450).abs() <= 1e-3, || format!("g(0.2) = {g}"));
    verdict(2, start.elapsed(), Duration::from_secs(5), fails);
}

fn criterion_03_union_vs_scaled_entropy() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let rep = scan_lemma_l2(1e-3).unwrap();
    let points = rep.get("grid_points").and_then(Value::as_u64).unwrap();
    let min = rep.get_f64("min_margin").unwrap();
    let edge = rep.get_f64("edge_max_abs_margin").unwrap();
    expect(&mut fails, points >= 1_000_000, || format!("only {points} grid points"));
    expect(&mut fails, min >= -1e-12, || format!("min margin {min}"));
    expect(&mut fails, edge <= 1e-12, || format!("edge margin {edge}"));
    expect(&mut fails, rep.passed, || "report not passed".into());
    verdict(3, start.elapsed(), Duration::from_secs(5), fails);
}

fn criterion_04_randomized_instances() {
    let start = Instant::now();
    let total = 100_000u64;
    let bad: Vec<String> = (0..total)
        .into_par_iter()
        .filter_map(|seed| {
            let profile = Profile::ALL[(seed % 3) as usize];
            let size = 1 + (seed / 3 % 64) as usize;
            let inst = random_instance(size, 0.01, seed, profile).unwrap();
            let r = verify_instance(&inst, 1.26);
            let ok = r.hypothesis_ok
                && r.main_margin >= -1e-9
                && r.markov_margin >= -1e-9
                && r.small_pair_margin >= -1e-9
                && r.mixed_pair_margin >= -1e-9
                && r.decomposition_residual.abs() <= 1e-12
                && r.passed;
            (!ok).then(|| format!("seed {seed} {profile:?} size {size}: {r:?}"))
        })
        .collect();
    let fails = bad.into_iter().take(5).collect();
    verdict(4, start.elapsed(), Duration::from_secs(60), fails);
}

fn criterion_05_adversarial_minimum() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let single_point = h(0.0199) / h(0.01);
    for seed in [7u64, 11] {
        let r = adversarial_minimize(8, 0.01, seed, 10_000, 8).unwrap();
        expect(&mut fails, !r.critical && r.min_ratio >= 1.26, || {
            format!("seed {seed}: ratio {}", r.min_ratio)
        });
        expect(&mut fails, (r.min_ratio - single_point).abs() <= 0.02, || {
            format!("seed {seed}: ratio {} vs single point {single_point}", r.min_ratio)
        });
    }
    let r = adversarial_minimize(8, fixed_point(), 7, 10_000, 8).unwrap();
    expect(&mut fails, (r.min_ratio - 1.0).abs() <= 0.005, || {
        format!("fixed point ratio {}", r.min_ratio)
    });
    verdict(5, start.elapsed(), Duration::from_secs(120), fails);
}

fn criterion_06_generator_closed_forms() {
    let start = Instant::now();
    let mut fails = Vec::new();
    for n in [2usize, 6, 10] {
        for p in [0.01, 0.1] {
            let q = 0.99;
            let cases = [
                (1u8, product_bernoulli(n, p).unwrap()),
                (2, two_point(n, p).unwrap()),
                (3, gated_product(n, p, q).unwrap()),
            ];
            for (which, d) in cases {
                let cf = example_closed_forms(which, n, p, q).unwrap();
                let ha = dist_entropy(&d);
                let hu = dist_entropy(&union_distribution(&d));
                expect(&mut fails, (ha - cf.h_a).abs() <= 1e-9, || {
                    format!("gen {which} n {n} p {p}: H(A) {ha} vs {}", cf.h_a)
                });
                expect(&mut fails, (hu - cf.h_union).abs() <= 1e-9, || {
                    format!("gen {which} n {n} p {p}: H(A u B) {hu} vs {}", cf.h_union)
                });
                expect(&mut fails, hu >= cf.h_union_given_gates - 1e-9, || {
                    format!(
                        "gen {which} n {n} p {p}: H(A u B) {hu} below gate-conditioned {}",
                        cf.h_union_given_gates
                    )
                });
            }
        }
    }
    verdict(6, start.elapsed(), Duration::from_secs(5), fails);
}

fn criterion_07_union_bound_end_to_end() {
    let start = Instant::now();
    let bad: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=10usize);
            let d = if seed % 2 == 0 {
                let support = rng.gen_range(1..=64usize);
                random_distribution(n, support, Some(0.01), seed).unwrap()
            } else {
                match seed % 6 {
                    1 => product_bernoulli(n, rng.gen_range(0.0..=0.01)).unwrap(),
                    3 => two_point(n, rng.gen_range(0.0..=0.01)).unwrap(),
                    _ => gated_product(n.max(2), rng.gen_range(0.0..=0.01), rng.gen_range(0.0..=1.0)).unwrap(),
                }
            };
            let rep = check_theorem1(&d, 1.26, 0.01);
            if !(rep.hypothesis_ok && rep.passed) {
                return Some(format!("seed {seed}: {}", serde_json::to_string(&rep).unwrap()));
            }
            let gap = max_abs_difference(&union_dense(&d), &union_sparse(&d));
            (gap > 1e-12).then(|| format!("seed {seed}: dense vs sparse differ by {gap}"))
        })
        .collect();
    let fails = bad.into_iter().take(5).collect();
    verdict(7, start.elapsed(), Duration::from_secs(120), fails);
}

fn criterion_08_exhaustive_families() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let mut overall_min = f64::INFINITY;
    for n in 1..=4 {
        let a = enumerate_by_filter(n).unwrap();
        let b = enumerate_by_closure(n).unwrap();
        expect(&mut fails, a == b, || {
            format!("n = {n}: strategies disagree ({} vs {})", a.len(), b.len())
        });
        let rep = uclab::cli::frankl_brute(n).unwrap();
        let min = rep.get_f64("min_max_fraction").unwrap();
        overall_min = overall_min.min(min);
        expect(&mut fails, rep.passed && min >= 0.01, || {
            format!("n = {n}: min max frequency {min}")
        });
    }
    println!("  (smallest max element frequency over n <= 4: {overall_min})");
    verdict(8, start.elapsed(), Duration::from_secs(60), fails);
}

fn criterion_09_uniform_family_identity() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let enumerated: Vec<_> = (1..=4).flat_map(|n| enumerate_by_closure(n).unwrap()).collect();
    let bad: Vec<String> = enumerated
        .par_iter()
        .filter_map(|f| {
            let rep = kl_identity_check(f).unwrap();
            let r = rep.get_f64("residual").unwrap();
            (r.abs() > 1e-9 || !rep.passed).then(|| format!("{f:?}: residual {r}"))
        })
        .collect();
    fails.extend(bad.into_iter().take(5));
    let bad: Vec<String> = (0..1000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let n = rng.gen_range(1..=10usize);
            let k = rng.gen_range(1..=6usize);
            let f = random_union_closed(n, k, seed).unwrap();
            let rep = kl_identity_check(&f).unwrap();
            let r = rep.get_f64("residual").unwrap();
            (r.abs() > 1e-9 || !rep.passed).then(|| format!("seed {seed}: residual {r}"))
        })
        .collect();
    fails.extend(bad.into_iter().take(5));
    verdict(9, start.elapsed(), Duration::from_secs(30), fails);
}

fn criterion_10_mod2_construction() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let s = section4_counterexample();
    for (name, got, want) in [
        ("H(f(X,X'))", s.h_f_xx, 2.0),
        ("H(X)", s.h_x, 2.0),
        ("H(X|C)", s.h_x_given_c, 1.0),
        ("H(f(X,X')|C,C')", s.h_f_given_cc, 0.0),
    ] {
        expect(&mut fails, (got - want).abs() <= 1e-12, || {
            format!("{name} = {got}, want {want}")
        });
    }
    verdict(10, start.elapsed(), Duration::from_secs(1), fails);
}

fn criterion_11_conditioning_properties() {
    let start = Instant::now();
    let bad: Vec<String> = (0..10_000u64)
        .into_par_iter()
        .filter_map(|seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let nx = rng.gen_range(1..=6u32);
            let ny = rng.gen_range(1..=8u32);
            let entries: Vec<(u32, u32, f64)> = (0..nx)
                .flat_map(|x| (0..ny).map(move |y| (x, y)))
                .map(|(x, y)| (x, y, if rng.gen_bool(0.2) { 0.0 } else { rng.gen::<f64>() }))
                .collect();
            let j = JointDistribution::new(entries).ok()?;
            let buckets = rng.gen_range(1..=ny);
            let coarse: Vec<u32> = (0..ny).map(|_| rng.gen_range(0..buckets)).collect();
            let fine = conditional_entropy(&j);
            let coarser = conditional_entropy(&map_condition(&j, |y| coarse[*y as usize]));
            let chain = entropy(&j.marginal_y()) + fine - j.joint_entropy();
            if fine > coarser + 1e-12 {
                Some(format!("seed {seed}: H(X|Y) {fine} > H(X|f(Y)) {coarser}"))
            } else if chain.abs() > 1e-9 {
                Some(format!("seed {seed}: chain rule residual {chain}"))
            } else {
                None
            }
        })
        .collect();
    let fails = bad.into_iter().take(5).collect();
    verdict(11, start.elapsed(), Duration::from_secs(30), fails);
}

/// Exit code and stdout with the timing line removed.
fn run_cli(args: &[&str], jobs: &str) -> (i32, String) {
    let out = Command::new(env!("CARGO_BIN_EXE_uclab"))
        .args(args)
        .env("UCLAB_JOBS", jobs)
        .output()
        .expect("binary runs");
    let text = String::from_utf8(out.stdout).expect("utf-8 report");
    let kept: Vec<&str> = text
        .lines()
        .filter(|l| !l.trim_start().starts_with("\"timing_ms\""))
        .collect();
    (out.status.code().unwrap_or(-1), kept.join("\n"))
}

fn criterion_12_seeded_determinism() {
    let start = Instant::now();
    let mut fails = Vec::new();
    let commands: [&[&str]; 6] = [
        &["lemma", "minimize", "--seed", "7", "--iters", "2000"],
        &[
            "lemma",
            "minimize",
            "--fixed-point",
            "--seed",
            "3",
            "--iters",
            "1000",
            "--size",
            "5",
        ],
        &["family", "random", "--n", "8", "--k", "4", "--seed", "42"],
        &["family", "kl-identity", "--n", "7", "--k", "3", "--seed", "9"],
        &["conjecture1", "search", "--seed", "1", "--iters", "500"],
        &[
            "conjecture1",
            "search",
            "--n",
            "4",
            "--support",
            "12",
            "--seed",
            "5",
            "--iters",
            "300",
            "--restarts",
            "3",
        ],
    ];
    for args in commands {
        let (c1, first) = run_cli(args, "4");
        let (c2, second) = run_cli(args, "4");
        let (c3, single) = run_cli(args, "1");
        let parsed: Option<Value> = serde_json::from_str(&first).ok();
        expect(&mut fails, parsed.is_some() && c1 == 0, || {
            format!("{args:?}: exit {c1}")
        });
        expect(&mut fails, c1 == c2 && first == second, || {
            format!("{args:?}: two runs differ")
        });
        expect(&mut fails, c1 == c3 && first == single, || {
            format!("{args:?}: --jobs 1 differs from --jobs 4")
        });
    }
    verdict(12, start.elapsed(), Duration::from_secs(120), fails);
}

fn main() -> ExitCode {
    let criteria: [fn(); 12] = [
        criterion_01_ratio_surface_minimum,
        criterion_02_pairwise_ratio_bound,
        criterion_03_union_vs_scaled_entropy,
        criterion_04_randomized_instances,
        criterion_05_adversarial_minimum,
        criterion_06_generator_closed_forms,
        criterion_07_union_bound_end_to_end,
        criterion_08_exhaustive_families,
        criterion_09_uniform_family_identity,
        criterion_10_mod2_construction,
        criterion_11_conditioning_properties,
        criterion_12_seeded_determinism,
    ];
    let failed = criteria.iter().filter(|c| panic::catch_unwind(**c).is_err()).count();
    println!("{} of {} criteria passed", criteria.len() - failed, criteria.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
