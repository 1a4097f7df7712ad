//! Line-oriented text formats.
//!
//! Sets are written as comma-separated 1-based element indices, with `-` for
//! the empty set. `#` starts a comment anywhere on a line.
//!
//! ```text
//! # distribution: header, then `<set> <mass>` per line
//! n=3
//! -      0.5
//! 1,3    0.25
//! 2      0.25
//! ```
//!
//! Families use the same set syntax, one set per line, with an optional
//! `n=<int>` header (otherwise `n` is the largest index seen). Lemma instances
//! are one `q p` pair per line.

use std::fmt::Write as _;

use crate::error::{parse_err, Error, Result};
use crate::family::SetFamily;
use crate::lemma::{Figure1Grid, LemmaInstance};
use crate::subset::{make_distribution, SubsetDistribution, SubsetMask, MAX_N};

pub fn format_set(m: SubsetMask) -> String {
    if m.is_empty() {
        return "-".into();
    }
    m.elements().iter().map(|e| e.to_string()).collect::<Vec<_>>().join(",")
}

fn strip_comment(line: &str) -> &str {
    line.split('#').next().unwrap_or("").trim()
}

fn parse_elements(tok: &str, line: usize) -> Result<Vec<usize>> {
    if tok == "-" {
        return Ok(Vec::new());
    }
    tok.split(',')
        .map(|s| {
            let e: usize = s
                .trim()
                .parse()
                .map_err(|_| parse_err(line, format!("bad element index {s:?}")))?;
            if e == 0 || e > MAX_N {
                return Err(parse_err(line, format!("element {e} outside [1, {MAX_N}]")));
            }
            Ok(e)
        })
        .collect()
}

fn parse_header(body: &str, line: usize) -> Result<Option<usize>> {
    let Some(rest) = body.strip_prefix("n=") else {
        return Ok(None);
    };
    let n: usize = rest
        .trim()
        .parse()
        .map_err(|_| parse_err(line, format!("bad header {body:?}")))?;
    if n == 0 || n > MAX_N {
        return Err(parse_err(line, format!("n = {n} outside [1, {MAX_N}]")));
    }
    Ok(Some(n))
}

fn to_mask(elements: &[usize], n: usize, line: usize) -> Result<SubsetMask> {
    SubsetMask::from_elements(elements, n).map_err(|e| parse_err(line, e.to_string()))
}

/// Parses the distribution format. Masses need not be normalized; the
/// normalization residual is kept on the result.
pub fn parse_distribution(text: &str) -> Result<SubsetDistribution> {
    let mut n = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        if n.is_none() {
            n = Some(parse_header(body, line)?.ok_or_else(|| parse_err(line, "expected header n=<int>"))?);
            continue;
        }
        let mut toks = body.split_whitespace();
        let (Some(set), Some(mass), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(parse_err(line, "expected `<set> <mass>`"));
        };
        let mass: f64 = mass
            .parse()
            .map_err(|_| parse_err(line, format!("bad mass {mass:?}")))?;
        if !mass.is_finite() || mass < 0.0 {
            return Err(parse_err(line, format!("mass {mass} must be finite and nonnegative")));
        }
        rows.push((parse_elements(set, line)?, mass, line));
    }
    let n = n.ok_or_else(|| parse_err(1, "missing header n=<int>"))?;
    let mut pairs = Vec::with_capacity(rows.len());
    for (elems, mass, line) in rows {
        pairs.push((to_mask(&elems, n, line)?, mass));
    }
    if pairs.is_empty() {
        return Err(parse_err(1, "no entries"));
    }
    make_distribution(n, pairs).map_err(|e| match e {
        Error::Domain(m) => parse_err(1, m),
        other => other,
    })
}

pub fn write_distribution(d: &SubsetDistribution) -> String {
    let mut out = format!("n={}\n", d.n());
    for (m, w) in d.support() {
        let _ = writeln!(out, "{} {w:?}", format_set(m));
    }
    out
}

pub fn parse_family(text: &str) -> Result<SetFamily> {
    let mut n = None;
    let mut rows = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        if rows.is_empty() && n.is_none() {
            if let Some(h) = parse_header(body, line)? {
                n = Some(h);
                continue;
            }
        }
        if body.split_whitespace().count() != 1 {
            return Err(parse_err(line, "expected one set per line"));
        }
        rows.push((parse_elements(body, line)?, line));
    }
    if rows.is_empty() {
        return Err(parse_err(1, "no sets"));
    }
    let n = match n {
        Some(n) => n,
        None => rows.iter().flat_map(|r| r.0.iter().copied()).max().unwrap_or(1).max(1),
    };
    let mut members = Vec::with_capacity(rows.len());
    for (elems, line) in rows {
        members.push(to_mask(&elems, n, line)?);
    }
    SetFamily::new(n, members)
}

pub fn write_family(f: &SetFamily) -> String {
    let mut out = format!("n={}\n", f.n());
    for &m in f.members() {
        out.push_str(&format_set(m));
        out.push('\n');
    }
    out
}

pub fn parse_instance(text: &str, mu: f64, threshold: f64) -> Result<LemmaInstance> {
    let mut entries = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let body = strip_comment(raw);
        if body.is_empty() {
            continue;
        }
        let mut toks = body.split_whitespace();
        let (Some(q), Some(p), None) = (toks.next(), toks.next(), toks.next()) else {
            return Err(parse_err(line, "expected `q p`"));
        };
        let q: f64 = q.parse().map_err(|_| parse_err(line, format!("bad weight {q:?}")))?;
        let p: f64 = p
            .parse()
            .map_err(|_| parse_err(line, format!("bad probability {p:?}")))?;
        if !q.is_finite() || q < 0.0 {
            return Err(parse_err(line, format!("weight {q} must be finite and nonnegative")));
        }
        if !(0.0..=1.0).contains(&p) {
            return Err(parse_err(line, format!("probability {p} outside [0, 1]")));
        }
        entries.push((q, p));
    }
    if entries.is_empty() {
        return Err(parse_err(1, "no entries"));
    }
    LemmaInstance::with_params(entries, mu, threshold).map_err(|e| parse_err(1, e.to_string()))
}

pub fn write_instance(inst: &LemmaInstance) -> String {
    let mut out = String::new();
    for &(q, p) in inst.entries() {
        let _ = writeln!(out, "{q:?} {p:?}");
    }
    out
}

/// CSV with header `p,p_prime,f`, LF endings, and a trailing `#` line naming
/// the minimum.
pub fn write_figure1_csv(g: &Figure1Grid) -> String {
    let mut out = String::from("p,p_prime,f\n");
    for r in &g.rows {
        let _ = writeln!(out, "{},{},{}", r.p, r.p_prime, r.f);
    }
    let _ = writeln!(out, "# min f={} at p={},p_prime={}", g.min.f, g.min.p, g.min.p_prime);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn parses_distribution() {
        let d = parse_distribution("# example\nn=3\n- 2\n1,3 1 # comment\n2 1\n").unwrap();
        assert_eq!(d.n(), 3);
        assert_eq!(d.mass(SubsetMask::EMPTY), 0.5);
        assert_eq!(d.mass(SubsetMask::from_elements(&[1, 3], 3).unwrap()), 0.25);
        assert!((d.residual() - 3.0).abs() < 1e-15);
    }

    #[test]
    fn distribution_errors_carry_line_numbers() {
        let cases = [
            ("1 0.5\n", 1),
            ("n=2\n1 0.5\n3 0.5\n", 3),
            ("n=2\n1 abc\n", 2),
            ("n=2\n\n1,x 0.5\n", 3),
            ("n=2\n1 0.5 7\n", 2),
            ("n=2\n1 -0.5\n", 2),
        ];
        for (text, line) in cases {
            match parse_distribution(text) {
                Err(Error::Parse { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }

    #[test]
    fn parses_family_with_and_without_header() {
        let f = parse_family("1\n2\n1,2\n").unwrap();
        assert_eq!(f.n(), 2);
        assert_eq!(f.len(), 3);
        let f = parse_family("n=5\n-\n3\n").unwrap();
        assert_eq!(f.n(), 5);
        assert!(f.contains(SubsetMask::EMPTY));
        let f = parse_family("-\n").unwrap();
        assert_eq!(f.n(), 1);
        assert!(matches!(parse_family("1 2\n"), Err(Error::Parse { line: 1, .. })));
    }

    #[test]
    fn parses_instance() {
        let inst = parse_instance("0.99 0\n0.01 0.99 # spike\n", 0.01, 0.1).unwrap();
        assert_eq!(inst.len(), 2);
        assert!(matches!(
            parse_instance("0.5 1.5\n", 0.01, 0.1),
            Err(Error::Parse { line: 1, .. })
        ));
        assert!(matches!(
            parse_instance("1\n", 0.01, 0.1),
            Err(Error::Parse { line: 1, .. })
        ));
    }

    #[test]
    fn figure_csv_layout() {
        let g = crate::lemma::figure1_grid(0.05).unwrap();
        let csv = write_figure1_csv(&g);
        assert!(csv.starts_with("p,p_prime,f\n0,0.05,2\n"));
        assert!(!csv.contains('\r'));
        assert_eq!(csv.lines().count(), 1 + 8 + 1);
    }

    proptest! {
        #[test]
        fn distribution_text_roundtrip(
            n in 1usize..8,
            entries in prop::collection::vec((any::<u32>(), 1u32..1000), 1..20),
        ) {
            let pairs: Vec<(SubsetMask, f64)> = entries
                .iter()
                .map(|&(m, w)| (SubsetMask::new(m & ((1 << n) - 1), n).unwrap(), w as f64))
                .collect();
            let d = make_distribution(n, pairs).unwrap();
            let back = parse_distribution(&write_distribution(&d)).unwrap();
            prop_assert_eq!(back.support().len(), d.support().len());
            for ((a, x), (b, y)) in back.support().iter().zip(d.support().iter()) {
                prop_assert_eq!(a, b);
                prop_assert!((x - y).abs() < 1e-15);
            }
        }

        #[test]
        fn family_text_roundtrip(n in 1usize..8, masks in prop::collection::vec(any::<u32>(), 1..30)) {
            let f = SetFamily::new(n, masks.iter().map(|m| SubsetMask::new(m & ((1 << n) - 1), n).unwrap())).unwrap();
            prop_assert_eq!(parse_family(&write_family(&f)).unwrap(), f);
        }
    }
}
