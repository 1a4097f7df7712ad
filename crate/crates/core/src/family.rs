//! Finite set families over `[n]`: union-closedness, closure, element
//! frequencies and enumeration of all union-closed families for small `n`.

use std::collections::{BTreeSet, HashSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::subset::{check_n, full_bits, make_distribution, SubsetDistribution, SubsetMask};

/// Largest `n` for exhaustive enumeration.
pub const MAX_ENUMERATION_N: usize = 4;
/// Largest `n` for random closures.
pub const MAX_RANDOM_N: usize = 20;

/// A nonempty family of distinct subsets of `[n]`, sorted by mask value.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize)]
pub struct SetFamily {
    n: usize,
    members: Vec<SubsetMask>,
}

impl SetFamily {
    /// Sorts and deduplicates `members`.
    pub fn new(n: usize, members: impl IntoIterator<Item = SubsetMask>) -> Result<Self> {
        check_n(n)?;
        let mut v: Vec<SubsetMask> = members.into_iter().collect();
        for m in &v {
            if m.bits() >> n != 0 {
                return Err(Error::Domain(format!("mask {:#b} has bits beyond n = {n}", m.bits())));
            }
        }
        v.sort_unstable();
        v.dedup();
        if v.is_empty() {
            return Err(Error::Domain("a set family needs at least one member".into()));
        }
        Ok(SetFamily { n, members: v })
    }

    /// Every subset of `[n]`.
    pub fn power_set(n: usize) -> Result<Self> {
        check_n(n)?;
        Ok(SetFamily {
            n,
            members: (0..=full_bits(n)).map(SubsetMask::raw).collect(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn members(&self) -> &[SubsetMask] {
        &self.members
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn contains(&self, m: SubsetMask) -> bool {
        self.members.binary_search(&m).is_ok()
    }

    /// True for the family `{∅}`.
    pub fn is_empty_set_only(&self) -> bool {
        self.members == [SubsetMask::EMPTY]
    }
}

/// `Some((A, B))` with `A ∪ B ∉ F` for the first such pair in member order,
/// `None` when `F` is union-closed.
pub fn union_closed_witness(f: &SetFamily) -> Option<(SubsetMask, SubsetMask)> {
    for (i, &a) in f.members.iter().enumerate() {
        for &b in &f.members[i + 1..] {
            if !f.contains(a.union(b)) {
                return Some((a, b));
            }
        }
    }
    None
}

pub fn is_union_closed(f: &SetFamily) -> bool {
    union_closed_witness(f).is_none()
}

/// Smallest union-closed family containing `generators`.
///
/// Worklist of new members, each joined with everything seen so far, with a
/// membership bitset over `2^n`.
pub fn union_closure(generators: &SetFamily) -> SetFamily {
    let n = generators.n;
    let mut seen = vec![0u64; (1usize << n).div_ceil(64)];
    let mut members: Vec<SubsetMask> = Vec::new();
    let mut insert = |m: SubsetMask, members: &mut Vec<SubsetMask>| {
        let i = m.bits() as usize;
        if seen[i / 64] >> (i % 64) & 1 == 0 {
            seen[i / 64] |= 1 << (i % 64);
            members.push(m);
            true
        } else {
            false
        }
    };
    for &g in &generators.members {
        insert(g, &mut members);
    }
    let mut next = 0;
    while next < members.len() {
        let x = members[next];
        let mut j = 0;
        while j < members.len() {
            let u = x.union(members[j]);
            insert(u, &mut members);
            j += 1;
        }
        next += 1;
    }
    SetFamily::new(n, members).expect("closure of a nonempty family")
}

/// `F ∪ F = {A ∪ B : A, B ∈ F}`.
pub fn family_self_union(f: &SetFamily) -> SetFamily {
    let mut out = BTreeSet::new();
    for (i, &a) in f.members.iter().enumerate() {
        for &b in &f.members[i..] {
            out.insert(a.union(b));
        }
    }
    SetFamily::new(f.n, out).expect("superset of a nonempty family")
}

/// Per-element occurrence counts over the members of a family.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FrequencyProfile {
    pub family_size: usize,
    pub counts: Vec<usize>,
    pub fractions: Vec<f64>,
    /// 1-based element attaining `max_fraction`; the smallest such index.
    pub argmax: usize,
    pub max_fraction: f64,
}

/// Counts include every member, `∅` included.
pub fn frequency_profile(f: &SetFamily) -> FrequencyProfile {
    let mut counts = vec![0usize; f.n];
    for m in &f.members {
        for (b, c) in counts.iter_mut().enumerate() {
            if m.bits() >> b & 1 == 1 {
                *c += 1;
            }
        }
    }
    let size = f.members.len();
    let fractions: Vec<f64> = counts.iter().map(|&c| c as f64 / size as f64).collect();
    let mut argmax = 0;
    for (i, &x) in fractions.iter().enumerate() {
        if x > fractions[argmax] {
            argmax = i;
        }
    }
    FrequencyProfile {
        family_size: size,
        max_fraction: fractions[argmax],
        argmax: argmax + 1,
        counts,
        fractions,
    }
}

fn check_enumeration_n(n: usize) -> Result<()> {
    check_n(n)?;
    if n > MAX_ENUMERATION_N {
        return Err(Error::Capability(format!(
            "exhaustive enumeration supports n <= {MAX_ENUMERATION_N}; use random_union_closed for n = {n}"
        )));
    }
    Ok(())
}

// For n <= 4 a family is a bitset over the 2^n <= 16 masks.
type Packed = u32;

fn unpack(n: usize, bits: Packed) -> SetFamily {
    let members = (0..1u32 << n)
        .filter(|s| bits >> s & 1 == 1)
        .map(SubsetMask::raw)
        .collect::<Vec<_>>();
    SetFamily { n, members }
}

fn packed_closed(bits: Packed, masks: u32) -> bool {
    for a in 0..masks {
        if bits >> a & 1 == 0 {
            continue;
        }
        for b in a + 1..masks {
            if bits >> b & 1 == 1 && bits >> (a | b) & 1 == 0 {
                return false;
            }
        }
    }
    true
}

fn packed_close(mut bits: Packed, masks: u32) -> Packed {
    loop {
        let mut grown = bits;
        for a in 0..masks {
            if grown >> a & 1 == 0 {
                continue;
            }
            for b in a + 1..masks {
                if grown >> b & 1 == 1 {
                    grown |= 1 << (a | b);
                }
            }
        }
        if grown == bits {
            return bits;
        }
        bits = grown;
    }
}

/// Ascending by `(|F|, member list)`.
fn canonical_sort(v: &mut [SetFamily]) {
    v.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.members.cmp(&b.members)));
}

/// Every nonempty union-closed family over `[n]` by testing all `2^(2^n) - 1`
/// nonempty families.
pub fn enumerate_by_filter(n: usize) -> Result<Vec<SetFamily>> {
    check_enumeration_n(n)?;
    let masks = 1u32 << n;
    let all: u64 = 1u64 << masks;
    let mut out: Vec<SetFamily> = (1..all)
        .map(|b| b as Packed)
        .filter(|&b| packed_closed(b, masks))
        .map(|b| unpack(n, b))
        .collect();
    canonical_sort(&mut out);
    Ok(out)
}

/// Every nonempty union-closed family over `[n]` by search: start from each
/// single set and repeatedly add one set and close under unions. Every
/// union-closed `F` is reached by adding its members one at a time.
pub fn enumerate_by_closure(n: usize) -> Result<Vec<SetFamily>> {
    check_enumeration_n(n)?;
    let masks = 1u32 << n;
    let mut seen: HashSet<Packed> = HashSet::new();
    let mut frontier: Vec<Packed> = (0..masks).map(|s| 1 << s).collect();
    seen.extend(frontier.iter().copied());
    while let Some(f) = frontier.pop() {
        for s in 0..masks {
            if f >> s & 1 == 0 {
                let g = packed_close(f | 1 << s, masks);
                if seen.insert(g) {
                    frontier.push(g);
                }
            }
        }
    }
    let mut out: Vec<SetFamily> = seen.into_iter().map(|b| unpack(n, b)).collect();
    canonical_sort(&mut out);
    Ok(out)
}

/// Every nonempty union-closed family over `[n]`, `n ≤ 4`, in canonical order.
pub fn enumerate_union_closed(n: usize) -> Result<impl Iterator<Item = SetFamily>> {
    Ok(enumerate_by_closure(n)?.into_iter())
}

/// Union closure of `k` uniformly random nonempty subsets of `[n]`.
pub fn random_union_closed(n: usize, k: usize, seed: u64) -> Result<SetFamily> {
    check_n(n)?;
    if n > MAX_RANDOM_N {
        return Err(Error::Capability(format!(
            "random closures support n <= {MAX_RANDOM_N}"
        )));
    }
    if k == 0 {
        return Err(Error::Domain("need at least one generator".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gens: Vec<SubsetMask> = (0..k)
        .map(|_| SubsetMask::raw(rng.gen_range(1..=full_bits(n))))
        .collect();
    Ok(union_closure(&SetFamily::new(n, gens)?))
}

/// Uniform distribution over the members of `F`.
pub fn uniform_distribution(f: &SetFamily) -> SubsetDistribution {
    make_distribution(f.n, f.members.iter().map(|&m| (m, 1.0))).expect("nonempty family")
}
