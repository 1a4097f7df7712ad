//! Entropy of unions of random sets, and the union-closed sets problem.
//!
//! For independent samples `A, B` from a distribution over subsets of `[n]`
//! with every marginal `Pr[i ∈ A] ≤ 0.01`, `H(A ∪ B) ≥ 1.26 · H(A)`. If `A`
//! were uniform over a union-closed family `F` then `A ∪ B` would also live
//! on `F`, so `H(A ∪ B) ≤ H(A)`; hence some element lies in at least 1% of
//! the sets of every union-closed `F ≠ {∅}`.
//!
//! This crate computes every quantity in that argument exactly (up to
//! floating point) and checks each inequality numerically:
//!
//! - [`entropy`]: binary entropy, Shannon entropy, KL divergence, conditional
//!   entropy over generic joint tables.
//! - [`subset`]: distributions over subsets, the union law via subset-lattice
//!   transforms, and the bit-by-bit chain rule.
//! - [`family`]: union-closed families, closures, frequencies, and exhaustive
//!   enumeration for `n ≤ 4`.
//! - [`lemma`]: the per-bit inequality, its `C₀ / C₁` decomposition, grid
//!   scans, and adversarial search.
//! - [`conjecture`]: the KL-augmented gap and a seeded search harness.
//! - [`cli`]: the `uclab` command line.
//!
//! ```
//! use uclab::subset::{product_bernoulli, union_distribution, dist_entropy};
//!
//! let a = product_bernoulli(6, 0.01).unwrap();
//! let ab = union_distribution(&a);
//! assert!(dist_entropy(&ab) >= 1.26 * dist_entropy(&a));
//! ```
//!
//! The guide under `book/` walks through each piece; its code listings are
//! compiled and run as doctests of this crate.

pub mod cli;
pub mod conjecture;
pub mod entropy;
pub mod error;
pub mod family;
pub mod format;
pub mod lemma;
pub mod report;
pub mod subset;

pub use error::{Error, Result};

// `cargo test --doc` runs the listings of every guide chapter.
#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/entropy.md")]
    mod entropy {}
    #[doc = include_str!("../../../book/src/union.md")]
    mod union {}
    #[doc = include_str!("../../../book/src/families.md")]
    mod families {}
    #[doc = include_str!("../../../book/src/lemma.md")]
    mod lemma {}
    #[doc = include_str!("../../../book/src/conjecture.md")]
    mod conjecture {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
