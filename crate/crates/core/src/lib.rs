//! Strong call-by-value normalization of λ-terms, two ways.
//!
//! The crate contains a reference interpreter for the value substitution
//! calculus (VSC) running the external strategy, a crumbling compiler from
//! pure λ-terms to environments of explicit substitutions over bites, and
//! the strong crumbling abstract machine (SCAM) evaluating those
//! environments with useful and implosive sharing. Benchmark families and
//! a random term generator round out the toolkit; the two evaluators are
//! meant to be cross-checked against each other.

pub mod crumble;
pub mod families;
pub mod gen;
pub mod machine;
pub mod syntax;
pub mod vsc;
