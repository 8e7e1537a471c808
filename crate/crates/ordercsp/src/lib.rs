//! Toolkit for approximating satisfiable and nearly satisfiable ordering CSPs.
//!
//! An *ordering CSP* asks for a total order of `n` variables maximizing the
//! number of satisfied constraints, where each constraint applies an ordering
//! predicate (a disjunction of chains `x_{i1} < … < x_{it}`) to a tuple of
//! variables. This crate implements an approximation pipeline built from:
//!
//! * [`perm`] — permutation arithmetic, patterns, up–down signatures, ranking;
//! * [`predicate`] — predicates as explicit Sat-sets, their L/R/ε relaxations,
//!   tractability tests, and canonical forms under variable renaming + duality;
//! * [`idu`] — exact pattern densities of I/D/U up-combinations via generating
//!   functions, the `p(φ′→φ, R)` objective, and permutation sampling;
//! * [`optimize`] — multi-start search for a good rounding permuton together
//!   with exact-rational certification of the achieved factor;
//! * [`solver`] — the end-to-end solve pipeline: relax, solve the tractable
//!   relaxation, apply the IDU rounding, optionally derandomize, evaluate;
//! * [`classify`] — a census of all non-isomorphic predicates of arity ≤ 4;
//! * [`flags`] — a small flag-algebra calculator modulo the signature ideal,
//!   used for the arity-3 upper-bound identities;
//! * [`cli`] — the `ordercsp` binary surface.
//!
//! The crate's primary interface is its `examples/` directory: each example is
//! a runnable walkthrough of one capability. The `ordercsp` binary exposes the
//! same operations as subcommands for scripting.
//!
//! Numeric policy: every certified quantity is computed with arbitrary
//! precision rationals; floating point appears only inside optimizer inner
//! loops and is converted back to rationals (continued-fraction rounding)
//! before anything is certified.

pub mod classify;
pub mod cli;
pub mod flags;
pub mod idu;
pub mod optimize;
pub mod perm;
pub mod predicate;
pub mod solver;

pub use idu::{IduCombination, Mixture};
pub use perm::{Perm, UdSignature};
pub use predicate::Predicate;
