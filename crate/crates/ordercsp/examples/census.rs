//! A census of all non-isomorphic ordering predicates of arity 3.
//!
//! Predicates are grouped into classes under variable renaming and duality
//! (reversing the order). For each class the census records tractability
//! (closure under Not-First or Not-Last atoms), the precedence property, and
//! whether the L/R/ε relaxations are nontrivial — i.e. different from the
//! predicate and not always true, so that the approximation pipeline has
//! something to work with.
//!
//! Arity 4 (355 046 classes) runs the same code; pass `--arity 4` to the
//! `ordercsp classify` subcommand with `--threads` for that.
//!
//! Run with: `cargo run --example census`

use ordercsp::classify::census;

fn main() -> anyhow::Result<()> {
    let c = census(3)?;
    println!(
        "{:<10} {:>4} {:>9} {:>10} {:>6} {:>6} {:>6}",
        "canon", "|Sat|", "tractable", "precedence", "L", "R", "eps"
    );
    for row in &c.rows {
        println!(
            "{:<10} {:>4} {:>9} {:>10} {:>6} {:>6} {:>6}",
            format!("{:#x}", row.canon),
            row.predicate().sat_size(),
            row.tractable,
            row.precedence,
            row.nontrivial_l,
            row.nontrivial_r,
            row.nontrivial_eps,
        );
    }
    let s = c.summary();
    println!("\nclasses            : {}", s.classes);
    println!("tractable          : {}", s.tractable);
    println!("precedence         : {}", s.precedence);
    println!("nontrivial L or R  : {} (among non-tractable classes)", s.nontrivial_l_or_r);
    println!("nontrivial eps     : {}", s.nontrivial_eps);
    println!("orbit total        : {} (= 2^6 - 2)", c.orbit_total);
    Ok(())
}
