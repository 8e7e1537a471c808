//! Exact pattern densities in IDU up-combinations.
//!
//! A rounding scheme is described by a combination of I (increasing), D
//! (decreasing), and U (uniformly shuffled) bands with rational weights, or a
//! mixture of such combinations. The density of a pattern — the probability
//! that a fixed tuple of positions shows that pattern after rounding — is a
//! polynomial in the band weights and is computed exactly with big rationals.
//!
//! Run with: `cargo run --example pattern_densities`

use num::BigRational;
use ordercsp::idu::{self, IduCombination, Scalar};
use ordercsp::{Mixture, Perm};

fn main() -> anyhow::Result<()> {
    // Half increasing, half decreasing: the classic Betweenness rounding.
    let combo: IduCombination<BigRational> = "1/2 I + 1/2 D".parse()?;
    let mixture: Mixture<BigRational> = combo.clone().into();

    println!("combination: {combo}\n");
    println!("arity-3 densities:");
    let mut total = BigRational::from_integer(0.into());
    for rho in Perm::enumerate(3)? {
        let d = idu::density(&rho, &combo);
        println!("  d({rho}) = {d}  (~{:.4})", d.to_f64());
        total += d;
    }
    println!("  sum = {total}\n");

    // Densities depend only on the up-down signature of the inverse pattern,
    // so the full profile has 2^(k-1) entries, not k!.
    println!("signature profile (k = 4):");
    for (sig, d) in idu::signature_profile(4, &mixture).iter() {
        println!("  {sig}: {d}  (~{:.4})", d.to_f64());
    }
    println!();

    // A uniform band recovers the uniform measure: every arity-2 pattern has
    // density 1/2.
    let uniform: IduCombination<BigRational> = "1 U".parse()?;
    for rho in Perm::enumerate(2)? {
        println!("d({rho}, all-U) = {}", idu::density(&rho, &uniform));
    }
    Ok(())
}
