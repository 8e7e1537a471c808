//! Canonical relaxations of ordering predicates.
//!
//! Every predicate φ has three canonical relaxations: φ_L keeps the
//! Not-First atoms implied by φ, φ_R keeps the Not-Last atoms, and φ_ε keeps
//! the implied binary precedences. Each is tractable to solve exactly, which
//! is what makes them useful as the first stage of the approximation
//! pipeline. This example prints all three for the Betweenness predicate and
//! for a custom predicate given by its satisfying patterns.
//!
//! Run with: `cargo run --example relaxations`

use ordercsp::{Perm, Predicate};

fn show(name: &str, phi: &Predicate) -> anyhow::Result<()> {
    let members = |p: &Predicate| {
        p.members()
            .iter()
            .map(|m| m.to_string())
            .collect::<Vec<_>>()
            .join(", ")
    };
    println!("{name} (arity {}): {{{}}}", phi.arity(), members(phi));
    println!("  tractable : {}", phi.is_tractable()?);
    println!("  precedence: {}", phi.is_precedence()?);
    for (kind, rel) in [
        ("L  ", phi.l_relaxation()?),
        ("R  ", phi.r_relaxation()?),
        ("eps", phi.eps_relaxation()?),
    ] {
        let note = if rel == *phi {
            "  <- equals phi (trivial)"
        } else if rel.is_always_true() {
            "  <- always true (trivial)"
        } else {
            ""
        };
        println!("  phi_{kind}: {{{}}}{note}", members(&rel));
    }
    println!();
    Ok(())
}

fn main() -> anyhow::Result<()> {
    // Betweenness: x2 lies between x1 and x3. Its L relaxation says "x2 is
    // not first among the three", its R relaxation "x2 is not last"; its
    // pairwise relaxation is vacuous because no single precedence is implied.
    show("betweenness", &Predicate::betweenness())?;

    // A predicate with satisfying patterns {123, 231}: both patterns put x1
    // before x2, so the pairwise relaxation is the single edge x1 < x2 —
    // a genuinely nontrivial phi_eps.
    let custom = Predicate::from_sat_list(
        3,
        &[Perm::new(vec![1, 2, 3])?, Perm::new(vec![2, 3, 1])?],
    )?;
    show("{123, 231}", &custom)?;

    // The binary order predicate is its own eps relaxation: a precedence
    // predicate, solvable (at optimum) through feedback arc set.
    show("less-than", &Predicate::less_than())?;
    Ok(())
}
