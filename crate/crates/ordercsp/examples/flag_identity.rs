//! Proving (uu) + (dd) >= 1/3 with a flag-algebra square.
//!
//! Write (u.u) for the flag "ascent through a labeled middle point" and
//! (d.d) for the descending one. Averaging the square ((u.u) - (d.d))^2 over
//! the labeled point gives a sum of degree-5 signature classes that is
//! nonnegative by construction and collapses — modulo the signature ideal —
//! to (1/5)((uu) + (dd) - 1/3). Hence the combined density of the two
//! monotone length-3 patterns is at least 1/3 in every strong IDU rounding,
//! the fact behind the arity-3 upper bounds.
//!
//! Run with: `cargo run --example flag_identity`

use num::BigRational;
use ordercsp::flags::{
    average, density_of_sum, product_mod_n, Flag, Tag, TypedSum,
};
use ordercsp::idu::{IduCombination, Scalar};
use ordercsp::Perm;

fn rat(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn main() -> anyhow::Result<()> {
    let u_u: Flag = "1 [2] 3".parse()?;
    let d_d: Flag = "3 [2] 1".parse()?;
    println!("(u.u) = {u_u}    (d.d) = {d_d}\n");

    // The square, expanded with the ideal-reduced product.
    let square = product_mod_n(&u_u, &u_u)?
        .sub(&product_mod_n(&u_u, &d_d)?)?
        .sub(&product_mod_n(&d_d, &u_u)?)?
        .add(&product_mod_n(&d_d, &d_d)?)?;
    println!("((u.u) - (d.d))^2 =");
    for (key, rep, c) in square.terms() {
        println!("  {c:>5} * ({rep})   [signature {}]", key.sig);
    }

    // Averaging over the labeled point: a type-empty sum over degree-5
    // signature classes, every coefficient a multiple of 2/15.
    let avg = average(&square);
    println!("\naverage over the labeled point:");
    for (key, rep, c) in avg.terms() {
        println!("  {c:>5} * ({rep})   [signature {}]", key.sig);
    }

    // Evaluate both sides of ⟦square⟧ = (1/5)((uu) + (dd) - 1/3) on a few
    // ID combinations: exact equality, and the left side is a square, hence
    // nonnegative — proving (uu) + (dd) >= 1/3.
    let uu = TypedSum::from_flag(&Flag::unlabeled(Perm::identity(3)));
    let dd = TypedSum::from_flag(&Flag::unlabeled(Perm::decreasing(3)));
    println!("\ncheck on sample ID combinations:");
    for combo_text in ["1/2 I + 1/2 D", "2/3 I + 1/3 D", "1/5 D + 1/5 I + 3/5 D"] {
        let combo: IduCombination<BigRational> = combo_text.parse()?;
        let lhs = density_of_sum(&avg, &combo, &Tag::empty())?;
        let uu_d = density_of_sum(&uu, &combo, &Tag::empty())?;
        let dd_d = density_of_sum(&dd, &combo, &Tag::empty())?;
        let rhs = rat(1, 5) * (&uu_d + &dd_d - rat(1, 3));
        assert_eq!(lhs, rhs, "identity holds exactly");
        assert!(lhs >= BigRational::from_integer(0.into()), "a square is nonnegative");
        println!(
            "  {combo_text:<22} square = {} (~{:.4}), (uu)+(dd) = {} >= 1/3",
            lhs,
            lhs.to_f64(),
            uu_d + dd_d
        );
    }
    println!("\n=> (uu) + (dd) >= 1/3 for every strong IDU rounding");
    Ok(())
}
