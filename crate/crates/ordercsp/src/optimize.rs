//! Search for a rounding mixture maximizing `p(φ′ → φ, ·)`, exact-rational
//! certification of the value found, and the beats-random sufficient
//! condition.
//!
//! The sufficient condition is a tiny exact linear program: the random
//! ordering can be beaten by a perturbed uniform rounding whenever the origin
//! is *not* in the convex hull of the sign vectors `v(φ, τ)`, i.e. whenever
//! some direction `y` has strictly positive inner product with all of them.
//! We solve `max min_τ ⟨y, v(φ,τ)⟩` over the box `‖y‖∞ ≤ 1` by exhaustive
//! vertex enumeration in rational arithmetic (the dimension is `k − 1 ≤ 3`).
//!
//! The optimizer itself is a multi-start Nelder–Mead search over the weights
//! of a small menu of band patterns; every restart is independent and the
//! reduction is deterministic for a fixed seed. Floating-point values coming
//! out of the search are never trusted: [`certify`] rounds the weights to
//! nearby rationals and re-evaluates `p` exactly, which yields a true lower
//! bound because `p` is evaluated — not estimated — at the rational point.

use std::collections::BTreeMap;

use itertools::Itertools;
use num::{BigRational, One, Signed, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::idu::{
    p_value_with_argmin, BlockKind, IduCombination, IduError, Mixture, Scalar,
};
use crate::perm::{Perm, UdSignature};
use crate::predicate::{Predicate, PredicateError};

/// Errors raised by the optimizer and certifier.
#[derive(Debug, Error, PartialEq)]
pub enum OptimizeError {
    /// The second predicate must relax the first.
    #[error("second predicate is not a relaxation of the first")]
    NotARelaxation,
    /// The relaxation has no satisfying permutation.
    #[error("relaxed predicate has an empty Sat set")]
    EmptySat,
    /// The closed-form upper bounds only cover arity 3.
    #[error("arity {0} unsupported by this operation")]
    ArityUnsupported(usize),
    /// Rationalizing the mixture collapsed all weight to zero.
    #[error("degenerate mixture: rationalization divides by zero")]
    DegenerateMixture,
    /// Underlying predicate error (arity mismatch and the like).
    #[error(transparent)]
    Predicate(#[from] PredicateError),
}

impl From<IduError> for OptimizeError {
    fn from(e: IduError) -> Self {
        match e {
            IduError::NotARelaxation => OptimizeError::NotARelaxation,
            IduError::EmptySat => OptimizeError::EmptySat,
            _ => OptimizeError::DegenerateMixture,
        }
    }
}

/// Integer sign vector `v(φ, τ) = Σ_{σ∈Sat(φ)} udsign±((τσ⁻¹)⁻¹)` attached to
/// a satisfying pattern `τ` of the relaxation. Each entry is congruent to
/// `|Sat(φ)|` mod 2 and bounded by `|Sat(φ)|` in absolute value.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VSignVector {
    entries: Vec<i64>,
}

impl VSignVector {
    /// The `k − 1` signed entries.
    pub fn entries(&self) -> &[i64] {
        &self.entries
    }
}

/// Computes the sign vector of every `τ ∈ Sat(φ′)`.
pub fn v_vectors(
    phi: &Predicate,
    phi_prime: &Predicate,
) -> Result<BTreeMap<Perm, VSignVector>, OptimizeError> {
    if !phi.is_relaxation_of_self(phi_prime)? {
        return Err(OptimizeError::NotARelaxation);
    }
    if phi_prime.is_always_false() {
        return Err(OptimizeError::EmptySat);
    }
    let k = phi.arity();
    let members = phi.members();
    let mut out = BTreeMap::new();
    for tau in phi_prime.members() {
        let mut v = vec![0i64; k - 1];
        for sigma in &members {
            // The density of σ under rounding from τ is governed by the
            // signature of τσ⁻¹, matching the transposed density formulas.
            let sig = tau.compose(&sigma.inverse()).unwrap().udsign();
            for (e, s) in v.iter_mut().zip(sig.plus_minus()) {
                *e += s;
            }
        }
        out.insert(tau, VSignVector { entries: v });
    }
    Ok(out)
}

/// Outcome of the beats-random test.
#[derive(Debug, Clone, PartialEq)]
pub enum SufficientCondition {
    /// A direction with strictly positive inner product with every `v(φ,τ)`,
    /// normalized to the box `‖y‖∞ ≤ 1`, together with its minimum margin.
    Feasible {
        y: Vec<BigRational>,
        margin: BigRational,
    },
    /// The origin lies in the convex hull of the sign vectors.
    Infeasible,
}

/// Decides whether some `y` has `⟨y, v(φ,τ)⟩ > 0` for all `τ ∈ Sat(φ′)`; if
/// so, a rational witness maximizing the minimum margin over `‖y‖∞ ≤ 1` is
/// returned. Feasibility here implies that a perturbed uniform rounding beats
/// the uniformly random ordering.
pub fn sufficient_condition(
    phi: &Predicate,
    phi_prime: &Predicate,
) -> Result<SufficientCondition, OptimizeError> {
    let vs = v_vectors(phi, phi_prime)?;
    let vectors: Vec<Vec<BigRational>> = vs
        .values()
        .map(|v| {
            v.entries()
                .iter()
                .map(|&e| BigRational::from_integer(e.into()))
                .collect()
        })
        .collect();
    Ok(witness_for_vectors(&vectors))
}

/// Core of [`sufficient_condition`] on raw vectors: maximizes `t` subject to
/// `⟨y, v⟩ ≥ t` for all given `v` and `‖y‖∞ ≤ 1`, by exact enumeration of
/// basic feasible points. Returns `Infeasible` when the best margin is ≤ 0.
pub fn witness_for_vectors(vectors: &[Vec<BigRational>]) -> SufficientCondition {
    assert!(!vectors.is_empty());
    let d = vectors[0].len();
    let dedup: Vec<&Vec<BigRational>> = vectors.iter().unique().collect();
    // Variables x = (y_1, …, y_d, t); constraints rows (a, b) meaning a·x ≤ b.
    let mut rows: Vec<(Vec<BigRational>, BigRational)> = Vec::new();
    for v in &dedup {
        let mut a: Vec<BigRational> = v.iter().map(|e| -e.clone()).collect();
        a.push(BigRational::one());
        rows.push((a, BigRational::zero()));
    }
    for i in 0..d {
        let mut hi = vec![BigRational::zero(); d + 1];
        hi[i] = BigRational::one();
        rows.push((hi.clone(), BigRational::one()));
        let mut lo = vec![BigRational::zero(); d + 1];
        lo[i] = -BigRational::one();
        rows.push((lo, BigRational::one()));
    }
    let n = d + 1;
    let mut best: Option<Vec<BigRational>> = None;
    for subset in (0..rows.len()).combinations(n) {
        let a: Vec<Vec<BigRational>> = subset.iter().map(|&i| rows[i].0.clone()).collect();
        let b: Vec<BigRational> = subset.iter().map(|&i| rows[i].1.clone()).collect();
        let Some(x) = solve_square(a, b) else {
            continue;
        };
        let feasible = rows.iter().all(|(a, b)| {
            let lhs: BigRational = a.iter().zip(&x).map(|(ai, xi)| ai * xi).sum();
            lhs <= *b
        });
        if !feasible {
            continue;
        }
        // Prefer larger t, then lexicographically smaller y for determinism.
        let better = match &best {
            None => true,
            Some(cur) => {
                x[n - 1] > cur[n - 1] || (x[n - 1] == cur[n - 1] && x[..n - 1] < cur[..n - 1])
            }
        };
        if better {
            best = Some(x);
        }
    }
    let x = best.expect("the box LP always has a basic feasible point");
    let margin = x[n - 1].clone();
    if margin > BigRational::zero() {
        SufficientCondition::Feasible {
            y: x[..n - 1].to_vec(),
            margin,
        }
    } else {
        SufficientCondition::Infeasible
    }
}

/// Solves the square rational system `A x = b` by Gaussian elimination;
/// `None` when singular.
fn solve_square(
    mut a: Vec<Vec<BigRational>>,
    mut b: Vec<BigRational>,
) -> Option<Vec<BigRational>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).find(|&r| !a[r][col].is_zero())?;
        a.swap(col, pivot);
        b.swap(col, pivot);
        let p = a[col][col].clone();
        for j in col..n {
            a[col][j] = &a[col][j] / &p;
        }
        b[col] = &b[col] / &p;
        for r in 0..n {
            if r != col && !a[r][col].is_zero() {
                let f = a[r][col].clone();
                for j in col..n {
                    a[r][j] = &a[r][j] - &f * &a[col][j];
                }
                b[r] = &b[r] - &f * &b[col];
            }
        }
    }
    Some(b)
}

/// Search configuration for [`optimize_p`].
#[derive(Debug, Clone)]
pub struct SearchConfig {
    /// Maximum number of bands per combination.
    pub max_blocks: usize,
    /// Maximum number of mixture components (capped at `2^{k−1}`).
    pub max_components: usize,
    /// Independent restarts.
    pub restarts: usize,
    /// RNG seed; identical seeds give identical results.
    pub seed: u64,
    /// Convergence tolerance on the simplex spread.
    pub tol: f64,
    /// Per-restart iteration budget.
    pub max_iterations: usize,
}

impl SearchConfig {
    /// Default configuration with the given seed.
    pub fn new(seed: u64) -> Self {
        SearchConfig {
            max_blocks: 6,
            max_components: usize::MAX,
            restarts: 64,
            seed,
            tol: 1e-9,
            max_iterations: 600,
        }
    }
}

/// Band patterns explored before falling back to random shapes; the known
/// small-arity optima all live in at most three bands.
const STRUCTURED_PATTERNS: &[&[BlockKind]] = &[
    &[BlockKind::I, BlockKind::D],
    &[BlockKind::D, BlockKind::I, BlockKind::D],
    &[BlockKind::I, BlockKind::U, BlockKind::I],
    &[BlockKind::U],
    &[BlockKind::I, BlockKind::I, BlockKind::I],
    &[BlockKind::I, BlockKind::D, BlockKind::I],
    &[BlockKind::D, BlockKind::I],
    &[BlockKind::I],
];

/// Maximizes `p(φ′ → φ, ·)` over mixtures of up-combinations by multi-start
/// Nelder–Mead; returns the best mixture found and its floating `p` value.
/// Deterministic for fixed inputs and seed.
pub fn optimize_p(
    phi: &Predicate,
    phi_prime: &Predicate,
    config: &SearchConfig,
) -> Result<(Mixture<f64>, f64), OptimizeError> {
    if !phi.is_relaxation_of_self(phi_prime)? {
        return Err(OptimizeError::NotARelaxation);
    }
    if phi_prime.is_always_false() {
        return Err(OptimizeError::EmptySat);
    }
    let eval = PEvaluator::new(phi, phi_prime);
    let k = phi.arity();
    let comp_cap = config.max_components.min(1 << (k - 1)).max(1);
    let results: Vec<(f64, usize, Mixture<f64>)> = (0..config.restarts.max(1))
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_add(r as u64));
            let (shape, theta0) = restart_point(r, comp_cap, config.max_blocks, &mut rng);
            let f = |theta: &[f64]| eval.value(&mixture_from_theta(&shape, theta));
            let theta = nelder_mead(&f, &theta0, config.tol, config.max_iterations);
            let m = mixture_from_theta(&shape, &theta);
            (eval.value(&m), r, m)
        })
        .collect();
    let best = results
        .into_iter()
        .min_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)))
        .expect("at least one restart");
    Ok((best.2, best.0))
}

/// Shape (list of band patterns, one per component) and initial parameters
/// for restart `r`: structured single-component seeds first, then random.
fn restart_point(
    r: usize,
    comp_cap: usize,
    max_blocks: usize,
    rng: &mut ChaCha8Rng,
) -> (Vec<Vec<BlockKind>>, Vec<f64>) {
    let shape: Vec<Vec<BlockKind>> = if r < STRUCTURED_PATTERNS.len() {
        vec![STRUCTURED_PATTERNS[r].to_vec()]
    } else {
        let ncomp = rng.gen_range(1..=comp_cap.min(2));
        (0..ncomp)
            .map(|_| {
                let nb = rng.gen_range(1..=max_blocks.max(1));
                (0..nb)
                    .map(|_| match rng.gen_range(0..3) {
                        0 => BlockKind::I,
                        1 => BlockKind::D,
                        _ => BlockKind::U,
                    })
                    .collect()
            })
            .collect()
    };
    let dim = theta_len(&shape);
    let theta0: Vec<f64> = if r < STRUCTURED_PATTERNS.len() {
        vec![1.0; dim]
    } else {
        (0..dim).map(|_| rng.gen_range(0.05..1.0)).collect()
    };
    (shape, theta0)
}

fn theta_len(shape: &[Vec<BlockKind>]) -> usize {
    let probs = if shape.len() > 1 { shape.len() } else { 0 };
    probs + shape.iter().map(Vec::len).sum::<usize>()
}

/// Decodes unconstrained parameters into a mixture: absolute values
/// normalized per group (component probabilities, then each component's band
/// weights); degenerate groups fall back to uniform.
fn mixture_from_theta(shape: &[Vec<BlockKind>], theta: &[f64]) -> Mixture<f64> {
    let mut idx = 0;
    let probs: Vec<f64> = if shape.len() > 1 {
        let raw = &theta[..shape.len()];
        idx = shape.len();
        normalize_abs(raw)
    } else {
        vec![1.0]
    };
    let comps: Vec<(f64, IduCombination<f64>)> = shape
        .iter()
        .zip(&probs)
        .map(|(pattern, &p)| {
            let raw = &theta[idx..idx + pattern.len()];
            idx += pattern.len();
            let w = normalize_abs(raw);
            let blocks = w.into_iter().zip(pattern.iter().copied()).collect();
            (p, IduCombination::new_unnormalized(blocks).unwrap())
        })
        .collect();
    Mixture::new(comps).expect("normalized parameters form a mixture")
}

fn normalize_abs(raw: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = raw.iter().map(|x| x.abs()).collect();
    let total: f64 = abs.iter().sum();
    if total <= 1e-300 {
        vec![1.0 / raw.len() as f64; raw.len()]
    } else {
        abs.into_iter().map(|x| x / total).collect()
    }
}

/// Fast floating evaluator of `p(φ′ → φ, R)`: per-τ integer coefficients over
/// signature classes precomputed once, so each evaluation costs one
/// generating-function pass per signature.
struct PEvaluator {
    k: usize,
    representatives: Vec<Perm>,
    coeffs: Vec<Vec<u32>>,
}

impl PEvaluator {
    fn new(phi: &Predicate, phi_prime: &Predicate) -> Self {
        let k = phi.arity();
        let sigs = UdSignature::all(k);
        let index: BTreeMap<&UdSignature, usize> =
            sigs.iter().enumerate().map(|(i, s)| (s, i)).collect();
        let members = phi.members();
        let coeffs = phi_prime
            .members()
            .iter()
            .map(|tau| {
                let mut c = vec![0u32; sigs.len()];
                for sigma in &members {
                    let sig = tau.compose(&sigma.inverse()).unwrap().udsign();
                    c[index[&sig]] += 1;
                }
                c
            })
            .collect();
        let representatives = sigs.iter().map(UdSignature::representative).collect();
        PEvaluator {
            k,
            representatives,
            coeffs,
        }
    }

    fn value(&self, mixture: &Mixture<f64>) -> f64 {
        let mut profile = vec![0.0f64; self.representatives.len()];
        for (p, combo) in mixture.components() {
            for (slot, rep) in profile.iter_mut().zip(&self.representatives) {
                *slot += p * crate::idu::k_poly(rep, combo);
            }
        }
        let _ = self.k;
        self.coeffs
            .iter()
            .map(|c| {
                c.iter()
                    .zip(&profile)
                    .map(|(&ci, &d)| ci as f64 * d)
                    .sum::<f64>()
            })
            .fold(f64::INFINITY, f64::min)
    }
}

/// Derivative-free simplex maximization of `f` starting at `x0`.
fn nelder_mead(f: &dyn Fn(&[f64]) -> f64, x0: &[f64], tol: f64, budget: usize) -> Vec<f64> {
    let n = x0.len();
    if n == 1 {
        return x0.to_vec();
    }
    let mut simplex: Vec<(f64, Vec<f64>)> = Vec::with_capacity(n + 1);
    simplex.push((f(x0), x0.to_vec()));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += 0.35;
        simplex.push((f(&x), x));
    }
    for _ in 0..budget {
        // Descending by value: best first (maximization).
        simplex.sort_by(|a, b| b.0.total_cmp(&a.0));
        let spread = simplex[0].0 - simplex[n].0;
        if spread.abs() < tol {
            break;
        }
        let centroid: Vec<f64> = (0..n)
            .map(|j| simplex[..n].iter().map(|(_, x)| x[j]).sum::<f64>() / n as f64)
            .collect();
        let worst = simplex[n].clone();
        let combine = |a: f64| -> Vec<f64> {
            centroid
                .iter()
                .zip(&worst.1)
                .map(|(c, w)| c + a * (c - w))
                .collect()
        };
        let xr = combine(1.0);
        let fr = f(&xr);
        if fr > simplex[0].0 {
            let xe = combine(2.0);
            let fe = f(&xe);
            simplex[n] = if fe > fr { (fe, xe) } else { (fr, xr) };
        } else if fr > simplex[n - 1].0 {
            simplex[n] = (fr, xr);
        } else {
            let xc = combine(-0.5);
            let fc = f(&xc);
            if fc > worst.0 {
                simplex[n] = (fc, xc);
            } else {
                // Shrink toward the best point.
                let best = simplex[0].1.clone();
                for entry in simplex.iter_mut().skip(1) {
                    let x: Vec<f64> = entry
                        .1
                        .iter()
                        .zip(&best)
                        .map(|(xi, bi)| bi + 0.5 * (xi - bi))
                        .collect();
                    *entry = (f(&x), x);
                }
            }
        }
    }
    simplex.sort_by(|a, b| b.0.total_cmp(&a.0));
    simplex[0].1.clone()
}

/// An exactly verified lower bound on the optimum of `p(φ′ → φ, ·)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Certificate {
    /// Constraint predicate.
    pub phi: Predicate,
    /// Its relaxation.
    pub phi_prime: Predicate,
    /// The certified mixture, all weights rational.
    pub mixture: Mixture<BigRational>,
    /// Exact value of `p` at the mixture.
    pub p: BigRational,
    /// A satisfying pattern of the relaxation attaining the minimum.
    pub argmin: Perm,
}

impl Certificate {
    /// Recomputes `p` in exact arithmetic and compares; the defining
    /// invariant of a certificate.
    pub fn verify(&self) -> bool {
        p_value_with_argmin(&self.phi, &self.phi_prime, &self.mixture)
            .map(|(p, _)| p == self.p)
            .unwrap_or(false)
    }

    /// JSON document form (all rationals as strings).
    pub fn to_json(&self) -> serde_json::Value {
        serde_json::json!({
            "tool": format!("ordercsp {}", env!("CARGO_PKG_VERSION")),
            "phi": predicate_id(&self.phi),
            "phi_prime": predicate_id(&self.phi_prime),
            "mixture": self.mixture.to_string(),
            "p": self.p.to_string(),
            "p_approx": self.p.to_f64(),
            "argmin_tau": self.argmin.to_string(),
        })
    }
}

fn predicate_id(phi: &Predicate) -> String {
    let members = phi
        .members()
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    format!("arity {}; sat {{{members}}}", phi.arity())
}

/// Default denominator cap used when rationalizing optimizer output.
pub const DEFAULT_MAX_DENOMINATOR: u64 = 1_000_000;

/// Rounds a floating mixture to rational weights (denominators at most
/// `max_denominator`), renormalizes exactly, and evaluates `p` in exact
/// arithmetic. The result is a true lower bound on the optimum.
pub fn certify(
    phi: &Predicate,
    phi_prime: &Predicate,
    mixture: &Mixture<f64>,
    max_denominator: u64,
) -> Result<Certificate, OptimizeError> {
    let exact = mixture
        .rationalize(max_denominator)
        .map_err(|_| OptimizeError::DegenerateMixture)?;
    let (p, argmin) = p_value_with_argmin(phi, phi_prime, &exact)?;
    Ok(Certificate {
        phi: phi.clone(),
        phi_prime: phi_prime.clone(),
        mixture: exact,
        p,
        argmin,
    })
}

/// A proven upper bound on `p(φ′ → φ, R)` over *all* strong IDU rounding
/// schemes, or `None` when neither closed-form argument applies. Arity 3
/// only. Two arguments are implemented:
///
/// * complement: if two satisfying patterns of the relaxation have density
///   sums that together fit inside the full probability budget
///   `(uu) + 2(ud) + 2(du) + (dd) = 1`, their minimum is at most `1/2`;
/// * the constant `(uu) + (dd) ≥ 1/3` (a sum-of-squares fact, reproved in
///   the flag-algebra module), so any objective term of the shape
///   `m·((ud) + (du))` is at most `m/3`.
pub fn upper_bound_exhausted(
    phi: &Predicate,
    phi_prime: &Predicate,
) -> Result<Option<BigRational>, OptimizeError> {
    if phi.arity() != 3 {
        return Err(OptimizeError::ArityUnsupported(phi.arity()));
    }
    if !phi.is_relaxation_of_self(phi_prime)? {
        return Err(OptimizeError::NotARelaxation);
    }
    if phi_prime.is_always_false() {
        return Err(OptimizeError::EmptySat);
    }
    // Coefficients of each τ-objective over the signature classes
    // (uu, ud, du, dd); class multiplicities in the budget are (1, 2, 2, 1).
    let sigs: Vec<UdSignature> = ["uu", "ud", "du", "dd"]
        .iter()
        .map(|w| UdSignature::parse(w).unwrap())
        .collect();
    let members = phi.members();
    let coeffs: Vec<[u32; 4]> = phi_prime
        .members()
        .iter()
        .map(|tau| {
            let mut c = [0u32; 4];
            for sigma in &members {
                let sig = tau.compose(&sigma.inverse()).unwrap().udsign();
                let i = sigs.iter().position(|s| *s == sig).unwrap();
                c[i] += 1;
            }
            c
        })
        .collect();
    let capacity = [1u32, 2, 2, 1];
    let mut best: Option<BigRational> = None;
    let mut consider = |bound: BigRational| {
        if best.as_ref().map_or(true, |b| bound < *b) {
            best = Some(bound);
        }
    };
    for i in 0..coeffs.len() {
        // m((ud) + (du)) ≤ m/3 since (uu) + (dd) ≥ 1/3.
        let c = coeffs[i];
        if c[0] == 0 && c[3] == 0 && c[1] == c[2] && c[1] > 0 {
            consider(BigRational::new(c[1].into(), 3.into()));
        }
        // Pairs whose coefficient sum fits the budget bound their min by 1/2.
        for cj in coeffs.iter().skip(i) {
            let fits = (0..4).all(|t| c[t] + cj[t] <= capacity[t]);
            if fits {
                consider(BigRational::new(1.into(), 2.into()));
            }
        }
    }
    Ok(best)
}
