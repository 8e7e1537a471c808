//! Up-combinations of the increasing (I), decreasing (D), and uniform (U)
//! permutons, their exact pattern densities, the `p(φ′ → φ, R)` objective,
//! and reproducible sampling.
//!
//! An [`IduCombination`] is an ordered stack of weighted bands. Sampling a
//! permutation of length `n` assigns each element independently to a band by
//! weight; within an I band elements keep index order, within a D band the
//! order is reversed, within a U band it is uniformly shuffled; bands are then
//! concatenated bottom-up. These are exactly the *strong IDU* rounding
//! schemes: the probability of seeing a pattern `ρ` at any fixed index set is
//! independent of the index set and of `n`, and depends only on the up–down
//! signature of `ρ⁻¹`.
//!
//! Densities are evaluated exactly through the pattern generating function
//! ([`k_poly`]): a sum over weakly increasing band labelings of `1..=n` whose
//! constant runs are permitted on ascents (I bands), descents (D bands), or
//! anywhere (U bands, with a factorial correction). No polynomial object is
//! materialized; the function is evaluated directly at the band weights.
//!
//! Everything is generic over the scalar: exact [`BigRational`] for
//! certification, `f64` for optimizer inner loops.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Div, Mul, Sub};
use std::str::FromStr;

use num::{BigInt, BigRational, One, Signed, ToPrimitive, Zero};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::perm::{factorial, Perm, UdSignature};
use crate::predicate::Predicate;

/// Errors raised by density and sampling operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum IduError {
    /// `p_value(φ, φ′, ·)` requires `Sat(φ) ⊆ Sat(φ′)`.
    #[error("second predicate is not a relaxation of the first")]
    NotARelaxation,
    /// The relaxation has no satisfying permutation to minimize over.
    #[error("relaxed predicate has an empty Sat set")]
    EmptySat,
    /// Exhaustive restricted-density enumeration is capped at `n ≤ 8`.
    #[error("instance too large for exhaustive enumeration: {0}")]
    TooLarge(String),
    /// Weights are negative or do not sum to one.
    #[error("invalid weights: {0}")]
    BadWeights(String),
    /// A mixture has more components than `2^(k−1)` for the target arity.
    #[error("mixture has {got} components, more than the cap {cap}")]
    TooManyComponents { got: usize, cap: usize },
    /// Combination or mixture text did not parse.
    #[error("parse error: {0}")]
    Parse(String),
}

/// Scalar abstraction shared by the exact-rational and floating backends.
pub trait Scalar:
    Clone
    + PartialEq
    + PartialOrd
    + fmt::Debug
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Zero
    + One
{
    /// Embeds a small nonnegative integer.
    fn from_u64(n: u64) -> Self;
    /// Lossy view as `f64` (used for sampling and reporting).
    fn to_f64(&self) -> f64;
    /// Embeds an exact rational (lossy only for the float backend).
    fn from_rational(r: &BigRational) -> Self;
    /// Round-trippable text form (`"1/3"`, `"0.25"`).
    fn text(&self) -> String;
}

impl Scalar for f64 {
    fn from_u64(n: u64) -> Self {
        n as f64
    }
    fn to_f64(&self) -> f64 {
        *self
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).expect("rational convertible to f64")
    }
    fn text(&self) -> String {
        format!("{self}")
    }
}

impl Scalar for BigRational {
    fn from_u64(n: u64) -> Self {
        BigRational::from_integer(n.into())
    }
    fn to_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).expect("rational convertible to f64")
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn text(&self) -> String {
        format!("{self}")
    }
}

/// Kind of one band of an up-combination.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BlockKind {
    /// Increasing permuton: elements keep index order.
    I,
    /// Decreasing permuton: elements appear in reversed index order.
    D,
    /// Uniform permuton: elements are uniformly shuffled.
    U,
}

impl fmt::Display for BlockKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BlockKind::I => write!(f, "I"),
            BlockKind::D => write!(f, "D"),
            BlockKind::U => write!(f, "U"),
        }
    }
}

/// A finite up-combination of I/D/U bands with nonnegative weights summing to
/// one. Zero-weight bands are permitted and treated as absent.
#[derive(Debug, Clone, PartialEq)]
pub struct IduCombination<T: Scalar> {
    blocks: Vec<(T, BlockKind)>,
}

impl<T: Scalar> IduCombination<T> {
    /// Builds a combination, validating nonnegativity and normalization
    /// (exact for rationals, within `1e-12` for floats).
    pub fn new(blocks: Vec<(T, BlockKind)>) -> Result<Self, IduError> {
        let c = Self::new_unnormalized(blocks)?;
        let total = c
            .blocks
            .iter()
            .fold(T::zero(), |acc, (w, _)| acc + w.clone());
        if total.to_f64().is_nan() || (total.to_f64() - 1.0).abs() > 1e-12 {
            return Err(IduError::BadWeights(format!(
                "weights sum to {:?}, expected 1",
                total
            )));
        }
        Ok(c)
    }

    /// Builds a combination without the normalization check (used by
    /// homogeneity tests and intermediate optimizer states).
    pub fn new_unnormalized(blocks: Vec<(T, BlockKind)>) -> Result<Self, IduError> {
        if blocks.is_empty() {
            return Err(IduError::BadWeights("no blocks".into()));
        }
        for (w, _) in &blocks {
            if w.to_f64() < 0.0 {
                return Err(IduError::BadWeights(format!("negative weight {w:?}")));
            }
        }
        Ok(IduCombination { blocks })
    }

    /// The weighted bands, bottom-up.
    pub fn blocks(&self) -> &[(T, BlockKind)] {
        &self.blocks
    }

    /// True when no band is uniform (an *ID combination*).
    pub fn is_id_only(&self) -> bool {
        self.blocks
            .iter()
            .all(|(w, k)| *k != BlockKind::U || w.is_zero())
    }

    /// Converts the scalar backend.
    pub fn map<S: Scalar>(&self, f: impl Fn(&T) -> S) -> IduCombination<S> {
        IduCombination {
            blocks: self.blocks.iter().map(|(w, k)| (f(w), *k)).collect(),
        }
    }
}

impl IduCombination<BigRational> {
    /// The single-band uniform permuton.
    pub fn uniform() -> Self {
        IduCombination {
            blocks: vec![(BigRational::one(), BlockKind::U)],
        }
    }

    /// Shorthand for a rational-weighted combination from `(num, den, kind)`.
    pub fn from_ratios(parts: &[(i64, i64, BlockKind)]) -> Result<Self, IduError> {
        let blocks = parts
            .iter()
            .map(|&(n, d, k)| (BigRational::new(n.into(), d.into()), k))
            .collect();
        IduCombination::new(blocks)
    }

    /// Floating view of an exact combination.
    pub fn to_float(&self) -> IduCombination<f64> {
        self.map(|w| Scalar::to_f64(w))
    }
}

impl IduCombination<f64> {
    /// Rounds each weight to a nearby rational with denominator at most
    /// `max_denominator` (continued-fraction best approximation), then
    /// renormalizes exactly so the weights sum to one.
    pub fn rationalize(&self, max_denominator: u64) -> Result<IduCombination<BigRational>, IduError> {
        let blocks: Vec<(BigRational, BlockKind)> = self
            .blocks
            .iter()
            .map(|&(w, k)| (rationalize(w, max_denominator), k))
            .collect();
        let total: BigRational = blocks.iter().map(|(w, _)| w.clone()).sum();
        if total.is_zero() {
            return Err(IduError::BadWeights("all weights rounded to zero".into()));
        }
        IduCombination::new(
            blocks
                .into_iter()
                .map(|(w, k)| (w / total.clone(), k))
                .collect(),
        )
    }
}

impl<T: Scalar> fmt::Display for IduCombination<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (w, k) in &self.blocks {
            if !first {
                write!(f, " + ")?;
            }
            write!(f, "{} {k}", scalar_text(w))?;
            first = false;
        }
        Ok(())
    }
}

fn scalar_text<T: Scalar>(w: &T) -> String {
    w.text()
}

impl FromStr for IduCombination<BigRational> {
    type Err = IduError;

    /// Parses `"0.5 I + 0.5 D"` or `"1/5 D + 2/5 U + 2/5 I"`.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let blocks = s
            .split('+')
            .map(|part| {
                let mut it = part.split_whitespace();
                let w = it
                    .next()
                    .ok_or_else(|| IduError::Parse(format!("empty band in '{s}'")))?;
                let k = it
                    .next()
                    .ok_or_else(|| IduError::Parse(format!("band '{part}' missing kind")))?;
                if it.next().is_some() {
                    return Err(IduError::Parse(format!("trailing tokens in '{part}'")));
                }
                let kind = match k {
                    "I" => BlockKind::I,
                    "D" => BlockKind::D,
                    "U" => BlockKind::U,
                    other => return Err(IduError::Parse(format!("unknown kind '{other}'"))),
                };
                Ok((parse_scalar(w)?, kind))
            })
            .collect::<Result<Vec<_>, _>>()?;
        IduCombination::new(blocks)
    }
}

/// Parses a rational (`"2/5"`), integer (`"1"`), or decimal (`"0.5"`) weight.
fn parse_scalar(tok: &str) -> Result<BigRational, IduError> {
    if let Some((n, d)) = tok.split_once('/') {
        let n: BigInt = n
            .trim()
            .parse()
            .map_err(|_| IduError::Parse(format!("bad numerator '{tok}'")))?;
        let d: BigInt = d
            .trim()
            .parse()
            .map_err(|_| IduError::Parse(format!("bad denominator '{tok}'")))?;
        if d.is_zero() {
            return Err(IduError::Parse(format!("zero denominator in '{tok}'")));
        }
        return Ok(BigRational::new(n, d));
    }
    if let Some((int, frac)) = tok.split_once('.') {
        let digits = frac.len() as u32;
        let scale = BigInt::from(10u32).pow(digits);
        let int: BigInt = if int.is_empty() {
            BigInt::zero()
        } else {
            int.parse()
                .map_err(|_| IduError::Parse(format!("bad decimal '{tok}'")))?
        };
        let frac: BigInt = frac
            .parse()
            .map_err(|_| IduError::Parse(format!("bad decimal '{tok}'")))?;
        let sign = if tok.trim_start().starts_with('-') {
            -BigInt::one()
        } else {
            BigInt::one()
        };
        return Ok(BigRational::new(int.abs() * &scale + frac, scale) * BigRational::from_integer(sign));
    }
    let n: BigInt = tok
        .parse()
        .map_err(|_| IduError::Parse(format!("bad weight '{tok}'")))?;
    Ok(BigRational::from_integer(n))
}

/// A finite probability distribution over up-combinations (the search class
/// of the optimizer).
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<T: Scalar> {
    components: Vec<(T, IduCombination<T>)>,
}

impl<T: Scalar> Mixture<T> {
    /// Builds a mixture, validating the probability simplex.
    pub fn new(components: Vec<(T, IduCombination<T>)>) -> Result<Self, IduError> {
        if components.is_empty() {
            return Err(IduError::BadWeights("no components".into()));
        }
        let total = components
            .iter()
            .fold(T::zero(), |acc, (p, _)| acc + p.clone());
        if (total.to_f64() - 1.0).abs() > 1e-12 {
            return Err(IduError::BadWeights(format!(
                "component probabilities sum to {:?}",
                total
            )));
        }
        for (p, _) in &components {
            if p.to_f64() < 0.0 {
                return Err(IduError::BadWeights(format!("negative probability {p:?}")));
            }
        }
        Ok(Mixture { components })
    }

    /// The weighted components.
    pub fn components(&self) -> &[(T, IduCombination<T>)] {
        &self.components
    }

    /// True when every component is an ID combination.
    pub fn is_id_only(&self) -> bool {
        self.components.iter().all(|(_, c)| c.is_id_only())
    }

    /// Converts the scalar backend.
    pub fn map<S: Scalar>(&self, f: impl Fn(&T) -> S + Copy) -> Mixture<S> {
        Mixture {
            components: self
                .components
                .iter()
                .map(|(p, c)| (f(p), c.map(f)))
                .collect(),
        }
    }
}

impl<T: Scalar> From<IduCombination<T>> for Mixture<T> {
    fn from(c: IduCombination<T>) -> Self {
        Mixture {
            components: vec![(T::one(), c)],
        }
    }
}

impl Mixture<BigRational> {
    /// Floating view.
    pub fn to_float(&self) -> Mixture<f64> {
        self.map(|w| Scalar::to_f64(w))
    }
}

impl Mixture<f64> {
    /// Rationalizes all probabilities and weights (denominator-bounded) and
    /// renormalizes exactly.
    pub fn rationalize(&self, max_denominator: u64) -> Result<Mixture<BigRational>, IduError> {
        let comps: Vec<(BigRational, IduCombination<BigRational>)> = self
            .components
            .iter()
            .map(|(p, c)| Ok((rationalize(*p, max_denominator), c.rationalize(max_denominator)?)))
            .collect::<Result<_, IduError>>()?;
        let total: BigRational = comps.iter().map(|(p, _)| p.clone()).sum();
        if total.is_zero() {
            return Err(IduError::BadWeights("all probabilities rounded to zero".into()));
        }
        Mixture::new(
            comps
                .into_iter()
                .map(|(p, c)| (p / total.clone(), c))
                .collect(),
        )
    }
}

impl<T: Scalar> fmt::Display for Mixture<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (p, c) in &self.components {
            if !first {
                write!(f, " ; ")?;
            }
            write!(f, "{} * ({c})", scalar_text(p))?;
            first = false;
        }
        Ok(())
    }
}

impl FromStr for Mixture<BigRational> {
    type Err = IduError;

    /// Parses `"p1 * (combo1) ; p2 * (combo2)"`; a bare combination is a
    /// single-component mixture.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if !s.contains('*') {
            return Ok(s.parse::<IduCombination<BigRational>>()?.into());
        }
        let components = s
            .split(';')
            .map(|part| {
                let (p, rest) = part
                    .split_once('*')
                    .ok_or_else(|| IduError::Parse(format!("component '{part}' missing '*'")))?;
                let rest = rest.trim();
                let inner = rest
                    .strip_prefix('(')
                    .and_then(|r| r.strip_suffix(')'))
                    .ok_or_else(|| IduError::Parse(format!("component '{part}' missing parens")))?;
                Ok((parse_scalar(p.trim())?, inner.parse()?))
            })
            .collect::<Result<Vec<_>, IduError>>()?;
        Mixture::new(components)
    }
}

/// Exact value of the pattern generating function of `pi` at the band
/// weights of `combo`: the sum over weakly increasing band labelings
/// `f : [n] → bands` (runs permitted on ascents for I bands, descents for D
/// bands, anywhere for U bands) of `∏ w_{f(i)}`, with each U band's
/// contribution divided by the factorial of its run lengths.
///
/// Weights need not be normalized; the value is homogeneous of degree `n`.
pub fn k_poly<T: Scalar>(pi: &Perm, combo: &IduCombination<T>) -> T {
    let n = pi.len();
    let asc: Vec<bool> = pi.udsign().bits().to_vec();
    let blocks = combo.blocks();
    let mut total = T::zero();
    // Depth-first over positions: state is (position, current band, run length).
    let mut stack: Vec<(usize, usize, u64, T)> = Vec::new();
    for (b, (w, _)) in blocks.iter().enumerate() {
        if !w.is_zero() {
            stack.push((1, b, 1, w.clone()));
        }
    }
    while let Some((i, b, run, acc)) = stack.pop() {
        if i == n {
            total = total + acc;
            continue;
        }
        // Extend the current run when the band kind permits it here.
        let (w, kind) = &blocks[b];
        let extend_ok = match kind {
            BlockKind::I => asc[i - 1],
            BlockKind::D => !asc[i - 1],
            BlockKind::U => true,
        };
        if extend_ok && !w.is_zero() {
            let mut term = acc.clone() * w.clone();
            if *kind == BlockKind::U {
                term = term / T::from_u64(run + 1);
            }
            stack.push((i + 1, b, run + 1, term));
        }
        // Or jump to any later band.
        for (b2, (w2, _)) in blocks.iter().enumerate().skip(b + 1) {
            if !w2.is_zero() {
                stack.push((i + 1, b2, 1, acc.clone() * w2.clone()));
            }
        }
    }
    total
}

/// Exact pattern density of `rho` in the up-combination `combo`:
/// the generating function of the *inverse* pattern, `k_poly(ρ⁻¹, C)`.
pub fn density<T: Scalar>(rho: &Perm, combo: &IduCombination<T>) -> T {
    k_poly(&rho.inverse(), combo)
}

/// Map from inverse up–down signatures to pattern densities: the density of
/// any `ρ` with `udsign(ρ⁻¹) = s` appears under key `s`. Mixtures average
/// their component profiles by probability.
#[derive(Debug, Clone, PartialEq)]
pub struct SignatureProfile<T: Scalar> {
    map: BTreeMap<UdSignature, T>,
}

impl<T: Scalar> SignatureProfile<T> {
    /// Density assigned to signature `s`.
    pub fn get(&self, s: &UdSignature) -> &T {
        &self.map[s]
    }

    /// Iterates `(signature, density)` pairs in signature order.
    pub fn iter(&self) -> impl Iterator<Item = (&UdSignature, &T)> {
        self.map.iter()
    }

    /// Density of a concrete pattern `ρ`: the profile value of `udsign(ρ⁻¹)`.
    pub fn density_of(&self, rho: &Perm) -> &T {
        self.get(&rho.inverse().udsign())
    }
}

/// Computes the full signature profile of a mixture for arity `k`. Since
/// densities in strong IDU transformations depend only on `udsign(ρ⁻¹)`, one
/// generating-function evaluation per signature suffices.
pub fn signature_profile<T: Scalar>(k: usize, mixture: &Mixture<T>) -> SignatureProfile<T> {
    let mut map = BTreeMap::new();
    for s in UdSignature::all(k) {
        let pi = s.representative();
        let mut v = T::zero();
        for (p, c) in mixture.components() {
            v = v + p.clone() * k_poly(&pi, c);
        }
        map.insert(s, v);
    }
    SignatureProfile { map }
}

/// Fraction satisfied by a uniformly random ordering: `|Sat(φ)| / k!`.
pub fn alpha_random(phi: &Predicate) -> BigRational {
    phi.alpha_random()
}

/// Worst-case rounding guarantee `p(φ′ → φ, R)`: the minimum over satisfying
/// patterns `τ` of the relaxation of the probability that rounding maps a
/// `τ`-pattern onto `Sat(φ)`. Returns the value and the arg-min `τ`.
pub fn p_value_with_argmin<T: Scalar>(
    phi: &Predicate,
    phi_prime: &Predicate,
    mixture: &Mixture<T>,
) -> Result<(T, Perm), IduError> {
    if !phi
        .is_relaxation_of_self(phi_prime)
        .map_err(|_| IduError::NotARelaxation)?
    {
        return Err(IduError::NotARelaxation);
    }
    if phi_prime.is_always_false() {
        return Err(IduError::EmptySat);
    }
    let k = phi.arity();
    let cap = 1usize << (k - 1);
    if mixture.components().len() > cap {
        return Err(IduError::TooManyComponents {
            got: mixture.components().len(),
            cap,
        });
    }
    let profile = signature_profile(k, mixture);
    let members = phi.members();
    let mut best: Option<(T, Perm)> = None;
    for tau in phi_prime.members() {
        let mut sum = T::zero();
        for sigma in &members {
            // Key the profile by udsign((σ τ⁻¹)⁻¹) = udsign(τ σ⁻¹): this
            // internalizes the transpose bookkeeping of the density formulas.
            let key = tau.compose(&sigma.inverse()).unwrap().udsign();
            sum = sum + profile.get(&key).clone();
        }
        if best.as_ref().map_or(true, |(b, _)| sum < *b) {
            best = Some((sum, tau));
        }
    }
    Ok(best.expect("nonempty Sat set"))
}

/// [`p_value_with_argmin`] without the witness.
pub fn p_value<T: Scalar>(
    phi: &Predicate,
    phi_prime: &Predicate,
    mixture: &Mixture<T>,
) -> Result<T, IduError> {
    p_value_with_argmin(phi, phi_prime, mixture).map(|(v, _)| v)
}

/// Samples a random permutation of length `n` from the mixture,
/// reproducibly for a fixed `seed`. The generator is ChaCha8 seeded with
/// `seed`; draws happen in a fixed order (component, then per-element band,
/// then per-element shuffle keys for U bands).
pub fn sample<T: Scalar>(mixture: &Mixture<T>, n: usize, seed: u64) -> Perm {
    assert!(n >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let probs: Vec<f64> = mixture.components().iter().map(|(p, _)| p.to_f64()).collect();
    let c = draw_index(&mut rng, &probs);
    let combo = &mixture.components()[c].1;
    let weights: Vec<f64> = combo.blocks().iter().map(|(w, _)| w.to_f64()).collect();
    let bands: Vec<usize> = (0..n).map(|_| draw_index(&mut rng, &weights)).collect();
    // Sort key per element: band first, then index order (I), reversed index
    // order (D), or a fresh random key (U).
    let keys: Vec<(usize, u64)> = bands
        .iter()
        .enumerate()
        .map(|(i, &b)| {
            let sub = match combo.blocks()[b].1 {
                BlockKind::I => i as u64,
                BlockKind::D => (n - 1 - i) as u64,
                BlockKind::U => rng.gen::<u64>(),
            };
            (b, sub)
        })
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&i| keys[i]);
    let mut values = vec![0u32; n];
    for (rank, &i) in order.iter().enumerate() {
        values[i] = rank as u32 + 1;
    }
    Perm::new(values).expect("sampling produces a permutation")
}

fn draw_index(rng: &mut ChaCha8Rng, weights: &[f64]) -> usize {
    let total: f64 = weights.iter().sum();
    let x: f64 = rng.gen::<f64>() * total;
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if x < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Exact probability that the sampled permutation restricted to the index set
/// `J` shows the pattern `rho`, by exhaustive enumeration of band assignments
/// and within-U orders. This is the defining quantity of a strong IDU
/// transformation: the result never depends on `J` or `n`.
pub fn restricted_density_exact(
    rho: &Perm,
    combo: &IduCombination<BigRational>,
    n: usize,
    j: &[usize],
) -> Result<BigRational, IduError> {
    if n > 8 {
        return Err(IduError::TooLarge(format!("n = {n} exceeds 8")));
    }
    let k = rho.len();
    if j.len() != k {
        return Err(IduError::TooLarge(format!(
            "|J| = {} but |rho| = {k}",
            j.len()
        )));
    }
    let mut j = j.to_vec();
    j.sort_unstable();
    if j.iter().any(|&x| x == 0 || x > n) || j.windows(2).any(|w| w[0] == w[1]) {
        return Err(IduError::TooLarge("J must be a set of indices in [n]".into()));
    }
    let blocks = combo.blocks();
    let nb = blocks.len();
    let mut total = BigRational::zero();
    // Assign each of the k tracked indices to a band; other elements never
    // influence the pattern at J.
    let mut assign = vec![0usize; k];
    loop {
        let weight: BigRational = assign.iter().map(|&b| blocks[b].0.clone()).fold(
            BigRational::one(),
            |acc, w| acc * w,
        );
        if !weight.is_zero() {
            total = total + weight * pattern_probability(rho, &assign, blocks);
        }
        // Odometer increment over band assignments.
        let mut pos = 0;
        loop {
            if pos == k {
                return Ok(total);
            }
            assign[pos] += 1;
            if assign[pos] < nb {
                break;
            }
            assign[pos] = 0;
            pos += 1;
        }
    }
}

/// Probability that the k tracked elements with the given band assignment
/// realize the pattern `rho`, enumerating within-U-band orders explicitly.
fn pattern_probability(
    rho: &Perm,
    assign: &[usize],
    blocks: &[(BigRational, BlockKind)],
) -> BigRational {
    let k = rho.len();
    // Forced comparisons: different bands compare by band; same I band by
    // index; same D band reversed. Same-U-band pairs are free.
    for a in 0..k {
        for b in a + 1..k {
            let (ba, bb) = (assign[a], assign[b]);
            let want_less = rho.at(a + 1) < rho.at(b + 1);
            let forced = if ba != bb {
                Some(ba < bb)
            } else {
                match blocks[ba].1 {
                    BlockKind::I => Some(true),
                    BlockKind::D => Some(false),
                    BlockKind::U => None,
                }
            };
            if let Some(is_less) = forced {
                if is_less != want_less {
                    return BigRational::zero();
                }
            }
        }
    }
    // Within each U band, exactly one of the m! relative orders matches.
    let mut prob = BigRational::one();
    for (b, block) in blocks.iter().enumerate() {
        if block.1 == BlockKind::U {
            let m = assign.iter().filter(|&&x| x == b).count();
            if m > 1 {
                prob = prob / BigRational::from_integer(factorial(m).into());
            }
        }
    }
    prob
}

/// Best rational approximation of `x` with denominator at most `max_den`,
/// via the continued-fraction convergent/semiconvergent construction.
pub fn rationalize(x: f64, max_den: u64) -> BigRational {
    assert!(max_den >= 1 && x.is_finite());
    let negative = x < 0.0;
    let x_abs = x.abs();
    // Convergents p/q of the continued fraction of x_abs.
    let (mut p0, mut q0, mut p1, mut q1) = (1i128, 0i128, x_abs.floor() as i128, 1i128);
    let mut frac = x_abs - x_abs.floor();
    while frac > 1e-15 {
        let r = 1.0 / frac;
        let a = r.floor() as i128;
        frac = r - r.floor();
        let (p2, q2) = (a * p1 + p0, a * q1 + q0);
        if q2 > max_den as i128 {
            // Take the best semiconvergent that still fits the bound.
            let t = (max_den as i128 - q0) / q1;
            let (ps, qs) = (t * p1 + p0, t * q1 + q0);
            let cand1 = BigRational::new(p1.into(), q1.into());
            let cand2 = BigRational::new(ps.into(), qs.into());
            let err1 = (Scalar::to_f64(&cand1) - x_abs).abs();
            let err2 = (Scalar::to_f64(&cand2) - x_abs).abs();
            let best = if qs > 0 && err2 < err1 { cand2 } else { cand1 };
            return if negative { -best } else { best };
        }
        (p0, q0, p1, q1) = (p1, q1, p2, q2);
    }
    let best = BigRational::new(p1.into(), q1.into());
    if negative {
        -best
    } else {
        best
    }
}
