//! A small flag algebra for T-permutons modulo the signature ideal.
//!
//! A *flag* is a permutation with a set of labeled positions; its *type* is
//! the pattern of the labeled entries. Typed sums are formal rational
//! combinations of flags of one type, reduced modulo the ideal generated by
//! differences of flags with equal up–down signature and equal partition
//! vector — exactly the differences that vanish in every tagged T-permuton.
//! The module provides shuffle-based multiplication, the averaging operator
//! `⟦·⟧`, and exact flag densities in tagged ID combinations; together these
//! prove the degree-5 sum-of-squares identity behind the `(uu) + (dd) ≥ 1/3`
//! bound used by the arity-3 upper-bound rules.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use itertools::Itertools;
use num::{BigInt, BigRational, One, Zero};
use thiserror::Error;

use crate::idu::{BlockKind, IduCombination};
use crate::perm::{binomial, Perm, UdSignature};

/// Hard cap on the size of any permutation produced by the algebra.
pub const MAX_DEGREE: usize = 6;

/// Errors raised by flag-algebra operations.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum FlagError {
    /// The two operands have different types.
    #[error("flags have different types")]
    TypeMismatch,
    /// The common elements of the two sequences appear in different orders.
    #[error("common elements appear in different orders")]
    InconsistentCommonOrder,
    /// The labeled points are inconsistent with the flag's type or the combo.
    #[error("inconsistent tag: {0}")]
    InconsistentTag(String),
    /// Tagged densities are defined for ID combinations only.
    #[error("combination contains a uniform block")]
    UniformBlock,
    /// The operation would produce permutations above [`MAX_DEGREE`].
    #[error("degree {0} exceeds the cap {MAX_DEGREE}")]
    TooLarge(usize),
    /// Malformed flag text.
    #[error("parse error: {0}")]
    Parse(String),
    /// Label positions out of range or duplicated.
    #[error("invalid label positions")]
    InvalidLabels,
}

/// A flag: a permutation together with a sorted set of labeled positions.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Flag {
    perm: Perm,
    labels: Vec<usize>,
}

impl Flag {
    /// Builds a flag; `labels` are 1-based positions into `perm`.
    pub fn new(perm: Perm, labels: &[usize]) -> Result<Self, FlagError> {
        let mut labels = labels.to_vec();
        labels.sort_unstable();
        if labels.windows(2).any(|w| w[0] == w[1])
            || labels.iter().any(|&p| p < 1 || p > perm.len())
        {
            return Err(FlagError::InvalidLabels);
        }
        Ok(Flag { perm, labels })
    }

    /// A flag with no labeled positions (type ∅).
    pub fn unlabeled(perm: Perm) -> Self {
        Flag {
            perm,
            labels: Vec::new(),
        }
    }

    /// The underlying permutation.
    pub fn perm(&self) -> &Perm {
        &self.perm
    }

    /// Labeled positions, sorted ascending (1-based).
    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    /// Length of the underlying permutation.
    pub fn size(&self) -> usize {
        self.perm.len()
    }

    /// Number of labeled positions.
    pub fn label_count(&self) -> usize {
        self.labels.len()
    }

    /// The type: the pattern of the values at the labeled positions.
    pub fn tau(&self) -> Perm {
        if self.labels.is_empty() {
            Perm::new(Vec::new()).expect("empty permutation")
        } else {
            self.perm.pattern_at(&self.labels)
        }
    }

    /// The partition vector: sizes of the `k + 1` value blocks cut out by the
    /// labeled values.
    pub fn partition_vector(&self) -> PartitionVector {
        let n = self.perm.len();
        let mut vals: Vec<u32> = self.labels.iter().map(|&p| self.perm.at(p)).collect();
        vals.sort_unstable();
        let mut parts = Vec::with_capacity(vals.len() + 1);
        let mut prev = 0u32;
        for &v in &vals {
            parts.push((v - prev - 1) as usize);
            prev = v;
        }
        parts.push(n - prev as usize);
        PartitionVector(parts)
    }

    /// The quotient key (up–down signature, partition vector): two flags with
    /// equal keys have equal densities in every tagged T-permuton.
    pub fn quotient_key(&self) -> QuotientKey {
        QuotientKey {
            sig: self.perm.udsign(),
            partv: self.partition_vector(),
        }
    }
}

impl fmt::Display for Flag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = (1..=self.perm.len())
            .map(|p| {
                let v = self.perm.at(p);
                if self.labels.contains(&p) {
                    format!("[{v}]")
                } else {
                    v.to_string()
                }
            })
            .collect();
        write!(f, "{}", parts.join(" "))
    }
}

impl FromStr for Flag {
    type Err = FlagError;

    /// Parses `"1 3 [2] 5 [4]"`: whitespace-separated values with labeled
    /// positions in brackets.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let mut values = Vec::new();
        let mut labels = Vec::new();
        for (idx, token) in s.split_whitespace().enumerate() {
            let (body, labeled) = match token.strip_prefix('[') {
                Some(rest) => (
                    rest.strip_suffix(']')
                        .ok_or_else(|| FlagError::Parse(format!("unclosed bracket in {token:?}")))?,
                    true,
                ),
                None => (token, false),
            };
            let v: u32 = body
                .parse()
                .map_err(|_| FlagError::Parse(format!("bad value {body:?}")))?;
            values.push(v);
            if labeled {
                labels.push(idx + 1);
            }
        }
        let perm =
            Perm::new(values).map_err(|e| FlagError::Parse(format!("not a permutation: {e}")))?;
        Flag::new(perm, &labels)
    }
}

/// Sizes of the `k + 1` value blocks between the labeled values of a flag.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PartitionVector(Vec<usize>);

impl PartitionVector {
    /// The block sizes, in value order.
    pub fn parts(&self) -> &[usize] {
        &self.0
    }

    /// Entrywise sum; both vectors must cut out the same number of blocks.
    pub fn add(&self, other: &PartitionVector) -> Result<PartitionVector, FlagError> {
        if self.0.len() != other.0.len() {
            return Err(FlagError::TypeMismatch);
        }
        Ok(PartitionVector(
            self.0.iter().zip(&other.0).map(|(a, b)| a + b).collect(),
        ))
    }
}

/// Key of the quotient by the signature ideal: flags with equal keys are
/// identified.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct QuotientKey {
    /// Up–down signature of the whole permutation.
    pub sig: UdSignature,
    /// Partition vector of the flag.
    pub partv: PartitionVector,
}

/// Multinomial coefficient `‖v‖₁! / ∏ vᵢ!` as an exact rational.
pub fn multinomial(parts: &[usize]) -> BigRational {
    let total: usize = parts.iter().sum();
    let mut value = BigInt::one();
    let mut rest = total;
    for &p in parts {
        value *= binomial(rest, p);
        rest -= p;
    }
    BigRational::from_integer(value)
}

/// A formal rational combination of flags of one type, reduced modulo the
/// signature ideal: one representative flag (the lexicographically smallest
/// seen) per quotient key.
#[derive(Debug, Clone)]
pub struct TypedSum {
    tau: Perm,
    terms: BTreeMap<QuotientKey, (Flag, BigRational)>,
}

impl TypedSum {
    /// The empty sum of the given type.
    pub fn zero(tau: Perm) -> Self {
        TypedSum {
            tau,
            terms: BTreeMap::new(),
        }
    }

    /// A single flag with coefficient 1.
    pub fn from_flag(flag: &Flag) -> Self {
        let mut sum = TypedSum::zero(flag.tau());
        sum.add_term(flag.clone(), BigRational::one())
            .expect("type matches by construction");
        sum
    }

    /// The common type of every flag in the sum.
    pub fn tau(&self) -> &Perm {
        &self.tau
    }

    /// Adds `c · flag`, merging with any key-equivalent term.
    pub fn add_term(&mut self, flag: Flag, c: BigRational) -> Result<(), FlagError> {
        if flag.tau() != self.tau {
            return Err(FlagError::TypeMismatch);
        }
        let key = flag.quotient_key();
        match self.terms.entry(key) {
            std::collections::btree_map::Entry::Vacant(e) => {
                e.insert((flag, c));
            }
            std::collections::btree_map::Entry::Occupied(mut e) => {
                let (rep, coeff) = e.get_mut();
                if flag < *rep {
                    *rep = flag;
                }
                *coeff += c;
                if e.get().1.is_zero() {
                    e.remove();
                }
            }
        }
        Ok(())
    }

    /// Sum of two typed sums of the same type.
    pub fn add(&self, other: &TypedSum) -> Result<TypedSum, FlagError> {
        if self.tau != other.tau {
            return Err(FlagError::TypeMismatch);
        }
        let mut out = self.clone();
        for (flag, c) in other.terms.values() {
            out.add_term(flag.clone(), c.clone())?;
        }
        Ok(out)
    }

    /// Difference of two typed sums of the same type.
    pub fn sub(&self, other: &TypedSum) -> Result<TypedSum, FlagError> {
        self.add(&other.scale(&-BigRational::one()))
    }

    /// The sum scaled by a rational constant.
    pub fn scale(&self, c: &BigRational) -> TypedSum {
        if c.is_zero() {
            return TypedSum::zero(self.tau.clone());
        }
        TypedSum {
            tau: self.tau.clone(),
            terms: self
                .terms
                .iter()
                .map(|(k, (f, w))| (k.clone(), (f.clone(), w * c)))
                .collect(),
        }
    }

    /// Iterates `(key, representative, coefficient)` over nonzero terms.
    pub fn terms(&self) -> impl Iterator<Item = (&QuotientKey, &Flag, &BigRational)> {
        self.terms.iter().map(|(k, (f, c))| (k, f, c))
    }

    /// The coefficient of a quotient key (zero when absent).
    pub fn coefficient(&self, key: &QuotientKey) -> BigRational {
        self.terms
            .get(key)
            .map(|(_, c)| c.clone())
            .unwrap_or_else(BigRational::zero)
    }

    /// True when every coefficient is zero.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl PartialEq for TypedSum {
    /// Equality modulo the ideal: same type, same coefficient per quotient
    /// key. Representatives are ignored.
    fn eq(&self, other: &Self) -> bool {
        self.tau == other.tau
            && self.terms.len() == other.terms.len()
            && self
                .terms
                .iter()
                .all(|(k, (_, c))| other.terms.get(k).map(|(_, d)| d) == Some(c))
    }
}

impl fmt::Display for TypedSum {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return write!(f, "0");
        }
        let parts: Vec<String> = self
            .terms
            .values()
            .map(|(flag, c)| format!("{c} * ({flag})"))
            .collect();
        write!(f, "{}", parts.join(" + "))
    }
}

/// Enumerates every y-shuffle of two flags of a common type: pairs of
/// value-disjoint realizations `(X, Y)` over `[n₁ + n₂ − k]` that agree
/// exactly on the labeled entries.
pub fn y_shuffles(f1: &Flag, f2: &Flag) -> Result<Vec<(Vec<u32>, Vec<u32>)>, FlagError> {
    if f1.tau() != f2.tau() {
        return Err(FlagError::TypeMismatch);
    }
    let (n1, n2, k) = (f1.size(), f2.size(), f1.label_count());
    let n = n1 + n2 - k;
    let realize = |sorted_vals: &[u32], perm: &Perm| -> Vec<u32> {
        (1..=perm.len())
            .map(|p| sorted_vals[perm.at(p) as usize - 1])
            .collect()
    };
    let mut out = Vec::new();
    for a in (1..=n as u32).combinations(n1) {
        let x = realize(&a, f1.perm());
        let shared: Vec<u32> = f1.labels().iter().map(|&p| x[p - 1]).collect();
        let mut b: Vec<u32> = (1..=n as u32)
            .filter(|v| !a.contains(v) || shared.contains(v))
            .collect();
        b.sort_unstable();
        if b.len() != n2 {
            continue;
        }
        let y = realize(&b, f2.perm());
        if f2
            .labels()
            .iter()
            .zip(&shared)
            .all(|(&p, &v)| y[p - 1] == v)
        {
            out.push((x, y));
        }
    }
    Ok(out)
}

/// Enumerates every x-shuffle of `(X, Y)`: interleavings preserving both
/// orders in which the common elements appear once; the labeled positions of
/// the result are the positions of the common elements.
pub fn x_shuffles(x: &[u32], y: &[u32]) -> Result<Vec<Flag>, FlagError> {
    let common_x: Vec<u32> = x.iter().copied().filter(|v| y.contains(v)).collect();
    let common_y: Vec<u32> = y.iter().copied().filter(|v| x.contains(v)).collect();
    if common_x != common_y {
        return Err(FlagError::InconsistentCommonOrder);
    }
    let is_common = |v: u32| common_x.contains(&v);
    let mut out = Vec::new();
    let mut z: Vec<u32> = Vec::with_capacity(x.len() + y.len() - common_x.len());
    fn rec(
        x: &[u32],
        y: &[u32],
        xi: usize,
        yi: usize,
        is_common: &dyn Fn(u32) -> bool,
        z: &mut Vec<u32>,
        out: &mut Vec<Flag>,
    ) {
        if xi == x.len() && yi == y.len() {
            let labels: Vec<usize> = z
                .iter()
                .enumerate()
                .filter(|(_, &v)| is_common(v))
                .map(|(i, _)| i + 1)
                .collect();
            let flag = Flag::new(Perm::rank_values(z), &labels).expect("positions in range");
            out.push(flag);
            return;
        }
        if xi < x.len() && yi < y.len() && x[xi] == y[yi] {
            z.push(x[xi]);
            rec(x, y, xi + 1, yi + 1, is_common, z, out);
            z.pop();
        }
        if xi < x.len() && !is_common(x[xi]) {
            z.push(x[xi]);
            rec(x, y, xi + 1, yi, is_common, z, out);
            z.pop();
        }
        if yi < y.len() && !is_common(y[yi]) {
            z.push(y[yi]);
            rec(x, y, xi, yi + 1, is_common, z, out);
            z.pop();
        }
    }
    rec(x, y, 0, 0, &is_common, &mut z, &mut out);
    Ok(out)
}

/// Product of two flags modulo the signature ideal: the x-shuffles of one
/// y-shuffle, each weighted by `M(∂v₁) M(∂v₂) / M(∂v₁ + ∂v₂)`, reduced by
/// quotient keys. Any y-shuffle yields the same reduced sum.
pub fn product_mod_n(f1: &Flag, f2: &Flag) -> Result<TypedSum, FlagError> {
    if f1.tau() != f2.tau() {
        return Err(FlagError::TypeMismatch);
    }
    let n = f1.size() + f2.size() - f1.label_count();
    if n > MAX_DEGREE {
        return Err(FlagError::TooLarge(n));
    }
    let shuffles = y_shuffles(f1, f2)?;
    let (x, y) = shuffles.first().expect("same-type flags always shuffle");
    let v1 = f1.partition_vector();
    let v2 = f2.partition_vector();
    let c = multinomial(v1.parts()) * multinomial(v2.parts())
        / multinomial(v1.add(&v2)?.parts());
    let mut sum = TypedSum::zero(f1.tau());
    for flag in x_shuffles(x, y)? {
        sum.add_term(flag, c.clone())?;
    }
    Ok(sum)
}

/// The averaging operator `⟦·⟧`: every flag is unlabeled and scaled by
/// `1 / C(n, k)`; the result is a type-∅ sum reduced by signature classes.
pub fn average(ts: &TypedSum) -> TypedSum {
    let mut out = TypedSum::zero(Perm::new(Vec::new()).expect("empty permutation"));
    for (_, flag, c) in ts.terms() {
        let weight = c / BigRational::from_integer(binomial(flag.size(), flag.label_count()));
        out.add_term(Flag::unlabeled(flag.perm().clone()), weight)
            .expect("type ∅ accepts every unlabeled flag");
    }
    out
}

/// Rewrites the constant `c` as a degree-`n` type-∅ sum: `c · Σ_{σ ∈ S_n} σ`,
/// which reduces to the signature classes weighted by their sizes.
pub fn express_constant(c: &BigRational, n: usize) -> Result<TypedSum, FlagError> {
    if n > MAX_DEGREE {
        return Err(FlagError::TooLarge(n));
    }
    let mut out = TypedSum::zero(Perm::new(Vec::new()).expect("empty permutation"));
    if c.is_zero() {
        return Ok(out);
    }
    for sigma in Perm::enumerate(n).expect("n ≤ 6") {
        out.add_term(Flag::unlabeled(sigma), c.clone())?;
    }
    Ok(out)
}

/// Labeled points of a tagged ID combination, given as strictly increasing
/// position coordinates in `(0, 1)`; the matching value coordinate of each
/// point is determined by the block it falls in.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Tag {
    xs: Vec<BigRational>,
}

impl Tag {
    /// Validates strict increase and the open interval `(0, 1)`.
    pub fn new(xs: Vec<BigRational>) -> Result<Self, FlagError> {
        let zero = BigRational::zero();
        let one = BigRational::one();
        if xs.iter().any(|x| *x <= zero || *x >= one) {
            return Err(FlagError::InconsistentTag(
                "coordinates must lie strictly inside (0, 1)".into(),
            ));
        }
        if xs.windows(2).any(|w| w[0] >= w[1]) {
            return Err(FlagError::InconsistentTag(
                "coordinates must be strictly increasing".into(),
            ));
        }
        Ok(Tag { xs })
    }

    /// The empty tag (type ∅).
    pub fn empty() -> Self {
        Tag { xs: Vec::new() }
    }

    /// The position coordinates.
    pub fn coordinates(&self) -> &[BigRational] {
        &self.xs
    }
}

/// Exact density of a flag in a tagged ID combination: the probability that
/// sampling the unlabeled points and merging them with the tag yields exactly
/// this flag. Evaluates
/// `M(∂v) · ∏ zᵢ^{∂vᵢ} · Σ_f ∏_{unlabeled} f(i)`
/// over weakly increasing block assignments `f` whose equal-block runs ascend
/// in I blocks and descend in D blocks, with the labeled positions pinned to
/// the blocks of the tag points.
pub fn density_in_tagged_combo(
    flag: &Flag,
    combo: &IduCombination<BigRational>,
    tag: &Tag,
) -> Result<BigRational, FlagError> {
    if !combo.is_id_only() {
        return Err(FlagError::UniformBlock);
    }
    let k = flag.label_count();
    if tag.xs.len() != k {
        return Err(FlagError::InconsistentTag(format!(
            "expected {k} labeled points, got {}",
            tag.xs.len()
        )));
    }
    // Locate each tag point's block and its value coordinate on the support.
    let blocks = combo.blocks();
    let mut bounds = Vec::with_capacity(blocks.len() + 1);
    let mut acc = BigRational::zero();
    bounds.push(acc.clone());
    for (w, _) in blocks {
        acc += w;
        bounds.push(acc.clone());
    }
    let mut gs = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    for x in &tag.xs {
        let t = match (0..blocks.len()).find(|&t| *x < bounds[t + 1]) {
            Some(t) if *x > bounds[t] => t,
            _ => {
                return Err(FlagError::InconsistentTag(
                    "point on a block boundary".into(),
                ))
            }
        };
        let value = match blocks[t].1 {
            BlockKind::I => x.clone(),
            BlockKind::D => &bounds[t] + &bounds[t + 1] - x,
            BlockKind::U => unreachable!("rejected above"),
        };
        gs.push(t);
        values.push(value);
    }
    let mut sorted_values = values.clone();
    sorted_values.sort();
    if sorted_values.windows(2).any(|w| w[0] == w[1]) {
        return Err(FlagError::InconsistentTag(
            "two points share a value coordinate".into(),
        ));
    }
    // The tag's pattern must match the flag's type.
    let pattern: Vec<u32> = values
        .iter()
        .map(|v| sorted_values.iter().position(|w| w == v).unwrap() as u32 + 1)
        .collect();
    if Perm::new(pattern).expect("ranks form a permutation") != flag.tau() {
        return Err(FlagError::InconsistentTag(
            "tag pattern differs from the flag's type".into(),
        ));
    }
    // Prefactor: the labeled values cut (0, 1) into k + 1 segments whose
    // lengths are raised to the block sizes of the partition vector.
    let partv = flag.partition_vector();
    let mut prefactor = multinomial(partv.parts());
    let mut prev = BigRational::zero();
    for (i, v) in sorted_values
        .iter()
        .chain(std::iter::once(&BigRational::one()))
        .enumerate()
    {
        let z = v - &prev;
        prefactor *= num::pow::pow(z, partv.parts()[i]);
        prev = v.clone();
    }
    // Sum over block assignments, weakly increasing in position; the labeled
    // positions are forced to the blocks of their tag points.
    let n = flag.size();
    let forced: Vec<Option<usize>> = (1..=n)
        .map(|p| {
            flag.labels()
                .iter()
                .position(|&l| l == p)
                .map(|idx| gs[idx])
        })
        .collect();
    fn assignments(
        pos: usize,
        band: usize,
        flag: &Flag,
        blocks: &[(BigRational, BlockKind)],
        forced: &[Option<usize>],
        acc: &BigRational,
        total: &mut BigRational,
    ) {
        let n = flag.size();
        if pos > n {
            *total += acc;
            return;
        }
        let run_ok = |b: usize| -> bool {
            if pos == 1 {
                return true;
            }
            // Runs of equal blocks are consecutive; check against the
            // previous position only when it shares the block.
            let prev_band_matches = {
                // Reconstruct previous band lazily: callers pass `band` as
                // the band of position pos − 1 (0 at the start).
                b == band && pos > 1
            };
            if !prev_band_matches {
                return true;
            }
            let ascent = flag.perm().at(pos - 1) < flag.perm().at(pos);
            match blocks[b].1 {
                BlockKind::I => ascent,
                BlockKind::D => !ascent,
                BlockKind::U => unreachable!("rejected above"),
            }
        };
        let start = if pos == 1 { 0 } else { band };
        for b in start..blocks.len() {
            if let Some(g) = forced[pos - 1] {
                if g != b {
                    continue;
                }
            }
            if !run_ok(b) {
                continue;
            }
            let next_acc = if forced[pos - 1].is_some() {
                acc.clone()
            } else {
                acc * &blocks[b].0
            };
            assignments(pos + 1, b, flag, blocks, forced, &next_acc, total);
        }
    }
    let mut total = BigRational::zero();
    assignments(1, 0, flag, blocks, &forced, &BigRational::one(), &mut total);
    Ok(prefactor * total)
}

/// Density of a typed sum: the coefficient-weighted sum of representative
/// densities (well defined because key-equivalent flags have equal densities).
pub fn density_of_sum(
    ts: &TypedSum,
    combo: &IduCombination<BigRational>,
    tag: &Tag,
) -> Result<BigRational, FlagError> {
    let mut total = BigRational::zero();
    for (_, flag, c) in ts.terms() {
        total += c * density_in_tagged_combo(flag, combo, tag)?;
    }
    Ok(total)
}
