//! Permutations in one-line notation, patterns, up–down signatures, and
//! lexicographic ranking.
//!
//! A [`Perm`] of length `k` maps positions `1..=k` to values `1..=k`; the text
//! form is space-separated one-line notation, e.g. `"2 3 1"`. Enumeration
//! helpers ([`Perm::enumerate`], [`Perm::rank`], [`Perm::unrank`]) are capped
//! at length [`MAX_ENUM_ARITY`] so dense `S_k` bitsets stay small; the type
//! itself supports arbitrary length (solution orderings can be long).

use std::fmt;
use std::str::FromStr;

use num::{BigInt, BigRational, One, Zero};
use thiserror::Error;

/// Largest length for which dense `S_k` enumeration (`rank`/`unrank`/
/// `enumerate`) is supported: `8! = 40_320` permutations.
pub const MAX_ENUM_ARITY: usize = 8;

/// Errors raised by permutation construction and enumeration.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PermError {
    /// The value vector is not a bijection on `1..=k`.
    #[error("not a permutation of 1..={0}")]
    InvalidPermutation(usize),
    /// Two points share an x- or y-coordinate, so no pattern is defined.
    #[error("duplicate coordinate in point set")]
    DuplicateCoordinate,
    /// Two permutations that must have equal length do not.
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    /// Requested enumeration length exceeds [`MAX_ENUM_ARITY`].
    #[error("arity {0} exceeds the enumeration cap {MAX_ENUM_ARITY}")]
    ArityTooLarge(usize),
    /// Rank outside `0..k!`.
    #[error("rank {rank} out of range for length {len}")]
    OutOfRange { len: usize, rank: u64 },
    /// Text form did not parse.
    #[error("invalid permutation text: {0}")]
    Parse(String),
}

/// A permutation in 1-based one-line notation: `values[i]` is the image of
/// position `i + 1`. Immutable after construction.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Perm {
    values: Vec<u32>,
}

impl Perm {
    /// Builds a permutation from 1-based values, validating bijectivity.
    pub fn new(values: Vec<u32>) -> Result<Self, PermError> {
        let k = values.len();
        let mut seen = vec![false; k];
        for &v in &values {
            if v == 0 || v as usize > k || seen[v as usize - 1] {
                return Err(PermError::InvalidPermutation(k));
            }
            seen[v as usize - 1] = true;
        }
        Ok(Perm { values })
    }

    /// The identity permutation of length `k`.
    pub fn identity(k: usize) -> Self {
        Perm {
            values: (1..=k as u32).collect(),
        }
    }

    /// The decreasing permutation `(k k-1 … 1)`.
    pub fn decreasing(k: usize) -> Self {
        Perm {
            values: (1..=k as u32).rev().collect(),
        }
    }

    /// Length `k` of the permutation.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when the permutation is empty (length zero).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Image of 1-based position `pos`.
    pub fn at(&self, pos: usize) -> u32 {
        self.values[pos - 1]
    }

    /// The underlying 1-based value vector.
    pub fn values(&self) -> &[u32] {
        &self.values
    }

    /// Pattern (order-isomorphism type) of a point set: sort by x, then rank
    /// the y-coordinates. Fails if any two points share a coordinate.
    pub fn pattern_of(points: &[(f64, f64)]) -> Result<Self, PermError> {
        let n = points.len();
        let mut by_x: Vec<usize> = (0..n).collect();
        by_x.sort_by(|&a, &b| points[a].0.partial_cmp(&points[b].0).unwrap());
        for w in by_x.windows(2) {
            if points[w[0]].0 == points[w[1]].0 {
                return Err(PermError::DuplicateCoordinate);
            }
        }
        let ys: Vec<f64> = by_x.iter().map(|&i| points[i].1).collect();
        let mut by_y: Vec<usize> = (0..n).collect();
        by_y.sort_by(|&a, &b| ys[a].partial_cmp(&ys[b]).unwrap());
        for w in by_y.windows(2) {
            if ys[w[0]] == ys[w[1]] {
                return Err(PermError::DuplicateCoordinate);
            }
        }
        let mut values = vec![0u32; n];
        for (rank, &i) in by_y.iter().enumerate() {
            values[i] = rank as u32 + 1;
        }
        Ok(Perm { values })
    }

    /// Pattern of the subsequence of `self` at the 1-based positions in `positions`
    /// (which need not be sorted; the pattern is taken in position order).
    pub fn pattern_at(&self, positions: &[usize]) -> Perm {
        let mut sorted: Vec<usize> = positions.to_vec();
        sorted.sort_unstable();
        let vals: Vec<u32> = sorted.iter().map(|&p| self.at(p)).collect();
        Perm::rank_values(&vals)
    }

    /// Replaces arbitrary distinct values by their ranks, yielding a pattern.
    pub fn rank_values(vals: &[u32]) -> Perm {
        let mut sorted: Vec<u32> = vals.to_vec();
        sorted.sort_unstable();
        let values = vals
            .iter()
            .map(|v| sorted.binary_search(v).unwrap() as u32 + 1)
            .collect();
        Perm { values }
    }

    /// Composition `(a ∘ b)(i) = a(b(i))`; both arguments must have equal length.
    pub fn compose(&self, b: &Perm) -> Result<Perm, PermError> {
        if self.len() != b.len() {
            return Err(PermError::LengthMismatch(self.len(), b.len()));
        }
        let values = b.values.iter().map(|&i| self.values[i as usize - 1]).collect();
        Ok(Perm { values })
    }

    /// The inverse permutation: `compose(a, inverse(a))` is the identity.
    pub fn inverse(&self) -> Perm {
        let mut values = vec![0u32; self.len()];
        for (i, &v) in self.values.iter().enumerate() {
            values[v as usize - 1] = i as u32 + 1;
        }
        Perm { values }
    }

    /// The up–down signature: bit `i` is true (an ascent, letter `u`) when the
    /// value at position `i + 2` exceeds the value at position `i + 1`.
    pub fn udsign(&self) -> UdSignature {
        let bits = self.values.windows(2).map(|w| w[1] > w[0]).collect();
        UdSignature { bits }
    }

    /// Lehmer-code lexicographic rank within `S_k` (0 for the identity).
    pub fn rank(&self) -> u64 {
        let k = self.len();
        let mut rank = 0u64;
        for i in 0..k {
            let smaller_later = self.values[i + 1..]
                .iter()
                .filter(|&&v| v < self.values[i])
                .count() as u64;
            rank = rank * (k - i) as u64 + smaller_later;
        }
        rank
    }

    /// Inverse of [`Perm::rank`]: the `r`-th permutation of `S_k` in
    /// lexicographic order, `0 ≤ r < k!`.
    pub fn unrank(k: usize, r: u64) -> Result<Perm, PermError> {
        if k == 0 || k > MAX_ENUM_ARITY {
            return Err(PermError::ArityTooLarge(k));
        }
        if r >= factorial(k) {
            return Err(PermError::OutOfRange { len: k, rank: r });
        }
        let mut digits = vec![0u64; k];
        let mut rem = r;
        for i in (0..k).rev() {
            let base = (k - i) as u64;
            digits[i] = rem % base;
            rem /= base;
        }
        let mut pool: Vec<u32> = (1..=k as u32).collect();
        let values = digits
            .iter()
            .map(|&d| pool.remove(d as usize))
            .collect();
        Ok(Perm { values })
    }

    /// All `k!` permutations of `S_k` in lexicographic order.
    pub fn enumerate(k: usize) -> Result<Vec<Perm>, PermError> {
        if k == 0 || k > MAX_ENUM_ARITY {
            return Err(PermError::ArityTooLarge(k));
        }
        (0..factorial(k)).map(|r| Perm::unrank(k, r)).collect()
    }

    /// Exact density of the pattern `rho` in `tau`: the fraction of
    /// `|rho|`-subsets of positions of `tau` inducing the pattern `rho`.
    pub fn pattern_density_in_perm(rho: &Perm, tau: &Perm) -> Result<BigRational, PermError> {
        let k = rho.len();
        let n = tau.len();
        if k > n {
            return Err(PermError::LengthMismatch(k, n));
        }
        if k == 0 {
            return Ok(BigRational::one());
        }
        let mut hits = BigInt::zero();
        let mut subset: Vec<usize> = (1..=k).collect();
        loop {
            if &tau.pattern_at(&subset) == rho {
                hits += 1;
            }
            // Advance to the next k-subset of [n] in lexicographic order.
            let mut i = k;
            loop {
                if i == 0 {
                    return Ok(BigRational::new(hits, binomial(n, k)));
                }
                i -= 1;
                if subset[i] < n - (k - 1 - i) {
                    subset[i] += 1;
                    for j in i + 1..k {
                        subset[j] = subset[j - 1] + 1;
                    }
                    break;
                }
            }
        }
    }
}

impl fmt::Display for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for v in &self.values {
            if !first {
                write!(f, " ")?;
            }
            write!(f, "{v}")?;
            first = false;
        }
        Ok(())
    }
}

impl fmt::Debug for Perm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({self})")
    }
}

impl FromStr for Perm {
    type Err = PermError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let values: Vec<u32> = s
            .split_whitespace()
            .map(|t| t.parse::<u32>().map_err(|_| PermError::Parse(s.to_string())))
            .collect::<Result<_, _>>()?;
        if values.is_empty() {
            return Err(PermError::Parse(s.to_string()));
        }
        Perm::new(values).map_err(|_| PermError::Parse(s.to_string()))
    }
}

/// The ascent/descent word of a permutation: `k − 1` letters, `u` (true) for
/// an ascent and `d` (false) for a descent.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct UdSignature {
    bits: Vec<bool>,
}

impl UdSignature {
    /// Builds a signature from explicit ascent bits.
    pub fn new(bits: Vec<bool>) -> Self {
        UdSignature { bits }
    }

    /// The ascent bits; length is permutation length minus one.
    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    /// Number of letters (`k − 1`).
    pub fn len(&self) -> usize {
        self.bits.len()
    }

    /// True for the empty signature (of a singleton permutation).
    pub fn is_empty(&self) -> bool {
        self.bits.is_empty()
    }

    /// The ±1 form: `u ↦ +1`, `d ↦ −1`.
    pub fn plus_minus(&self) -> Vec<i64> {
        self.bits.iter().map(|&b| if b { 1 } else { -1 }).collect()
    }

    /// All `2^(k−1)` signatures of length `k − 1`, in lexicographic order with
    /// `d < u` false-first (i.e. by the bit pattern).
    pub fn all(k: usize) -> Vec<UdSignature> {
        assert!(k >= 1);
        let m = k - 1;
        (0..(1u32 << m))
            .map(|mask| UdSignature {
                bits: (0..m).map(|i| mask >> i & 1 == 1).collect(),
            })
            .collect()
    }

    /// Some permutation with this signature. Built incrementally: an ascent
    /// appends a new maximum; a descent appends a copy of the current last
    /// value after shifting up everything at or above it.
    pub fn representative(&self) -> Perm {
        let mut values: Vec<u32> = vec![1];
        for &up in &self.bits {
            let next = values.len() as u32 + 1;
            if up {
                values.push(next);
            } else {
                let last = *values.last().unwrap();
                for v in values.iter_mut() {
                    if *v >= last {
                        *v += 1;
                    }
                }
                values.push(last);
            }
        }
        Perm::new(values).expect("constructed sequence is a permutation")
    }

    /// Parses a word like `"uud"`.
    pub fn parse(word: &str) -> Result<Self, PermError> {
        let bits = word
            .chars()
            .map(|c| match c {
                'u' => Ok(true),
                'd' => Ok(false),
                _ => Err(PermError::Parse(word.to_string())),
            })
            .collect::<Result<_, _>>()?;
        Ok(UdSignature { bits })
    }
}

impl fmt::Display for UdSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for &b in &self.bits {
            write!(f, "{}", if b { 'u' } else { 'd' })?;
        }
        Ok(())
    }
}

impl fmt::Debug for UdSignature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self}")
    }
}

/// `k!` as `u64`; valid for `k ≤ 20`.
pub fn factorial(k: usize) -> u64 {
    (1..=k as u64).product()
}

/// Exact binomial coefficient `C(n, k)` as a big integer.
pub fn binomial(n: usize, k: usize) -> BigInt {
    if k > n {
        return BigInt::zero();
    }
    let mut acc = BigInt::one();
    for i in 0..k {
        acc = acc * BigInt::from(n - i) / BigInt::from(i + 1);
    }
    acc
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Perm {
        s.parse().unwrap()
    }

    #[test]
    fn pattern_of_examples() {
        let pts = [(1.0, 3.0), (2.0, 1.0), (3.0, 4.0), (4.0, 2.0)];
        assert_eq!(Perm::pattern_of(&pts).unwrap(), p("3 1 4 2"));
        assert_eq!(Perm::pattern_of(&[(0.5, 0.9)]).unwrap(), p("1"));
        assert_eq!(Perm::pattern_of(&[(2.0, 0.1), (1.0, 0.7)]).unwrap(), p("2 1"));
        assert_eq!(
            Perm::pattern_of(&[(1.0, 0.5), (1.0, 0.7)]),
            Err(PermError::DuplicateCoordinate)
        );
    }

    #[test]
    fn compose_and_inverse() {
        assert_eq!(Perm::identity(3).compose(&p("2 3 1")).unwrap(), p("2 3 1"));
        assert_eq!(p("2 3 1").compose(&p("3 1 2")).unwrap(), p("1 2 3"));
        assert_eq!(p("2 1").compose(&p("2 1")).unwrap(), p("1 2"));
        assert_eq!(p("2 3 1").inverse(), p("3 1 2"));
        assert_eq!(p("1 2 3 4").inverse(), p("1 2 3 4"));
        assert_eq!(p("2 3 4 1").inverse(), p("4 1 2 3"));
    }

    #[test]
    fn udsign_examples() {
        assert_eq!(p("1 5 2 4 3").udsign().to_string(), "udud");
        assert_eq!(p("1 2 3 4").udsign().to_string(), "uuu");
        assert_eq!(p("4 1 2 3").udsign().to_string(), "duu");
    }

    #[test]
    fn rank_unrank() {
        assert_eq!(p("1 2 3").rank(), 0);
        assert_eq!(p("3 2 1").rank(), 5);
        assert_eq!(Perm::unrank(3, 2).unwrap(), p("2 1 3"));
        for k in 1..=6 {
            for (r, q) in Perm::enumerate(k).unwrap().into_iter().enumerate() {
                assert_eq!(q.rank(), r as u64);
                assert_eq!(Perm::unrank(k, r as u64).unwrap(), q);
            }
        }
        assert!(Perm::unrank(3, 6).is_err());
        assert!(Perm::enumerate(9).is_err());
    }

    #[test]
    fn enumerate_counts_and_order() {
        assert_eq!(Perm::enumerate(1).unwrap(), vec![p("1")]);
        assert_eq!(Perm::enumerate(2).unwrap(), vec![p("1 2"), p("2 1")]);
        assert_eq!(Perm::enumerate(4).unwrap().len(), 24);
        let all = Perm::enumerate(4).unwrap();
        assert!(all.windows(2).all(|w| w[0].values() < w[1].values()));
    }

    #[test]
    fn pattern_density_examples() {
        let one = BigRational::one();
        assert_eq!(
            Perm::pattern_density_in_perm(&p("1 2"), &p("1 2 3")).unwrap(),
            one
        );
        assert_eq!(
            Perm::pattern_density_in_perm(&p("2 1"), &p("1 2 3")).unwrap(),
            BigRational::zero()
        );
        assert_eq!(
            Perm::pattern_density_in_perm(&p("1 2"), &p("2 1 3")).unwrap(),
            BigRational::new(2.into(), 3.into())
        );
        assert!(Perm::pattern_density_in_perm(&p("1 2 3"), &p("1 2")).is_err());
    }

    #[test]
    fn density_normalizes_over_patterns() {
        // Independent oracle for the normalization invariant: densities of all
        // patterns of a fixed size sum to one.
        for tau in ["3 1 4 2 5", "5 4 3 2 1", "2 4 1 5 3"] {
            let tau = p(tau);
            for k in 1..=4 {
                let total: BigRational = Perm::enumerate(k)
                    .unwrap()
                    .iter()
                    .map(|rho| Perm::pattern_density_in_perm(rho, &tau).unwrap())
                    .sum();
                assert_eq!(total, BigRational::one());
            }
        }
    }

    #[test]
    fn pattern_of_graph_roundtrip() {
        for s in ["2 3 1", "1", "4 2 1 3", "2 1"] {
            let a = p(s);
            let pts: Vec<(f64, f64)> = (1..=a.len())
                .map(|i| (i as f64, a.at(i) as f64))
                .collect();
            assert_eq!(Perm::pattern_of(&pts).unwrap(), a);
        }
    }

    #[test]
    fn signature_representative_roundtrip() {
        for k in 1..=6 {
            for s in UdSignature::all(k) {
                let q = s.representative();
                assert_eq!(q.len(), k);
                assert_eq!(q.udsign(), s);
            }
        }
    }

    #[test]
    fn text_roundtrip() {
        for s in ["2 3 1", "1", "4 2 1 3"] {
            assert_eq!(p(s).to_string(), s);
        }
        assert!("0 1".parse::<Perm>().is_err());
        assert!("1 1".parse::<Perm>().is_err());
        assert!("".parse::<Perm>().is_err());
    }
}
