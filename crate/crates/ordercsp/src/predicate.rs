//! Ordering predicates as explicit Sat-sets over `S_k`, their L/R/ε
//! relaxations, tractability classification, and canonical forms under the
//! variable-renaming + duality group.
//!
//! A predicate of arity `k` is stored as a bitset over `S_k` indexed by
//! [`Perm::rank`]: bit `r` is set iff `Perm::unrank(k, r)` satisfies the
//! predicate. A permutation `π` is a member iff assigning variable `x_i`
//! position `π(i)` satisfies the formula; e.g. the chain `x4 < x1 < x2 < x3`
//! has the single member `(2 3 4 1)` — the permutation placing `x4` first.

use std::collections::HashSet;
use std::fmt;

use num::BigRational;
use thiserror::Error;

use crate::perm::{factorial, Perm, PermError, MAX_ENUM_ARITY};

/// Errors raised by predicate construction and classification.
#[derive(Debug, Error, PartialEq, Eq)]
pub enum PredicateError {
    /// A permutation's length does not match the declared arity.
    #[error("arity mismatch: expected {expected}, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    /// A chain refers to an argument index outside `1..=k`.
    #[error("argument index {0} out of range for arity {1}")]
    BadIndex(usize, usize),
    /// The operation is undefined for the always-false predicate.
    #[error("operation requires a nonempty Sat set")]
    EmptySat,
    /// Arity outside the supported range `1..=8`.
    #[error("arity {0} exceeds the enumeration cap {MAX_ENUM_ARITY}")]
    ArityTooLarge(usize),
    /// Predicate file text did not parse.
    #[error("parse error: {0}")]
    Parse(String),
}

impl From<PermError> for PredicateError {
    fn from(e: PermError) -> Self {
        PredicateError::Parse(e.to_string())
    }
}

/// A single chain `x_{i1} < x_{i2} < … < x_{it}` over distinct 1-based
/// argument indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainClause {
    positions: Vec<usize>,
}

impl ChainClause {
    /// Builds a chain, validating distinctness and range (`arity` bound).
    pub fn new(positions: Vec<usize>, arity: usize) -> Result<Self, PredicateError> {
        if positions.len() < 2 {
            return Err(PredicateError::Parse(
                "chain needs at least two indices".into(),
            ));
        }
        let mut seen = HashSet::new();
        for &p in &positions {
            if p == 0 || p > arity {
                return Err(PredicateError::BadIndex(p, arity));
            }
            if !seen.insert(p) {
                return Err(PredicateError::BadIndex(p, arity));
            }
        }
        Ok(ChainClause { positions })
    }

    /// The chained argument indices, in chain order.
    pub fn positions(&self) -> &[usize] {
        &self.positions
    }

    /// True when `pi` orders the chained arguments as required.
    pub fn satisfied_by(&self, pi: &Perm) -> bool {
        self.positions
            .windows(2)
            .all(|w| pi.at(w[0]) < pi.at(w[1]))
    }
}

/// A Not-First atom: `x_head` is not the minimum among `{x_head} ∪ others`.
/// The dual Not-Last atom reads: not the maximum.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct NotFirstAtom {
    head: usize,
    others: Vec<usize>,
}

impl NotFirstAtom {
    /// Builds an atom; `others` must be nonempty and exclude `head`.
    pub fn new(head: usize, mut others: Vec<usize>) -> Self {
        others.sort_unstable();
        others.dedup();
        assert!(!others.is_empty() && !others.contains(&head));
        NotFirstAtom { head, others }
    }

    /// The distinguished argument.
    pub fn head(&self) -> usize {
        self.head
    }

    /// The comparison set (sorted, distinct, never containing `head`).
    pub fn others(&self) -> &[usize] {
        &self.others
    }

    /// Not-First satisfaction: `π(head) > min π(others)`.
    pub fn satisfied_not_first(&self, pi: &Perm) -> bool {
        let m = self.others.iter().map(|&j| pi.at(j)).min().unwrap();
        pi.at(self.head) > m
    }

    /// Not-Last satisfaction: `π(head) < max π(others)`.
    pub fn satisfied_not_last(&self, pi: &Perm) -> bool {
        let m = self.others.iter().map(|&j| pi.at(j)).max().unwrap();
        pi.at(self.head) < m
    }
}

/// An ordering predicate of arity `k` given by its Sat bitset over `S_k`.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct Predicate {
    arity: usize,
    sat: Vec<u64>,
}

fn words_for(k: usize) -> usize {
    (factorial(k) as usize).div_ceil(64)
}

impl Predicate {
    fn empty_sat(arity: usize) -> Result<Self, PredicateError> {
        if arity == 0 || arity > MAX_ENUM_ARITY {
            return Err(PredicateError::ArityTooLarge(arity));
        }
        Ok(Predicate {
            arity,
            sat: vec![0u64; words_for(arity)],
        })
    }

    /// Builds a predicate from an explicit list of satisfying permutations.
    /// Duplicates are silently deduplicated (the bitset absorbs them).
    pub fn from_sat_list(arity: usize, perms: &[Perm]) -> Result<Self, PredicateError> {
        let mut p = Predicate::empty_sat(arity)?;
        for q in perms {
            if q.len() != arity {
                return Err(PredicateError::ArityMismatch {
                    expected: arity,
                    got: q.len(),
                });
            }
            p.insert(q);
        }
        Ok(p)
    }

    /// Builds a predicate from disjunctive normal form: each disjunct is a
    /// conjunction of chains; `Sat` is the union over disjuncts of the
    /// permutations satisfying every chain of the disjunct.
    pub fn from_dnf(arity: usize, disjuncts: &[Vec<ChainClause>]) -> Result<Self, PredicateError> {
        let mut p = Predicate::empty_sat(arity)?;
        for q in Perm::enumerate(arity)? {
            if disjuncts
                .iter()
                .any(|conj| conj.iter().all(|c| c.satisfied_by(&q)))
            {
                p.insert(&q);
            }
        }
        Ok(p)
    }

    /// The always-true predicate of the given arity.
    pub fn always_true(arity: usize) -> Result<Self, PredicateError> {
        let mut p = Predicate::empty_sat(arity)?;
        for q in Perm::enumerate(arity)? {
            p.insert(&q);
        }
        Ok(p)
    }

    /// The always-false predicate of the given arity.
    pub fn always_false(arity: usize) -> Result<Self, PredicateError> {
        Predicate::empty_sat(arity)
    }

    /// Betweenness: `x2` lies between `x1` and `x3` (Sat `{123, 321}`).
    pub fn betweenness() -> Self {
        Predicate::from_sat_list(3, &["1 2 3".parse().unwrap(), "3 2 1".parse().unwrap()])
            .unwrap()
    }

    /// The binary less-than predicate (Sat `{12}`).
    pub fn less_than() -> Self {
        Predicate::from_sat_list(2, &["1 2".parse().unwrap()]).unwrap()
    }

    fn insert(&mut self, q: &Perm) {
        let r = q.rank() as usize;
        self.sat[r / 64] |= 1 << (r % 64);
    }

    /// The arity `k`.
    pub fn arity(&self) -> usize {
        self.arity
    }

    /// Membership test by rank bit.
    pub fn contains(&self, q: &Perm) -> bool {
        debug_assert_eq!(q.len(), self.arity);
        let r = q.rank() as usize;
        self.sat[r / 64] >> (r % 64) & 1 == 1
    }

    /// Number of satisfying permutations.
    pub fn sat_size(&self) -> usize {
        self.sat.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// All satisfying permutations, in lexicographic order.
    pub fn members(&self) -> Vec<Perm> {
        (0..factorial(self.arity))
            .filter(|&r| self.sat[r as usize / 64] >> (r % 64) & 1 == 1)
            .map(|r| Perm::unrank(self.arity, r).unwrap())
            .collect()
    }

    /// True for the always-false predicate.
    pub fn is_always_false(&self) -> bool {
        self.sat_size() == 0
    }

    /// True for the always-true predicate.
    pub fn is_always_true(&self) -> bool {
        self.sat_size() as u64 == factorial(self.arity)
    }

    /// True for either constant predicate (excluded from the census).
    pub fn is_trivial(&self) -> bool {
        self.is_always_false() || self.is_always_true()
    }

    /// Fraction satisfied by a uniformly random ordering: `|Sat| / k!`.
    pub fn alpha_random(&self) -> BigRational {
        BigRational::new(self.sat_size().into(), factorial(self.arity).into())
    }

    /// True iff every member of `self` is a member of `other` (same arity).
    pub fn is_relaxation_of_self(&self, other: &Predicate) -> Result<bool, PredicateError> {
        if self.arity != other.arity {
            return Err(PredicateError::ArityMismatch {
                expected: self.arity,
                got: other.arity,
            });
        }
        Ok(self
            .sat
            .iter()
            .zip(&other.sat)
            .all(|(a, b)| a & !b == 0))
    }

    fn require_nonempty(&self) -> Result<(), PredicateError> {
        if self.is_always_false() {
            Err(PredicateError::EmptySat)
        } else {
            Ok(())
        }
    }

    /// All Not-First atoms implied by the predicate: atoms satisfied by every
    /// member. There are `k·(2^(k−1) − 1)` candidate atoms; each is tested
    /// against the whole Sat set directly.
    pub fn implied_not_first_atoms(&self) -> Result<Vec<NotFirstAtom>, PredicateError> {
        self.implied_atoms(true)
    }

    /// All implied Not-Last atoms (the duals).
    pub fn implied_not_last_atoms(&self) -> Result<Vec<NotFirstAtom>, PredicateError> {
        self.implied_atoms(false)
    }

    fn implied_atoms(&self, not_first: bool) -> Result<Vec<NotFirstAtom>, PredicateError> {
        self.require_nonempty()?;
        let k = self.arity;
        let members = self.members();
        let mut atoms = Vec::new();
        for head in 1..=k {
            let pool: Vec<usize> = (1..=k).filter(|&j| j != head).collect();
            for mask in 1u32..(1 << pool.len()) {
                let others: Vec<usize> = pool
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| mask >> i & 1 == 1)
                    .map(|(_, &j)| j)
                    .collect();
                let atom = NotFirstAtom::new(head, others);
                let implied = members.iter().all(|q| {
                    if not_first {
                        atom.satisfied_not_first(q)
                    } else {
                        atom.satisfied_not_last(q)
                    }
                });
                if implied {
                    atoms.push(atom);
                }
            }
        }
        Ok(atoms)
    }

    /// All binary precedences `x_i < x_j` implied by the predicate.
    pub fn implied_edges(&self) -> Result<Vec<(usize, usize)>, PredicateError> {
        self.require_nonempty()?;
        let k = self.arity;
        let members = self.members();
        let mut edges = Vec::new();
        for i in 1..=k {
            for j in 1..=k {
                if i != j && members.iter().all(|q| q.at(i) < q.at(j)) {
                    edges.push((i, j));
                }
            }
        }
        Ok(edges)
    }

    /// The ε-relaxation: the conjunction of all implied binary precedences.
    pub fn eps_relaxation(&self) -> Result<Predicate, PredicateError> {
        let edges = self.implied_edges()?;
        let mut p = Predicate::empty_sat(self.arity)?;
        for q in Perm::enumerate(self.arity)? {
            if edges.iter().all(|&(i, j)| q.at(i) < q.at(j)) {
                p.insert(&q);
            }
        }
        Ok(p)
    }

    /// The L-relaxation: the conjunction of all implied Not-First atoms.
    pub fn l_relaxation(&self) -> Result<Predicate, PredicateError> {
        let atoms = self.implied_not_first_atoms()?;
        let mut p = Predicate::empty_sat(self.arity)?;
        for q in Perm::enumerate(self.arity)? {
            if atoms.iter().all(|a| a.satisfied_not_first(&q)) {
                p.insert(&q);
            }
        }
        Ok(p)
    }

    /// The R-relaxation: the conjunction of all implied Not-Last atoms.
    pub fn r_relaxation(&self) -> Result<Predicate, PredicateError> {
        let atoms = self.implied_not_last_atoms()?;
        let mut p = Predicate::empty_sat(self.arity)?;
        for q in Perm::enumerate(self.arity)? {
            if atoms.iter().all(|a| a.satisfied_not_last(&q)) {
                p.insert(&q);
            }
        }
        Ok(p)
    }

    /// True iff the predicate equals its own ε-relaxation (a conjunction of
    /// binary precedences).
    pub fn is_precedence(&self) -> Result<bool, PredicateError> {
        Ok(self.eps_relaxation()? == *self)
    }

    /// True iff the predicate equals its own L-relaxation (a Not-First CSP).
    pub fn is_not_first(&self) -> Result<bool, PredicateError> {
        Ok(self.l_relaxation()? == *self)
    }

    /// True iff the predicate equals its own R-relaxation (a Not-Last CSP).
    pub fn is_not_last(&self) -> Result<bool, PredicateError> {
        Ok(self.r_relaxation()? == *self)
    }

    /// Polynomial tractability dichotomy for satisfiable instances: tractable
    /// iff Not-First or Not-Last.
    pub fn is_tractable(&self) -> Result<bool, PredicateError> {
        Ok(self.is_not_first()? || self.is_not_last()?)
    }

    /// True iff Sat is closed under the shuffle operation: for members `α, β`
    /// and every `t`, keep `α`'s values `≤ t` in place and reorder the rest by
    /// `β`'s relative order; the result must again be a member.
    pub fn is_shuffle_closed(&self) -> Result<bool, PredicateError> {
        self.require_nonempty()?;
        let k = self.arity;
        let members = self.members();
        for alpha in &members {
            for beta in &members {
                for t in 1..k {
                    let sigma = shuffle(alpha, beta, t as u32);
                    if !self.contains(&sigma) {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }

    /// Image of the predicate under variable renaming `β` (Sat ↦ Sat·β⁻¹)
    /// and/or duality (Sat ↦ {decr ∘ σ}).
    pub fn group_image(&self, beta: &Perm, dual: bool) -> Predicate {
        let beta_inv = beta.inverse();
        let decr = Perm::decreasing(self.arity);
        let mut p = Predicate::empty_sat(self.arity).unwrap();
        for sigma in self.members() {
            let mut q = sigma.compose(&beta_inv).unwrap();
            if dual {
                q = decr.compose(&q).unwrap();
            }
            p.insert(&q);
        }
        p
    }

    /// The canonical form under the `2·k!` renaming/duality group: the image
    /// with the lexicographically smallest sat bitset, plus the orbit size.
    pub fn canonical_form(&self) -> (Predicate, usize) {
        let mut best: Option<Predicate> = None;
        let mut orbit = HashSet::new();
        for beta in Perm::enumerate(self.arity).unwrap() {
            for dual in [false, true] {
                let img = self.group_image(&beta, dual);
                orbit.insert(img.sat.clone());
                if best.as_ref().map_or(true, |b| bitset_lt(&img.sat, &b.sat)) {
                    best = Some(img);
                }
            }
        }
        (best.unwrap(), orbit.len())
    }

    /// Parses the predicate file format: an `arity k` header, then either a
    /// `sat:` section (one permutation per line) or a `dnf:` section (one
    /// disjunct per line, chains joined by `&`, e.g. `1<2<4 & 3<4`).
    /// `#` starts a comment.
    pub fn parse(text: &str) -> Result<Predicate, PredicateError> {
        let mut lines = text
            .lines()
            .map(|l| l.split('#').next().unwrap_or("").trim())
            .filter(|l| !l.is_empty());
        let header = lines.next().ok_or_else(|| PredicateError::Parse("empty input".into()))?;
        let arity: usize = header
            .strip_prefix("arity")
            .and_then(|r| r.trim().parse().ok())
            .ok_or_else(|| PredicateError::Parse(format!("expected 'arity k', got '{header}'")))?;
        let mode = lines
            .next()
            .ok_or_else(|| PredicateError::Parse("missing 'sat:' or 'dnf:' section".into()))?;
        match mode {
            "sat:" => {
                let perms: Vec<Perm> = lines
                    .map(|l| l.parse::<Perm>().map_err(PredicateError::from))
                    .collect::<Result<_, _>>()?;
                Predicate::from_sat_list(arity, &perms)
            }
            "dnf:" => {
                let disjuncts: Vec<Vec<ChainClause>> = lines
                    .map(|l| parse_disjunct(l, arity))
                    .collect::<Result<_, _>>()?;
                Predicate::from_dnf(arity, &disjuncts)
            }
            other => Err(PredicateError::Parse(format!(
                "expected 'sat:' or 'dnf:', got '{other}'"
            ))),
        }
    }

    /// Serializes in the `sat:` file format.
    pub fn to_sat_text(&self) -> String {
        let mut out = format!("arity {}\nsat:\n", self.arity);
        for q in self.members() {
            out.push_str(&q.to_string());
            out.push('\n');
        }
        out
    }
}

impl fmt::Debug for Predicate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Predicate(arity {}, {{", self.arity)?;
        for (i, q) in self.members().iter().enumerate() {
            if i > 0 {
                write!(f, ", ")?;
            }
            write!(f, "{q}")?;
        }
        write!(f, "}})")
    }
}

/// The shuffle of members `α, β` at level `t`: values `≤ t` stay as in `α`;
/// the remaining positions receive `t+1..=k` in the relative order of `β`.
fn shuffle(alpha: &Perm, beta: &Perm, t: u32) -> Perm {
    let k = alpha.len();
    let mut values = vec![0u32; k];
    let mut rest: Vec<usize> = Vec::new();
    for i in 1..=k {
        if alpha.at(i) <= t {
            values[i - 1] = alpha.at(i);
        } else {
            rest.push(i);
        }
    }
    rest.sort_by_key(|&i| beta.at(i));
    for (offset, &i) in rest.iter().enumerate() {
        values[i - 1] = t + 1 + offset as u32;
    }
    Perm::new(values).expect("shuffle produces a permutation")
}

/// Numeric order on sat bitsets (rank 0 is the least significant bit).
fn bitset_lt(a: &[u64], b: &[u64]) -> bool {
    for (x, y) in a.iter().zip(b).rev() {
        if x != y {
            return x < y;
        }
    }
    false
}

/// Parses one DNF disjunct: `&`-separated chains like `1<2<4 & 3<4`.
fn parse_disjunct(line: &str, arity: usize) -> Result<Vec<ChainClause>, PredicateError> {
    line.split('&')
        .map(|chain| {
            let positions: Vec<usize> = chain
                .split('<')
                .map(|t| {
                    t.trim()
                        .parse::<usize>()
                        .map_err(|_| PredicateError::Parse(format!("bad chain '{chain}'")))
                })
                .collect::<Result<_, _>>()?;
            ChainClause::new(positions, arity)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Perm {
        s.parse().unwrap()
    }

    fn pred(arity: usize, sat: &[&str]) -> Predicate {
        let perms: Vec<Perm> = sat.iter().map(|s| p(s)).collect();
        Predicate::from_sat_list(arity, &perms).unwrap()
    }

    /// The running arity-4 example: four chains whose shared precedences are
    /// `x2 < x4` and `x1 < x3`.
    fn four_chain_example() -> Predicate {
        let d = |s: &str| parse_disjunct(s, 4).unwrap();
        Predicate::from_dnf(
            4,
            &[d("1<2<3<4"), d("1<3<2<4"), d("2<1<4<3"), d("2<4<1<3")],
        )
        .unwrap()
    }

    #[test]
    fn from_sat_list_examples() {
        let btw = Predicate::betweenness();
        assert_eq!(btw.members(), vec![p("1 2 3"), p("3 2 1")]);
        assert_eq!(Predicate::less_than().members(), vec![p("1 2")]);
        let empty = Predicate::from_sat_list(3, &[]).unwrap();
        assert!(empty.is_always_false() && empty.is_trivial());
        // Deduplication.
        assert_eq!(pred(2, &["1 2", "1 2"]).sat_size(), 1);
    }

    #[test]
    fn from_dnf_examples() {
        let phi = Predicate::from_dnf(
            4,
            &[
                parse_disjunct("1<2<3<4", 4).unwrap(),
                parse_disjunct("4<1<2<3", 4).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(phi.members(), vec![p("1 2 3 4"), p("2 3 4 1")]);

        let single = Predicate::from_dnf(4, &[parse_disjunct("2<4", 4).unwrap()]).unwrap();
        assert_eq!(single.sat_size(), 12);

        let lt = Predicate::from_dnf(2, &[parse_disjunct("1<2", 2).unwrap()]).unwrap();
        assert_eq!(lt.members(), vec![p("1 2")]);

        assert!(matches!(
            ChainClause::new(vec![1, 5], 4),
            Err(PredicateError::BadIndex(5, 4))
        ));
    }

    #[test]
    fn example_predicate_members() {
        // The four chains place their variables directly.
        assert_eq!(
            four_chain_example().members(),
            vec![p("1 2 3 4"), p("1 3 2 4"), p("2 1 4 3"), p("3 1 4 2")]
        );
    }

    #[test]
    fn relaxation_subsets() {
        let btw = Predicate::betweenness();
        let l = btw.l_relaxation().unwrap();
        assert!(btw.is_relaxation_of_self(&l).unwrap());
        assert!(btw.is_relaxation_of_self(&btw).unwrap());
        let t = Predicate::always_true(3).unwrap();
        let f = Predicate::always_false(3).unwrap();
        assert!(!t.is_relaxation_of_self(&f).unwrap());
    }

    #[test]
    fn eps_relaxation_examples() {
        // Example: the four-chain predicate implies x2 < x4 and x1 < x3.
        let phi = four_chain_example();
        let mut edges = phi.implied_edges().unwrap();
        edges.sort_unstable();
        assert_eq!(edges, vec![(1, 3), (2, 4)]);
        let eps = phi.eps_relaxation().unwrap();
        let expect = Predicate::from_dnf(4, &[parse_disjunct("2<4 & 1<3", 4).unwrap()]).unwrap();
        assert_eq!(eps, expect);

        // Second arity-4 example: one implied source variable.
        let phi2 = Predicate::from_dnf(
            4,
            &[
                parse_disjunct("1<2<3<4", 4).unwrap(),
                parse_disjunct("1<4<3<2", 4).unwrap(),
            ],
        )
        .unwrap();
        assert_eq!(phi2.members(), vec![p("1 2 3 4"), p("1 4 3 2")]);
        let eps2 = phi2.eps_relaxation().unwrap();
        let expect2 =
            Predicate::from_dnf(4, &[parse_disjunct("1<2 & 1<3 & 1<4", 4).unwrap()]).unwrap();
        assert_eq!(eps2, expect2);

        // No implied pairs: the relaxation is always-true.
        let t = Predicate::always_true(3).unwrap();
        assert!(t.eps_relaxation().unwrap().is_always_true());
    }

    #[test]
    fn l_and_r_relaxations_arity3() {
        let btw = Predicate::betweenness();
        assert_eq!(
            btw.l_relaxation().unwrap(),
            pred(3, &["1 2 3", "1 3 2", "2 3 1", "3 2 1"])
        );
        assert_eq!(
            btw.r_relaxation().unwrap(),
            pred(3, &["1 2 3", "2 1 3", "3 1 2", "3 2 1"])
        );
        let phi6 = pred(3, &["1 2 3", "2 3 1"]);
        let expect = pred(3, &["1 2 3", "1 3 2", "2 3 1"]);
        assert_eq!(phi6.l_relaxation().unwrap(), expect);
        assert_eq!(phi6.r_relaxation().unwrap(), expect);
        let phi7 = pred(3, &["1 2 3", "1 3 2", "3 1 2"]);
        assert_eq!(
            phi7.l_relaxation().unwrap(),
            pred(3, &["1 2 3", "1 3 2", "2 1 3", "3 1 2"])
        );
    }

    #[test]
    fn second_arity4_example_relaxations() {
        let phi = Predicate::from_dnf(
            4,
            &[
                parse_disjunct("1<2<3<4", 4).unwrap(),
                parse_disjunct("1<4<3<2", 4).unwrap(),
            ],
        )
        .unwrap();
        // φ_L = φ_ε ∧ NotFirst(x3; x2, x4) and φ_R = φ_ε ∧ NotLast(x3; x2, x4).
        let eps = phi.eps_relaxation().unwrap();
        let nf = NotFirstAtom::new(3, vec![2, 4]);
        let l_expect = Predicate::from_sat_list(
            4,
            &eps.members()
                .into_iter()
                .filter(|q| nf.satisfied_not_first(q))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let r_expect = Predicate::from_sat_list(
            4,
            &eps.members()
                .into_iter()
                .filter(|q| nf.satisfied_not_last(q))
                .collect::<Vec<_>>(),
        )
        .unwrap();
        assert_eq!(phi.l_relaxation().unwrap(), l_expect);
        assert_eq!(phi.r_relaxation().unwrap(), r_expect);
    }

    #[test]
    fn precedence_and_tractability() {
        assert!(Predicate::less_than().is_precedence().unwrap());
        assert!(!Predicate::betweenness().is_precedence().unwrap());
        let phi3 = pred(3, &["1 2 3", "1 3 2", "2 3 1"]);
        assert!(phi3.is_precedence().unwrap());
        let phi4 = pred(3, &["1 2 3", "1 3 2", "2 1 3", "2 3 1"]);
        assert!(phi4.is_tractable().unwrap());
        assert!(!Predicate::betweenness().is_tractable().unwrap());
        // Every precedence predicate is Not-First (binary atoms are both).
        for phi in [Predicate::less_than(), phi3] {
            assert!(phi.is_not_first().unwrap());
        }
    }

    #[test]
    fn shuffle_closed_examples() {
        assert!(Predicate::always_true(3).unwrap().is_shuffle_closed().unwrap());
        // Shuffling (1 2 3) with (3 2 1) at t = 1 yields (1 3 2) ∉ Sat.
        let btw = Predicate::betweenness();
        assert_eq!(shuffle(&p("1 2 3"), &p("3 2 1"), 1), p("1 3 2"));
        assert!(!btw.is_shuffle_closed().unwrap());
        assert!(pred(2, &["1 2"]).is_shuffle_closed().unwrap());
    }

    #[test]
    fn shuffle_closed_implies_not_first() {
        // Exhaustive over arity 3: the closure property forces φ = φ_L.
        for mask in 1u64..(1 << 6) - 1 {
            let members: Vec<Perm> = (0..6)
                .filter(|i| mask >> i & 1 == 1)
                .map(|r| Perm::unrank(3, r).unwrap())
                .collect();
            let phi = Predicate::from_sat_list(3, &members).unwrap();
            if phi.is_shuffle_closed().unwrap() {
                assert!(phi.is_not_first().unwrap(), "failed for {phi:?}");
            }
        }
    }

    #[test]
    fn relaxations_are_idempotent() {
        for mask in [0b000011u64, 0b010101, 0b101010, 0b111110, 0b001001] {
            let members: Vec<Perm> = (0..6)
                .filter(|i| mask >> i & 1 == 1)
                .map(|r| Perm::unrank(3, r).unwrap())
                .collect();
            let phi = Predicate::from_sat_list(3, &members).unwrap();
            let l = phi.l_relaxation().unwrap();
            assert_eq!(l.l_relaxation().unwrap(), l);
            let r = phi.r_relaxation().unwrap();
            assert_eq!(r.r_relaxation().unwrap(), r);
            let e = phi.eps_relaxation().unwrap();
            assert_eq!(e.eps_relaxation().unwrap(), e);
        }
    }

    #[test]
    fn canonical_form_examples() {
        let a = pred(3, &["1 2 3"]);
        let b = pred(3, &["2 1 3"]);
        assert_eq!(a.canonical_form().0, b.canonical_form().0);
        let (_, orbit) = Predicate::betweenness().canonical_form();
        assert_eq!(24 % orbit, 0, "orbit size divides 2·k! = 12? got {orbit}");
        assert!(orbit <= 12 && 12 % orbit == 0);
        let t = Predicate::always_true(3).unwrap();
        let (canon, orbit) = t.canonical_form();
        assert_eq!(canon, t);
        assert_eq!(orbit, 1);
    }

    #[test]
    fn canonical_form_is_group_invariant() {
        let phi = pred(3, &["1 2 3", "2 3 1"]);
        let (canon, _) = phi.canonical_form();
        for beta in Perm::enumerate(3).unwrap() {
            for dual in [false, true] {
                let img = phi.group_image(&beta, dual);
                assert_eq!(img.canonical_form().0, canon);
            }
        }
    }

    #[test]
    fn parse_roundtrip() {
        let text = "# Betweenness\narity 3\nsat:\n1 2 3\n3 2 1\n";
        let phi = Predicate::parse(text).unwrap();
        assert_eq!(phi, Predicate::betweenness());
        assert_eq!(Predicate::parse(&phi.to_sat_text()).unwrap(), phi);
        let dnf = "arity 4\ndnf:\n1<2<4 & 3<4\n";
        let psi = Predicate::parse(dnf).unwrap();
        assert!(psi.contains(&p("1 3 2 4")));
        assert!(!psi.contains(&p("1 2 4 3")));
        assert!(!psi.contains(&p("2 1 4 3")));
        assert!(Predicate::parse("arity 3\nwat:\n").is_err());
    }

    #[test]
    fn empty_sat_rejected_by_relaxations() {
        let f = Predicate::always_false(3).unwrap();
        assert_eq!(f.l_relaxation(), Err(PredicateError::EmptySat));
        assert_eq!(f.eps_relaxation(), Err(PredicateError::EmptySat));
        assert_eq!(f.is_shuffle_closed(), Err(PredicateError::EmptySat));
    }
}
