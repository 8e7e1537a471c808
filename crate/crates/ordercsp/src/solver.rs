//! End-to-end approximation pipeline for ordering-CSP instances: parse,
//! relax each constraint (L, R, or ε), solve the tractable relaxed instance,
//! round with an IDU scheme, optionally derandomize, and evaluate.
//!
//! The relaxed instances fall into three tractable families. Not-First atom
//! systems are solved by a greedy filling of positions front-to-back (a
//! variable is placeable once each of its atoms already has a witness
//! placed); Not-Last systems are the mirror image. Precedence systems are
//! topological sorts when acyclic; otherwise a minimum feedback arc set is
//! removed first, exactly by a subset DP for `n ≤ 18` or heuristically by
//! insertion plus sifting. The greedy solvers are complete: they report
//! unsatisfiable only when no ordering satisfies the atoms.

use std::collections::BTreeMap;

use num::{BigRational, One, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::idu::{p_value, sample, IduError, Mixture, Scalar};
use crate::optimize::OptimizeError;
use crate::perm::{Perm, PermError};
use crate::predicate::{Predicate, PredicateError};

/// Errors raised while parsing or solving instances.
#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    /// Malformed instance text.
    #[error("parse error at line {line}: {msg}")]
    ParseError { line: usize, msg: String },
    /// Constraint tuple length differs from the predicate arity.
    #[error("constraint on '{name}' has {got} indices, predicate arity is {expected}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    /// A constraint names the same variable twice.
    #[error("duplicate variable index {0} in a constraint tuple")]
    DuplicateIndexInTuple(usize),
    /// The relaxed instance admits no ordering.
    #[error("relaxed instance is unsatisfiable")]
    Unsat,
    /// Brute force is capped at `n ≤ 10`.
    #[error("instance too large: {0}")]
    TooLarge(String),
    /// Exact feedback-arc-set removal is capped at `n ≤ 18`.
    #[error("exact feedback-arc-set mode requires n ≤ 18, got {0}")]
    TooLargeForExact(usize),
    /// Derandomization requires a uniform-free rounding scheme.
    #[error("derandomization requires an ID-only mixture (no uniform bands)")]
    HasUniformBlock,
    /// Propagated predicate error.
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    /// Propagated permutation error.
    #[error(transparent)]
    Perm(#[from] PermError),
    /// Propagated density error.
    #[error(transparent)]
    Idu(#[from] IduError),
    /// Propagated certification error.
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// An ordering-CSP instance: `n` variables and constraints applying named
/// predicates to tuples of distinct variables.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    n: usize,
    predicates: Vec<(String, Predicate)>,
    constraints: Vec<(usize, Vec<usize>)>,
}

impl Instance {
    /// Builds a validated instance. `constraints` holds `(predicate index,
    /// variable tuple)` pairs with 1-based variables.
    pub fn new(
        n: usize,
        predicates: Vec<(String, Predicate)>,
        constraints: Vec<(usize, Vec<usize>)>,
    ) -> Result<Self, SolverError> {
        for (pi, vars) in &constraints {
            let (name, pred) = &predicates[*pi];
            if vars.len() != pred.arity() {
                return Err(SolverError::ArityMismatch {
                    name: name.clone(),
                    expected: pred.arity(),
                    got: vars.len(),
                });
            }
            let mut seen = vec![false; n + 1];
            for &v in vars {
                if v == 0 || v > n {
                    return Err(SolverError::ParseError {
                        line: 0,
                        msg: format!("variable {v} out of range 1..={n}"),
                    });
                }
                if seen[v] {
                    return Err(SolverError::DuplicateIndexInTuple(v));
                }
                seen[v] = true;
            }
        }
        Ok(Instance {
            n,
            predicates,
            constraints,
        })
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.n
    }

    /// Named predicates of the instance.
    pub fn predicates(&self) -> &[(String, Predicate)] {
        &self.predicates
    }

    /// Constraints as `(predicate index, variable tuple)`.
    pub fn constraints(&self) -> &[(usize, Vec<usize>)] {
        &self.constraints
    }
}

/// A total order of the variables: variable `i` gets position `perm(i)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ordering {
    perm: Perm,
}

impl Ordering {
    /// Wraps a permutation as an ordering.
    pub fn new(perm: Perm) -> Self {
        Ordering { perm }
    }

    /// The underlying position permutation.
    pub fn perm(&self) -> &Perm {
        &self.perm
    }

    /// Position of variable `i` (1-based).
    pub fn position(&self, i: usize) -> u32 {
        self.perm.at(i)
    }

    /// The pattern induced at a variable tuple, in tuple order.
    pub fn pattern_at(&self, vars: &[usize]) -> Perm {
        let vals: Vec<u32> = vars.iter().map(|&v| self.perm.at(v)).collect();
        Perm::rank_values(&vals)
    }
}

/// Which relaxation the pipeline applies to every constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RelaxKind {
    /// Not-First relaxation `φ_L`.
    L,
    /// Not-Last relaxation `φ_R`.
    R,
    /// Pairwise (precedence) relaxation `φ_ε`.
    Eps,
}

impl std::fmt::Display for RelaxKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RelaxKind::L => write!(f, "L"),
            RelaxKind::R => write!(f, "R"),
            RelaxKind::Eps => write!(f, "eps"),
        }
    }
}

/// Mode for precedence solving.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FasMode {
    /// Minimum feedback arc set by subset DP (`n ≤ 18`).
    Exact,
    /// Insertion heuristic plus sift local search.
    Greedy,
}

/// An instance-level Not-First/Not-Last atom: variable `head` must not come
/// before (resp. after) all of `others`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VarAtom {
    /// Head variable.
    pub head: usize,
    /// Witness set.
    pub others: Vec<usize>,
}

/// An instance with every constraint replaced by its relaxation, carrying the
/// atom decomposition used by the solvers.
#[derive(Debug, Clone)]
pub struct RelaxedInstance {
    kind: RelaxKind,
    n: usize,
    /// Per constraint: the relaxed predicate, for evaluation.
    relaxed_preds: Vec<(Predicate, Vec<usize>)>,
    /// Not-First (kind L) or Not-Last (kind R) atoms over variables.
    atoms: Vec<VarAtom>,
    /// Precedence edges over variables, with multiplicity (kind Eps).
    edges: Vec<(usize, usize)>,
}

impl RelaxedInstance {
    /// Relaxes every constraint of `inst` with the same relaxation kind,
    /// instantiating the implied atoms on the constraint's variables.
    pub fn build(inst: &Instance, kind: RelaxKind) -> Result<Self, SolverError> {
        let mut relaxed_cache: BTreeMap<usize, (Predicate, Vec<VarAtom>, Vec<(usize, usize)>)> =
            BTreeMap::new();
        for (pi, (_, pred)) in inst.predicates.iter().enumerate() {
            let entry = match kind {
                RelaxKind::L => {
                    let atoms = pred
                        .implied_not_first_atoms()?
                        .into_iter()
                        .map(|a| VarAtom {
                            head: a.head(),
                            others: a.others().to_vec(),
                        })
                        .collect();
                    (pred.l_relaxation()?, atoms, Vec::new())
                }
                RelaxKind::R => {
                    let atoms = pred
                        .implied_not_last_atoms()?
                        .into_iter()
                        .map(|a| VarAtom {
                            head: a.head(),
                            others: a.others().to_vec(),
                        })
                        .collect();
                    (pred.r_relaxation()?, atoms, Vec::new())
                }
                RelaxKind::Eps => (pred.eps_relaxation()?, Vec::new(), pred.implied_edges()?),
            };
            relaxed_cache.insert(pi, entry);
        }
        let mut relaxed_preds = Vec::new();
        let mut atoms = Vec::new();
        let mut edges = Vec::new();
        for (pi, vars) in &inst.constraints {
            let (rel, pred_atoms, pred_edges) = &relaxed_cache[pi];
            relaxed_preds.push((rel.clone(), vars.clone()));
            for a in pred_atoms {
                atoms.push(VarAtom {
                    head: vars[a.head - 1],
                    others: a.others.iter().map(|&o| vars[o - 1]).collect(),
                });
            }
            for &(a, b) in pred_edges {
                edges.push((vars[a - 1], vars[b - 1]));
            }
        }
        Ok(RelaxedInstance {
            kind,
            n: inst.n,
            relaxed_preds,
            atoms,
            edges,
        })
    }

    /// The relaxation kind.
    pub fn kind(&self) -> RelaxKind {
        self.kind
    }

    /// Number of variables.
    pub fn n(&self) -> usize {
        self.n
    }

    /// The instantiated atoms (L or R kinds).
    pub fn atoms(&self) -> &[VarAtom] {
        &self.atoms
    }

    /// The instantiated precedence edges (ε kind), with multiplicity.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Fraction of constraints whose *relaxed* predicate is satisfied.
    pub fn satisfied_fraction(&self, ord: &Ordering) -> BigRational {
        if self.relaxed_preds.is_empty() {
            return BigRational::one();
        }
        let sat = self
            .relaxed_preds
            .iter()
            .filter(|(pred, vars)| pred.contains(&ord.pattern_at(vars)))
            .count();
        BigRational::new(sat.into(), self.relaxed_preds.len().into())
    }
}

/// Parses the instance text format: a `vars n` line; optional `pred NAME`
/// blocks inlining predicate files; then one constraint per line,
/// `NAME i1 i2 … ik`. `btw` (Betweenness) and `lt` (binary order) are
/// builtins. Lines starting with `#` are comments.
pub fn parse_instance(text: &str) -> Result<Instance, SolverError> {
    let mut n: Option<usize> = None;
    let mut predicates: Vec<(String, Predicate)> = vec![
        ("btw".to_string(), Predicate::betweenness()),
        ("lt".to_string(), Predicate::less_than()),
    ];
    let mut constraints: Vec<(usize, Vec<usize>)> = Vec::new();
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'))
        .collect();
    let err = |line: usize, msg: String| SolverError::ParseError { line, msg };
    let mut idx = 0;
    while idx < lines.len() {
        let (lineno, line) = lines[idx];
        if let Some(rest) = line.strip_prefix("vars ") {
            if n.is_some() {
                return Err(err(lineno, "duplicate 'vars' line".into()));
            }
            n = Some(
                rest.trim()
                    .parse()
                    .map_err(|_| err(lineno, format!("bad variable count '{rest}'")))?,
            );
            idx += 1;
        } else if let Some(name) = line.strip_prefix("pred ") {
            let name = name.trim().to_string();
            if name.is_empty() || name.chars().next().unwrap().is_ascii_digit() {
                return Err(err(lineno, format!("bad predicate name '{name}'")));
            }
            // The block body runs until the next `pred` line or the first
            // constraint line (one starting with a declared predicate name).
            let mut body = String::new();
            idx += 1;
            while idx < lines.len() {
                let (_, l) = lines[idx];
                let first = l.split_whitespace().next().unwrap_or("");
                if l.starts_with("pred ")
                    || l.starts_with("vars ")
                    || predicates.iter().any(|(pn, _)| pn == first)
                    || first == name
                {
                    break;
                }
                body.push_str(l);
                body.push('\n');
                idx += 1;
            }
            let pred = Predicate::parse(&body)
                .map_err(|e| err(lineno, format!("in predicate '{name}': {e}")))?;
            predicates.retain(|(pn, _)| *pn != name);
            predicates.push((name, pred));
        } else {
            let mut tokens = line.split_whitespace();
            let name = tokens.next().unwrap();
            let pi = predicates
                .iter()
                .position(|(pn, _)| pn == name)
                .ok_or_else(|| err(lineno, format!("unknown predicate '{name}'")))?;
            let vars: Vec<usize> = tokens
                .map(|t| {
                    t.parse()
                        .map_err(|_| err(lineno, format!("bad variable index '{t}'")))
                })
                .collect::<Result<_, _>>()?;
            constraints.push((pi, vars));
            idx += 1;
        }
    }
    let n = n.ok_or_else(|| err(0, "missing 'vars n' line".into()))?;
    Instance::new(n, predicates, constraints).map_err(|e| match e {
        SolverError::ParseError { msg, .. } => SolverError::ParseError { line: 0, msg },
        other => other,
    })
}

/// Greedy Not-First solver: fills positions front to back, placing (by
/// smallest index) any variable all of whose atoms already have a placed
/// witness. Complete: returns `None` only when no ordering satisfies the
/// atoms.
pub fn solve_not_first(rel: &RelaxedInstance) -> Option<Ordering> {
    solve_greedy(rel.n, &rel.atoms, false)
}

/// Greedy Not-Last solver: the mirror image of [`solve_not_first`], filling
/// positions back to front.
pub fn solve_not_last(rel: &RelaxedInstance) -> Option<Ordering> {
    solve_greedy(rel.n, &rel.atoms, true)
}

fn solve_greedy(n: usize, atoms: &[VarAtom], from_back: bool) -> Option<Ordering> {
    let mut atoms_of: Vec<Vec<&VarAtom>> = vec![Vec::new(); n + 1];
    for a in atoms {
        atoms_of[a.head].push(a);
    }
    let mut placed = vec![false; n + 1];
    let mut positions = vec![0u32; n + 1];
    for step in 0..n {
        let v = (1..=n).find(|&v| {
            !placed[v]
                && atoms_of[v]
                    .iter()
                    .all(|a| a.others.iter().any(|&o| placed[o]))
        })?;
        placed[v] = true;
        positions[v] = if from_back {
            (n - step) as u32
        } else {
            (step + 1) as u32
        };
    }
    let perm = Perm::new(positions[1..].to_vec()).expect("greedy placement is a bijection");
    Some(Ordering::new(perm))
}

/// Precedence solver: topological order when the edge digraph is acyclic;
/// otherwise removes a feedback arc set first (exact subset DP in `Exact`
/// mode, insertion + sifting in `Greedy` mode) and topologically sorts the
/// rest. The returned ordering violates exactly the removed edges.
pub fn solve_precedence(rel: &RelaxedInstance, mode: FasMode) -> Result<Ordering, SolverError> {
    let n = rel.n;
    // Multiplicity-weighted adjacency.
    let mut weight = vec![vec![0u32; n]; n];
    for &(a, b) in &rel.edges {
        if a != b {
            weight[a - 1][b - 1] += 1;
        }
    }
    let order: Vec<usize> = match mode {
        FasMode::Exact => {
            if n > 18 {
                return Err(SolverError::TooLargeForExact(n));
            }
            fas_exact(n, &weight)
        }
        FasMode::Greedy => fas_greedy(n, &weight),
    };
    // order[p] = variable (0-based) at position p+1.
    let mut positions = vec![0u32; n];
    for (p, &v) in order.iter().enumerate() {
        positions[v] = p as u32 + 1;
    }
    Ok(Ordering::new(Perm::new(positions)?))
}

/// Minimum-back-edge linear order by Held–Karp subset DP. `weight[a][b]` is
/// the multiplicity of edge `a → b`; the cost of an order is the total weight
/// of edges pointing backwards.
fn fas_exact(n: usize, weight: &[Vec<u32>]) -> Vec<usize> {
    if n == 0 {
        return Vec::new();
    }
    let full = 1usize << n;
    let mut dp = vec![u64::MAX; full];
    let mut choice = vec![u8::MAX; full];
    dp[0] = 0;
    for mask in 0..full {
        if dp[mask] == u64::MAX {
            continue;
        }
        for v in 0..n {
            if mask & (1 << v) != 0 {
                continue;
            }
            // Placing v next: every edge u → v with u still unplaced (and not
            // v) will point backwards.
            let mut cost = dp[mask];
            for u in 0..n {
                if u != v && mask & (1 << u) == 0 {
                    cost += weight[u][v] as u64;
                }
            }
            let next = mask | (1 << v);
            if cost < dp[next] || (cost == dp[next] && (v as u8) < choice[next]) {
                dp[next] = cost;
                choice[next] = v as u8;
            }
        }
    }
    let mut order = Vec::with_capacity(n);
    let mut mask = full - 1;
    while mask != 0 {
        let v = choice[mask] as usize;
        order.push(v);
        mask &= !(1 << v);
    }
    order.reverse();
    order
}

fn back_cost(order: &[usize], weight: &[Vec<u32>]) -> u64 {
    let mut pos = vec![0usize; weight.len()];
    for (p, &v) in order.iter().enumerate() {
        pos[v] = p;
    }
    let mut cost = 0u64;
    for (a, row) in weight.iter().enumerate() {
        for (b, &w) in row.iter().enumerate() {
            if w > 0 && pos[a] > pos[b] {
                cost += w as u64;
            }
        }
    }
    cost
}

/// Insertion heuristic (each variable goes to the position minimizing new
/// back-edges) followed by sift local search until no single move improves.
fn fas_greedy(n: usize, weight: &[Vec<u32>]) -> Vec<usize> {
    let mut order: Vec<usize> = Vec::with_capacity(n);
    for v in 0..n {
        let mut best = (u64::MAX, 0usize);
        for slot in 0..=order.len() {
            let mut trial = order.clone();
            trial.insert(slot, v);
            let c = back_cost(&trial, weight);
            if c < best.0 {
                best = (c, slot);
            }
        }
        order.insert(best.1, v);
    }
    // Sift: repeatedly move single variables to their best slot.
    let mut improved = true;
    while improved {
        improved = false;
        for i in 0..n {
            let v = order[i];
            let mut rest = order.clone();
            rest.remove(i);
            let cur = back_cost(&order, weight);
            let mut best = (cur, i);
            for slot in 0..=rest.len() {
                let mut trial = rest.clone();
                trial.insert(slot, v);
                let c = back_cost(&trial, weight);
                if c < best.0 {
                    best = (c, slot);
                }
            }
            if best.0 < cur {
                rest.insert(best.1, v);
                order = rest;
                improved = true;
            }
        }
    }
    order
}

/// Applies the rounding step: samples `σ` of length `n` from the mixture and
/// returns the composition `σ ∘ π` (variable `i` moves to `σ(π(i))`).
pub fn round<T: Scalar>(pi: &Ordering, mixture: &Mixture<T>, seed: u64) -> Ordering {
    let n = pi.perm().len();
    let sigma = sample(mixture, n, seed);
    Ordering::new(sigma.compose(pi.perm()).expect("equal lengths"))
}

/// Exact expected number of satisfied constraints of `inst` under the random
/// rounding `round(pi, mixture, ·)`, computed constraint by constraint from
/// the band-assignment distribution. Requires an ID-only mixture.
pub fn expected_count(
    pi: &Ordering,
    inst: &Instance,
    mixture: &Mixture<BigRational>,
) -> Result<BigRational, SolverError> {
    if !mixture.is_id_only() {
        return Err(SolverError::HasUniformBlock);
    }
    let mut total = BigRational::zero();
    for (p, combo) in mixture.components() {
        let mut e = BigRational::zero();
        for (ci, vars) in &inst.constraints {
            e += constraint_probability(pi, &inst.predicates[*ci].1, vars, combo.blocks(), &[]);
        }
        total += p * e;
    }
    Ok(total)
}

type Band = (BigRational, crate::idu::BlockKind);

/// Probability that one constraint is satisfied after rounding, conditioned
/// on the partial band assignment `fixed` (element → band index, or
/// `usize::MAX` when still random; elements are π-positions).
fn constraint_probability(
    pi: &Ordering,
    pred: &Predicate,
    vars: &[usize],
    blocks: &[Band],
    fixed: &[usize],
) -> BigRational {
    let k = vars.len();
    let elems: Vec<usize> = vars.iter().map(|&v| pi.position(v) as usize).collect();
    let mut assign = vec![0usize; k];
    let free: Vec<usize> = (0..k)
        .filter(|&t| {
            let e = elems[t];
            if e <= fixed.len() && fixed[e - 1] != usize::MAX {
                assign[t] = fixed[e - 1];
                false
            } else {
                true
            }
        })
        .collect();
    let nb = blocks.len();
    let mut prob = BigRational::zero();
    let mut counter = vec![0usize; free.len()];
    loop {
        for (slot, &t) in counter.iter().zip(&free) {
            assign[t] = *slot;
        }
        let weight: BigRational = free
            .iter()
            .map(|&t| blocks[assign[t]].0.clone())
            .fold(BigRational::one(), |acc, w| acc * w);
        if !weight.is_zero() && pattern_under_blocks(&elems, &assign, blocks, pred) {
            prob += weight;
        }
        let mut pos = 0;
        loop {
            if pos == counter.len() {
                return prob;
            }
            counter[pos] += 1;
            if counter[pos] < nb {
                break;
            }
            counter[pos] = 0;
            pos += 1;
        }
    }
}

/// Whether the deterministic ID rounding determined by `assign` maps the
/// constraint onto its Sat set. Elements compare by band first, then by
/// π-position (ascending in I bands, descending in D bands).
fn pattern_under_blocks(
    elems: &[usize],
    assign: &[usize],
    blocks: &[Band],
    pred: &Predicate,
) -> bool {
    use crate::idu::BlockKind;
    let k = elems.len();
    let key = |t: usize| -> (usize, i64) {
        let b = assign[t];
        let sub = match blocks[b].1 {
            BlockKind::I => elems[t] as i64,
            BlockKind::D => -(elems[t] as i64),
            BlockKind::U => unreachable!("ID-only"),
        };
        (b, sub)
    };
    let mut by_rank: Vec<usize> = (0..k).collect();
    by_rank.sort_by_key(|&t| key(t));
    let mut values = vec![0u32; k];
    for (rank, &t) in by_rank.iter().enumerate() {
        values[t] = rank as u32 + 1;
    }
    pred.contains(&Perm::new(values).expect("ranks form a permutation"))
}

/// Derandomizes the rounding by the method of conditional expectations:
/// first the mixture component, then each element's band (in increasing
/// π-position order) is fixed to maximize the exact conditional expectation.
/// The returned ordering satisfies at least the expected number of
/// constraints under `round(pi, mixture, ·)`.
pub fn derandomize(
    pi: &Ordering,
    inst: &Instance,
    mixture: &Mixture<BigRational>,
) -> Result<Ordering, SolverError> {
    if !mixture.is_id_only() {
        return Err(SolverError::HasUniformBlock);
    }
    let n = pi.perm().len();
    // Fix the component maximizing its conditional expectation.
    let mut best: Option<(BigRational, usize)> = None;
    for (c, (p, combo)) in mixture.components().iter().enumerate() {
        if p.is_zero() {
            continue;
        }
        let mut e = BigRational::zero();
        for (ci, vars) in &inst.constraints {
            e += constraint_probability(pi, &inst.predicates[*ci].1, vars, combo.blocks(), &[]);
        }
        if best.as_ref().map_or(true, |(b, _)| e > *b) {
            best = Some((e, c));
        }
    }
    let (_, c) = best.expect("mixture has a positive-probability component");
    let blocks = mixture.components()[c].1.blocks();
    // Fix each element in increasing π-position order.
    let mut fixed = vec![usize::MAX; n];
    for e in 0..n {
        let mut best_block: Option<(BigRational, usize)> = None;
        for (b, (w, _)) in blocks.iter().enumerate() {
            if w.is_zero() {
                continue;
            }
            fixed[e] = b;
            let mut val = BigRational::zero();
            for (ci, vars) in &inst.constraints {
                val += constraint_probability(pi, &inst.predicates[*ci].1, vars, blocks, &fixed);
            }
            if best_block.as_ref().map_or(true, |(bv, _)| val > *bv) {
                best_block = Some((val, b));
            }
        }
        fixed[e] = best_block.expect("some band has positive weight").1;
    }
    // Build the deterministic σ from the full assignment and compose.
    use crate::idu::BlockKind;
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&e| {
        let b = fixed[e];
        let sub = match blocks[b].1 {
            BlockKind::I => e as i64,
            BlockKind::D => -(e as i64),
            BlockKind::U => unreachable!("ID-only"),
        };
        (b, sub)
    });
    let mut sigma = vec![0u32; n];
    for (rank, &e) in order.iter().enumerate() {
        sigma[e] = rank as u32 + 1;
    }
    let sigma = Perm::new(sigma)?;
    Ok(Ordering::new(sigma.compose(pi.perm())?))
}

/// Counts the satisfied constraints of `inst` under `ord` and the satisfied
/// fraction (defined as 1 for the empty instance).
pub fn evaluate(inst: &Instance, ord: &Ordering) -> (usize, BigRational) {
    if inst.constraints.is_empty() {
        return (0, BigRational::one());
    }
    let sat = inst
        .constraints
        .iter()
        .filter(|(ci, vars)| inst.predicates[*ci].1.contains(&ord.pattern_at(vars)))
        .count();
    (
        sat,
        BigRational::new(sat.into(), inst.constraints.len().into()),
    )
}

/// Pipeline run report (the CLI's JSON payload).
#[derive(Debug, Clone, Serialize)]
pub struct Report {
    /// Fraction of relaxed constraints satisfied by the relaxation solution.
    pub s_relax: f64,
    /// Fraction of original constraints satisfied by the final ordering.
    pub fraction_final: f64,
    /// Worst certified `p(φ′→φ, R)` over the predicates in use.
    pub p_certified: f64,
    /// Rounding seed.
    pub seed: u64,
    /// `"<relaxation>"` or `"<relaxation>+derand"`.
    pub mode: String,
    /// Satisfied constraint count.
    pub satisfied: usize,
    /// Total constraint count.
    pub constraints: usize,
}

/// Full pipeline: relax, solve the relaxed instance, round (or derandomize),
/// evaluate, and certify the rounding guarantee for reference.
pub fn pipeline(
    inst: &Instance,
    kind: RelaxKind,
    mixture: &Mixture<BigRational>,
    seed: u64,
    derandomize_flag: bool,
) -> Result<(Ordering, Report), SolverError> {
    let rel = RelaxedInstance::build(inst, kind)?;
    let pi = match kind {
        RelaxKind::L => solve_not_first(&rel).ok_or(SolverError::Unsat)?,
        RelaxKind::R => solve_not_last(&rel).ok_or(SolverError::Unsat)?,
        RelaxKind::Eps => {
            let mode = if inst.n <= 18 {
                FasMode::Exact
            } else {
                FasMode::Greedy
            };
            solve_precedence(&rel, mode)?
        }
    };
    let s_relax = rel.satisfied_fraction(&pi);
    let final_ord = if derandomize_flag {
        derandomize(&pi, inst, mixture)?
    } else {
        round(&pi, mixture, seed)
    };
    let (satisfied, fraction) = evaluate(inst, &final_ord);
    // Worst-case certified rounding guarantee over the predicates actually
    // used by some constraint.
    let mut p_cert = BigRational::one();
    let used: std::collections::BTreeSet<usize> =
        inst.constraints.iter().map(|(ci, _)| *ci).collect();
    for ci in used {
        let pred = &inst.predicates[ci].1;
        let relaxed = match kind {
            RelaxKind::L => pred.l_relaxation()?,
            RelaxKind::R => pred.r_relaxation()?,
            RelaxKind::Eps => pred.eps_relaxation()?,
        };
        let p = p_value(pred, &relaxed, mixture)?;
        if p < p_cert {
            p_cert = p;
        }
    }
    let report = Report {
        s_relax: s_relax.to_f64(),
        fraction_final: fraction.to_f64(),
        p_certified: p_cert.to_f64(),
        seed,
        mode: if derandomize_flag {
            format!("{kind}+derand")
        } else {
            kind.to_string()
        },
        satisfied,
        constraints: inst.constraints.len(),
    };
    Ok((final_ord, report))
}

/// Exact optimum by enumerating all `n!` orderings (`n ≤ 10`).
pub fn brute_force_best(inst: &Instance) -> Result<(Ordering, BigRational), SolverError> {
    let n = inst.n;
    if n > 10 {
        return Err(SolverError::TooLarge(format!("n = {n} exceeds 10")));
    }
    if n == 0 {
        return Err(SolverError::TooLarge("n = 0".into()));
    }
    let mut values: Vec<u32> = (1..=n as u32).collect();
    let mut best: Option<(usize, Ordering)> = None;
    loop {
        let ord = Ordering::new(Perm::new(values.clone())?);
        let (sat, _) = evaluate(inst, &ord);
        if best.as_ref().map_or(true, |(b, _)| sat > *b) {
            best = Some((sat, ord));
        }
        if !next_permutation(&mut values) {
            break;
        }
    }
    let (sat, ord) = best.expect("n ≥ 1");
    let fraction = if inst.constraints.is_empty() {
        BigRational::one()
    } else {
        BigRational::new(sat.into(), inst.constraints.len().into())
    };
    Ok((ord, fraction))
}

/// Advances to the next lexicographic arrangement; false after the last.
fn next_permutation(values: &mut [u32]) -> bool {
    let n = values.len();
    if n < 2 {
        return false;
    }
    let Some(i) = (0..n - 1).rev().find(|&i| values[i] < values[i + 1]) else {
        return false;
    };
    let j = (i + 1..n).rev().find(|&j| values[j] > values[i]).unwrap();
    values.swap(i, j);
    values[i + 1..].reverse();
    true
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::idu::IduCombination;

    fn p(s: &str) -> Perm {
        s.parse().unwrap()
    }

    fn half_id() -> Mixture<BigRational> {
        "1/2 I + 1/2 D"
            .parse::<IduCombination<BigRational>>()
            .unwrap()
            .into()
    }

    #[test]
    fn parse_instance_examples() {
        let inst = parse_instance("vars 3\nbtw 1 2 3\n").unwrap();
        assert_eq!(inst.n(), 3);
        assert_eq!(inst.constraints().len(), 1);

        let e = parse_instance("vars 3\nbtw 1 1 2\n");
        assert_eq!(e, Err(SolverError::DuplicateIndexInTuple(1)));

        let inst = parse_instance("vars 5\n").unwrap();
        assert!(inst.constraints().is_empty());

        let text = "vars 4\npred two\narity 2\nsat:\n1 2\n2 1\ntwo 1 4\nbtw 2 3 4\n";
        let inst = parse_instance(text).unwrap();
        assert_eq!(inst.constraints().len(), 2);
        assert!(inst.predicates().iter().any(|(n, _)| n == "two"));

        assert!(matches!(
            parse_instance("vars 2\nmystery 1 2\n"),
            Err(SolverError::ParseError { line: 2, .. })
        ));
        assert!(matches!(
            parse_instance("btw 1 2 3\n"),
            Err(SolverError::ParseError { .. })
        ));
        assert!(matches!(
            parse_instance("vars 3\nbtw 1 2\n"),
            Err(SolverError::ArityMismatch { .. })
        ));
    }

    #[test]
    fn greedy_not_first_examples() {
        // One atom NFirst(1;{2}): variable 2 must precede variable 1.
        let rel = RelaxedInstance {
            kind: RelaxKind::L,
            n: 2,
            relaxed_preds: Vec::new(),
            atoms: vec![VarAtom {
                head: 1,
                others: vec![2],
            }],
            edges: Vec::new(),
        };
        let ord = solve_not_first(&rel).unwrap();
        assert!(ord.position(2) < ord.position(1));

        // Mutually exclusive atoms: someone must be first.
        let rel = RelaxedInstance {
            atoms: vec![
                VarAtom {
                    head: 1,
                    others: vec![2],
                },
                VarAtom {
                    head: 2,
                    others: vec![1],
                },
            ],
            ..rel
        };
        assert!(solve_not_first(&rel).is_none());

        // A Betweenness constraint relaxed by L lands in its relaxed Sat set.
        let inst = parse_instance("vars 3\nbtw 1 2 3\n").unwrap();
        let rel = RelaxedInstance::build(&inst, RelaxKind::L).unwrap();
        let ord = solve_not_first(&rel).unwrap();
        let relaxed = Predicate::betweenness().l_relaxation().unwrap();
        assert!(relaxed.contains(&ord.pattern_at(&[1, 2, 3])));
        assert_eq!(rel.satisfied_fraction(&ord), BigRational::one());
    }

    #[test]
    fn greedy_not_last_examples() {
        let rel = RelaxedInstance {
            kind: RelaxKind::R,
            n: 2,
            relaxed_preds: Vec::new(),
            atoms: vec![VarAtom {
                head: 1,
                others: vec![2],
            }],
            edges: Vec::new(),
        };
        // NLast(1;{2}): variable 1 must not come after 2.
        let ord = solve_not_last(&rel).unwrap();
        assert!(ord.position(1) < ord.position(2));

        let rel = RelaxedInstance {
            atoms: vec![
                VarAtom {
                    head: 1,
                    others: vec![2],
                },
                VarAtom {
                    head: 2,
                    others: vec![1],
                },
            ],
            ..rel
        };
        assert!(solve_not_last(&rel).is_none());
    }

    #[test]
    fn precedence_examples() {
        let mk = |n: usize, edges: Vec<(usize, usize)>| RelaxedInstance {
            kind: RelaxKind::Eps,
            n,
            relaxed_preds: Vec::new(),
            atoms: Vec::new(),
            edges,
        };
        let rel = mk(3, vec![(1, 2), (2, 3)]);
        let ord = solve_precedence(&rel, FasMode::Exact).unwrap();
        assert!(ord.position(1) < ord.position(2) && ord.position(2) < ord.position(3));

        // A 2-cycle: exactly one edge must be violated.
        let rel = mk(2, vec![(1, 2), (2, 1)]);
        let ord = solve_precedence(&rel, FasMode::Exact).unwrap();
        let violated = rel
            .edges()
            .iter()
            .filter(|&&(a, b)| ord.position(a) > ord.position(b))
            .count();
        assert_eq!(violated, 1);

        let rel = mk(19, vec![(1, 2)]);
        assert_eq!(
            solve_precedence(&rel, FasMode::Exact),
            Err(SolverError::TooLargeForExact(19))
        );
        assert!(solve_precedence(&rel, FasMode::Greedy).is_ok());
    }

    #[test]
    fn round_examples() {
        let pi = Ordering::new(p("2 3 1"));
        let ident: Mixture<BigRational> = "1 I".parse::<IduCombination<BigRational>>().unwrap().into();
        assert_eq!(round(&pi, &ident, 5), pi);
        let rev: Mixture<BigRational> = "1 D".parse::<IduCombination<BigRational>>().unwrap().into();
        let r = round(&pi, &rev, 5);
        assert_eq!(r.perm(), &p("2 1 3"));
        // Determinism.
        let m = half_id();
        assert_eq!(round(&pi, &m, 9), round(&pi, &m, 9));
    }

    #[test]
    fn evaluate_examples() {
        let inst = parse_instance("vars 3\nbtw 1 2 3\n").unwrap();
        let (s, f) = evaluate(&inst, &Ordering::new(p("1 2 3")));
        assert_eq!((s, f), (1, BigRational::one()));
        let (s, _) = evaluate(&inst, &Ordering::new(p("1 3 2")));
        assert_eq!(s, 0);
        let empty = parse_instance("vars 3\n").unwrap();
        let (s, f) = evaluate(&empty, &Ordering::new(p("1 2 3")));
        assert_eq!((s, f), (0, BigRational::one()));
    }

    #[test]
    fn derandomize_examples() {
        let inst = parse_instance("vars 4\nbtw 1 2 3\nbtw 2 3 4\nbtw 1 3 4\n").unwrap();
        let rel = RelaxedInstance::build(&inst, RelaxKind::L).unwrap();
        let pi = solve_not_first(&rel).unwrap();
        let m = half_id();
        let expect = expected_count(&pi, &inst, &m).unwrap();
        let ord = derandomize(&pi, &inst, &m).unwrap();
        let (sat, _) = evaluate(&inst, &ord);
        assert!(BigRational::from_integer(sat.into()) >= expect);
        // The L solve satisfies every relaxed constraint, so expectation
        // ≥ m/2 and the derandomized count ≥ ⌈m/2⌉.
        assert!(sat >= 2);

        let ident: Mixture<BigRational> =
            "1 I".parse::<IduCombination<BigRational>>().unwrap().into();
        assert_eq!(derandomize(&pi, &inst, &ident).unwrap(), pi);

        let u: Mixture<BigRational> = IduCombination::uniform().into();
        assert_eq!(
            derandomize(&pi, &inst, &u),
            Err(SolverError::HasUniformBlock)
        );
    }

    #[test]
    fn pipeline_examples() {
        let inst = parse_instance("vars 5\nbtw 1 2 3\nbtw 2 4 5\nbtw 1 3 5\nbtw 2 3 4\n").unwrap();
        let (ord, report) = pipeline(&inst, RelaxKind::L, &half_id(), 17, true).unwrap();
        assert_eq!(ord.perm().len(), 5);
        assert_eq!(report.s_relax, 1.0);
        assert!(report.fraction_final >= 0.5);
        assert_eq!(report.p_certified, 0.5);
        assert_eq!(report.mode, "L+derand");

        // An unsatisfiable relaxed instance surfaces Unsat.
        let text = "vars 2\npred asc\narity 2\nsat:\n1 2\nasc 1 2\nasc 2 1\n";
        let inst = parse_instance(text).unwrap();
        assert!(matches!(
            pipeline(&inst, RelaxKind::L, &half_id(), 0, false),
            Err(SolverError::Unsat)
        ));
    }

    #[test]
    fn brute_force_examples() {
        let inst = parse_instance("vars 3\nbtw 1 2 3\n").unwrap();
        let (_, f) = brute_force_best(&inst).unwrap();
        assert_eq!(f, BigRational::one());

        // Contradictory middles on a shared triple: at most one satisfiable.
        let inst = parse_instance("vars 3\nbtw 1 2 3\nbtw 2 1 3\n").unwrap();
        let (_, f) = brute_force_best(&inst).unwrap();
        assert_eq!(f, BigRational::new(1.into(), 2.into()));

        let empty = parse_instance("vars 4\n").unwrap();
        let (_, f) = brute_force_best(&empty).unwrap();
        assert_eq!(f, BigRational::one());

        let big = parse_instance("vars 11\n").unwrap();
        assert!(matches!(
            brute_force_best(&big),
            Err(SolverError::TooLarge(_))
        ));
    }
}
