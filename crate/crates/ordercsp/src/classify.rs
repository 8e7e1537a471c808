//! Census of all non-isomorphic ordering predicates of arity ≤ 4, plus an
//! optional budgeted optimizer sweep over census classes.
//!
//! Two predicates are isomorphic when one is the image of the other under a
//! variable renaming and/or duality (order reversal), a group of `2·k!`
//! elements. The census iterates every non-constant sat bitset (`2^{k!} − 2`
//! of them), maps it through 48 precomputed bit-permutation tables (at arity
//! 4), and keeps exactly the bitsets that are numerically minimal in their
//! orbit. An orbit–stabilizer audit (`Σ orbit sizes = 2^{k!} − 2`) confirms
//! the classes partition the space.

use std::io::Write;
use std::path::Path;
use std::str::FromStr;
use std::time::{Duration, Instant};

use num::BigRational;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::optimize::{
    certify, optimize_p, sufficient_condition, v_vectors, OptimizeError, SearchConfig,
    SufficientCondition, DEFAULT_MAX_DENOMINATOR,
};
use crate::perm::{factorial, Perm};
use crate::predicate::{Predicate, PredicateError};
use crate::solver::RelaxKind;

/// Errors raised by the census and its serializers.
#[derive(Debug, Error)]
pub enum ClassifyError {
    /// The census covers arity 2, 3, and 4 only.
    #[error("census supports arity 2..=4, got {0}")]
    ArityUnsupported(usize),
    /// Filesystem failure while exporting or checkpointing.
    #[error("io error: {0}")]
    Io(String),
    /// Malformed census CSV.
    #[error("csv parse error: {0}")]
    Parse(String),
    /// Propagated predicate error.
    #[error(transparent)]
    Predicate(#[from] PredicateError),
    /// Propagated optimizer error (sweep).
    #[error(transparent)]
    Optimize(#[from] OptimizeError),
}

/// One canonical predicate class.
#[derive(Debug, Clone, PartialEq)]
pub struct CensusRow {
    /// Canonical sat bitset (bit `r` set iff the rank-`r` permutation is in
    /// Sat; numerically minimal over the isomorphism group).
    pub canon: u32,
    /// Predicate arity.
    pub arity: usize,
    /// `|Sat|`.
    pub sat_size: usize,
    /// Closed under Not-First or Not-Last atoms.
    pub tractable: bool,
    /// Conjunction of binary precedences.
    pub precedence: bool,
    /// L-relaxation differs from both φ and the constant-true predicate.
    pub nontrivial_l: bool,
    /// Same for the R-relaxation.
    pub nontrivial_r: bool,
    /// Same for the ε-relaxation.
    pub nontrivial_eps: bool,
    /// `|Sat|/k!`.
    pub alpha_random: BigRational,
    /// Orbit size under the isomorphism group.
    pub orbit_size: u32,
    /// Certified lower bounds from the optional optimizer sweep.
    pub p_l: Option<BigRational>,
    /// Certified `p` for the R-relaxation.
    pub p_r: Option<BigRational>,
    /// Certified `p` for the ε-relaxation.
    pub p_eps: Option<BigRational>,
}

impl CensusRow {
    /// Reconstructs the canonical predicate.
    pub fn predicate(&self) -> Predicate {
        predicate_from_mask(self.arity, self.canon)
    }
}

/// Aggregate counters of a census.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct CensusSummary {
    /// Number of canonical classes (constants excluded).
    pub classes: usize,
    /// Classes closed under Not-First or Not-Last atoms.
    pub tractable: usize,
    /// Precedence classes.
    pub precedence: usize,
    /// Non-tractable classes with a nontrivial L- or R-relaxation. Tractable
    /// classes are excluded: they coincide with one of their own canonical
    /// relaxations, so they are solved exactly rather than approximated.
    pub nontrivial_l_or_r: usize,
    /// Classes with a nontrivial ε-relaxation.
    pub nontrivial_eps: usize,
}

/// A full census of one arity.
#[derive(Debug, Clone)]
pub struct Census {
    /// Arity of every class.
    pub arity: usize,
    /// Rows sorted by canonical bitset.
    pub rows: Vec<CensusRow>,
    /// Σ orbit sizes; must equal `2^{k!} − 2`.
    pub orbit_total: u64,
}

impl Census {
    /// Aggregate counters.
    pub fn summary(&self) -> CensusSummary {
        CensusSummary {
            classes: self.rows.len(),
            tractable: self.rows.iter().filter(|r| r.tractable).count(),
            precedence: self.rows.iter().filter(|r| r.precedence).count(),
            nontrivial_l_or_r: self
                .rows
                .iter()
                .filter(|r| !r.tractable && (r.nontrivial_l || r.nontrivial_r))
                .count(),
            nontrivial_eps: self.rows.iter().filter(|r| r.nontrivial_eps).count(),
        }
    }
}

fn predicate_from_mask(arity: usize, mask: u32) -> Predicate {
    let members: Vec<Perm> = (0..factorial(arity) as u32)
        .filter(|r| mask & (1 << r) != 0)
        .map(|r| Perm::unrank(arity, r as u64).unwrap())
        .collect();
    Predicate::from_sat_list(arity, &members).expect("nonempty mask")
}

#[cfg(test)]
fn mask_of(pred: &Predicate) -> u32 {
    let k = pred.arity();
    let mut mask = 0u32;
    for r in 0..factorial(k) as u32 {
        if pred.contains(&Perm::unrank(k, r as u64).unwrap()) {
            mask |= 1 << r;
        }
    }
    mask
}

/// One group element as a rank permutation plus byte lookup tables: applying
/// the element to a sat bitset is three table lookups.
struct BitPermTable {
    bytes: Vec<[u32; 256]>,
}

impl BitPermTable {
    fn new(nbits: usize, rank_map: &[u32]) -> Self {
        let nbytes = nbits.div_ceil(8);
        let mut bytes = vec![[0u32; 256]; nbytes];
        for (byte_idx, table) in bytes.iter_mut().enumerate() {
            for value in 0..256usize {
                let mut out = 0u32;
                for bit in 0..8 {
                    let src = byte_idx * 8 + bit;
                    if src < nbits && value & (1 << bit) != 0 {
                        out |= 1 << rank_map[src];
                    }
                }
                table[value] = out;
            }
        }
        BitPermTable { bytes }
    }

    #[inline]
    fn apply(&self, mask: u32) -> u32 {
        let mut out = 0u32;
        for (i, table) in self.bytes.iter().enumerate() {
            out |= table[((mask >> (8 * i)) & 0xff) as usize];
        }
        out
    }
}

/// Rank maps of the full isomorphism group (`β` renaming composed with
/// optional duality), as bit-permutation tables.
fn group_tables(k: usize) -> Vec<BitPermTable> {
    let nbits = factorial(k) as usize;
    let decr = Perm::decreasing(k);
    let mut tables = Vec::with_capacity(2 * nbits);
    for beta in Perm::enumerate(k).unwrap() {
        let beta_inv = beta.inverse();
        for dual in [false, true] {
            let mut rank_map = vec![0u32; nbits];
            for (r, slot) in rank_map.iter_mut().enumerate() {
                let sigma = Perm::unrank(k, r as u64).unwrap();
                let mut img = sigma.compose(&beta_inv).unwrap();
                if dual {
                    img = decr.compose(&img).unwrap();
                }
                *slot = img.rank() as u32;
            }
            tables.push(BitPermTable::new(nbits, &rank_map));
        }
    }
    tables
}

/// Enumerates all canonical predicate classes of arity `k ∈ {2, 3, 4}`,
/// excluding the two constant predicates. Deterministic; parallelized over
/// the bitset range.
pub fn census(k: usize) -> Result<Census, ClassifyError> {
    if !(2..=4).contains(&k) {
        return Err(ClassifyError::ArityUnsupported(k));
    }
    let nbits = factorial(k) as usize;
    let full: u32 = if nbits == 32 {
        u32::MAX
    } else {
        (1u32 << nbits) - 1
    };
    let tables = group_tables(k);
    let results: Vec<(CensusRow, u64)> = (1..full)
        .into_par_iter()
        .filter_map(|mask| {
            // Representative iff numerically minimal in its orbit.
            let mut stabilizer = 0u32;
            for t in &tables {
                let img = t.apply(mask);
                if img < mask {
                    return None;
                }
                if img == mask {
                    stabilizer += 1;
                }
            }
            let orbit_size = tables.len() as u32 / stabilizer;
            Some((row_for(k, mask, orbit_size), orbit_size as u64))
        })
        .collect();
    let mut rows: Vec<CensusRow> = Vec::with_capacity(results.len());
    let mut orbit_total = 0u64;
    for (row, orbit) in results {
        rows.push(row);
        orbit_total += orbit;
    }
    rows.sort_by_key(|r| r.canon);
    Ok(Census {
        arity: k,
        rows,
        orbit_total,
    })
}

fn row_for(k: usize, mask: u32, orbit_size: u32) -> CensusRow {
    let pred = predicate_from_mask(k, mask);
    let l = pred.l_relaxation().expect("valid arity");
    let r = pred.r_relaxation().expect("valid arity");
    let eps = pred.eps_relaxation().expect("valid arity");
    let nontrivial = |rel: &Predicate| *rel != pred && !rel.is_always_true();
    CensusRow {
        canon: mask,
        arity: k,
        sat_size: pred.sat_size(),
        tractable: pred.is_tractable().expect("valid arity"),
        precedence: pred.is_precedence().expect("valid arity"),
        nontrivial_l: nontrivial(&l),
        nontrivial_r: nontrivial(&r),
        nontrivial_eps: nontrivial(&eps),
        alpha_random: pred.alpha_random(),
        orbit_size,
        p_l: None,
        p_r: None,
        p_eps: None,
    }
}

/// Writes rows as CSV with a stable column order; rationals as `a/b`.
pub fn export_csv(rows: &[CensusRow], out: &mut dyn Write) -> Result<(), ClassifyError> {
    let io = |e: std::io::Error| ClassifyError::Io(e.to_string());
    writeln!(
        out,
        "canon_hex,arity,sat_size,tractable,precedence,nontrivial_L,nontrivial_R,nontrivial_eps,alpha_random,p_L,p_R,p_eps"
    )
    .map_err(io)?;
    let opt = |p: &Option<BigRational>| p.as_ref().map(|v| v.to_string()).unwrap_or_default();
    for r in rows {
        writeln!(
            out,
            "{:#x},{},{},{},{},{},{},{},{},{},{},{}",
            r.canon,
            r.arity,
            r.sat_size,
            r.tractable,
            r.precedence,
            r.nontrivial_l,
            r.nontrivial_r,
            r.nontrivial_eps,
            r.alpha_random,
            opt(&r.p_l),
            opt(&r.p_r),
            opt(&r.p_eps),
        )
        .map_err(io)?;
    }
    Ok(())
}

/// Parses CSV produced by [`export_csv`] (round-trip use).
pub fn parse_csv(text: &str) -> Result<Vec<CensusRow>, ClassifyError> {
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| ClassifyError::Parse("empty input".into()))?;
    if !header.starts_with("canon_hex,") {
        return Err(ClassifyError::Parse("missing header".into()));
    }
    let mut rows = Vec::new();
    for (i, line) in lines.enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 12 {
            return Err(ClassifyError::Parse(format!(
                "line {}: expected 12 fields, got {}",
                i + 2,
                fields.len()
            )));
        }
        let bad = |what: &str| ClassifyError::Parse(format!("line {}: bad {what}", i + 2));
        let canon = u32::from_str_radix(fields[0].trim_start_matches("0x"), 16)
            .map_err(|_| bad("canon_hex"))?;
        let opt = |s: &str| -> Result<Option<BigRational>, ClassifyError> {
            if s.is_empty() {
                Ok(None)
            } else {
                BigRational::from_str(s)
                    .map(Some)
                    .map_err(|_| bad("rational"))
            }
        };
        let arity: usize = fields[1].parse().map_err(|_| bad("arity"))?;
        let row = CensusRow {
            canon,
            arity,
            sat_size: fields[2].parse().map_err(|_| bad("sat_size"))?,
            tractable: fields[3].parse().map_err(|_| bad("tractable"))?,
            precedence: fields[4].parse().map_err(|_| bad("precedence"))?,
            nontrivial_l: fields[5].parse().map_err(|_| bad("nontrivial_L"))?,
            nontrivial_r: fields[6].parse().map_err(|_| bad("nontrivial_R"))?,
            nontrivial_eps: fields[7].parse().map_err(|_| bad("nontrivial_eps"))?,
            alpha_random: BigRational::from_str(fields[8]).map_err(|_| bad("alpha_random"))?,
            orbit_size: 0,
            p_l: opt(fields[9])?,
            p_r: opt(fields[10])?,
            p_eps: opt(fields[11])?,
        };
        rows.push(row);
    }
    Ok(rows)
}

/// Exports rows to a file; format chosen by extension-agnostic flag.
pub fn export(rows: &[CensusRow], json: bool, path: &Path) -> Result<(), ClassifyError> {
    let io = |e: std::io::Error| ClassifyError::Io(e.to_string());
    let mut file = std::fs::File::create(path).map_err(io)?;
    if json {
        let doc: Vec<serde_json::Value> = rows
            .iter()
            .map(|r| {
                serde_json::json!({
                    "canon_hex": format!("{:#x}", r.canon),
                    "arity": r.arity,
                    "sat_size": r.sat_size,
                    "tractable": r.tractable,
                    "precedence": r.precedence,
                    "nontrivial_L": r.nontrivial_l,
                    "nontrivial_R": r.nontrivial_r,
                    "nontrivial_eps": r.nontrivial_eps,
                    "alpha_random": r.alpha_random.to_string(),
                    "p_L": r.p_l.as_ref().map(|p| p.to_string()),
                    "p_R": r.p_r.as_ref().map(|p| p.to_string()),
                    "p_eps": r.p_eps.as_ref().map(|p| p.to_string()),
                })
            })
            .collect();
        serde_json::to_writer_pretty(&mut file, &doc).map_err(|e| ClassifyError::Io(e.to_string()))
    } else {
        export_csv(rows, &mut file)
    }
}

/// Budget for the optimizer sweep over census classes.
#[derive(Debug, Clone)]
pub struct SweepBudget {
    /// Per-class optimizer configuration.
    pub config: SearchConfig,
    /// Stop after this many classes have certified `p > α + 10⁻⁴`.
    pub target_beating: usize,
    /// Hard wall-clock limit.
    pub time_limit: Duration,
    /// Checkpoint directory (JSON file per arity; resumes where it left off).
    pub checkpoint_dir: Option<std::path::PathBuf>,
}

/// Sweep outcome: how many classes were attempted and how many certified a
/// factor strictly above random (by more than `10⁻⁴`).
#[derive(Debug, Clone, Serialize)]
pub struct SweepOutcome {
    /// Classes attempted (flagged by the sufficient condition).
    pub attempted: usize,
    /// Classes with a certified `p > α_random + 10⁻⁴`.
    pub beating_random: usize,
}

/// Tries every direction in `{−1, 0, 1}^{k−1}`: a hit proves feasibility of
/// the sign-vector condition without the exact LP.
fn quick_feasible(pred: &Predicate, rel: &Predicate) -> Result<bool, ClassifyError> {
    let vs: Vec<Vec<i64>> = v_vectors(pred, rel)?
        .values()
        .map(|v| v.entries().to_vec())
        .collect();
    let d = pred.arity() - 1;
    let mut y = vec![-1i64; d];
    loop {
        if y.iter().any(|&c| c != 0)
            && vs
                .iter()
                .all(|v| v.iter().zip(&y).map(|(a, b)| a * b).sum::<i64>() > 0)
        {
            return Ok(true);
        }
        let mut pos = 0;
        loop {
            if pos == d {
                return Ok(false);
            }
            y[pos] += 1;
            if y[pos] <= 1 {
                break;
            }
            y[pos] = -1;
            pos += 1;
        }
    }
}

#[derive(Serialize, Deserialize)]
struct SweepCheckpoint {
    arity: usize,
    last_canon: u32,
    attempted: usize,
    beating_random: usize,
}

/// Runs the budgeted optimizer sweep: scans classes in canonical order,
/// flags those whose sign-vector sufficient condition is feasible for some
/// nontrivial relaxation, and certifies an optimized mixture for each flagged
/// class. Fills `p_l`/`p_r`/`p_eps` on the rows it touches. The reported
/// counts are lower bounds — budget exhaustion never asserts an upper bound.
pub fn sweep(rows: &mut [CensusRow], budget: &SweepBudget) -> Result<SweepOutcome, ClassifyError> {
    let start = Instant::now();
    let arity = rows.first().map(|r| r.arity).unwrap_or(0);
    let ckpt_path = budget
        .checkpoint_dir
        .as_ref()
        .map(|d| d.join(format!("sweep_arity{arity}.json")));
    let mut state = SweepCheckpoint {
        arity,
        last_canon: 0,
        attempted: 0,
        beating_random: 0,
    };
    if let Some(path) = &ckpt_path {
        if let Ok(text) = std::fs::read_to_string(path) {
            if let Ok(prev) = serde_json::from_str::<SweepCheckpoint>(&text) {
                if prev.arity == arity {
                    state = prev;
                }
            }
        }
    }
    let threshold = BigRational::new(1.into(), 10_000.into());
    for (i, row) in rows.iter_mut().enumerate() {
        if row.canon <= state.last_canon && state.last_canon != 0 {
            continue;
        }
        if state.beating_random >= budget.target_beating || start.elapsed() > budget.time_limit {
            break;
        }
        let pred = row.predicate();
        let mut beat = false;
        for kind in [RelaxKind::L, RelaxKind::R, RelaxKind::Eps] {
            let rel = match kind {
                RelaxKind::L => pred.l_relaxation()?,
                RelaxKind::R => pred.r_relaxation()?,
                RelaxKind::Eps => pred.eps_relaxation()?,
            };
            if rel == pred || rel.is_always_true() {
                continue;
            }
            // Cheap sufficient test first (positive sign-pattern direction);
            // the exact max-margin LP only runs when it fails.
            let feasible = quick_feasible(&pred, &rel)?
                || matches!(
                    sufficient_condition(&pred, &rel)?,
                    SufficientCondition::Feasible { .. }
                );
            if !feasible {
                continue;
            }
            let (mixture, _) = optimize_p(&pred, &rel, &budget.config)?;
            let cert = certify(&pred, &rel, &mixture, DEFAULT_MAX_DENOMINATOR)?;
            if &cert.p - &row.alpha_random > threshold {
                beat = true;
            }
            let slot = match kind {
                RelaxKind::L => &mut row.p_l,
                RelaxKind::R => &mut row.p_r,
                RelaxKind::Eps => &mut row.p_eps,
            };
            *slot = Some(cert.p);
        }
        if row.p_l.is_some() || row.p_r.is_some() || row.p_eps.is_some() {
            state.attempted += 1;
        }
        if beat {
            state.beating_random += 1;
        }
        state.last_canon = row.canon;
        if let Some(path) = &ckpt_path {
            if i % 1000 == 0 || state.beating_random >= budget.target_beating {
                let text = serde_json::to_string(&state)
                    .map_err(|e| ClassifyError::Io(e.to_string()))?;
                std::fs::write(path, text).map_err(|e| ClassifyError::Io(e.to_string()))?;
            }
        }
    }
    if let Some(path) = &ckpt_path {
        let text = serde_json::to_string(&state).map_err(|e| ClassifyError::Io(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| ClassifyError::Io(e.to_string()))?;
    }
    Ok(SweepOutcome {
        attempted: state.attempted,
        beating_random: state.beating_random,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn census_arity2() {
        let c = census(2).unwrap();
        assert_eq!(c.rows.len(), 1);
        let row = &c.rows[0];
        assert!(row.tractable && row.precedence);
        assert_eq!(row.sat_size, 1);
        assert_eq!(row.alpha_random, BigRational::new(1.into(), 2.into()));
        assert_eq!(c.orbit_total, 2);
    }

    #[test]
    fn census_arity3() {
        let c = census(3).unwrap();
        let s = c.summary();
        assert_eq!(s.classes, 11);
        assert_eq!(s.tractable, 4);
        assert_eq!(s.precedence, 3);
        assert_eq!(s.nontrivial_l_or_r, 3);
        // Exactly one class has a nontrivial ε-relaxation: the {123, 231}
        // type, where x₁ < x₂ holds in every satisfying permutation, so the
        // implied-edge conjunction is neither the predicate itself nor
        // constant-true.
        assert_eq!(s.nontrivial_eps, 1);
        // Orbit–stabilizer audit: classes partition all non-constant bitsets.
        assert_eq!(c.orbit_total, (1u64 << 6) - 2);
        assert!(census(5).is_err());
    }

    #[test]
    fn canonical_masks_agree_with_predicate_canonical_form() {
        // The byte-table canonicalization must reproduce the reference
        // canonical form computed by the predicate module.
        let c = census(3).unwrap();
        for row in &c.rows {
            let pred = row.predicate();
            let (canon, orbit) = pred.canonical_form();
            assert_eq!(mask_of(&canon), row.canon);
            assert_eq!(orbit as u32, row.orbit_size);
        }
    }

    #[test]
    fn tractability_implications() {
        let c = census(3).unwrap();
        for row in &c.rows {
            let pred = row.predicate();
            if row.precedence {
                assert!(row.tractable);
            }
            if row.tractable {
                assert!(pred.is_not_first().unwrap() || pred.is_not_last().unwrap());
            }
        }
    }

    #[test]
    fn csv_round_trip() {
        let c = census(3).unwrap();
        let mut buf = Vec::new();
        export_csv(&c.rows, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 12);
        let parsed = parse_csv(&text).unwrap();
        assert_eq!(parsed.len(), c.rows.len());
        for (a, b) in parsed.iter().zip(&c.rows) {
            assert_eq!(a.canon, b.canon);
            assert_eq!(a.alpha_random, b.alpha_random);
            assert_eq!(a.tractable, b.tractable);
        }
        // Header only for the empty row set.
        let mut buf = Vec::new();
        export_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().lines().count(), 1);
    }

    fn row_for_predicate(pred: &Predicate) -> CensusRow {
        row_for(pred.arity(), mask_of(pred), 1)
    }

    #[test]
    fn sweep_skips_classes_without_feasible_direction() {
        // The sign-vector condition is a first-order test at the uniform
        // permuton, and it fails for every arity-3 class: even Betweenness,
        // which does beat random, has zero v-vectors for its binding
        // signatures. The sweep must therefore attempt nothing at arity 3.
        let mut c = census(3).unwrap();
        let budget = SweepBudget {
            config: SearchConfig {
                restarts: 4,
                max_iterations: 200,
                ..SearchConfig::new(2)
            },
            target_beating: 1,
            time_limit: Duration::from_secs(120),
            checkpoint_dir: None,
        };
        let outcome = sweep(&mut c.rows, &budget).unwrap();
        assert_eq!(outcome.attempted, 0, "{outcome:?}");
        assert_eq!(outcome.beating_random, 0, "{outcome:?}");
    }

    #[test]
    fn sweep_certifies_beating_random_on_flagged_class() {
        // The vee predicate {1234, 1432} has a feasible direction for its
        // L-relaxation, and the optimized mixture certifies p = 8/27, far
        // above α = 1/12.
        let pred = Predicate::from_sat_list(
            4,
            &[
                Perm::new(vec![1, 2, 3, 4]).unwrap(),
                Perm::new(vec![1, 4, 3, 2]).unwrap(),
            ],
        )
        .unwrap();
        let mut rows = vec![row_for_predicate(&pred)];
        let budget = SweepBudget {
            config: SearchConfig {
                restarts: 10,
                max_iterations: 300,
                ..SearchConfig::new(2)
            },
            target_beating: 1,
            time_limit: Duration::from_secs(300),
            checkpoint_dir: None,
        };
        let outcome = sweep(&mut rows, &budget).unwrap();
        assert_eq!(outcome.attempted, 1, "{outcome:?}");
        assert_eq!(outcome.beating_random, 1, "{outcome:?}");
        assert!(rows[0].p_l.is_some() || rows[0].p_r.is_some());
    }
}
