//! Command-line surface of the toolkit: the `ordercsp` binary.
//!
//! One subcommand per capability: `relax` (print the canonical relaxations of
//! a predicate), `density` (exact pattern density in a mixture), `popt`
//! (optimize and certify an approximation factor), `verify` (certify a given
//! mixture), `solve` (the end-to-end pipeline on an instance file),
//! `classify` (census and optimizer sweep), `flags` (flag-algebra batch
//! evaluation), and `sample` (emit permutations from a mixture).
//!
//! Exit codes: 0 on success, 1 on a domain error (bad input data, unsolvable
//! instance), 2 on a usage error. Every randomized path takes a mandatory
//! `--seed` and is bit-reproducible. `--json` switches output from human
//! tables to JSON documents.

use std::path::PathBuf;
use std::time::Duration;

use anyhow::{anyhow, Context, Result};
use clap::{Args, Parser, Subcommand};
use num::BigRational;

use crate::classify::{self, SweepBudget};
use crate::flags::{self, Flag, Tag, TypedSum};
use crate::idu::{self, Mixture};
use crate::optimize::{certify, optimize_p, SearchConfig, DEFAULT_MAX_DENOMINATOR};
use crate::perm::Perm;
use crate::predicate::Predicate;
use crate::solver::{self, RelaxKind};

/// Approximation toolkit for satisfiable and nearly satisfiable ordering
/// CSPs.
#[derive(Parser)]
#[command(name = "ordercsp", version, about)]
pub struct Cli {
    /// Emit JSON instead of human-readable tables.
    #[arg(long, global = true)]
    json: bool,
    /// Worker threads for classify/popt (default 1 for reproducibility).
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the L, R, and ε relaxations of a predicate.
    Relax {
        /// Predicate: `btw`, `lt`, or a path to a predicate file.
        #[arg(long)]
        phi: String,
    },
    /// Exact pattern density of a permutation in a mixture.
    Density {
        /// Pattern, e.g. "1 2" or "2 3 1".
        #[arg(long)]
        rho: String,
        /// Mixture, e.g. "1/2 I + 1/2 D" or "1/3 * (1 U) ; 2/3 * (1 I)".
        #[arg(long, visible_alias = "combo")]
        mix: String,
    },
    /// Optimize the rounding mixture for a relaxation and certify the result.
    Popt {
        /// Predicate: `btw`, `lt`, or a path to a predicate file.
        #[arg(long)]
        phi: String,
        /// Which relaxation to target: L, R, or eps.
        #[arg(long)]
        relax: RelaxArg,
        /// RNG seed (required: the search is randomized).
        #[arg(long)]
        seed: u64,
        /// Independent restarts.
        #[arg(long, default_value_t = 64)]
        restarts: usize,
        /// Per-restart iteration budget.
        #[arg(long, default_value_t = 600)]
        max_iterations: usize,
        /// Denominator cap when rationalizing the certified mixture.
        #[arg(long, default_value_t = DEFAULT_MAX_DENOMINATOR)]
        max_denominator: u64,
    },
    /// Certify the exact approximation factor of a given mixture.
    Verify {
        /// Predicate: `btw`, `lt`, or a path to a predicate file.
        #[arg(long)]
        phi: String,
        /// Which relaxation to target: L, R, or eps.
        #[arg(long)]
        relax: RelaxArg,
        /// Rational mixture, e.g. "1/2 I + 1/2 D".
        #[arg(long)]
        mix: String,
    },
    /// Run the full pipeline on an instance file.
    Solve {
        /// Path to an instance file.
        #[arg(long)]
        instance: PathBuf,
        /// Which relaxation to apply: L, R, or eps.
        #[arg(long)]
        relax: RelaxArg,
        /// Rational rounding mixture, e.g. "1/2 I + 1/2 D".
        #[arg(long)]
        mix: String,
        /// Rounding seed (required: rounding is randomized).
        #[arg(long)]
        seed: u64,
        /// Replace randomized rounding by the conditional-expectation scan.
        #[arg(long)]
        derandomize: bool,
    },
    /// Census of all non-isomorphic predicates of one arity.
    Classify {
        /// Arity (2, 3, or 4).
        #[arg(long)]
        arity: usize,
        /// Write the full table here (CSV, or JSON with --json).
        #[arg(long)]
        out: Option<PathBuf>,
        /// After the census, sweep the optimizer over flagged classes.
        #[arg(long)]
        sweep: bool,
        /// Sweep seed (required with --sweep).
        #[arg(long, required_if_eq("sweep", "true"))]
        seed: Option<u64>,
        /// Stop the sweep after this many classes beat random.
        #[arg(long, default_value_t = 50)]
        target: usize,
        /// Sweep wall-clock limit in seconds.
        #[arg(long, default_value_t = 1800)]
        time_limit: u64,
    },
    /// Flag-algebra batch evaluation.
    Flags(FlagsArgs),
    /// Sample permutations from a mixture.
    Sample {
        /// Mixture, e.g. "1/2 I + 1/2 D".
        #[arg(long)]
        mix: String,
        /// Permutation length.
        #[arg(long)]
        n: usize,
        /// RNG seed (required: sampling is randomized).
        #[arg(long)]
        seed: u64,
        /// Number of samples.
        #[arg(long, default_value_t = 1)]
        count: usize,
    },
}

#[derive(Args)]
struct FlagsArgs {
    #[command(subcommand)]
    op: FlagsOp,
}

#[derive(Subcommand)]
enum FlagsOp {
    /// Product of two flags modulo the signature ideal.
    Product {
        /// Left flag, e.g. "1 [2] 3".
        #[arg(long)]
        left: String,
        /// Right flag of the same type.
        #[arg(long)]
        right: String,
        /// Also print the unlabeled average ⟦·⟧.
        #[arg(long)]
        average: bool,
    },
    /// Exact density of a flag in a tagged ID combination.
    Density {
        /// Flag, e.g. "1 [2] 3".
        #[arg(long)]
        flag: String,
        /// ID combination, e.g. "1/2 I + 1/2 D".
        #[arg(long)]
        combo: String,
        /// Comma-separated x-coordinates of the labeled points, e.g. "1/3".
        #[arg(long, default_value = "")]
        tag: String,
    },
}

/// How the pipeline's relaxation is named on the command line.
#[derive(Clone, Copy, clap::ValueEnum)]
enum RelaxArg {
    L,
    R,
    Eps,
}

impl From<RelaxArg> for RelaxKind {
    fn from(a: RelaxArg) -> RelaxKind {
        match a {
            RelaxArg::L => RelaxKind::L,
            RelaxArg::R => RelaxKind::R,
            RelaxArg::Eps => RelaxKind::Eps,
        }
    }
}

/// Parses argv and dispatches; the binary maps the `Err` case to exit 1.
pub fn run() -> Result<()> {
    let cli = Cli::parse();
    if cli.threads > 1 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(cli.threads)
            .build_global()
            .context("initializing the thread pool")?;
    }
    dispatch(&cli)
}

fn dispatch(cli: &Cli) -> Result<()> {
    let json = cli.json;
    match &cli.command {
        Command::Relax { phi } => cmd_relax(phi, json),
        Command::Density { rho, mix } => cmd_density(rho, mix, json),
        Command::Popt {
            phi,
            relax,
            seed,
            restarts,
            max_iterations,
            max_denominator,
        } => cmd_popt(
            phi,
            (*relax).into(),
            *seed,
            *restarts,
            *max_iterations,
            *max_denominator,
            json,
        ),
        Command::Verify { phi, relax, mix } => cmd_verify(phi, (*relax).into(), mix, json),
        Command::Solve {
            instance,
            relax,
            mix,
            seed,
            derandomize,
        } => cmd_solve(instance, (*relax).into(), mix, *seed, *derandomize, json),
        Command::Classify {
            arity,
            out,
            sweep,
            seed,
            target,
            time_limit,
        } => cmd_classify(*arity, out.as_deref(), *sweep, *seed, *target, *time_limit, json),
        Command::Flags(args) => match &args.op {
            FlagsOp::Product {
                left,
                right,
                average,
            } => cmd_flags_product(left, right, *average, json),
            FlagsOp::Density { flag, combo, tag } => cmd_flags_density(flag, combo, tag, json),
        },
        Command::Sample {
            mix,
            n,
            seed,
            count,
        } => cmd_sample(mix, *n, *seed, *count, json),
    }
}

/// Loads a predicate: the builtins `btw`/`lt`, or a predicate file.
fn load_predicate(source: &str) -> Result<Predicate> {
    match source {
        "btw" => Ok(Predicate::betweenness()),
        "lt" => Ok(Predicate::less_than()),
        path => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading predicate file {path:?}"))?;
            Predicate::parse(&text).map_err(|e| anyhow!("parsing {path:?}: {e}"))
        }
    }
}

fn relaxation_of(phi: &Predicate, kind: RelaxKind) -> Result<Predicate> {
    Ok(match kind {
        RelaxKind::L => phi.l_relaxation()?,
        RelaxKind::R => phi.r_relaxation()?,
        RelaxKind::Eps => phi.eps_relaxation()?,
    })
}

fn parse_mixture(s: &str) -> Result<Mixture<BigRational>> {
    s.parse::<Mixture<BigRational>>()
        .map_err(|e| anyhow!("parsing mixture {s:?}: {e}"))
}

fn sat_line(p: &Predicate) -> String {
    p.members()
        .iter()
        .map(|m| m.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

fn cmd_relax(phi: &str, json: bool) -> Result<()> {
    let pred = load_predicate(phi)?;
    let rels = [
        ("L", pred.l_relaxation()?),
        ("R", pred.r_relaxation()?),
        ("eps", pred.eps_relaxation()?),
    ];
    if json {
        let doc = serde_json::json!({
            "arity": pred.arity(),
            "sat": sat_line(&pred),
            "tractable": pred.is_tractable()?,
            "precedence": pred.is_precedence()?,
            "relaxations": rels.iter().map(|(name, r)| serde_json::json!({
                "kind": name,
                "sat": sat_line(r),
                "nontrivial": *r != pred && !r.is_always_true(),
            })).collect::<Vec<_>>(),
        });
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("phi      (arity {}): {{{}}}", pred.arity(), sat_line(&pred));
        println!(
            "tractable: {}, precedence: {}",
            pred.is_tractable()?,
            pred.is_precedence()?
        );
        for (name, r) in &rels {
            let tag = if *r == pred {
                " (= phi)"
            } else if r.is_always_true() {
                " (always true)"
            } else {
                ""
            };
            println!("phi_{name:<4}: {{{}}}{tag}", sat_line(r));
        }
    }
    Ok(())
}

fn cmd_density(rho: &str, mix: &str, json: bool) -> Result<()> {
    let rho: Perm = rho.parse().map_err(|e| anyhow!("parsing pattern: {e}"))?;
    let mixture = parse_mixture(mix)?;
    let mut d = BigRational::from_integer(0.into());
    for (p, combo) in mixture.components() {
        d += p * idu::density(&rho, combo);
    }
    if json {
        println!(
            "{}",
            serde_json::json!({
                "rho": rho.to_string(),
                "mixture": mixture.to_string(),
                "density": d.to_string(),
                "density_approx": crate::idu::Scalar::to_f64(&d),
            })
        );
    } else {
        println!("d({rho}, R) = {d} ≈ {}", crate::idu::Scalar::to_f64(&d));
    }
    Ok(())
}

fn cmd_popt(
    phi: &str,
    kind: RelaxKind,
    seed: u64,
    restarts: usize,
    max_iterations: usize,
    max_denominator: u64,
    json: bool,
) -> Result<()> {
    let pred = load_predicate(phi)?;
    let rel = relaxation_of(&pred, kind)?;
    let config = SearchConfig {
        restarts,
        max_iterations,
        ..SearchConfig::new(seed)
    };
    let (mixture, p_float) = optimize_p(&pred, &rel, &config)?;
    let cert = certify(&pred, &rel, &mixture, max_denominator)?;
    let alpha = pred.alpha_random();
    if json {
        let mut doc = cert.to_json();
        doc["p_float"] = serde_json::json!(p_float);
        doc["alpha_random"] = serde_json::json!(alpha.to_string());
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("best mixture : {}", cert.mixture);
        println!("p (float)    : {p_float}");
        println!(
            "p (certified): {} ≈ {}",
            cert.p,
            crate::idu::Scalar::to_f64(&cert.p)
        );
        println!(
            "alpha_random : {alpha} ≈ {}",
            crate::idu::Scalar::to_f64(&alpha)
        );
        println!("argmin tau   : {}", cert.argmin);
    }
    Ok(())
}

fn cmd_verify(phi: &str, kind: RelaxKind, mix: &str, json: bool) -> Result<()> {
    let pred = load_predicate(phi)?;
    let rel = relaxation_of(&pred, kind)?;
    let mixture = parse_mixture(mix)?;
    let (p, argmin) = idu::p_value_with_argmin(&pred, &rel, &mixture)?;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "mixture": mixture.to_string(),
                "p": p.to_string(),
                "p_approx": crate::idu::Scalar::to_f64(&p),
                "argmin_tau": argmin.to_string(),
            })
        );
    } else {
        println!("p = {p} ≈ {}", crate::idu::Scalar::to_f64(&p));
        println!("argmin tau: {argmin}");
    }
    Ok(())
}

fn cmd_solve(
    instance: &std::path::Path,
    kind: RelaxKind,
    mix: &str,
    seed: u64,
    derandomize: bool,
    json: bool,
) -> Result<()> {
    let text = std::fs::read_to_string(instance)
        .with_context(|| format!("reading instance {instance:?}"))?;
    let inst = solver::parse_instance(&text)?;
    let mixture = parse_mixture(mix)?;
    let (ord, report) = solver::pipeline(&inst, kind, &mixture, seed, derandomize)?;
    if json {
        let mut doc = serde_json::to_value(&report)?;
        doc["ordering"] = serde_json::json!(ord.perm().to_string());
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("mode        : {}", report.mode);
        println!("ordering    : {}", ord.perm());
        println!(
            "satisfied   : {} / {} ({:.4})",
            report.satisfied, report.constraints, report.fraction_final
        );
        println!("s_relax     : {:.4}", report.s_relax);
        println!("p_certified : {:.6}", report.p_certified);
    }
    Ok(())
}

fn cmd_classify(
    arity: usize,
    out: Option<&std::path::Path>,
    sweep: bool,
    seed: Option<u64>,
    target: usize,
    time_limit: u64,
    json: bool,
) -> Result<()> {
    let mut census = classify::census(arity)?;
    let summary = census.summary();
    let sweep_outcome = if sweep {
        let seed = seed.ok_or_else(|| anyhow!("--sweep requires --seed"))?;
        let budget = SweepBudget {
            config: SearchConfig::new(seed),
            target_beating: target,
            time_limit: Duration::from_secs(time_limit),
            checkpoint_dir: std::env::var_os("ORDERCSP_CHECKPOINT_DIR").map(PathBuf::from),
        };
        Some(classify::sweep(&mut census.rows, &budget)?)
    } else {
        None
    };
    if let Some(path) = out {
        classify::export(&census.rows, json, path)?;
    }
    if json {
        let mut doc = serde_json::to_value(&summary)?;
        doc["arity"] = serde_json::json!(arity);
        if let Some(o) = &sweep_outcome {
            doc["sweep"] = serde_json::to_value(o)?;
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("arity {arity} census");
        println!("classes          : {}", summary.classes);
        println!("tractable        : {}", summary.tractable);
        println!("precedence       : {}", summary.precedence);
        println!("nontrivial L or R: {}", summary.nontrivial_l_or_r);
        println!("nontrivial eps   : {}", summary.nontrivial_eps);
        if let Some(o) = &sweep_outcome {
            println!("sweep attempted  : {}", o.attempted);
            println!("sweep beating    : {}", o.beating_random);
        }
    }
    Ok(())
}

fn parse_flag(s: &str) -> Result<Flag> {
    s.parse::<Flag>().map_err(|e| anyhow!("parsing flag {s:?}: {e}"))
}

fn typed_sum_json(ts: &TypedSum) -> serde_json::Value {
    serde_json::json!(ts
        .terms()
        .map(|(_, f, c)| serde_json::json!({
            "flag": f.to_string(),
            "coefficient": c.to_string(),
        }))
        .collect::<Vec<_>>())
}

fn cmd_flags_product(left: &str, right: &str, average: bool, json: bool) -> Result<()> {
    let f1 = parse_flag(left)?;
    let f2 = parse_flag(right)?;
    let product = flags::product_mod_n(&f1, &f2)?;
    let avg = average.then(|| flags::average(&product));
    if json {
        let mut doc = serde_json::json!({ "product": typed_sum_json(&product) });
        if let Some(a) = &avg {
            doc["average"] = typed_sum_json(a);
        }
        println!("{}", serde_json::to_string_pretty(&doc)?);
    } else {
        println!("({f1}) . ({f2}) = {product}");
        if let Some(a) = &avg {
            println!("average: {a}");
        }
    }
    Ok(())
}

fn cmd_flags_density(flag: &str, combo: &str, tag: &str, json: bool) -> Result<()> {
    let f = parse_flag(flag)?;
    let combo = combo
        .parse::<crate::idu::IduCombination<BigRational>>()
        .map_err(|e| anyhow!("parsing combination: {e}"))?;
    let coords: Vec<BigRational> = tag
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(|t| {
            t.parse::<BigRational>()
                .map_err(|e| anyhow!("parsing tag coordinate {t:?}: {e}"))
        })
        .collect::<Result<_>>()?;
    let tag = Tag::new(coords)?;
    let d = flags::density_in_tagged_combo(&f, &combo, &tag)?;
    if json {
        println!(
            "{}",
            serde_json::json!({
                "flag": f.to_string(),
                "density": d.to_string(),
                "density_approx": crate::idu::Scalar::to_f64(&d),
            })
        );
    } else {
        println!("d({f}) = {d} ≈ {}", crate::idu::Scalar::to_f64(&d));
    }
    Ok(())
}

fn cmd_sample(mix: &str, n: usize, seed: u64, count: usize, json: bool) -> Result<()> {
    let mixture = parse_mixture(mix)?;
    let samples: Vec<String> = (0..count)
        .map(|i| idu::sample(&mixture, n, seed.wrapping_add(i as u64)).to_string())
        .collect();
    if json {
        println!("{}", serde_json::json!({ "samples": samples }));
    } else {
        for s in &samples {
            println!("{s}");
        }
    }
    Ok(())
}
