//! `mixlab`: Gaussian-mixture information functionals from the command
//! line.
//!
//! Exit codes: 0 on success (and passing checks), 1 when a check fails,
//! 2 on usage or configuration errors.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use serde::Deserialize;

use mixlab::checks::{
    check_blachman_stam, check_entropy_concavity_t, check_fisher_jensen, check_r_convexity,
    check_schur_concavity, check_simplex_concavity, verify_sqrt_sandwich_counterexample,
    CheckReport,
};
use mixlab::cltlab::{check_rademacher_type, fit_rate, run_sweep, CltConfig};
use mixlab::fishmin::{minimize_fisher, MinMethod};
use mixlab::infofn::{entropy, fisher_matrix, renyi_entropy};
use mixlab::mixture::MixtureDensity;
use mixlab::quad::QuadSpec;

mod suite;

#[derive(Parser)]
#[command(name = "mixlab", version, about = "information functionals of centered Gaussian mixtures")]
struct Cli {
    /// Base seed for every random stream of the invocation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Output path (file, or directory for `suite`); stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Worker threads; falls back to MIXLAB_THREADS, then all cores.
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Override the relative quadrature tolerance.
    #[arg(long, global = true)]
    rel_tol: Option<f64>,

    /// Override the absolute quadrature tolerance.
    #[arg(long, global = true)]
    abs_tol: Option<f64>,

    /// Override the tail radius multiplier (units of max sigma).
    #[arg(long, global = true)]
    tail_multiplier: Option<f64>,

    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Differential entropy of a mixture model (JSON report).
    Entropy {
        /// Mixture JSON: {"dimension": d, "mixer": {...}}.
        #[arg(long)]
        model: PathBuf,
    },
    /// Renyi entropy of order alpha.
    Renyi {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        alpha: f64,
    },
    /// Fisher information matrix.
    Fisher {
        #[arg(long)]
        model: PathBuf,
        /// Monte Carlo samples (only used for d >= 3).
        #[arg(long, default_value_t = 1_000_000)]
        mc_samples: u64,
    },
    /// Run one named inequality check from a JSON config.
    Check {
        /// One of: entropy_concavity_t, simplex_concavity, schur_concavity,
        /// fisher_jensen, blachman_stam, r_convexity,
        /// sqrt_sandwich_counterexample.
        name: String,
        #[arg(long, required_unless_present = "list")]
        config: Option<PathBuf>,
        /// List available check names and exit.
        #[arg(long)]
        list: bool,
    },
    /// Standardized Fisher deviation sweep; writes CSV.
    CltRate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Exhaustive Rademacher type check on Schatten classes.
    TypeCheck {
        #[arg(long)]
        p: f64,
        #[arg(long)]
        delta: f64,
        #[arg(long)]
        n: usize,
        #[arg(long)]
        d: usize,
        #[arg(long, default_value_t = 100)]
        trials: usize,
    },
    /// Minimize Fisher information of a weighted i.i.d. sum; writes the
    /// evaluation trace as CSV.
    MinFisher {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value_t = MinMethodArg::Grid)]
        method: MinMethodArg,
        #[arg(long, default_value_t = 20_000)]
        budget: usize,
    },
    /// Batch density/score evaluation: reads points from CSV (one point per
    /// row), appends density and score columns.
    Eval {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        points: PathBuf,
    },
    /// Run the whole verification battery and write a summary.
    Suite {
        #[arg(long, value_enum, default_value_t = suite::Scale::Full)]
        scale: suite::Scale,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
enum MinMethodArg {
    Grid,
    ProjectedDescent,
}

/// 17 significant digits: round-trip exact in CSV, locale-free.
pub fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads(cli.threads);
    match run(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}

fn init_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("MIXLAB_THREADS").ok().and_then(|s| s.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
}

fn quad_spec(cli: &Cli) -> Result<QuadSpec> {
    let mut spec = QuadSpec::default();
    if let Some(r) = cli.rel_tol {
        spec.rel_tol = r;
    }
    if let Some(a) = cli.abs_tol {
        spec.abs_tol = a;
    }
    if let Some(t) = cli.tail_multiplier {
        spec.tail_radius_multiplier = t;
    }
    spec.validate()?;
    Ok(spec)
}

fn run(cli: Cli) -> Result<bool> {
    let spec = quad_spec(&cli)?;
    match &cli.cmd {
        Cmd::Entropy { model } => {
            let mix = load_model(model)?;
            emit_json(cli.out.as_deref(), &entropy(&mix, &spec)?)?;
            Ok(true)
        }
        Cmd::Renyi { model, alpha } => {
            let mix = load_model(model)?;
            emit_json(cli.out.as_deref(), &renyi_entropy(&mix, *alpha, &spec)?)?;
            Ok(true)
        }
        Cmd::Fisher { model, mc_samples } => {
            let mix = load_model(model)?;
            emit_json(cli.out.as_deref(), &fisher_matrix(&mix, &spec, *mc_samples, cli.seed)?)?;
            Ok(true)
        }
        Cmd::Check { name, config, list } => {
            if *list {
                for n in CHECK_NAMES {
                    println!("{n}");
                }
                return Ok(true);
            }
            let config = config.as_ref().expect("clap enforces --config");
            run_check(name, config, cli.seed, &spec, cli.out.as_deref())
        }
        Cmd::CltRate { config } => {
            let text = fs::read_to_string(config)
                .with_context(|| format!("reading {}", config.display()))?;
            let mut cfg: CltConfig = parse_json(&text, config)?;
            if cfg.seed == 0 {
                cfg.seed = cli.seed;
            }
            let rows = run_sweep(&cfg)?;
            let mut csv =
                String::from("n,d,delta,scheme,deviation,error_bound,predictor,method,m,samples\n");
            let scheme = match cfg.weight_scheme {
                mixlab::cltlab::WeightScheme::Equal => "equal",
                mixlab::cltlab::WeightScheme::Explicit(_) => "explicit",
            };
            for r in &rows {
                csv.push_str(&format!(
                    "{},{},{},{},{},{},{},{},{},{}\n",
                    r.n,
                    r.dimension,
                    fmt17(r.delta),
                    scheme,
                    fmt17(r.deviation),
                    fmt17(r.error_bound),
                    fmt17(r.predictor),
                    r.method,
                    r.atoms,
                    r.samples
                ));
            }
            if let Ok(fit) = fit_rate(&rows) {
                csv.push_str(&format!(
                    "# fit: slope={} prefactor={} residual={} points={}\n",
                    fmt17(fit.slope),
                    fmt17(fit.prefactor),
                    fmt17(fit.residual),
                    fit.points_used
                ));
            }
            emit_text(cli.out.as_deref(), &csv)?;
            Ok(true)
        }
        Cmd::TypeCheck { p, delta, n, d, trials } => {
            let rep = check_rademacher_type(*p, *delta, *n, *d, *trials, cli.seed)?;
            let pass = rep.pass;
            emit_json(cli.out.as_deref(), &rep)?;
            Ok(pass)
        }
        Cmd::MinFisher { model, n, method, budget } => {
            let mix = load_model(model)?;
            let method = match method {
                MinMethodArg::Grid => MinMethod::Grid,
                MinMethodArg::ProjectedDescent => MinMethod::ProjectedDescent,
            };
            let res = minimize_fisher(&mix, *n, method, *budget, cli.seed, &spec)?;
            let mut csv = String::new();
            for i in 0..*n {
                csv.push_str(&format!("sq_{},", i + 1));
            }
            csv.push_str("value,error_bound\n");
            for t in &res.trace {
                for s in t.point.squares() {
                    csv.push_str(&fmt17(*s));
                    csv.push(',');
                }
                csv.push_str(&format!("{},{}\n", fmt17(t.value), fmt17(t.error_bound)));
            }
            csv.push_str(&format!(
                "# best: value={} squares={:?} complete={} entropy_max_at_equal_weights={}\n",
                fmt17(res.best_value),
                res.best_point.squares(),
                res.complete,
                res.entropy_companion.pass
            ));
            emit_text(cli.out.as_deref(), &csv)?;
            Ok(res.entropy_companion.pass)
        }
        Cmd::Eval { model, points } => {
            let mix = load_model(model)?;
            let text = fs::read_to_string(points)
                .with_context(|| format!("reading {}", points.display()))?;
            let mut out = String::new();
            for (lineno, line) in text.lines().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                let coords: Vec<f64> = line
                    .split(',')
                    .map(|f| {
                        f.trim()
                            .parse::<f64>()
                            .map_err(|e| anyhow!("line {}: bad number {f:?}: {e}", lineno + 1))
                    })
                    .collect::<Result<_>>()?;
                if coords.len() != mix.dimension() {
                    bail!(
                        "line {}: point has {} coordinates, model dimension is {}",
                        lineno + 1,
                        coords.len(),
                        mix.dimension()
                    );
                }
                let density = mix.density(&coords)?;
                let score = mix.score(&coords)?;
                out.push_str(line.trim_end());
                out.push(',');
                out.push_str(&fmt17(density));
                for s in score {
                    out.push(',');
                    out.push_str(&fmt17(s));
                }
                out.push('\n');
            }
            emit_text(cli.out.as_deref(), &out)?;
            Ok(true)
        }
        Cmd::Suite { scale } => {
            let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("suite_out"));
            suite::run(&dir, cli.seed, *scale)
        }
    }
}

const CHECK_NAMES: [&str; 7] = [
    "entropy_concavity_t",
    "simplex_concavity",
    "schur_concavity",
    "fisher_jensen",
    "blachman_stam",
    "r_convexity",
    "sqrt_sandwich_counterexample",
];

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PairConfig {
    model1: MixtureDensity,
    model2: MixtureDensity,
    #[serde(default = "default_grid")]
    grid: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FamilyConfig {
    models: Vec<MixtureDensity>,
    #[serde(default = "default_alpha")]
    alpha: f64,
    #[serde(default = "default_pairs")]
    pairs: usize,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SamplesConfig {
    #[serde(default = "default_samples")]
    samples: usize,
}

fn default_grid() -> usize {
    41
}
fn default_alpha() -> f64 {
    1.0
}
fn default_pairs() -> usize {
    50
}
fn default_samples() -> usize {
    10_000
}

fn run_check(
    name: &str,
    config: &Path,
    seed: u64,
    spec: &QuadSpec,
    out: Option<&Path>,
) -> Result<bool> {
    let text = fs::read_to_string(config).with_context(|| format!("reading {}", config.display()))?;
    let reports: Vec<CheckReport> = match name {
        "entropy_concavity_t" => {
            let c: PairConfig = parse_json(&text, config)?;
            let (a, b) = check_entropy_concavity_t(&c.model1, &c.model2, c.grid, spec)?;
            vec![a, b]
        }
        "simplex_concavity" => {
            let c: FamilyConfig = parse_json(&text, config)?;
            let refs: Vec<&MixtureDensity> = c.models.iter().collect();
            vec![check_simplex_concavity(&refs, c.alpha, c.pairs, seed, spec)?]
        }
        "schur_concavity" => {
            let c: FamilyConfig = parse_json(&text, config)?;
            let refs: Vec<&MixtureDensity> = c.models.iter().collect();
            vec![check_schur_concavity(&refs, c.alpha, c.pairs, seed, spec)?]
        }
        "fisher_jensen" => {
            let c: PairConfig = parse_json(&text, config)?;
            vec![check_fisher_jensen(&c.model1, &c.model2, c.grid, spec)?]
        }
        "blachman_stam" => {
            let c: PairConfig = parse_json(&text, config)?;
            vec![check_blachman_stam(&c.model1, &c.model2, c.grid, spec)?]
        }
        "r_convexity" => {
            let c: SamplesConfig = parse_json(&text, config)?;
            vec![check_r_convexity(c.samples, seed)]
        }
        "sqrt_sandwich_counterexample" => {
            let (rep, _) = verify_sqrt_sandwich_counterexample();
            vec![rep]
        }
        other => bail!("unknown check {other:?}; available: {}", CHECK_NAMES.join(", ")),
    };
    let pass = reports.iter().all(|r| r.pass);
    emit_json(out, &reports)?;
    Ok(pass)
}

fn load_model(path: &Path) -> Result<MixtureDensity> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    parse_json(&text, path)
}

/// Parses JSON with file/line/column diagnostics on failure.
fn parse_json<T: serde::de::DeserializeOwned>(text: &str, path: &Path) -> Result<T> {
    serde_json::from_str(text).map_err(|e| {
        anyhow!("{}: line {} column {}: {e}", path.display(), e.line(), e.column())
    })
}

fn emit_json<T: serde::Serialize>(out: Option<&Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    emit_text(out, &s)
}

fn emit_text(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    fs::create_dir_all(parent)?;
                }
            }
            fs::write(path, text).with_context(|| format!("writing {}", path.display()))?;
        }
        None => print!("{text}"),
    }
    Ok(())
}
