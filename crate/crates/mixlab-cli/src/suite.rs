//! The `suite` subcommand: runs the whole verification battery with
//! deterministic seeds and writes machine-readable outputs.
//!
//! Output files are byte-identical for a fixed (seed, scale) regardless of
//! thread count: every random stream is derived from the base seed by item
//! index, and all parallel reductions merge in a fixed order.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;

use mixlab::checks::{
    check_blachman_stam, check_entropy_concavity_t, check_fisher_jensen, check_r_convexity,
    check_schur_concavity, check_simplex_concavity, random_matrix_model_d2, random_scalar_model,
    verify_sqrt_sandwich_counterexample, CheckReport,
};
use mixlab::cltlab::{
    check_rademacher_type, diagonal_rate_exponent, fit_rate, moment_condition_report, run_sweep,
    CltConfig, WeightScheme,
};
use mixlab::infofn::{covariance, entropy, fisher_matrix, jensen_upper_bound, renyi_entropy};
use mixlab::matana::psd_leq;
use mixlab::mixers::{atomize, MixerModel, ScalarMixerAtomic, StableKind, StableMixerSpec};
use mixlab::mixture::MixtureDensity;
use mixlab::quad::QuadSpec;
use mixlab::{derive_seed, seeded_rng, Error as MixError};

use crate::fmt17;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Scale {
    /// Reduced instance counts; same battery structure.
    Quick,
    /// The instance counts of the acceptance criteria.
    Full,
}

struct Counts {
    concavity_pairs: usize,
    t_grid: usize,
    simplex_families: usize,
    simplex_pairs: usize,
    schur_pairs_per_n: usize,
    sandwich_models: usize,
    jensen_pairs: usize,
    theta_grid: usize,
    bs_pairs: usize,
    r_samples: usize,
    clt_n_max: usize,
    type_n: usize,
    type_trials: usize,
    cauchy_atoms: usize,
}

impl Counts {
    fn of(scale: Scale) -> Self {
        match scale {
            Scale::Full => Counts {
                concavity_pairs: 50,
                t_grid: 41,
                simplex_families: 50,
                simplex_pairs: 3,
                schur_pairs_per_n: 100,
                sandwich_models: 50,
                jensen_pairs: 50,
                theta_grid: 11,
                bs_pairs: 20,
                r_samples: 10_000,
                clt_n_max: 4096,
                type_n: 12,
                type_trials: 100,
                cauchy_atoms: 1 << 16,
            },
            Scale::Quick => Counts {
                concavity_pairs: 5,
                t_grid: 13,
                simplex_families: 5,
                simplex_pairs: 2,
                schur_pairs_per_n: 10,
                sandwich_models: 8,
                jensen_pairs: 6,
                theta_grid: 5,
                bs_pairs: 5,
                r_samples: 2_000,
                clt_n_max: 1024,
                type_n: 8,
                type_trials: 10,
                cauchy_atoms: 1 << 16,
            },
        }
    }
}

#[derive(Serialize)]
struct SummaryEntry {
    pass: bool,
    worst_margin: f64,
}

#[derive(Default, Serialize)]
struct CalibrationReport {
    entropy_gaussian_error: f64,
    renyi2_gaussian_error: f64,
    fisher_gaussian_error: f64,
    cauchy_entropy_error: f64,
    cauchy_fisher_error: f64,
    pass: bool,
}

/// Runs the battery; returns the overall pass flag.
pub fn run(out_dir: &Path, seed: u64, scale: Scale) -> Result<bool> {
    fs::create_dir_all(out_dir)
        .with_context(|| format!("creating output directory {}", out_dir.display()))?;
    let counts = Counts::of(scale);
    let spec = QuadSpec::default();
    let mut summary: BTreeMap<String, SummaryEntry> = BTreeMap::new();
    let push = |summary: &mut BTreeMap<String, SummaryEntry>, name: &str, rep: &CheckReport| {
        summary.insert(
            name.to_string(),
            SummaryEntry { pass: rep.pass, worst_margin: rep.worst_margin },
        );
    };

    // 1. closed-form calibration; the atomization seed is a pinned fixture,
    // not derived from --seed, so the benchmark is the same in every run
    let calibration = calibration_report(&spec, counts.cauchy_atoms, 8)?;
    summary.insert(
        "calibration".into(),
        SummaryEntry {
            pass: calibration.pass,
            worst_margin: -calibration.cauchy_entropy_error,
        },
    );
    write_json(out_dir.join("calibration.json"), &calibration)?;

    // 2. entropy concavity in t + EPI over random pairs
    let mut worst_conc: Option<CheckReport> = None;
    let mut worst_epi: Option<CheckReport> = None;
    for i in 0..counts.concavity_pairs {
        let mut rng = seeded_rng(derive_seed(seed, 100 + i as u64));
        let m1 = random_scalar_model(&mut rng);
        let m2 = random_scalar_model(&mut rng);
        let (conc, epi) = check_entropy_concavity_t(&m1, &m2, counts.t_grid, &spec)?;
        keep_worst(&mut worst_conc, conc);
        keep_worst(&mut worst_epi, epi);
    }
    push(&mut summary, "entropy_concavity_t", worst_conc.as_ref().unwrap());
    push(&mut summary, "entropy_power_inequality_t", worst_epi.as_ref().unwrap());

    // 3. simplex concavity, alpha in {1, 2}
    for (tag, alpha) in [("alpha1", 1.0), ("alpha2", 2.0)] {
        let mut worst: Option<CheckReport> = None;
        for i in 0..counts.simplex_families {
            let mut rng = seeded_rng(derive_seed(seed, 200 + i as u64));
            let models: Vec<MixtureDensity> =
                (0..3).map(|_| random_scalar_model(&mut rng)).collect();
            let refs: Vec<&MixtureDensity> = models.iter().collect();
            let rep = check_simplex_concavity(
                &refs,
                alpha,
                counts.simplex_pairs,
                derive_seed(seed, 250 + i as u64),
                &spec,
            )?;
            keep_worst(&mut worst, rep);
        }
        push(&mut summary, &format!("simplex_concavity_{tag}"), worst.as_ref().unwrap());
    }

    // 4. Schur concavity for n in {3, 4}
    let mut worst_schur: Option<CheckReport> = None;
    for (i, n) in [3usize, 4].into_iter().enumerate() {
        let mut rng = seeded_rng(derive_seed(seed, 300 + i as u64));
        let model = random_scalar_model(&mut rng);
        let models: Vec<&MixtureDensity> = std::iter::repeat_n(&model, n).collect();
        let rep = check_schur_concavity(
            &models,
            1.0,
            counts.schur_pairs_per_n,
            derive_seed(seed, 310 + i as u64),
            &spec,
        )?;
        keep_worst(&mut worst_schur, rep);
    }
    push(&mut summary, "schur_concavity", worst_schur.as_ref().unwrap());

    // 4b. exploratory multivariate simplex concavity: the margin is a
    // reported finding; it never gates the battery
    {
        let mut rng = seeded_rng(derive_seed(seed, 350));
        let a = random_matrix_model_d2(&mut rng);
        let b = random_matrix_model_d2(&mut rng);
        let rep = mixlab::checks::check_simplex_concavity_multivariate(
            &[&a, &b],
            1.0,
            counts.simplex_pairs,
            derive_seed(seed, 351),
            &spec,
        )?;
        push(&mut summary, "simplex_concavity_multivariate_exploratory", &rep);
    }

    // 5. Fisher sandwich (Cramer-Rao and the mixed-precision upper bound)
    let sandwich = fisher_sandwich_report(counts.sandwich_models, derive_seed(seed, 400), &spec)?;
    push(&mut summary, "fisher_sandwich", &sandwich);

    // 6. operator convexity of the Fisher matrix + R-convexity + witness
    let mut worst_jensen: Option<CheckReport> = None;
    for i in 0..counts.jensen_pairs {
        let mut rng = seeded_rng(derive_seed(seed, 500 + i as u64));
        let (m1, m2) = if i % 2 == 0 {
            (random_scalar_model(&mut rng), random_scalar_model(&mut rng))
        } else {
            (random_matrix_model_d2(&mut rng), random_matrix_model_d2(&mut rng))
        };
        let rep = check_fisher_jensen(&m1, &m2, counts.theta_grid, &spec)?;
        keep_worst(&mut worst_jensen, rep);
    }
    push(&mut summary, "fisher_jensen", worst_jensen.as_ref().unwrap());

    let mut worst_bs: Option<CheckReport> = None;
    for i in 0..counts.bs_pairs {
        let mut rng = seeded_rng(derive_seed(seed, 600 + i as u64));
        let m1 = random_scalar_model(&mut rng);
        let m2 = random_scalar_model(&mut rng);
        let rep = check_blachman_stam(&m1, &m2, 9, &spec)?;
        keep_worst(&mut worst_bs, rep);
    }
    push(&mut summary, "blachman_stam", worst_bs.as_ref().unwrap());

    let r_conv = check_r_convexity(counts.r_samples, derive_seed(seed, 700));
    push(&mut summary, "r_convexity", &r_conv);

    let (witness_rep, witness_margins) = verify_sqrt_sandwich_counterexample();
    push(&mut summary, "sqrt_sandwich_counterexample", &witness_rep);
    write_json(out_dir.join("counterexample.json"), &witness_margins)?;

    // 7. CLT rate sweep (binomial collapse) + fitted exponents
    let mut clt_pass = true;
    let mut clt_worst = f64::INFINITY;
    let mut csv = String::from("n,d,delta,scheme,deviation,error_bound,predictor,method,m,samples\n");
    for (k, delta) in [0.25f64, 0.5, 1.0].into_iter().enumerate() {
        let config = CltConfig {
            base_model: MixerModel::ScalarAtomic(
                ScalarMixerAtomic::new(vec![1.0, 2.0], vec![0.5, 0.5]).map_err(anyhow::Error::from)?,
            ),
            delta,
            dimension: 1,
            weight_scheme: WeightScheme::Equal,
            n_values: n_sweep(counts.clt_n_max),
            atomization_m: 0,
            mc_samples: 0,
            seed: derive_seed(seed, 800 + k as u64),
        };
        let rows = run_sweep(&config)?;
        for r in &rows {
            csv.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{}\n",
                r.n,
                r.dimension,
                fmt17(r.delta),
                "equal",
                fmt17(r.deviation),
                fmt17(r.error_bound),
                fmt17(r.predictor),
                r.method,
                r.atoms,
                r.samples
            ));
        }
        let fit = fit_rate(&rows)?;
        let target = -diagonal_rate_exponent(delta) + 0.05;
        let decreasing = rows.windows(2).all(|w| w[1].deviation < w[0].deviation);
        let stable = {
            let max = fit.implied_prefactors.iter().cloned().fold(f64::MIN, f64::max);
            let min = fit.implied_prefactors.iter().cloned().fold(f64::MAX, f64::min);
            max <= 2.0 * min
        };
        clt_pass &= fit.slope <= target && decreasing && stable;
        clt_worst = clt_worst.min(target - fit.slope);
    }
    fs::write(out_dir.join("clt_rate.csv"), csv)?;
    summary.insert("clt_rate".into(), SummaryEntry { pass: clt_pass, worst_margin: clt_worst });

    // 8. Rademacher type battery
    let mut type_reports = Vec::new();
    let mut type_pass = true;
    let mut type_worst = f64::INFINITY;
    for d in [2usize, 8] {
        let p_log = ((d as f64) + 1.0).ln() + 1.0;
        for delta in [0.5f64, 1.0] {
            for p in [1.5, 2.0, 4.0, p_log] {
                if p < 1.0 + delta {
                    continue;
                }
                let rep = check_rademacher_type(
                    p,
                    delta,
                    counts.type_n,
                    d,
                    counts.type_trials,
                    derive_seed(seed, 900),
                )?;
                type_pass &= rep.pass;
                type_worst = type_worst.min(1.0 - rep.worst_ratio.max(rep.worst_ratio_op));
                type_reports.push(rep);
            }
        }
    }
    write_json(out_dir.join("type_check.json"), &type_reports)?;
    summary.insert(
        "rademacher_type".into(),
        SummaryEntry { pass: type_pass, worst_margin: type_worst },
    );

    // 9. moment gate
    let gate = moment_gate_report()?;
    write_json(out_dir.join("moment_gate.json"), &gate.1)?;
    summary.insert("moment_gate".into(), SummaryEntry { pass: gate.0, worst_margin: 0.0 });

    let all_pass = summary
        .iter()
        .filter(|(name, _)| !name.ends_with("_exploratory"))
        .all(|(_, e)| e.pass);
    write_json(out_dir.join("summary.json"), &summary)?;
    Ok(all_pass)
}

fn keep_worst(slot: &mut Option<CheckReport>, rep: CheckReport) {
    let replace = match slot {
        None => true,
        Some(cur) => {
            !rep.pass && cur.pass
                || (rep.pass == cur.pass
                    && rep.worst_margin + rep.tolerance < cur.worst_margin + cur.tolerance)
        }
    };
    if replace {
        *slot = Some(rep);
    }
}

fn n_sweep(n_max: usize) -> Vec<usize> {
    let mut v = vec![4usize];
    while *v.last().unwrap() < n_max {
        let next = v.last().unwrap() * 4;
        v.push(next);
    }
    v
}

fn calibration_report(spec: &QuadSpec, cauchy_atoms: usize, seed: u64) -> Result<CalibrationReport> {
    let gaussian = MixtureDensity::scalar(ScalarMixerAtomic::single(1.0).map_err(anyhow::Error::from)?);
    let h = entropy(&gaussian, spec)?;
    let entropy_err = (h.value - 1.4189385332046727).abs();
    let r2 = renyi_entropy(&gaussian, 2.0, spec)?;
    let renyi_err = (r2.value - 1.2655121234846454).abs();
    let mut fisher_err = 0.0f64;
    for sigma in [0.5, 1.0, 2.0] {
        let m = MixtureDensity::scalar(ScalarMixerAtomic::single(sigma).map_err(anyhow::Error::from)?);
        let i = fisher_matrix(&m, spec, 0, 0)?;
        fisher_err = fisher_err.max((i.matrix.as_matrix()[(0, 0)] - 1.0 / (sigma * sigma)).abs());
    }

    // standard Cauchy as an atomized symmetric 1-stable mixer
    let cauchy_spec = StableMixerSpec::new(StableKind::PositiveStablePower, 1.0, 0)
        .map_err(anyhow::Error::from)?;
    let atomized = atomize(&MixerModel::Stable(cauchy_spec), cauchy_atoms, seed)?;
    let mix = MixtureDensity::from_mixer(&atomized)?;
    let hc = entropy(&mix, spec)?;
    let cauchy_entropy_err = (hc.value - (4.0 * std::f64::consts::PI).ln()).abs();
    let ic = fisher_matrix(&mix, spec, 0, 0)?;
    let cauchy_fisher_err = (ic.matrix.as_matrix()[(0, 0)] - 0.5).abs();

    Ok(CalibrationReport {
        entropy_gaussian_error: entropy_err,
        renyi2_gaussian_error: renyi_err,
        fisher_gaussian_error: fisher_err,
        cauchy_entropy_error: cauchy_entropy_err,
        cauchy_fisher_error: cauchy_fisher_err,
        pass: entropy_err < 1e-8
            && renyi_err < 1e-8
            && fisher_err < 1e-8
            && cauchy_entropy_err < 5e-3
            && cauchy_fisher_err < 2e-2,
    })
}

fn fisher_sandwich_report(models: usize, seed: u64, spec: &QuadSpec) -> Result<CheckReport> {
    let mut worst_margin = f64::INFINITY;
    let mut worst_tol = 0.0;
    let mut witnesses = Vec::new();
    for i in 0..models {
        let mut rng = seeded_rng(derive_seed(seed, i as u64));
        let m = if i % 2 == 0 {
            random_scalar_model(&mut rng)
        } else {
            random_matrix_model_d2(&mut rng)
        };
        let fisher = fisher_matrix(&m, spec, 0, 0)?;
        let cov_inv = covariance(&m).inverse().map_err(anyhow::Error::from)?;
        let lower = psd_leq(&cov_inv, &fisher.matrix, 1e-8 + fisher.error_bound)?;
        let upper_m = jensen_upper_bound(&m);
        let upper = psd_leq(&fisher.matrix, &upper_m, 1e-8 + fisher.error_bound)?;
        for (tag, v) in [("cramer_rao", &lower), ("jensen_upper", &upper)] {
            if v.min_eigenvalue_of_difference + v.tolerance < worst_margin + worst_tol
                || worst_margin == f64::INFINITY
            {
                worst_margin = v.min_eigenvalue_of_difference;
                worst_tol = v.tolerance;
            }
            if !v.holds {
                witnesses.push(format!("model {i} fails {tag}: {}", v.min_eigenvalue_of_difference));
            }
        }
    }
    let pass = witnesses.is_empty();
    Ok(CheckReport {
        name: "fisher_sandwich".into(),
        instances_tested: 2 * models as u64,
        worst_margin,
        tolerance: worst_tol,
        pass,
        witnesses,
    })
}

fn moment_gate_report() -> Result<(bool, Vec<serde_json::Value>)> {
    let gg = |p: f64| -> std::result::Result<MixerModel, MixError> {
        Ok(MixerModel::Stable(StableMixerSpec::new(
            StableKind::GeneralizedGaussianMixer,
            p,
            0,
        )?))
    };
    let stable = MixerModel::Stable(
        StableMixerSpec::new(StableKind::PositiveStablePower, 1.0, 0).map_err(anyhow::Error::from)?,
    );
    let mut pass = true;
    let mut out = Vec::new();
    let admit = moment_condition_report(&gg(1.5).map_err(anyhow::Error::from)?, 0.2, 0, 0)?;
    pass &= admit.admitted;
    out.push(serde_json::json!({"model": "generalized-gaussian p=1.5", "delta": 0.2, "admitted": admit.admitted}));
    let reject = moment_condition_report(&gg(1.5).map_err(anyhow::Error::from)?, 0.3, 0, 0)?;
    pass &= !reject.admitted;
    out.push(serde_json::json!({"model": "generalized-gaussian p=1.5", "delta": 0.3, "admitted": reject.admitted}));
    for delta in [0.25, 0.5, 1.0] {
        let rep = moment_condition_report(&stable, delta, 0, 0)?;
        pass &= !rep.admitted;
        out.push(serde_json::json!({"model": "symmetric-stable p=1.0", "delta": delta, "admitted": rep.admitted}));
    }
    Ok((pass, out))
}

fn write_json<T: Serialize>(path: impl AsRef<Path>, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    fs::write(path.as_ref(), s)
        .with_context(|| format!("writing {}", path.as_ref().display()))?;
    Ok(())
}
