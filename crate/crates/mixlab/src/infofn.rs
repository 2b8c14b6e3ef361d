//! Entropy, Renyi entropy, Fisher information and Fisher information
//! matrices of mixtures, plus exact covariance.
//!
//! Dimensions 1 and 2 use deterministic quadrature with analytic Gaussian
//! tail bounds folded into the reported error; higher dimensions fall back
//! to Monte Carlo with 99% confidence half-widths. Monte Carlo always runs
//! on the exact analytic score / log-density, never on finite differences.

use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::matana::SymMatrix;
use crate::mixture::MixtureDensity;
use crate::quad::{integrate_1d_scaled, integrate_2d_vec, QuadSpec};
use crate::{derive_seed, Error, Result};

/// 99% two-sided normal quantile used for every Monte Carlo half-width.
pub const NORMAL_QUANTILE_99: f64 = 2.576;
/// Default Monte Carlo sample count.
pub const DEFAULT_MC_SAMPLES: u64 = 1_000_000;
const MC_CHUNK: u64 = 1 << 16;
/// log f below this is treated as zero density in integrands.
const LOG_UNDERFLOW: f64 = -700.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    Quadrature,
    MonteCarlo,
}

/// A scalar information quantity with an error bracket. Quadrature error
/// bounds include the analytic tail remainder; Monte Carlo bounds are 99%
/// confidence half-widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InfoEstimate {
    pub value: f64,
    pub error_bound: f64,
    pub method: Method,
    pub samples_used: u64,
}

/// Fisher information matrix estimate; `error_bound` is in operator-norm
/// units.
#[derive(Debug, Clone, Serialize)]
pub struct FisherMatrixEstimate {
    pub matrix: SymMatrix,
    pub error_bound: f64,
    pub method: Method,
    pub samples_used: u64,
}

// ---------------------------------------------------------------------------
// analytic tail bounds
// ---------------------------------------------------------------------------

/// `int_R^inf exp(-x^2 / (2 s^2)) dx`.
fn tail0(radius: f64, s: f64) -> f64 {
    s * (std::f64::consts::PI / 2.0).sqrt() * erfc(radius / (s * std::f64::consts::SQRT_2))
}

/// `int_R^inf x^2 exp(-x^2 / (2 s^2)) dx`.
fn tail2(radius: f64, s: f64) -> f64 {
    let e = (-radius * radius / (2.0 * s * s)).exp();
    s * s * radius * e + s * s * tail0(radius, s)
}

/// Gaussian envelope of the mixture: `f(x) <= b exp(-|x|^2 / (2 s^2))` from
/// the slowest-decaying atom, and `-log f(x) <= c0 + cq |x|^2` from the atom
/// whose quadratic form grows slowest.
struct Envelope {
    b: f64,
    s: f64,
    c0: f64,
    cq: f64,
    /// max_k || (Y_k Y_k^T)^{-1} ||_op, so |rho(x)| <= rho_coef |x|
    rho_coef: f64,
}

fn envelope(mix: &MixtureDensity) -> Envelope {
    let d = mix.dimension() as f64;
    let two_pi_half_d = (2.0 * std::f64::consts::PI).powf(d / 2.0);
    let mut b = 0.0;
    let mut s2: f64 = 0.0;
    let mut best_c0 = f64::INFINITY;
    let mut best_cq = f64::INFINITY;
    let mut rho_coef: f64 = 0.0;
    for ((w, cov), prec) in mix
        .weights()
        .iter()
        .zip(mix.atom_covariances())
        .zip(mix.atom_precisions())
    {
        let evs = cov.eigenvalues();
        let det_sqrt: f64 = evs.iter().map(|l| l.sqrt()).product();
        b += w / (two_pi_half_d * det_sqrt);
        s2 = s2.max(*evs.last().unwrap());
        rho_coef = rho_coef.max(prec.op_norm());
        let cq_k = 0.5 * prec.eigenvalues().last().copied().unwrap();
        let c0_k = -(w.max(f64::MIN_POSITIVE)).ln() + (two_pi_half_d * det_sqrt).ln();
        if cq_k < best_cq || (cq_k == best_cq && c0_k < best_c0) {
            best_cq = cq_k;
            best_c0 = c0_k;
        }
    }
    Envelope { b, s: s2.sqrt(), c0: best_c0.max(0.0), cq: best_cq, rho_coef }
}

/// Truncation remainder of `int (c0 + cq |x|^2) b e^{-|x|^2/2s^2}` outside
/// `[-R, R]^d`, d in {1, 2}. Dominates the entropy integrand since
/// `-f log f <= f (c0 + cq |x|^2)` wherever `f <= 1`.
fn entropy_tail(env: &Envelope, radius: f64, d: usize) -> f64 {
    match d {
        1 => 2.0 * env.b * (env.c0 * tail0(radius, env.s) + env.cq * tail2(radius, env.s)),
        2 => {
            let f0 = env.s * (2.0 * std::f64::consts::PI).sqrt();
            let f2 = env.s * env.s * f0;
            let strip = env.c0 * tail0(radius, env.s) * f0
                + env.cq * (tail2(radius, env.s) * f0 + tail0(radius, env.s) * f2);
            4.0 * env.b * strip
        }
        _ => unreachable!("quadrature tails only for d <= 2"),
    }
}

/// Truncation remainder of the Fisher integrand `|rho|^2 f <= rho_coef^2
/// |x|^2 b e^{-|x|^2/2s^2}` outside the truncated domain.
fn fisher_tail(env: &Envelope, radius: f64, d: usize) -> f64 {
    let r2 = env.rho_coef * env.rho_coef;
    match d {
        1 => 2.0 * env.b * r2 * tail2(radius, env.s),
        2 => {
            let f0 = env.s * (2.0 * std::f64::consts::PI).sqrt();
            let f2 = env.s * env.s * f0;
            4.0 * env.b * r2 * (tail2(radius, env.s) * f0 + tail0(radius, env.s) * f2)
        }
        _ => unreachable!(),
    }
}

// ---------------------------------------------------------------------------
// entropy
// ---------------------------------------------------------------------------

/// Differential entropy `-int f log f` in nats.
///
/// Quadrature for d <= 2; d >= 3 routes to [`entropy_mc`] with the default
/// budget and seed 0 so repeated calls stay reproducible.
pub fn entropy(mix: &MixtureDensity, spec: &QuadSpec) -> Result<InfoEstimate> {
    let radius = spec.tail_radius_multiplier * mix.max_scale();
    match mix.dimension() {
        1 => {
            let integrand = |x: f64| {
                let lf = mix.log_density_unchecked(&[x]);
                if lf < LOG_UNDERFLOW {
                    0.0
                } else {
                    -lf.exp() * lf
                }
            };
            let r = integrate_1d_scaled(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let tail = entropy_tail(&envelope(mix), radius, 1);
            Ok(InfoEstimate {
                value: r.value,
                error_bound: r.error_bound + tail,
                method: Method::Quadrature,
                samples_used: 0,
            })
        }
        2 => {
            let integrand = |x: f64, y: f64| {
                let lf = mix.log_density_unchecked(&[x, y]);
                [if lf < LOG_UNDERFLOW { 0.0 } else { -lf.exp() * lf }]
            };
            let r = integrate_2d_vec(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let tail = entropy_tail(&envelope(mix), radius, 2);
            Ok(InfoEstimate {
                value: r.values[0],
                error_bound: r.error_bound + tail,
                method: Method::Quadrature,
                samples_used: 0,
            })
        }
        _ => Ok(entropy_mc(mix, DEFAULT_MC_SAMPLES, 0)),
    }
}

/// Monte Carlo entropy `-mean log f(X)` with the Gaussian-surrogate control
/// variate `|x|^2 / (2 sbar^2)`, whose expectation `d/2` is exact
/// (`sbar^2` = mean per-coordinate mixture variance).
pub fn entropy_mc(mix: &MixtureDensity, samples: u64, seed: u64) -> InfoEstimate {
    let d = mix.dimension();
    let sbar2 = covariance(mix).as_matrix().trace() / d as f64;
    let (sum, sumsq, n) = mc_accumulate(mix, samples, seed, move |mix, x| {
        let lf = mix.log_density_unchecked(x);
        let cv: f64 = x.iter().map(|v| v * v).sum::<f64>() / (2.0 * sbar2);
        -lf - cv
    });
    let mean = sum / n as f64;
    let var = (sumsq / n as f64 - mean * mean).max(0.0);
    InfoEstimate {
        value: mean + d as f64 / 2.0,
        error_bound: NORMAL_QUANTILE_99 * (var / n as f64).sqrt(),
        method: Method::MonteCarlo,
        samples_used: n,
    }
}

/// Renyi entropy `(1 - alpha)^{-1} log int f^alpha` for positive
/// `alpha != 1`; `alpha = 1` dispatches to Shannon entropy.
pub fn renyi_entropy(mix: &MixtureDensity, alpha: f64, spec: &QuadSpec) -> Result<InfoEstimate> {
    let alpha_ok = alpha.is_finite() && alpha > 0.0;
    if !alpha_ok {
        return Err(Error::Domain(format!("Renyi order must be positive, got {alpha}")));
    }
    if alpha == 1.0 {
        return entropy(mix, spec);
    }
    let radius = spec.tail_radius_multiplier * mix.max_scale();
    let (int_f_alpha, err, method, samples) = match mix.dimension() {
        1 => {
            let integrand = |x: f64| {
                let e = alpha * mix.log_density_unchecked(&[x]);
                if e < LOG_UNDERFLOW {
                    0.0
                } else {
                    e.exp()
                }
            };
            let r = integrate_1d_scaled(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let env = envelope(mix);
            let tail = 2.0 * env.b.powf(alpha) * tail0(radius, env.s / alpha.sqrt());
            (r.value, r.error_bound + tail, Method::Quadrature, 0)
        }
        2 => {
            let integrand = |x: f64, y: f64| {
                let e = alpha * mix.log_density_unchecked(&[x, y]);
                [if e < LOG_UNDERFLOW { 0.0 } else { e.exp() }]
            };
            let r = integrate_2d_vec(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let env = envelope(mix);
            let s_a = env.s / alpha.sqrt();
            let tail = 4.0
                * env.b.powf(alpha)
                * tail0(radius, s_a)
                * s_a
                * (2.0 * std::f64::consts::PI).sqrt();
            (r.values[0], r.error_bound + tail, Method::Quadrature, 0)
        }
        _ => {
            // E[f^{alpha-1}(X)] = int f^alpha
            let (sum, sumsq, n) = mc_accumulate(mix, DEFAULT_MC_SAMPLES, 0, move |mix, x| {
                ((alpha - 1.0) * mix.log_density_unchecked(x)).exp()
            });
            let mean = sum / n as f64;
            let var = (sumsq / n as f64 - mean * mean).max(0.0);
            let ci = NORMAL_QUANTILE_99 * (var / n as f64).sqrt();
            (mean, ci, Method::MonteCarlo, n)
        }
    };
    if int_f_alpha <= 0.0 {
        return Err(Error::Domain("f^alpha integrated to a nonpositive value".into()));
    }
    Ok(InfoEstimate {
        value: int_f_alpha.ln() / (1.0 - alpha),
        error_bound: (err / int_f_alpha) / (1.0 - alpha).abs(),
        method,
        samples_used: samples,
    })
}

// ---------------------------------------------------------------------------
// Fisher information
// ---------------------------------------------------------------------------

/// Fisher information matrix `E[rho rho^T]`: entrywise quadrature of
/// `d_i f d_j f / f` for d <= 2, Monte Carlo on the analytic score for
/// d >= 3 (`mc_samples`, `seed` are only consumed on that route).
pub fn fisher_matrix(
    mix: &MixtureDensity,
    spec: &QuadSpec,
    mc_samples: u64,
    seed: u64,
) -> Result<FisherMatrixEstimate> {
    let radius = spec.tail_radius_multiplier * mix.max_scale();
    match mix.dimension() {
        1 => {
            let integrand = |x: f64| {
                let (lf, s) = mix.logf_score1(x);
                if lf < LOG_UNDERFLOW {
                    0.0
                } else {
                    s * s * lf.exp()
                }
            };
            let r = integrate_1d_scaled(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let tail = fisher_tail(&envelope(mix), radius, 1);
            Ok(FisherMatrixEstimate {
                matrix: SymMatrix::from_diagonal(&[r.value]),
                error_bound: r.error_bound + tail,
                method: Method::Quadrature,
                samples_used: 0,
            })
        }
        2 => {
            // rho_1^2 f, rho_1 rho_2 f, rho_2^2 f on one shared mesh
            let integrand = |x: f64, y: f64| {
                let (lf, s) = mix.logf_score2(x, y);
                if lf < LOG_UNDERFLOW {
                    [0.0; 3]
                } else {
                    let f = lf.exp();
                    [s[0] * s[0] * f, s[0] * s[1] * f, s[1] * s[1] * f]
                }
            };
            let r = integrate_2d_vec(integrand, spec, mix.max_scale(), mix.min_scale())?;
            let tail = fisher_tail(&envelope(mix), radius, 2);
            let [i11, i12, i22] = r.values;
            let m = SymMatrix::from_row_major(2, &[i11, i12, i12, i22])?;
            Ok(FisherMatrixEstimate {
                matrix: m,
                error_bound: r.error_bound + tail,
                method: Method::Quadrature,
                samples_used: 0,
            })
        }
        _ => fisher_matrix_mc(mix, mc_samples.max(100), seed),
    }
}

/// Scalar Fisher information, `tr` of the matrix estimate.
pub fn fisher_scalar(mix: &MixtureDensity, spec: &QuadSpec) -> Result<InfoEstimate> {
    let est = fisher_matrix(mix, spec, DEFAULT_MC_SAMPLES, 0)?;
    Ok(InfoEstimate {
        value: est.matrix.as_matrix().trace(),
        error_bound: est.error_bound * mix.dimension() as f64,
        method: est.method,
        samples_used: est.samples_used,
    })
}

/// Monte Carlo Fisher matrix: mean of `score(X) score(X)^T` over chunked
/// draws. The operator-norm error bound is an empirical batch estimate: the
/// spread of per-chunk mean matrices around the grand mean, jackknife style.
pub fn fisher_matrix_mc(
    mix: &MixtureDensity,
    samples: u64,
    seed: u64,
) -> Result<FisherMatrixEstimate> {
    let d = mix.dimension();
    if samples < 100 {
        return Err(Error::Domain("Monte Carlo Fisher needs at least 100 samples".into()));
    }
    let chunks = chunk_sizes(samples);
    let batch: Vec<DMatrix<f64>> = chunks
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut x = vec![0.0; d];
            let mut acc = DMatrix::zeros(d, d);
            for _ in 0..len {
                mix.draw_into(&mut rng, &mut x);
                let s = mix.score_unchecked(&x);
                for i in 0..d {
                    for j in 0..d {
                        acc[(i, j)] += s[i] * s[j];
                    }
                }
            }
            acc.scale(1.0 / len as f64)
        })
        .collect();
    let n: u64 = chunks.iter().sum();
    let b = batch.len() as f64;
    let mean = batch.iter().fold(DMatrix::zeros(d, d), |acc, m| acc + m).scale(1.0 / b);
    let spread: f64 = batch
        .iter()
        .map(|m| {
            let diff = m - &mean;
            SymMatrix::new((&diff + diff.transpose()).scale(0.5))
                .map(|s| s.op_norm())
                .unwrap_or(0.0)
                .powi(2)
        })
        .sum::<f64>()
        / (b - 1.0).max(1.0);
    let err = NORMAL_QUANTILE_99 * (spread / b).sqrt();
    Ok(FisherMatrixEstimate {
        matrix: SymMatrix::new((&mean + mean.transpose()).scale(0.5))?,
        error_bound: err,
        method: Method::MonteCarlo,
        samples_used: n,
    })
}

/// Exact covariance `sum_k w_k Y_k Y_k^T` of the mixture.
pub fn covariance(mix: &MixtureDensity) -> SymMatrix {
    let d = mix.dimension();
    let mut acc = DMatrix::zeros(d, d);
    for (w, c) in mix.weights().iter().zip(mix.atom_covariances()) {
        acc += c.as_matrix().scale(*w);
    }
    SymMatrix::new(acc).expect("covariance is symmetric")
}

/// The mixed-precision matrix `sum_k w_k (Y_k Y_k^T)^{-1}`, which dominates
/// the Fisher information matrix of the mixture in the PSD order.
pub fn jensen_upper_bound(mix: &MixtureDensity) -> SymMatrix {
    let d = mix.dimension();
    let mut acc = DMatrix::zeros(d, d);
    for (w, p) in mix.weights().iter().zip(mix.atom_precisions()) {
        acc += p.as_matrix().scale(*w);
    }
    SymMatrix::new(acc).expect("mixed precision is symmetric")
}

// ---------------------------------------------------------------------------
// Monte Carlo plumbing
// ---------------------------------------------------------------------------

fn chunk_sizes(samples: u64) -> Vec<u64> {
    let full = samples / MC_CHUNK;
    let rem = samples % MC_CHUNK;
    let mut v = vec![MC_CHUNK; full as usize];
    if rem > 0 || v.is_empty() {
        v.push(rem);
    }
    v
}

/// Deterministic parallel accumulation: the sample stream is cut into fixed
/// chunks with per-chunk derived seeds and merged in chunk order, so the
/// result is bit-identical for any thread count. Returns (sum, sum of
/// squares, count).
fn mc_accumulate<F>(mix: &MixtureDensity, samples: u64, seed: u64, f: F) -> (f64, f64, u64)
where
    F: Fn(&MixtureDensity, &[f64]) -> f64 + Sync,
{
    let d = mix.dimension();
    let chunks = chunk_sizes(samples);
    let partials: Vec<(f64, f64)> = chunks
        .par_iter()
        .enumerate()
        .map(|(c, &len)| {
            let mut rng = ChaCha12Rng::seed_from_u64(derive_seed(seed, c as u64));
            let mut x = vec![0.0; d];
            let mut s = 0.0;
            let mut s2 = 0.0;
            for _ in 0..len {
                mix.draw_into(&mut rng, &mut x);
                let v = f(mix, &x);
                s += v;
                s2 += v * v;
            }
            (s, s2)
        })
        .collect();
    let sum = partials.iter().map(|p| p.0).sum();
    let sumsq = partials.iter().map(|p| p.1).sum();
    (sum, sumsq, chunks.iter().sum())
}
