//! Models and samplers for the mixing variable `Y`: atomic laws with
//! finitely many scales, positive alpha-stable laws, and the two parametric
//! mixers arising from `e^{-|x|^p}` densities and symmetric p-stable laws.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::matana::SymMatrix;
use crate::{Error, Result};

/// Scales closer than this are merged into one atom (weights summed).
pub const ATOM_MERGE_TOL: f64 = 1e-12;
/// Allowed deviation of a weight vector's sum from one.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

fn validate_weights(weights: &[f64]) -> Result<()> {
    if weights.is_empty() {
        return Err(Error::InvalidModel("weight list is empty".into()));
    }
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return Err(Error::InvalidModel("weights must be finite and nonnegative".into()));
    }
    let sum: f64 = weights.iter().sum();
    if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
        return Err(Error::InvalidModel(format!("weights sum to {sum}, expected 1")));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// scalar atomic mixer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScalarMixerRaw {
    scales: Vec<f64>,
    weights: Vec<f64>,
}

/// Finitely supported law of a positive scalar scale: atoms `sigma_k` (in
/// standard-deviation units) with probabilities `w_k`. Canonical form keeps
/// scales strictly increasing, merging near-duplicates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "ScalarMixerRaw", into = "ScalarMixerRaw")]
pub struct ScalarMixerAtomic {
    scales: Vec<f64>,
    weights: Vec<f64>,
}

impl ScalarMixerAtomic {
    pub fn new(scales: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        if scales.len() != weights.len() {
            return Err(Error::DimensionMismatch(scales.len(), weights.len()));
        }
        if scales.iter().any(|s| !s.is_finite() || *s <= 0.0) {
            return Err(Error::InvalidModel("scales must be finite and positive".into()));
        }
        validate_weights(&weights)?;
        let mut pairs: Vec<(f64, f64)> = scales.into_iter().zip(weights).collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(pairs.len());
        for (s, w) in pairs {
            match merged.last_mut() {
                Some((ls, lw)) if s - *ls < ATOM_MERGE_TOL * (1.0 + s) => *lw += w,
                _ => merged.push((s, w)),
            }
        }
        Ok(Self {
            scales: merged.iter().map(|p| p.0).collect(),
            weights: merged.iter().map(|p| p.1).collect(),
        })
    }

    /// A single Gaussian scale.
    pub fn single(sigma: f64) -> Result<Self> {
        Self::new(vec![sigma], vec![1.0])
    }

    pub fn scales(&self) -> &[f64] {
        &self.scales
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.scales.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scales.is_empty()
    }

    pub fn max_scale(&self) -> f64 {
        *self.scales.last().unwrap()
    }

    pub fn min_scale(&self) -> f64 {
        self.scales[0]
    }

    /// `E[sigma^q]`, exact.
    pub fn moment(&self, q: f64) -> f64 {
        self.scales.iter().zip(&self.weights).map(|(s, w)| w * s.powf(q)).sum()
    }

    /// Every scale multiplied by `c > 0`.
    pub fn scaled(&self, c: f64) -> Result<Self> {
        Self::new(self.scales.iter().map(|s| c * s).collect(), self.weights.clone())
    }
}

impl TryFrom<ScalarMixerRaw> for ScalarMixerAtomic {
    type Error = Error;
    fn try_from(raw: ScalarMixerRaw) -> Result<Self> {
        Self::new(raw.scales, raw.weights)
    }
}

impl From<ScalarMixerAtomic> for ScalarMixerRaw {
    fn from(m: ScalarMixerAtomic) -> Self {
        Self { scales: m.scales, weights: m.weights }
    }
}

// ---------------------------------------------------------------------------
// matrix atomic mixer
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixMixerRaw {
    dimension: usize,
    /// Row-major `d x d` entries per atom.
    atoms: Vec<Vec<f64>>,
    weights: Vec<f64>,
}

/// Finitely supported law of a positive-definite `d x d` scale matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(try_from = "MatrixMixerRaw", into = "MatrixMixerRaw")]
pub struct MatrixMixerAtomic {
    dimension: usize,
    atoms: Vec<SymMatrix>,
    weights: Vec<f64>,
}

impl MatrixMixerAtomic {
    pub fn new(atoms: Vec<SymMatrix>, weights: Vec<f64>) -> Result<Self> {
        if atoms.len() != weights.len() {
            return Err(Error::DimensionMismatch(atoms.len(), weights.len()));
        }
        validate_weights(&weights)?;
        let dimension = atoms.first().ok_or_else(|| Error::InvalidModel("no atoms".into()))?.dim();
        for a in &atoms {
            if a.dim() != dimension {
                return Err(Error::DimensionMismatch(a.dim(), dimension));
            }
            let min_eig = a.min_eigenvalue();
            if min_eig <= ATOM_MERGE_TOL * (1.0 + a.op_norm()) {
                return Err(Error::InvalidModel(format!(
                    "atom is not positive definite: min eigenvalue {min_eig:e}"
                )));
            }
        }
        // merge Frobenius-near-duplicates
        let mut merged: Vec<(SymMatrix, f64)> = Vec::with_capacity(atoms.len());
        'outer: for (a, w) in atoms.into_iter().zip(weights) {
            for (b, bw) in merged.iter_mut() {
                if a.frobenius_distance(b) < ATOM_MERGE_TOL * (1.0 + a.op_norm()) {
                    *bw += w;
                    continue 'outer;
                }
            }
            merged.push((a, w));
        }
        Ok(Self {
            dimension,
            atoms: merged.iter().map(|p| p.0.clone()).collect(),
            weights: merged.iter().map(|p| p.1).collect(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn atoms(&self) -> &[SymMatrix] {
        &self.atoms
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }
}

impl TryFrom<MatrixMixerRaw> for MatrixMixerAtomic {
    type Error = Error;
    fn try_from(raw: MatrixMixerRaw) -> Result<Self> {
        let atoms = raw
            .atoms
            .iter()
            .map(|rows| SymMatrix::from_row_major(raw.dimension, rows))
            .collect::<Result<Vec<_>>>()?;
        Self::new(atoms, raw.weights)
    }
}

impl From<MatrixMixerAtomic> for MatrixMixerRaw {
    fn from(m: MatrixMixerAtomic) -> Self {
        Self {
            dimension: m.dimension,
            atoms: m.atoms.iter().map(|a| a.row_major()).collect(),
            weights: m.weights,
        }
    }
}

// ---------------------------------------------------------------------------
// stable mixers
// ---------------------------------------------------------------------------

/// Which parametric mixer a [`StableMixerSpec`] denotes.
///
/// `PositiveStablePower`: `Y = (2 G_{p/2})^{1/2}` with `G_a` standard
/// positive a-stable, so `YZ` is the standard symmetric p-stable law.
/// `GeneralizedGaussianMixer`: `Y = (2 V_{p/2})^{-1/2}` where `V_a` has
/// density proportional to `t^{-1/2} g_a(t)`, so `YZ` has density
/// proportional to `e^{-|x|^p}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StableKind {
    PositiveStablePower,
    GeneralizedGaussianMixer,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct StableMixerRaw {
    kind: StableKind,
    p: f64,
    seed: u64,
}

/// Parametric mixer driven by a positive (p/2)-stable law; `p` must lie in
/// the open interval (0, 2). "Standard" fixes the Laplace transform
/// `E[e^(-s G_a)] = e^(-s^a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StableMixerRaw", into = "StableMixerRaw")]
pub struct StableMixerSpec {
    pub kind: StableKind,
    pub p: f64,
    pub seed: u64,
}

impl StableMixerSpec {
    pub fn new(kind: StableKind, p: f64, seed: u64) -> Result<Self> {
        if !(p > 0.0 && p < 2.0) {
            return Err(Error::Domain(format!("stable mixer requires p in (0, 2), got {p}")));
        }
        Ok(Self { kind, p, seed })
    }

    pub fn alpha(&self) -> f64 {
        self.p / 2.0
    }
}

impl TryFrom<StableMixerRaw> for StableMixerSpec {
    type Error = Error;
    fn try_from(raw: StableMixerRaw) -> Result<Self> {
        Self::new(raw.kind, raw.p, raw.seed)
    }
}

impl From<StableMixerSpec> for StableMixerRaw {
    fn from(s: StableMixerSpec) -> Self {
        Self { kind: s.kind, p: s.p, seed: s.seed }
    }
}

// ---------------------------------------------------------------------------
// the mixer model union
// ---------------------------------------------------------------------------

/// Law of the mixing variable: atomic (scalar or matrix) or a parametric
/// stable spec that must be atomized before density-based functionals.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum MixerModel {
    ScalarAtomic(ScalarMixerAtomic),
    MatrixAtomic(MatrixMixerAtomic),
    Stable(StableMixerSpec),
}

/// Draws from a mixer: scales for scalar models, matrices for matrix models.
#[derive(Debug, Clone)]
pub enum MixerDraws {
    Scalars(Vec<f64>),
    Matrices(Vec<SymMatrix>),
}

// ---------------------------------------------------------------------------
// sampling
// ---------------------------------------------------------------------------

fn rng_from(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

fn open_unit(rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let u: f64 = rng.gen();
        if u > 0.0 && u < 1.0 {
            return u;
        }
    }
}

/// log of Kanter's function A(u) for the positive alpha-stable law,
/// `A(u) = sin((1-a)u) sin(au)^{a/(1-a)} / sin(u)^{1/(1-a)}`, u in (0, pi).
fn kanter_ln_a(alpha: f64, u: f64) -> f64 {
    ((1.0 - alpha) * u).sin().ln() + alpha / (1.0 - alpha) * (alpha * u).sin().ln()
        - 1.0 / (1.0 - alpha) * u.sin().ln()
}

fn kanter_draw(alpha: f64, rng: &mut ChaCha12Rng) -> f64 {
    let u = PI * open_unit(rng);
    let e = -open_unit(rng).ln();
    ((1.0 - alpha) / alpha * (kanter_ln_a(alpha, u) - e.ln())).exp()
}

/// Draws `n` i.i.d. samples of the standard positive alpha-stable law
/// (Laplace transform `e^{-s^alpha}`) by the Kanter / Chambers-Mallows-Stuck
/// transform of one uniform and one exponential variate. Exact, no
/// rejection, deterministic per seed.
pub fn sample_positive_stable(alpha: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("positive stable law requires alpha in (0, 1), got {alpha}")));
    }
    let mut rng = rng_from(seed);
    Ok((0..n).map(|_| kanter_draw(alpha, &mut rng)).collect())
}

/// `E[G^beta]` for the standard positive alpha-stable law: equals
/// `Gamma(1 - beta/alpha) / Gamma(1 - beta)` for `beta < alpha`, infinite
/// otherwise (all negative moments exist).
pub fn positive_stable_moment(alpha: f64, beta: f64) -> Option<f64> {
    if beta >= alpha {
        return None;
    }
    use statrs::function::gamma::ln_gamma;
    Some((ln_gamma(1.0 - beta / alpha) - ln_gamma(1.0 - beta)).exp())
}

/// Left-tail cutoff below which the positive alpha-stable density has fallen
/// past `e^{-decades}`: solves `(1-a) a^{a/(1-a)} t^{-a/(1-a)} = decades`.
fn stable_left_cutoff(alpha: f64, decades: f64) -> f64 {
    let c = (1.0 - alpha) * alpha.powf(alpha / (1.0 - alpha));
    (c / decades).powf((1.0 - alpha) / alpha)
}

/// Envelope constant for rejection of the `t^{-1/2}`-tilted stable law,
/// scanned over a log-grid of the support that carries the mass.
fn tilt_envelope(alpha: f64) -> f64 {
    let t_lo = stable_left_cutoff(alpha, 700.0);
    let t_hi = 1e12;
    let mut m: f64 = 0.0;
    let steps = 512;
    for k in 0..=steps {
        let t = t_lo * (t_hi / t_lo).powf(k as f64 / steps as f64);
        m = m.max(t.powf(-0.5));
    }
    m
}

/// One draw of `V_a` with density proportional to `t^{-1/2} g_a(t)`, by
/// rejection against `g_a`.
fn tilted_stable_draw(alpha: f64, envelope: f64, rng: &mut ChaCha12Rng) -> f64 {
    loop {
        let t = kanter_draw(alpha, rng);
        let accept = (t.powf(-0.5) / envelope).min(1.0);
        if rng.gen::<f64>() < accept {
            return t;
        }
    }
}

/// One scale draw from a stable mixer spec.
fn stable_scale_draw(spec: &StableMixerSpec, envelope: f64, rng: &mut ChaCha12Rng) -> f64 {
    let alpha = spec.alpha();
    match spec.kind {
        StableKind::PositiveStablePower => (2.0 * kanter_draw(alpha, rng)).sqrt(),
        StableKind::GeneralizedGaussianMixer => {
            (2.0 * tilted_stable_draw(alpha, envelope, rng)).powf(-0.5)
        }
    }
}

/// Draws `n` i.i.d. scales (or matrices) from a mixer model.
pub fn sample_mixer(model: &MixerModel, n: usize, seed: u64) -> Result<MixerDraws> {
    let mut rng = rng_from(seed);
    match model {
        MixerModel::ScalarAtomic(m) => {
            let cum = cumulative(m.weights());
            Ok(MixerDraws::Scalars(
                (0..n).map(|_| m.scales()[pick(&cum, rng.gen())]).collect(),
            ))
        }
        MixerModel::MatrixAtomic(m) => {
            let cum = cumulative(m.weights());
            Ok(MixerDraws::Matrices(
                (0..n).map(|_| m.atoms()[pick(&cum, rng.gen())].clone()).collect(),
            ))
        }
        MixerModel::Stable(spec) => {
            let envelope = match spec.kind {
                StableKind::GeneralizedGaussianMixer => tilt_envelope(spec.alpha()),
                StableKind::PositiveStablePower => 0.0,
            };
            Ok(MixerDraws::Scalars(
                (0..n).map(|_| stable_scale_draw(spec, envelope, &mut rng)).collect(),
            ))
        }
    }
}

fn cumulative(weights: &[f64]) -> Vec<f64> {
    let mut acc = 0.0;
    weights
        .iter()
        .map(|w| {
            acc += w;
            acc
        })
        .collect()
}

fn pick(cum: &[f64], u: f64) -> usize {
    let target = u * cum.last().copied().unwrap_or(1.0);
    cum.partition_point(|&c| c <= target).min(cum.len() - 1)
}

/// Empirical-measure approximation: `m` equal-weight atoms drawn i.i.d. from
/// the model. Atomic inputs pass through unchanged.
pub fn atomize(model: &MixerModel, m: usize, seed: u64) -> Result<MixerModel> {
    if m == 0 {
        return Err(Error::Domain("atomization size must be at least 1".into()));
    }
    match model {
        MixerModel::ScalarAtomic(_) | MixerModel::MatrixAtomic(_) => Ok(model.clone()),
        MixerModel::Stable(_) => {
            let MixerDraws::Scalars(scales) = sample_mixer(model, m, seed)? else {
                unreachable!("stable mixers are scalar");
            };
            let w = 1.0 / m as f64;
            Ok(MixerModel::ScalarAtomic(ScalarMixerAtomic::new(scales, vec![w; m])?))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::{integrate_interval, QuadSpec};

    // --- independent oracle: positive stable density via the Zolotarev
    // integral g_a(t) = b t^{-b-1} (1/pi) int_0^pi A(u) exp(-A(u) t^{-b}) du,
    // b = a/(1-a). Positive integrand, stable in f64 at every t.
    fn stable_density_oracle(t: f64, alpha: f64) -> f64 {
        let b = alpha / (1.0 - alpha);
        let spec = QuadSpec { rel_tol: 1e-12, abs_tol: 1e-300, ..QuadSpec::default() };
        let r = integrate_interval(
            |u| {
                let ln_a = kanter_ln_a(alpha, u);
                let a = ln_a.exp();
                let e = -a * t.powf(-b);
                if e < -700.0 {
                    0.0
                } else {
                    a * e.exp()
                }
            },
            1e-12,
            PI - 1e-12,
            &spec,
        );
        b * t.powf(-b - 1.0) * r.value / PI
    }

    #[test]
    fn stable_density_oracle_matches_levy_closed_form() {
        // alpha = 1/2 is Levy(1/2): density t^{-3/2} e^{-1/(4t)} / (2 sqrt(pi))
        for t in [0.2f64, 0.5, 1.0, 2.0, 5.0] {
            let exact = t.powf(-1.5) * (-1.0 / (4.0 * t)).exp() / (2.0 * PI.sqrt());
            let oracle = stable_density_oracle(t, 0.5);
            assert!((oracle - exact).abs() < 1e-10 * exact, "t={t}: {oracle} vs {exact}");
        }
    }

    #[test]
    fn stable_density_oracle_matches_series_where_stable() {
        // convergent series (1/pi) sum (-1)^{k+1} Gamma(ka+1)/k! sin(k pi a) t^{-ka-1},
        // usable in f64 for t >= 1 at alpha = 3/4
        use statrs::function::gamma::ln_gamma;
        let alpha = 0.75;
        for t in [1.0f64, 2.0, 5.0, 10.0] {
            let mut sum = 0.0;
            for k in 1..200u32 {
                let k_f = k as f64;
                let ln_mag = ln_gamma(k_f * alpha + 1.0) - ln_gamma(k_f + 1.0)
                    + (-k_f * alpha - 1.0) * t.ln();
                let term = (if k % 2 == 1 { 1.0 } else { -1.0 })
                    * (k_f * PI * alpha).sin()
                    * ln_mag.exp();
                sum += term;
            }
            let series = sum / PI;
            let oracle = stable_density_oracle(t, alpha);
            assert!((oracle - series).abs() < 1e-9 * series, "t={t}: {oracle} vs {series}");
        }
    }

    #[test]
    fn positive_stable_median_matches_cdf_oracle() {
        // Levy(1/2) CDF is erfc(1/(2 sqrt(t))); median solves erfc = 1/2
        let median = {
            let x = statrs::function::erf::erfc_inv(0.5);
            1.0 / (4.0 * x * x)
        };
        assert!((median - 1.0990546).abs() < 1e-6);
        let mut s = sample_positive_stable(0.5, 1_000_000, 2024).unwrap();
        s.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let emp = 0.5 * (s[499_999] + s[500_000]);
        // density at the median is ~0.195, so the sample median has sd ~2.6e-3
        assert!((emp - median).abs() < 0.012, "empirical median {emp} vs {median}");
    }

    #[test]
    fn positive_stable_moments_match_gamma_formula() {
        for (alpha, beta, seed) in [(0.5, -0.5, 1u64), (0.75, -0.5, 2), (0.75, 0.25, 3), (0.25, -0.5, 4)] {
            let th = positive_stable_moment(alpha, beta).unwrap();
            let s = sample_positive_stable(alpha, 400_000, seed).unwrap();
            let emp: f64 = s.iter().map(|x| x.powf(beta)).sum::<f64>() / s.len() as f64;
            assert!(
                (emp - th).abs() < 0.02 * th,
                "alpha={alpha} beta={beta}: {emp} vs {th}"
            );
        }
        assert!(positive_stable_moment(0.5, 0.5).is_none());
        assert!(positive_stable_moment(0.5, 0.75).is_none());
    }

    #[test]
    fn finite_beta_moments_cauchy_criterion() {
        // beta < alpha: running means at doubling n agree within 2 empirical SEs
        let alpha = 0.5;
        let s = sample_positive_stable(alpha, 200_000, 77).unwrap();
        for beta in [0.2, 0.35] {
            let pows: Vec<f64> = s.iter().map(|x| x.powf(beta)).collect();
            let stats = |n: usize| {
                let mean = pows[..n].iter().sum::<f64>() / n as f64;
                let var = pows[..n].iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
                (mean, (var / n as f64).sqrt())
            };
            let mut n = 25_000;
            while 2 * n <= pows.len() {
                let (m1, se1) = stats(n);
                let (m2, se2) = stats(2 * n);
                assert!(
                    (m1 - m2).abs() <= 2.0 * (se1 + se2),
                    "beta={beta} n={n}: {m1} vs {m2}"
                );
                n *= 2;
            }
        }
    }

    #[test]
    fn supercritical_moment_diverges() {
        // beta = 3/4 > alpha = 1/2: the mean over a window of m draws grows
        // like m^{1/2}, so disjoint windows two decades apart should show
        // large growth. Individual ratios fluctuate wildly (the window means
        // are themselves heavy-tailed), hence the geometric mean over seeds.
        let mut log_ratio_sum = 0.0;
        let seeds = 6;
        for seed in 0..seeds {
            let s = sample_positive_stable(0.5, 100_000, seed).unwrap();
            let early = s[..1_000].iter().map(|x| x.powf(0.75)).sum::<f64>() / 1_000.0;
            let late = s[10_000..].iter().map(|x| x.powf(0.75)).sum::<f64>() / 90_000.0;
            log_ratio_sum += (late / early).ln();
        }
        let geo_mean = (log_ratio_sum / seeds as f64).exp();
        assert!(geo_mean > 3.0, "window-mean growth {geo_mean} too small for a divergent moment");
    }

    #[test]
    fn sampler_determinism() {
        let a = sample_positive_stable(0.7, 1000, 99).unwrap();
        let b = sample_positive_stable(0.7, 1000, 99).unwrap();
        assert_eq!(a, b);
        let model = MixerModel::Stable(
            StableMixerSpec::new(StableKind::GeneralizedGaussianMixer, 1.5, 0).unwrap(),
        );
        let MixerDraws::Scalars(x) = sample_mixer(&model, 500, 3).unwrap() else { panic!() };
        let MixerDraws::Scalars(y) = sample_mixer(&model, 500, 3).unwrap() else { panic!() };
        assert_eq!(x, y);
    }

    #[test]
    fn alpha_domain_errors() {
        assert!(sample_positive_stable(0.0, 1, 0).is_err());
        assert!(sample_positive_stable(1.0, 1, 0).is_err());
        assert!(sample_positive_stable(-0.3, 1, 0).is_err());
        assert!(StableMixerSpec::new(StableKind::PositiveStablePower, 2.0, 0).is_err());
        assert!(StableMixerSpec::new(StableKind::PositiveStablePower, 0.0, 0).is_err());
    }

    #[test]
    fn atomic_sampling_frequencies() {
        let m = ScalarMixerAtomic::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap();
        let MixerDraws::Scalars(s) =
            sample_mixer(&MixerModel::ScalarAtomic(m), 100_000, 11).unwrap()
        else {
            panic!()
        };
        let frac = s.iter().filter(|&&x| x == 1.0).count() as f64 / s.len() as f64;
        // 3 sigma binomial band around 1/2
        assert!((frac - 0.5).abs() < 3.0 * (0.25f64 / 100_000.0).sqrt());
    }

    #[test]
    fn single_matrix_atom_always_drawn() {
        let atom = SymMatrix::identity(3);
        let m = MatrixMixerAtomic::new(vec![atom.clone()], vec![1.0]).unwrap();
        let MixerDraws::Matrices(d) = sample_mixer(&MixerModel::MatrixAtomic(m), 50, 0).unwrap()
        else {
            panic!()
        };
        assert!(d.iter().all(|a| a.frobenius_distance(&atom) == 0.0));
    }

    #[test]
    fn generalized_gaussian_mixer_second_moment() {
        // E[Y_p^2] = 0.5 E[V^{-1}] for p = 1.5; oracle by quadrature of
        // t^{-3/2} g_{3/4} and t^{-1/2} g_{3/4} via the Zolotarev density
        let alpha = 0.75;
        let spec = QuadSpec { rel_tol: 1e-10, abs_tol: 1e-14, ..QuadSpec::default() };
        let cut = stable_left_cutoff(alpha, 700.0);
        let num = integrate_interval(|t| t.powf(-1.5) * stable_density_oracle(t, alpha), cut, 400.0, &spec);
        let den = integrate_interval(|t| t.powf(-0.5) * stable_density_oracle(t, alpha), cut, 400.0, &spec);
        let oracle = 0.5 * num.value / den.value;
        // cross-check against the Gamma-function moment identity
        let gamma_form = 0.5 * positive_stable_moment(alpha, -1.5).unwrap()
            / positive_stable_moment(alpha, -0.5).unwrap();
        assert!((oracle - gamma_form).abs() < 2e-3 * gamma_form, "{oracle} vs {gamma_form}");
        assert!((gamma_form - 0.7384881).abs() < 1e-6);

        let model = MixerModel::Stable(
            StableMixerSpec::new(StableKind::GeneralizedGaussianMixer, 1.5, 0).unwrap(),
        );
        let MixerDraws::Scalars(y) = sample_mixer(&model, 200_000, 8).unwrap() else { panic!() };
        let emp: f64 = y.iter().map(|v| v * v).sum::<f64>() / y.len() as f64;
        assert!((emp - gamma_form).abs() < 0.01, "empirical {emp} vs {gamma_form}");
    }

    #[test]
    fn atomize_idempotent_and_single_atom() {
        let atomic = MixerModel::ScalarAtomic(
            ScalarMixerAtomic::new(vec![1.0, 2.0], vec![0.3, 0.7]).unwrap(),
        );
        let again = atomize(&atomic, 100, 1).unwrap();
        let MixerModel::ScalarAtomic(m) = again else { panic!() };
        assert_eq!(m.scales(), &[1.0, 2.0]);
        assert_eq!(m.weights(), &[0.3, 0.7]);

        let stable = MixerModel::Stable(
            StableMixerSpec::new(StableKind::PositiveStablePower, 1.0, 0).unwrap(),
        );
        let MixerModel::ScalarAtomic(one) = atomize(&stable, 1, 9).unwrap() else { panic!() };
        assert_eq!(one.len(), 1);
        assert_eq!(one.weights(), &[1.0]);
    }

    #[test]
    fn canonicalization_merges_and_sorts() {
        let m = ScalarMixerAtomic::new(
            vec![2.0, 1.0, 1.0 + 1e-14],
            vec![0.2, 0.5, 0.3],
        )
        .unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.scales(), &[1.0, 2.0]);
        assert!((m.weights()[0] - 0.8).abs() < 1e-15);
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(ScalarMixerAtomic::new(vec![1.0, -1.0], vec![0.5, 0.5]).is_err());
        assert!(ScalarMixerAtomic::new(vec![1.0], vec![0.9]).is_err());
        assert!(ScalarMixerAtomic::new(vec![1.0, 2.0], vec![0.5]).is_err());
        let not_pd = SymMatrix::from_diagonal(&[1.0, 0.0]);
        assert!(MatrixMixerAtomic::new(vec![not_pd], vec![1.0]).is_err());
    }

    #[test]
    fn json_round_trip_and_unknown_key_rejection() {
        let m = MixerModel::ScalarAtomic(
            ScalarMixerAtomic::new(vec![1.0, 2.0], vec![0.5, 0.5]).unwrap(),
        );
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.contains("\"type\":\"scalar_atomic\""));
        let back: MixerModel = serde_json::from_str(&s).unwrap();
        let MixerModel::ScalarAtomic(b) = back else { panic!() };
        assert_eq!(b.scales(), &[1.0, 2.0]);

        let bad = r#"{"type":"scalar_atomic","scales":[1.0],"weights":[1.0],"extra":3}"#;
        assert!(serde_json::from_str::<MixerModel>(bad).is_err());

        let stable = r#"{"type":"stable","kind":"generalized-gaussian-mixer","p":1.5,"seed":7}"#;
        let MixerModel::Stable(sp) = serde_json::from_str::<MixerModel>(stable).unwrap() else {
            panic!()
        };
        assert_eq!(sp.kind, StableKind::GeneralizedGaussianMixer);

        let mat = MixerModel::MatrixAtomic(
            MatrixMixerAtomic::new(
                vec![SymMatrix::from_diagonal(&[1.0, 2.0])],
                vec![1.0],
            )
            .unwrap(),
        );
        let s = serde_json::to_string(&mat).unwrap();
        let back: MixerModel = serde_json::from_str(&s).unwrap();
        let MixerModel::MatrixAtomic(b) = back else { panic!() };
        assert_eq!(b.dimension(), 2);
    }
}
