//! Concrete mixture laws: exact density, log-density, score, sampling, and
//! the closure of centered Gaussian mixtures under weighted independent sums.
//!
//! All exact functionals operate on atomic mixers; continuous mixers are
//! bridged through [`crate::mixers::atomize`]. Log-densities are evaluated by
//! log-sum-exp throughout, so the tails never underflow prematurely.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::matana::{sqrt_psd, SymMatrix};
use crate::mixers::{MatrixMixerAtomic, MixerModel, ScalarMixerAtomic};
use crate::{Error, Result};

/// Product-atom cap for exact weighted sums; beyond this the law must be
/// approximated by Monte Carlo atomization of the summed mixer.
pub const DEFAULT_ATOM_CAP: usize = 1_000_000;

const SIMPLEX_SUM_TOL: f64 = 1e-12;

// ---------------------------------------------------------------------------
// simplex points
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimplexRaw {
    weights: Vec<f64>,
}

/// A unit weight vector `a` together with the point `(a_1^2, ..., a_n^2)` of
/// the standard simplex it projects to.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "SimplexRaw", into = "SimplexRaw")]
pub struct SimplexPoint {
    weights: Vec<f64>,
    squares: Vec<f64>,
}

impl SimplexPoint {
    /// From the signed weight vector; `sum a_i^2` must equal 1 within 1e-12.
    pub fn from_weights(a: &[f64]) -> Result<Self> {
        if a.is_empty() {
            return Err(Error::Domain("empty weight vector".into()));
        }
        if a.iter().any(|x| !x.is_finite()) {
            return Err(Error::Domain("weights must be finite".into()));
        }
        let squares: Vec<f64> = a.iter().map(|x| x * x).collect();
        let sum: f64 = squares.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Domain(format!("squares sum to {sum}, expected 1")));
        }
        Ok(Self { weights: a.to_vec(), squares })
    }

    /// From a simplex point of squares; weights are the nonnegative roots.
    pub fn from_squares(sq: &[f64]) -> Result<Self> {
        if sq.is_empty() {
            return Err(Error::Domain("empty simplex point".into()));
        }
        if sq.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::Domain("squares must be finite and nonnegative".into()));
        }
        let sum: f64 = sq.iter().sum();
        if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
            return Err(Error::Domain(format!("squares sum to {sum}, expected 1")));
        }
        Ok(Self { weights: sq.iter().map(|x| x.sqrt()).collect(), squares: sq.to_vec() })
    }

    /// The main-diagonal point `(1/n, ..., 1/n)`.
    pub fn equal(n: usize) -> Self {
        let sq = 1.0 / n as f64;
        Self { weights: vec![sq.sqrt(); n], squares: vec![sq; n] }
    }

    pub fn n(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn squares(&self) -> &[f64] {
        &self.squares
    }

    /// `||a||_q` of the weight vector.
    pub fn weight_norm(&self, q: f64) -> f64 {
        self.weights.iter().map(|w| w.abs().powf(q)).sum::<f64>().powf(1.0 / q)
    }

    /// Pushes boundary coordinates inward: squares below `eps` are raised to
    /// `eps` and the point renormalized. Keeps concavity grids away from the
    /// simplex boundary where square-root weights lose smoothness.
    pub fn clamp_interior(&self, eps: f64) -> Self {
        let mut sq: Vec<f64> = self.squares.iter().map(|&s| s.max(eps)).collect();
        let sum: f64 = sq.iter().sum();
        sq.iter_mut().for_each(|s| *s /= sum);
        Self { weights: sq.iter().map(|s| s.sqrt()).collect(), squares: sq }
    }
}

impl TryFrom<SimplexRaw> for SimplexPoint {
    type Error = Error;
    fn try_from(raw: SimplexRaw) -> Result<Self> {
        Self::from_weights(&raw.weights)
    }
}

impl From<SimplexPoint> for SimplexRaw {
    fn from(p: SimplexPoint) -> Self {
        Self { weights: p.weights }
    }
}

// ---------------------------------------------------------------------------
// mixture density
// ---------------------------------------------------------------------------

#[derive(Debug, Clone)]
struct MatrixAtomCache {
    scale: SymMatrix,
    /// eigenvalues of the scale matrix Y (all positive), ascending
    evals: Vec<f64>,
    evecs: DMatrix<f64>,
    /// log w - sum(log lambda) - (d/2) log(2 pi)
    ln_coef: f64,
    /// Y^{-2} = V diag(lambda^-2) V^T, the atom's precision matrix
    precision: DMatrix<f64>,
    /// Y^2, the atom's covariance
    covariance: DMatrix<f64>,
}

#[derive(Debug, Clone)]
enum Kernel {
    Scalar {
        mixer: ScalarMixerAtomic,
        /// log w_k - log sigma_k - log sqrt(2 pi)
        ln_coefs: Vec<f64>,
        inv_vars: Vec<f64>,
    },
    Matrix {
        atoms: Vec<MatrixAtomCache>,
        weights: Vec<f64>,
    },
}

/// A concrete centered Gaussian mixture on `R^d` with an atomic mixer.
///
/// Matrix atoms are eigendecomposed once at construction so density and
/// score queries cost `O(d^2)` per atom.
#[derive(Debug, Clone)]
pub struct MixtureDensity {
    dim: usize,
    kernel: Kernel,
}

const LN_2PI: f64 = 1.837877066409345483560659472811;

impl MixtureDensity {
    /// Scalar mixture (d = 1).
    pub fn scalar(mixer: ScalarMixerAtomic) -> Self {
        let ln_coefs = mixer
            .scales()
            .iter()
            .zip(mixer.weights())
            .map(|(s, w)| w.max(f64::MIN_POSITIVE).ln() - s.ln() - 0.5 * LN_2PI)
            .collect();
        let inv_vars = mixer.scales().iter().map(|s| 1.0 / (s * s)).collect();
        Self { dim: 1, kernel: Kernel::Scalar { mixer, ln_coefs, inv_vars } }
    }

    /// Matrix mixture in the dimension of its atoms.
    pub fn matrix(mixer: MatrixMixerAtomic) -> Result<Self> {
        let d = mixer.dimension();
        let atoms = mixer
            .atoms()
            .iter()
            .zip(mixer.weights())
            .map(|(a, w)| {
                let (evals, evecs) = a.eigen();
                let ln_det: f64 = evals.iter().map(|l| l.ln()).sum();
                let inv2 = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    evals.iter().map(|l| 1.0 / (l * l)),
                ));
                let sq = DMatrix::from_diagonal(&DVector::from_iterator(
                    d,
                    evals.iter().map(|l| l * l),
                ));
                let precision = &evecs * inv2 * evecs.transpose();
                let covariance = &evecs * sq * evecs.transpose();
                MatrixAtomCache {
                    scale: a.clone(),
                    evals,
                    evecs,
                    ln_coef: w.max(f64::MIN_POSITIVE).ln() - ln_det - 0.5 * d as f64 * LN_2PI,
                    precision,
                    covariance,
                }
            })
            .collect();
        Ok(Self {
            dim: d,
            kernel: Kernel::Matrix { atoms, weights: mixer.weights().to_vec() },
        })
    }

    /// From a mixer model; stable specs must be atomized first.
    pub fn from_mixer(model: &MixerModel) -> Result<Self> {
        match model {
            MixerModel::ScalarAtomic(m) => Ok(Self::scalar(m.clone())),
            MixerModel::MatrixAtomic(m) => Self::matrix(m.clone()),
            MixerModel::Stable(_) => Err(Error::InvalidModel(
                "stable mixers have no closed-form density; atomize first".into(),
            )),
        }
    }

    pub fn dimension(&self) -> usize {
        self.dim
    }

    pub fn atom_count(&self) -> usize {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer.len(),
            Kernel::Matrix { atoms, .. } => atoms.len(),
        }
    }

    /// The mixer as a serializable model.
    pub fn mixer_model(&self) -> MixerModel {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => MixerModel::ScalarAtomic(mixer.clone()),
            Kernel::Matrix { atoms, weights } => MixerModel::MatrixAtomic(
                MatrixMixerAtomic::new(
                    atoms.iter().map(|a| a.scale.clone()).collect(),
                    weights.clone(),
                )
                .expect("cached atoms are valid"),
            ),
        }
    }

    pub fn scalar_mixer(&self) -> Option<&ScalarMixerAtomic> {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => Some(mixer),
            Kernel::Matrix { .. } => None,
        }
    }

    /// Largest per-axis standard deviation over atoms; quadrature hint.
    pub fn max_scale(&self) -> f64 {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer.max_scale(),
            Kernel::Matrix { atoms, .. } => atoms
                .iter()
                .map(|a| *a.evals.last().unwrap())
                .fold(0.0, f64::max),
        }
    }

    pub fn min_scale(&self) -> f64 {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer.min_scale(),
            Kernel::Matrix { atoms, .. } => atoms
                .iter()
                .map(|a| a.evals[0])
                .fold(f64::INFINITY, f64::min),
        }
    }

    /// Mixture weights (shared layout with atoms).
    pub fn weights(&self) -> &[f64] {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer.weights(),
            Kernel::Matrix { weights, .. } => weights,
        }
    }

    /// Per-atom covariance `Y_k Y_k^T` as matrices (scalar atoms give 1x1).
    pub fn atom_covariances(&self) -> Vec<SymMatrix> {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer
                .scales()
                .iter()
                .map(|s| SymMatrix::from_diagonal(&[s * s]))
                .collect(),
            Kernel::Matrix { atoms, .. } => atoms
                .iter()
                .map(|a| SymMatrix::new(a.covariance.clone()).expect("symmetric"))
                .collect(),
        }
    }

    /// Per-atom precision `(Y_k Y_k^T)^{-1}`.
    pub fn atom_precisions(&self) -> Vec<SymMatrix> {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => mixer
                .scales()
                .iter()
                .map(|s| SymMatrix::from_diagonal(&[1.0 / (s * s)]))
                .collect(),
            Kernel::Matrix { atoms, .. } => atoms
                .iter()
                .map(|a| SymMatrix::new(a.precision.clone()).expect("symmetric"))
                .collect(),
        }
    }

    fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch(x.len(), self.dim));
        }
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("evaluation point must be finite".into()));
        }
        Ok(())
    }

    /// Natural log of the density, by log-sum-exp over atoms. Returns a very
    /// negative number (never NaN) deep in the tails.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        self.check_point(x)?;
        Ok(self.log_density_unchecked(x))
    }

    pub(crate) fn log_density_unchecked(&self, x: &[f64]) -> f64 {
        match &self.kernel {
            Kernel::Scalar { ln_coefs, inv_vars, .. } => {
                let t = x[0];
                let mut best = f64::NEG_INFINITY;
                let terms: Vec<f64> = ln_coefs
                    .iter()
                    .zip(inv_vars)
                    .map(|(c, iv)| {
                        let v = c - 0.5 * t * t * iv;
                        best = best.max(v);
                        v
                    })
                    .collect();
                best + terms.iter().map(|v| (v - best).exp()).sum::<f64>().ln()
            }
            Kernel::Matrix { atoms, .. } => {
                let xv = DVector::from_row_slice(x);
                let mut best = f64::NEG_INFINITY;
                let terms: Vec<f64> = atoms
                    .iter()
                    .map(|a| {
                        let t = a.evecs.transpose() * &xv;
                        let q: f64 = t
                            .iter()
                            .zip(&a.evals)
                            .map(|(ti, l)| (ti / l) * (ti / l))
                            .sum();
                        let v = a.ln_coef - 0.5 * q;
                        best = best.max(v);
                        v
                    })
                    .collect();
                best + terms.iter().map(|v| (v - best).exp()).sum::<f64>().ln()
            }
        }
    }

    /// `f(x) = sum_k w_k (2 pi)^{-d/2} det(Y_k)^{-1} exp(-|Y_k^{-1} x|^2 / 2)`.
    pub fn density(&self, x: &[f64]) -> Result<f64> {
        Ok(self.log_density(x)?.exp())
    }

    /// Score `grad f / f`, from the atom-wise closed form with softmax
    /// weights; exactly zero at the origin.
    pub fn score(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_point(x)?;
        Ok(self.score_unchecked(x))
    }

    pub(crate) fn score_unchecked(&self, x: &[f64]) -> Vec<f64> {
        match &self.kernel {
            Kernel::Scalar { ln_coefs, inv_vars, .. } => {
                let t = x[0];
                let terms: Vec<f64> = ln_coefs
                    .iter()
                    .zip(inv_vars)
                    .map(|(c, iv)| c - 0.5 * t * t * iv)
                    .collect();
                let best = terms.iter().fold(f64::NEG_INFINITY, |a, &b| a.max(b));
                let mut norm = 0.0;
                let mut acc = 0.0;
                for (v, iv) in terms.iter().zip(inv_vars) {
                    let p = (v - best).exp();
                    norm += p;
                    acc += p * iv;
                }
                // `+ 0.0` normalizes the sign of zero at the origin
                vec![-t * acc / norm + 0.0]
            }
            Kernel::Matrix { atoms, .. } => {
                let d = self.dim;
                let xv = DVector::from_row_slice(x);
                let mut terms = Vec::with_capacity(atoms.len());
                let mut best = f64::NEG_INFINITY;
                for a in atoms {
                    let t = a.evecs.transpose() * &xv;
                    let q: f64 = t.iter().zip(&a.evals).map(|(ti, l)| (ti / l) * (ti / l)).sum();
                    let v = a.ln_coef - 0.5 * q;
                    best = best.max(v);
                    terms.push(v);
                }
                let mut norm = 0.0;
                let mut acc = DVector::zeros(d);
                for (v, a) in terms.iter().zip(atoms) {
                    let p = (v - best).exp();
                    norm += p;
                    acc += (&a.precision * &xv).scale(p);
                }
                acc.scale_mut(-1.0 / norm);
                acc.iter().map(|v| v + 0.0).collect()
            }
        }
    }

    /// Log-density and score in one pass over the atoms (they share the
    /// softmax weights), for quadrature integrands. Scalar kernels only.
    pub(crate) fn logf_score1(&self, t: f64) -> (f64, f64) {
        match &self.kernel {
            Kernel::Scalar { ln_coefs, inv_vars, .. } => {
                let mut best = f64::NEG_INFINITY;
                let half_t2 = 0.5 * t * t;
                let k = ln_coefs.len();
                let mut terms = Vec::with_capacity(k);
                for (c, iv) in ln_coefs.iter().zip(inv_vars) {
                    let v = c - half_t2 * iv;
                    best = best.max(v);
                    terms.push(v);
                }
                let mut norm = 0.0;
                let mut acc = 0.0;
                for (v, iv) in terms.iter().zip(inv_vars) {
                    let p = (v - best).exp();
                    norm += p;
                    acc += p * iv;
                }
                (best + norm.ln(), -t * acc / norm)
            }
            Kernel::Matrix { .. } => {
                let lf = self.log_density_unchecked(&[t]);
                (lf, self.score_unchecked(&[t])[0])
            }
        }
    }

    /// As [`Self::logf_score1`] for two-dimensional kernels.
    pub(crate) fn logf_score2(&self, x: f64, y: f64) -> (f64, [f64; 2]) {
        match &self.kernel {
            Kernel::Matrix { atoms, .. } => {
                let mut best = f64::NEG_INFINITY;
                let mut terms = Vec::with_capacity(atoms.len());
                for a in atoms {
                    // V^T x with V stored column-major in nalgebra
                    let t0 = a.evecs[(0, 0)] * x + a.evecs[(1, 0)] * y;
                    let t1 = a.evecs[(0, 1)] * x + a.evecs[(1, 1)] * y;
                    let q = (t0 / a.evals[0]) * (t0 / a.evals[0])
                        + (t1 / a.evals[1]) * (t1 / a.evals[1]);
                    let v = a.ln_coef - 0.5 * q;
                    best = best.max(v);
                    terms.push(v);
                }
                let mut norm = 0.0;
                let mut s = [0.0f64; 2];
                for (v, a) in terms.iter().zip(atoms) {
                    let p = (v - best).exp();
                    norm += p;
                    s[0] += p * (a.precision[(0, 0)] * x + a.precision[(0, 1)] * y);
                    s[1] += p * (a.precision[(1, 0)] * x + a.precision[(1, 1)] * y);
                }
                (best + norm.ln(), [-s[0] / norm, -s[1] / norm])
            }
            Kernel::Scalar { .. } => unreachable!("scalar kernels are one-dimensional"),
        }
    }

    /// `n` i.i.d. draws `X = Y_K Z`; deterministic per seed.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<Vec<f64>> {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(n);
        let mut buf = vec![0.0; self.dim];
        for _ in 0..n {
            self.draw_into(&mut rng, &mut buf);
            out.push(buf.clone());
        }
        out
    }

    pub(crate) fn draw_into(&self, rng: &mut ChaCha12Rng, out: &mut [f64]) {
        match &self.kernel {
            Kernel::Scalar { mixer, .. } => {
                let k = pick_index(mixer.weights(), rng.gen());
                let z: f64 = rng.sample(StandardNormal);
                out[0] = mixer.scales()[k] * z;
            }
            Kernel::Matrix { atoms, weights } => {
                let k = pick_index(weights, rng.gen());
                let a = &atoms[k];
                let z = DVector::from_iterator(self.dim, (0..self.dim).map(|_| rng.sample::<f64, _>(StandardNormal)));
                // Y z = V diag(lambda) V^T z
                let t = a.evecs.transpose() * z;
                let scaled = DVector::from_iterator(self.dim, t.iter().zip(&a.evals).map(|(ti, l)| ti * l));
                let x = &a.evecs * scaled;
                out.copy_from_slice(x.as_slice());
            }
        }
    }
}

fn pick_index(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

// ---------------------------------------------------------------------------
// serialization: mixer plus dimension
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MixtureRaw {
    dimension: usize,
    mixer: MixerModel,
}

impl Serialize for MixtureDensity {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        MixtureRaw { dimension: self.dim, mixer: self.mixer_model() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for MixtureDensity {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = MixtureRaw::deserialize(d)?;
        let mix = MixtureDensity::from_mixer(&raw.mixer).map_err(serde::de::Error::custom)?;
        if mix.dimension() != raw.dimension {
            return Err(serde::de::Error::custom(format!(
                "stated dimension {} does not match mixer dimension {}",
                raw.dimension,
                mix.dimension()
            )));
        }
        Ok(mix)
    }
}

// ---------------------------------------------------------------------------
// weighted sums
// ---------------------------------------------------------------------------

/// Law of `sum_i a_i X_i` for independent mixtures `X_i`: a mixture whose
/// mixer is `(sum_i a_i^2 Y_i Y_i^T)^{1/2}` over independent atom choices.
///
/// Atoms are folded in one model at a time and near-duplicates merged after
/// every fold, so i.i.d. two-atom models with equal weights collapse to
/// `n + 1` atoms with binomial weights instead of `2^n`.
pub fn weighted_sum_law(models: &[&MixtureDensity], point: &SimplexPoint) -> Result<MixtureDensity> {
    weighted_sum_law_capped(models, point, DEFAULT_ATOM_CAP)
}

/// As [`weighted_sum_law`] with an explicit product-atom cap.
pub fn weighted_sum_law_capped(
    models: &[&MixtureDensity],
    point: &SimplexPoint,
    cap: usize,
) -> Result<MixtureDensity> {
    if models.is_empty() {
        return Err(Error::Domain("no models to sum".into()));
    }
    if models.len() != point.n() {
        return Err(Error::DimensionMismatch(models.len(), point.n()));
    }
    let dim = models[0].dimension();
    if models.iter().any(|m| m.dimension() != dim) {
        return Err(Error::DimensionMismatch(dim, 0));
    }
    let all_scalar = models.iter().all(|m| matches!(m.kernel, Kernel::Scalar { .. }));
    if all_scalar {
        weighted_sum_scalar(models, point, cap)
    } else if dim >= 1 {
        weighted_sum_matrix(models, point, cap)
    } else {
        unreachable!()
    }
}

/// i.i.d. convenience: `n` copies of one model with the given weights.
pub fn weighted_sum_law_iid(model: &MixtureDensity, point: &SimplexPoint) -> Result<MixtureDensity> {
    let refs: Vec<&MixtureDensity> = std::iter::repeat_n(model, point.n()).collect();
    weighted_sum_law(&refs, point)
}

fn weighted_sum_scalar(
    models: &[&MixtureDensity],
    point: &SimplexPoint,
    cap: usize,
) -> Result<MixtureDensity> {
    // fold over models, tracking partial variance sums
    let mut partial: Vec<(f64, f64)> = vec![(0.0, 1.0)];
    for (model, &sq) in models.iter().zip(point.squares()) {
        let mixer = model.scalar_mixer().expect("scalar kernel");
        let mut next: Vec<(f64, f64)> =
            Vec::with_capacity(partial.len().saturating_mul(mixer.len()).min(cap + 1));
        for &(v, w) in &partial {
            for (s, ws) in mixer.scales().iter().zip(mixer.weights()) {
                next.push((v + sq * s * s, w * ws));
            }
        }
        next.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let mut merged: Vec<(f64, f64)> = Vec::with_capacity(next.len());
        for (v, w) in next {
            match merged.last_mut() {
                Some((lv, lw)) if v - *lv <= crate::mixers::ATOM_MERGE_TOL * (1.0 + v) => *lw += w,
                _ => merged.push((v, w)),
            }
        }
        if merged.len() > cap {
            return Err(Error::Capacity(format!(
                "weighted sum needs {} atoms (cap {cap}); atomize the summed mixer by Monte Carlo instead",
                merged.len()
            )));
        }
        partial = merged;
    }
    let scales: Vec<f64> = partial.iter().map(|p| p.0.sqrt()).collect();
    let weights: Vec<f64> = partial.iter().map(|p| p.1).collect();
    Ok(MixtureDensity::scalar(ScalarMixerAtomic::new(scales, weights)?))
}

fn weighted_sum_matrix(
    models: &[&MixtureDensity],
    point: &SimplexPoint,
    cap: usize,
) -> Result<MixtureDensity> {
    let d = models[0].dimension();
    let mut partial: Vec<(DMatrix<f64>, f64)> = vec![(DMatrix::zeros(d, d), 1.0)];
    for (model, &sq) in models.iter().zip(point.squares()) {
        let covs = model.atom_covariances();
        let ws = model.weights();
        let mut next: Vec<(DMatrix<f64>, f64)> = Vec::with_capacity(partial.len() * covs.len());
        for (v, w) in &partial {
            for (c, wc) in covs.iter().zip(ws) {
                next.push((v + c.as_matrix().scale(sq), w * wc));
            }
        }
        let mut merged: Vec<(DMatrix<f64>, f64)> = Vec::with_capacity(next.len());
        'outer: for (v, w) in next {
            let scale = 1.0 + v.amax();
            for (mv, mw) in merged.iter_mut() {
                if (&v - &*mv).norm() < crate::mixers::ATOM_MERGE_TOL * scale {
                    *mw += w;
                    continue 'outer;
                }
            }
            merged.push((v, w));
        }
        if merged.len() > cap {
            return Err(Error::Capacity(format!(
                "weighted sum needs {} atoms (cap {cap}); atomize the summed mixer by Monte Carlo instead",
                merged.len()
            )));
        }
        partial = merged;
    }
    let atoms = partial
        .iter()
        .map(|(v, _)| sqrt_psd(&SymMatrix::new(v.clone())?))
        .collect::<Result<Vec<_>>>()?;
    let weights: Vec<f64> = partial.iter().map(|p| p.1).collect();
    MixtureDensity::matrix(MatrixMixerAtomic::new(atoms, weights)?)
}
