//! Falsifiable numerical checks of the concavity, Schur-concavity,
//! convexity and ordering statements satisfied by Gaussian mixtures.
//!
//! Every check computes a signed worst margin together with an error budget
//! accumulated from the quadrature error bounds of the quantities involved;
//! a check fails only when the margin undershoots `-(base tolerance +
//! budget)`, so numerical noise cannot manufacture counterexamples to
//! proved statements. The reported `tolerance` is the combined budget at the
//! worst instance, which keeps `pass <=> worst_margin >= -tolerance` exact.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use serde::{Deserialize, Serialize};

use crate::infofn::{entropy, fisher_matrix, renyi_entropy};
use crate::matana::{psd_leq, SymMatrix};
use crate::mixers::{MatrixMixerAtomic, ScalarMixerAtomic};
use crate::mixture::{weighted_sum_law, MixtureDensity, SimplexPoint};
use crate::quad::QuadSpec;
use crate::{Error, Result};

/// Default base tolerance for entropy-concavity margins.
pub const CONCAVITY_TOL: f64 = 1e-6;
/// Default base tolerance for the entropy power inequality margin.
pub const EPI_TOL: f64 = 1e-8;
/// Default base tolerance for PSD-order margins.
pub const PSD_TOL: f64 = 1e-8;
/// Simplex coordinates below this are clamped inward before square roots.
pub const SIMPLEX_CLAMP: f64 = 1e-10;

/// Result of one falsifiable check.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckReport {
    pub name: String,
    pub instances_tested: u64,
    /// Signed margin at the worst instance; nonnegative values mean slack.
    pub worst_margin: f64,
    /// Base tolerance plus the numerical error budget at the worst instance.
    pub tolerance: f64,
    pub pass: bool,
    /// Failing inputs, empty on pass.
    pub witnesses: Vec<String>,
}

/// Collects (margin, budget, description) triples and concludes with the
/// instance whose budget-adjusted margin is worst.
struct MarginLedger {
    name: String,
    base_tol: f64,
    entries: Vec<(f64, f64, String)>,
}

impl MarginLedger {
    fn new(name: &str, base_tol: f64) -> Self {
        Self { name: name.to_string(), base_tol, entries: Vec::new() }
    }

    fn push(&mut self, margin: f64, budget: f64, what: impl FnOnce() -> String) {
        self.entries.push((margin, budget, what()));
    }

    fn conclude(self) -> CheckReport {
        let instances = self.entries.len() as u64;
        let worst = self
            .entries
            .iter()
            .min_by(|a, b| {
                let va = a.0 + a.1;
                let vb = b.0 + b.1;
                va.partial_cmp(&vb).unwrap()
            })
            .cloned()
            .unwrap_or((f64::INFINITY, 0.0, String::new()));
        let tolerance = self.base_tol + worst.1;
        let pass = worst.0 >= -tolerance;
        let witnesses = if pass {
            Vec::new()
        } else {
            self.entries
                .iter()
                .filter(|(m, b, _)| *m < -(self.base_tol + *b))
                .map(|(m, _, w)| format!("{w}: margin {m:e}"))
                .collect()
        };
        CheckReport {
            name: self.name,
            instances_tested: instances,
            worst_margin: worst.0,
            tolerance,
            pass,
            witnesses,
        }
    }
}

fn require_scalar(m: &MixtureDensity) -> Result<()> {
    if m.dimension() != 1 {
        return Err(Error::Domain("this check requires scalar (d = 1) mixtures".into()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// entropy concavity in t
// ---------------------------------------------------------------------------

/// Concavity of `g(t) = h(sqrt(t) X1 + sqrt(1-t) X2)` on a uniform t-grid,
/// via second differences normalized by the step squared, together with the
/// entropy power inequality margin `g(t) - t g(1) - (1-t) g(0) >= 0`.
pub fn check_entropy_concavity_t(
    model1: &MixtureDensity,
    model2: &MixtureDensity,
    t_grid: usize,
    spec: &QuadSpec,
) -> Result<(CheckReport, CheckReport)> {
    require_scalar(model1)?;
    require_scalar(model2)?;
    if t_grid < 3 {
        return Err(Error::Domain("need at least 3 grid points".into()));
    }
    let n = t_grid;
    let step = 1.0 / (n - 1) as f64;
    let mut values = Vec::with_capacity(n);
    for i in 0..n {
        let t = i as f64 * step;
        let pt = SimplexPoint::from_squares(&[t, 1.0 - t])?;
        let sum = weighted_sum_law(&[model1, model2], &pt)?;
        let h = entropy(&sum, spec)?;
        values.push((t, h.value, h.error_bound));
    }

    let mut concavity = MarginLedger::new("entropy_concavity_t", CONCAVITY_TOL);
    for w in values.windows(3) {
        let [(t0, h0, e0), (t1, h1, e1), (t2, h2, e2)] = [w[0], w[1], w[2]];
        let second = (h2 - 2.0 * h1 + h0) / (step * step);
        let budget = (e2 + 2.0 * e1 + e0) / (step * step);
        concavity.push(-second, budget, || format!("t in [{t0:.4}, {t2:.4}] around {t1:.4}"));
    }

    let mut epi = MarginLedger::new("entropy_power_inequality_t", EPI_TOL);
    let (h_first, e_first) = (values[0].1, values[0].2);
    let (h_last, e_last) = (values[n - 1].1, values[n - 1].2);
    for &(t, h, e) in &values {
        let margin = h - t * h_last - (1.0 - t) * h_first;
        let budget = e + t * e_last + (1.0 - t) * e_first;
        epi.push(margin, budget, || format!("t = {t:.4}"));
    }
    Ok((concavity.conclude(), epi.conclude()))
}

// ---------------------------------------------------------------------------
// concavity on the simplex
// ---------------------------------------------------------------------------

/// Concavity of `(a_1^2, ..., a_n^2) -> h_alpha(sum a_i X_i)` on the
/// simplex: random pairs of points, a fixed interior lambda-grid, margin
/// `h(mix) - lambda h(p) - (1-lambda) h(q)`.
pub fn check_simplex_concavity(
    models: &[&MixtureDensity],
    alpha: f64,
    pairs: usize,
    seed: u64,
    spec: &QuadSpec,
) -> Result<CheckReport> {
    if models.len() < 2 {
        return Err(Error::Domain("need at least two models".into()));
    }
    if alpha < 1.0 {
        return Err(Error::Domain(format!("simplex concavity is checked for alpha >= 1, got {alpha}")));
    }
    for m in models {
        require_scalar(m)?;
    }
    let n = models.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ledger = MarginLedger::new("simplex_concavity", CONCAVITY_TOL);
    let h_at = |sq: &[f64], spec: &QuadSpec| -> Result<(f64, f64)> {
        let pt = SimplexPoint::from_squares(sq)?.clamp_interior(SIMPLEX_CLAMP);
        let sum = weighted_sum_law(models, &pt)?;
        let est = renyi_entropy(&sum, alpha, spec)?;
        Ok((est.value, est.error_bound))
    };
    for _ in 0..pairs {
        let p = random_simplex_squares(&mut rng, n);
        let q = random_simplex_squares(&mut rng, n);
        let (hp, ep) = h_at(&p, spec)?;
        let (hq, eq) = h_at(&q, spec)?;
        for lambda in [0.25, 0.5, 0.75] {
            let mix: Vec<f64> =
                p.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let (hm, em) = h_at(&mix, spec)?;
            let margin = hm - lambda * hp - (1.0 - lambda) * hq;
            let budget = em + lambda * ep + (1.0 - lambda) * eq;
            ledger.push(margin, budget, || {
                format!("lambda={lambda} p={p:?} q={q:?}")
            });
        }
    }
    Ok(ledger.conclude())
}

/// EXPLORATORY: the multivariate analogue of simplex concavity, for
/// mixtures in dimension d >= 2. The scalar theorem's proof route breaks in
/// matrix form, and whether the concavity itself extends is open; a failing
/// margin here is a finding to report, not a broken build, so callers must
/// not gate on `pass`.
pub fn check_simplex_concavity_multivariate(
    models: &[&MixtureDensity],
    alpha: f64,
    pairs: usize,
    seed: u64,
    spec: &QuadSpec,
) -> Result<CheckReport> {
    if models.len() < 2 {
        return Err(Error::Domain("need at least two models".into()));
    }
    if alpha < 1.0 {
        return Err(Error::Domain(format!("checked for alpha >= 1, got {alpha}")));
    }
    let dim = models[0].dimension();
    if dim < 2 || models.iter().any(|m| m.dimension() != dim) {
        return Err(Error::Domain("requires matrix mixtures of a common dimension >= 2".into()));
    }
    let n = models.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ledger = MarginLedger::new("simplex_concavity_multivariate_exploratory", CONCAVITY_TOL);
    let h_at = |sq: &[f64]| -> Result<(f64, f64)> {
        let pt = SimplexPoint::from_squares(sq)?.clamp_interior(SIMPLEX_CLAMP);
        let sum = weighted_sum_law(models, &pt)?;
        let est = renyi_entropy(&sum, alpha, spec)?;
        Ok((est.value, est.error_bound))
    };
    for _ in 0..pairs {
        let p = random_simplex_squares(&mut rng, n);
        let q = random_simplex_squares(&mut rng, n);
        let (hp, ep) = h_at(&p)?;
        let (hq, eq) = h_at(&q)?;
        for lambda in [0.25, 0.5, 0.75] {
            let mix: Vec<f64> =
                p.iter().zip(&q).map(|(a, b)| lambda * a + (1.0 - lambda) * b).collect();
            let (hm, em) = h_at(&mix)?;
            let margin = hm - lambda * hp - (1.0 - lambda) * hq;
            let budget = em + lambda * ep + (1.0 - lambda) * eq;
            ledger.push(margin, budget, || format!("lambda={lambda} p={p:?} q={q:?}"));
        }
    }
    Ok(ledger.conclude())
}

// ---------------------------------------------------------------------------
// Schur concavity
// ---------------------------------------------------------------------------

/// Schur concavity for i.i.d. models: whenever `a^2` is majorized by `b^2`,
/// `h_alpha(sum a_i X_i) >= h_alpha(sum b_i X_i)`. Pairs are generated
/// comparable by construction (averaging toward the barycenter is doubly
/// stochastic), and every pair is also compared against the equal-weights
/// point, which is majorized by everything.
pub fn check_schur_concavity(
    models: &[&MixtureDensity],
    alpha: f64,
    pairs: usize,
    seed: u64,
    spec: &QuadSpec,
) -> Result<CheckReport> {
    if models.len() < 2 {
        return Err(Error::Domain("need at least two models".into()));
    }
    for m in models {
        require_scalar(m)?;
    }
    let n = models.len();
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ledger = MarginLedger::new("schur_concavity", CONCAVITY_TOL);
    let h_at = |sq: &[f64]| -> Result<(f64, f64)> {
        let pt = SimplexPoint::from_squares(sq)?.clamp_interior(SIMPLEX_CLAMP);
        let sum = weighted_sum_law(models, &pt)?;
        let est = renyi_entropy(&sum, alpha, spec)?;
        Ok((est.value, est.error_bound))
    };
    let uniform = vec![1.0 / n as f64; n];
    let (hu, eu) = h_at(&uniform)?;
    for _ in 0..pairs {
        let b = random_simplex_squares(&mut rng, n);
        let theta: f64 = rng.gen();
        let a: Vec<f64> =
            b.iter().zip(&uniform).map(|(x, u)| theta * x + (1.0 - theta) * u).collect();
        debug_assert!(crate::matana::majorizes(&b, &a).unwrap());
        let (hb, eb) = h_at(&b)?;
        let (ha, ea) = h_at(&a)?;
        ledger.push(ha - hb, ea + eb, || format!("a={a:?} b={b:?}"));
        // equal weights attains the maximum
        ledger.push(hu - hb, eu + eb, || format!("uniform vs b={b:?}"));
        ledger.push(hu - ha, eu + ea, || format!("uniform vs a={a:?}"));
    }
    Ok(ledger.conclude())
}

// ---------------------------------------------------------------------------
// Fisher information Jensen / operator convexity
// ---------------------------------------------------------------------------

/// Mixes two mixture densities as laws: `theta f1 + (1 - theta) f2`, which
/// is again an atomic mixture (concatenated atoms, scaled weights).
pub fn density_mixture(
    m1: &MixtureDensity,
    m2: &MixtureDensity,
    theta: f64,
) -> Result<MixtureDensity> {
    if m1.dimension() != m2.dimension() {
        return Err(Error::DimensionMismatch(m1.dimension(), m2.dimension()));
    }
    if !(0.0..=1.0).contains(&theta) {
        return Err(Error::Domain(format!("mixture weight must lie in [0, 1], got {theta}")));
    }
    match (m1.scalar_mixer(), m2.scalar_mixer()) {
        (Some(a), Some(b)) => {
            let scales: Vec<f64> = a.scales().iter().chain(b.scales()).copied().collect();
            let weights: Vec<f64> = a
                .weights()
                .iter()
                .map(|w| theta * w)
                .chain(b.weights().iter().map(|w| (1.0 - theta) * w))
                .collect();
            Ok(MixtureDensity::scalar(ScalarMixerAtomic::new(scales, weights)?))
        }
        _ => {
            let atoms: Vec<SymMatrix> = m1
                .atom_covariances()
                .iter()
                .chain(m2.atom_covariances().iter())
                .map(crate::matana::sqrt_psd)
                .collect::<Result<_>>()?;
            let weights: Vec<f64> = m1
                .weights()
                .iter()
                .map(|w| theta * w)
                .chain(m2.weights().iter().map(|w| (1.0 - theta) * w))
                .collect();
            MixtureDensity::matrix(MatrixMixerAtomic::new(atoms, weights)?)
        }
    }
}

/// Operator convexity of the Fisher information matrix at two points:
/// `I(theta f1 + (1-theta) f2) <= theta I(f1) + (1-theta) I(f2)` in the PSD
/// order, over a uniform theta-grid.
pub fn check_fisher_jensen(
    model1: &MixtureDensity,
    model2: &MixtureDensity,
    theta_grid: usize,
    spec: &QuadSpec,
) -> Result<CheckReport> {
    if model1.dimension() != model2.dimension() {
        return Err(Error::DimensionMismatch(model1.dimension(), model2.dimension()));
    }
    if theta_grid < 2 {
        return Err(Error::Domain("need at least 2 grid points".into()));
    }
    let f1 = fisher_matrix(model1, spec, 0, 0)?;
    let f2 = fisher_matrix(model2, spec, 0, 0)?;
    let mut ledger = MarginLedger::new("fisher_jensen", PSD_TOL);
    for i in 0..theta_grid {
        let theta = i as f64 / (theta_grid - 1) as f64;
        let mixed = density_mixture(model1, model2, theta)?;
        let fm = fisher_matrix(&mixed, spec, 0, 0)?;
        let rhs = f1.matrix.scale(theta).add(&f2.matrix.scale(1.0 - theta))?;
        let verdict = psd_leq(&fm.matrix, &rhs, 0.0)?;
        let budget = fm.error_bound + theta * f1.error_bound + (1.0 - theta) * f2.error_bound;
        ledger.push(verdict.min_eigenvalue_of_difference, budget, || format!("theta = {theta:.4}"));
    }
    Ok(ledger.conclude())
}

// ---------------------------------------------------------------------------
// Blachman-Stam
// ---------------------------------------------------------------------------

/// Superadditivity of inverse Fisher information along the variance-mixing
/// path: `1/I(sqrt(t) X1 + sqrt(1-t) X2) >= t/I(X1) + (1-t)/I(X2)`.
pub fn check_blachman_stam(
    model1: &MixtureDensity,
    model2: &MixtureDensity,
    t_grid: usize,
    spec: &QuadSpec,
) -> Result<CheckReport> {
    require_scalar(model1)?;
    require_scalar(model2)?;
    if t_grid < 2 {
        return Err(Error::Domain("need at least 2 grid points".into()));
    }
    let i1 = fisher_matrix(model1, spec, 0, 0)?;
    let i2 = fisher_matrix(model2, spec, 0, 0)?;
    let (v1, e1) = (i1.matrix.as_matrix()[(0, 0)], i1.error_bound);
    let (v2, e2) = (i2.matrix.as_matrix()[(0, 0)], i2.error_bound);
    let mut ledger = MarginLedger::new("blachman_stam", PSD_TOL);
    for k in 0..t_grid {
        let t = k as f64 / (t_grid - 1) as f64;
        let pt = SimplexPoint::from_squares(&[t, 1.0 - t])?;
        let sum = weighted_sum_law(&[model1, model2], &pt)?;
        let it = fisher_matrix(&sum, spec, 0, 0)?;
        let (vt, et) = (it.matrix.as_matrix()[(0, 0)], it.error_bound);
        let margin = 1.0 / vt - t / v1 - (1.0 - t) / v2;
        let budget = et / (vt * vt) + t * e1 / (v1 * v1) + (1.0 - t) * e2 / (v2 * v2);
        ledger.push(margin, budget, || format!("t = {t:.4}"));
    }
    Ok(ledger.conclude())
}

// ---------------------------------------------------------------------------
// joint operator convexity of R(x, lambda) = x x^T / lambda
// ---------------------------------------------------------------------------

/// Joint operator convexity of `R(x, lambda) = x x^T / lambda` on random
/// `d = 3` instances: `R(theta x + (1-theta) y, theta l + (1-theta) m) <=
/// theta R(x, l) + (1-theta) R(y, m)`.
pub fn check_r_convexity(samples: usize, seed: u64) -> CheckReport {
    const D: usize = 3;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut ledger = MarginLedger::new("r_convexity", 1e-10);
    let rank_one = |x: &[f64; D], lambda: f64| {
        let mut m = nalgebra::DMatrix::zeros(D, D);
        for i in 0..D {
            for j in 0..D {
                m[(i, j)] = x[i] * x[j] / lambda;
            }
        }
        SymMatrix::new(m).unwrap()
    };
    for _ in 0..samples {
        let mut gauss = || {
            // Box-Muller from two open uniforms
            let u1: f64 = rng.gen_range(f64::MIN_POSITIVE..1.0);
            let u2: f64 = rng.gen();
            (-2.0 * u1.ln()).sqrt() * (2.0 * std::f64::consts::PI * u2).cos()
        };
        let x = [gauss(), gauss(), gauss()];
        let y = [gauss(), gauss(), gauss()];
        let lambda = 10f64.powf(rng.gen_range(-1.0..1.0));
        let mu = 10f64.powf(rng.gen_range(-1.0..1.0));
        let theta: f64 = rng.gen();
        let mut xm = [0.0; D];
        for i in 0..D {
            xm[i] = theta * x[i] + (1.0 - theta) * y[i];
        }
        let lm = theta * lambda + (1.0 - theta) * mu;
        let lhs = rank_one(&xm, lm);
        let rhs = rank_one(&x, lambda).scale(theta).add(&rank_one(&y, mu).scale(1.0 - theta)).unwrap();
        let margin = rhs.sub(&lhs).unwrap().min_eigenvalue();
        ledger.push(margin, 0.0, || {
            format!("x={x:?} y={y:?} lambda={lambda:.4} mu={mu:.4} theta={theta:.4}")
        });
    }
    ledger.conclude()
}

// ---------------------------------------------------------------------------
// the sqrt(X) Y sqrt(X) counterexample
// ---------------------------------------------------------------------------

/// Margins reported by [`verify_sqrt_sandwich_counterexample`].
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CounterexampleMargins {
    /// min eig of `A - Y`; nonnegative iff `Y <= A`.
    pub order_holds: f64,
    /// min eig of `A^2 - Y^2`; must be negative.
    pub squares_not_ordered: f64,
    /// min eig of `f(A) - f(Y)` for `f(X) = sqrt(X) Y sqrt(X)`; must be
    /// negative (f is not operator monotone).
    pub monotonicity_fails: f64,
    /// min eig of `f((Y+A)/2) - (f(Y)+f(A))/2`; must be negative (f is not
    /// midpoint operator concave).
    pub concavity_fails: f64,
}

/// Verifies the fixed witness `A = [[2,1],[1,1]]`, `Y = [[1,1],[1,1]]`:
/// `Y <= A` holds, yet `Y^2 ` is not `<= A^2`, the map `X -> sqrt(X) Y
/// sqrt(X)` is not monotone at (Y, A), and its midpoint concavity fails
/// there too. The check passes exactly when all three failures occur.
pub fn verify_sqrt_sandwich_counterexample() -> (CheckReport, CounterexampleMargins) {
    let tol = 1e-9;
    let a = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 1.0]).unwrap();
    let y = SymMatrix::from_row_major(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
    let f = |x: &SymMatrix| -> SymMatrix {
        let s = crate::matana::sqrt_psd(x).unwrap();
        SymMatrix::new(s.as_matrix() * y.as_matrix() * s.as_matrix()).unwrap()
    };
    let order_holds = a.sub(&y).unwrap().min_eigenvalue();
    let a2 = SymMatrix::new(a.as_matrix() * a.as_matrix()).unwrap();
    let y2 = SymMatrix::new(y.as_matrix() * y.as_matrix()).unwrap();
    let squares_not_ordered = a2.sub(&y2).unwrap().min_eigenvalue();
    let monotonicity_fails = f(&a).sub(&f(&y)).unwrap().min_eigenvalue();
    let mid = y.add(&a).unwrap().scale(0.5);
    let concavity_fails = f(&mid)
        .sub(&f(&y).add(&f(&a)).unwrap().scale(0.5))
        .unwrap()
        .min_eigenvalue();

    let margins = CounterexampleMargins {
        order_holds,
        squares_not_ordered,
        monotonicity_fails,
        concavity_fails,
    };
    let mut ledger = MarginLedger::new("sqrt_sandwich_counterexample", tol);
    ledger.push(order_holds, 0.0, || "Y <= A".to_string());
    ledger.push(-squares_not_ordered, 0.0, || "A^2 - Y^2 has a negative eigenvalue".to_string());
    ledger.push(-monotonicity_fails, 0.0, || "f(A) - f(Y) has a negative eigenvalue".to_string());
    ledger.push(-concavity_fails, 0.0, || "midpoint concavity violated".to_string());
    (ledger.conclude(), margins)
}

// ---------------------------------------------------------------------------
// reproducible random model generators
// ---------------------------------------------------------------------------

/// Uniform point of the simplex (Dirichlet(1, ..., 1)): normalized
/// standard exponentials.
pub fn random_simplex_squares(rng: &mut ChaCha12Rng, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n).map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

/// Random scalar mixture: 1 to 4 atoms, scales log-uniform in [0.25, 4],
/// Dirichlet(1) weights.
pub fn random_scalar_model(rng: &mut ChaCha12Rng) -> MixtureDensity {
    let k = rng.gen_range(1..=4usize);
    let scales: Vec<f64> = (0..k).map(|_| 4f64.powf(rng.gen_range(-1.0..1.0f64))).collect();
    let weights = random_simplex_squares(rng, k);
    MixtureDensity::scalar(ScalarMixerAtomic::new(scales, weights).unwrap())
}

/// Random 2x2 matrix mixture: 1 to 4 positive-definite atoms with
/// log-uniform eigenvalues in [0.25, 4] and a random rotation each.
pub fn random_matrix_model_d2(rng: &mut ChaCha12Rng) -> MixtureDensity {
    let k = rng.gen_range(1..=4usize);
    let atoms: Vec<SymMatrix> = (0..k)
        .map(|_| {
            let l1 = 4f64.powf(rng.gen_range(-1.0..1.0f64));
            let l2 = 4f64.powf(rng.gen_range(-1.0..1.0f64));
            let phi = rng.gen_range(0.0..std::f64::consts::PI);
            let (c, s) = (phi.cos(), phi.sin());
            // R diag(l1, l2) R^T
            SymMatrix::from_row_major(
                2,
                &[
                    c * c * l1 + s * s * l2,
                    c * s * (l1 - l2),
                    c * s * (l1 - l2),
                    s * s * l1 + c * c * l2,
                ],
            )
            .unwrap()
        })
        .collect();
    let weights = random_simplex_squares(rng, k);
    MixtureDensity::matrix(MatrixMixerAtomic::new(atoms, weights).unwrap()).unwrap()
}
