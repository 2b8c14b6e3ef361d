//! Numerical exploration of where the Fisher information of
//! `sum a_i X_i` is minimized over unit weight vectors, for i.i.d. scalar
//! Gaussian mixtures. The question is open, so results are reported
//! neutrally: the exhaustive simplex grid is the citable answer and
//! projected descent only refines it.
//!
//! The objective is a function of the squares `(a_1^2, ..., a_n^2)` alone
//! (the summed mixer depends on the weights only through them), so the
//! optimization runs on the simplex of squares and sign choices are
//! quotiented out.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::checks::{random_simplex_squares, CheckReport};
use crate::infofn::{entropy, fisher_matrix};
use crate::mixture::{weighted_sum_law_iid, MixtureDensity, SimplexPoint};
use crate::quad::QuadSpec;
use crate::{Error, Result};

/// Simplex lattice step for the grid search (squares move in steps of 1/40).
pub const GRID_STEP_DENOM: usize = 40;
/// Descent terminates when the projected step is shorter than this.
pub const DESCENT_STEP_TOL: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MinMethod {
    Grid,
    ProjectedDescent,
}

/// One evaluated point of the search.
#[derive(Debug, Clone, Serialize)]
pub struct TracePoint {
    pub point: SimplexPoint,
    pub value: f64,
    pub error_bound: f64,
}

/// Outcome of a minimization run. `best_value` is certified over the
/// evaluated trace only; `complete` is false when the evaluation budget ran
/// out first. The companion report asserts that entropy, unlike Fisher
/// information, is maximized at equal weights across the evaluated points.
#[derive(Debug, Clone, Serialize)]
pub struct MinimizeResult {
    pub best_point: SimplexPoint,
    pub best_value: f64,
    pub trace: Vec<TracePoint>,
    pub method: MinMethod,
    pub complete: bool,
    pub entropy_companion: CheckReport,
}

fn objective(model: &MixtureDensity, squares: &[f64], spec: &QuadSpec) -> Result<(f64, f64)> {
    let pt = SimplexPoint::from_squares(squares)?;
    let sum = weighted_sum_law_iid(model, &pt)?;
    let est = fisher_matrix(&sum, spec, 0, 0)?;
    Ok((est.matrix.as_matrix()[(0, 0)], est.error_bound))
}

/// All compositions of `GRID_STEP_DENOM` into `n` nonnegative parts, as
/// simplex points of squares.
fn simplex_lattice(n: usize) -> Vec<Vec<f64>> {
    fn rec(n: usize, left: usize, prefix: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if n == 1 {
            prefix.push(left);
            out.push(prefix.clone());
            prefix.pop();
            return;
        }
        for k in 0..=left {
            prefix.push(k);
            rec(n - 1, left - k, prefix, out);
            prefix.pop();
        }
    }
    let mut raw = Vec::new();
    rec(n, GRID_STEP_DENOM, &mut Vec::new(), &mut raw);
    raw.into_iter()
        .map(|ks| ks.iter().map(|&k| k as f64 / GRID_STEP_DENOM as f64).collect())
        .collect()
}

/// Euclidean projection onto the simplex.
fn project_simplex(v: &[f64]) -> Vec<f64> {
    let mut u = v.to_vec();
    u.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut cum = 0.0;
    let mut tau = 0.0;
    for (j, &uj) in u.iter().enumerate() {
        cum += uj;
        let t = (cum - 1.0) / (j + 1) as f64;
        if uj - t > 0.0 {
            tau = t;
        }
    }
    let mut out: Vec<f64> = v.iter().map(|&x| (x - tau).max(0.0)).collect();
    let s: f64 = out.iter().sum();
    out.iter_mut().for_each(|x| *x /= s);
    out
}

/// Minimizes the Fisher information of `sum a_i X_i` over the simplex of
/// squared weights, for `n <= 4` i.i.d. copies of a scalar model.
pub fn minimize_fisher(
    model: &MixtureDensity,
    n: usize,
    method: MinMethod,
    budget: usize,
    seed: u64,
    spec: &QuadSpec,
) -> Result<MinimizeResult> {
    if model.dimension() != 1 {
        return Err(Error::Domain("minimize_fisher requires a scalar model".into()));
    }
    if !(1..=4).contains(&n) {
        return Err(Error::Domain(format!("grid search supports n in 1..=4, got {n}")));
    }
    if budget == 0 {
        return Err(Error::Domain("evaluation budget must be positive".into()));
    }
    let (trace, complete) = match method {
        MinMethod::Grid => run_grid(model, n, budget, spec)?,
        MinMethod::ProjectedDescent => run_descent(model, n, budget, seed, spec)?,
    };
    let best = trace
        .iter()
        .min_by(|a, b| a.value.partial_cmp(&b.value).unwrap())
        .expect("trace never empty")
        .clone();
    let companion = entropy_companion(model, &trace, spec)?;
    Ok(MinimizeResult {
        best_point: best.point,
        best_value: best.value,
        trace,
        method,
        complete,
        entropy_companion: companion,
    })
}

fn run_grid(
    model: &MixtureDensity,
    n: usize,
    budget: usize,
    spec: &QuadSpec,
) -> Result<(Vec<TracePoint>, bool)> {
    let mut lattice = simplex_lattice(n);
    let complete = lattice.len() <= budget;
    lattice.truncate(budget);
    let trace: Vec<TracePoint> = lattice
        .par_iter()
        .map(|sq| {
            let (value, error_bound) = objective(model, sq, spec)?;
            Ok(TracePoint { point: SimplexPoint::from_squares(sq)?, value, error_bound })
        })
        .collect::<Result<_>>()?;
    Ok((trace, complete))
}

fn run_descent(
    model: &MixtureDensity,
    n: usize,
    budget: usize,
    seed: u64,
    spec: &QuadSpec,
) -> Result<(Vec<TracePoint>, bool)> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let mut starts = vec![vec![1.0 / n as f64; n]];
    for _ in 0..2 {
        starts.push(random_simplex_squares(&mut rng, n));
    }
    let mut trace: Vec<TracePoint> = Vec::new();
    let mut evals = 0usize;
    let mut complete = true;
    let fd_step = 1e-4;

    'starts: for start in starts {
        let mut x = start;
        let (mut fx, mut ex) = objective(model, &x, spec)?;
        evals += 1;
        trace.push(TracePoint { point: SimplexPoint::from_squares(&x)?, value: fx, error_bound: ex });
        let mut step = 0.1;
        loop {
            if evals >= budget {
                complete = false;
                break 'starts;
            }
            // central finite-difference gradient on the squares, projected
            let mut grad = vec![0.0; n];
            for i in 0..n {
                let mut xp = x.clone();
                let mut xm = x.clone();
                xp[i] = (xp[i] + fd_step).min(1.0);
                xm[i] = (xm[i] - fd_step).max(0.0);
                let fp = objective(model, &project_simplex(&xp), spec)?.0;
                let fm = objective(model, &project_simplex(&xm), spec)?.0;
                evals += 2;
                grad[i] = (fp - fm) / (xp[i] - xm[i]);
            }
            // backtracking along the projected direction
            let mut moved = false;
            while step >= DESCENT_STEP_TOL {
                let cand: Vec<f64> =
                    x.iter().zip(&grad).map(|(xi, gi)| xi - step * gi).collect();
                let cand = project_simplex(&cand);
                let displacement: f64 = cand
                    .iter()
                    .zip(&x)
                    .map(|(a, b)| (a - b) * (a - b))
                    .sum::<f64>()
                    .sqrt();
                if displacement < DESCENT_STEP_TOL {
                    break;
                }
                let (fc, ec) = objective(model, &cand, spec)?;
                evals += 1;
                if fc < fx {
                    x = cand;
                    (fx, ex) = (fc, ec);
                    trace.push(TracePoint {
                        point: SimplexPoint::from_squares(&x)?,
                        value: fx,
                        error_bound: ex,
                    });
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if !moved {
                break;
            }
        }
    }
    Ok((trace, complete))
}

/// Asserts `h(equal weights) >= h(point)` over a bounded subsample of the
/// evaluated points (always including the best and the first).
fn entropy_companion(
    model: &MixtureDensity,
    trace: &[TracePoint],
    spec: &QuadSpec,
) -> Result<CheckReport> {
    let n = trace.first().map(|t| t.point.n()).unwrap_or(1);
    let equal = SimplexPoint::equal(n);
    let h_eq = entropy(&weighted_sum_law_iid(model, &equal)?, spec)?;
    let stride = (trace.len() / 20).max(1);
    let best_idx = trace
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.value.partial_cmp(&b.1.value).unwrap())
        .map(|(i, _)| i)
        .unwrap_or(0);
    let mut indices: Vec<usize> = (0..trace.len()).step_by(stride).collect();
    if !indices.contains(&best_idx) {
        indices.push(best_idx);
    }
    let margins: Vec<(f64, f64, String)> = indices
        .par_iter()
        .map(|&i| {
            let pt = &trace[i].point;
            let h = entropy(&weighted_sum_law_iid(model, pt)?, spec)?;
            Ok((
                h_eq.value - h.value,
                h_eq.error_bound + h.error_bound,
                format!("squares {:?}", pt.squares()),
            ))
        })
        .collect::<Result<_>>()?;
    let worst = margins
        .iter()
        .min_by(|a, b| (a.0 + a.1).partial_cmp(&(b.0 + b.1)).unwrap())
        .cloned()
        .unwrap_or((f64::INFINITY, 0.0, String::new()));
    let tolerance = crate::checks::CONCAVITY_TOL + worst.1;
    let pass = worst.0 >= -tolerance;
    Ok(CheckReport {
        name: "entropy_max_at_equal_weights".into(),
        instances_tested: margins.len() as u64,
        worst_margin: worst.0,
        tolerance,
        pass,
        witnesses: if pass { vec![] } else { vec![worst.2] },
    })
}
