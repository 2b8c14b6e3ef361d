//! Matrix analysis kernel: symmetric eigendecompositions, the positive
//! semi-definite order, Schatten norms, PSD square roots and vector
//! majorization.
//!
//! Everything here operates on small dense matrices (d up to a couple of
//! hundred); decompositions are delegated to nalgebra.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Asymmetry tolerated at construction, relative to the largest entry.
const SYM_TOL: f64 = 1e-12;

/// A real symmetric `d x d` matrix.
///
/// Construction averages the input with its transpose and rejects inputs
/// whose asymmetry exceeds `1e-12` relative to the largest entry, so every
/// value of this type is exactly symmetric in memory.
#[derive(Debug, Clone, PartialEq)]
pub struct SymMatrix {
    m: DMatrix<f64>,
}

impl SymMatrix {
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if m.nrows() != m.ncols() {
            return Err(Error::DimensionMismatch(m.nrows(), m.ncols()));
        }
        let scale = 1.0 + m.amax();
        let asym = (&m - m.transpose()).amax();
        if !asym.is_finite() || asym > SYM_TOL * scale {
            return Err(Error::Domain(format!(
                "matrix is not symmetric: max |A - A^T| = {asym:e}"
            )));
        }
        let sym = (&m + m.transpose()).scale(0.5);
        Ok(Self { m: sym })
    }

    /// Builds from row-major entries of a `d x d` matrix.
    pub fn from_row_major(d: usize, entries: &[f64]) -> Result<Self> {
        if entries.len() != d * d {
            return Err(Error::DimensionMismatch(entries.len(), d * d));
        }
        Self::new(DMatrix::from_row_slice(d, d, entries))
    }

    pub fn from_diagonal(diag: &[f64]) -> Self {
        Self {
            m: DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(diag)),
        }
    }

    pub fn identity(d: usize) -> Self {
        Self {
            m: DMatrix::identity(d, d),
        }
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.m
    }

    pub fn row_major(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).flat_map(|i| (0..d).map(move |j| (i, j))).map(|(i, j)| self.m[(i, j)]).collect()
    }

    /// Eigenvalues (ascending) and the matching orthonormal eigenvector
    /// columns.
    pub fn eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let eig = self.m.clone().symmetric_eigen();
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].partial_cmp(&eig.eigenvalues[b]).unwrap());
        let vals: Vec<f64> = idx.iter().map(|&i| eig.eigenvalues[i]).collect();
        let vecs = DMatrix::from_columns(
            &idx.iter().map(|&i| eig.eigenvectors.column(i).into_owned()).collect::<Vec<_>>(),
        );
        (vals, vecs)
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        let mut vals: Vec<f64> = self.m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
        vals.sort_by(|a, b| a.partial_cmp(b).unwrap());
        vals
    }

    pub fn min_eigenvalue(&self) -> f64 {
        self.eigenvalues()[0]
    }

    /// Operator norm (largest absolute eigenvalue; the matrix is symmetric).
    pub fn op_norm(&self) -> f64 {
        self.eigenvalues().iter().fold(0.0, |acc, &v| acc.max(v.abs()))
    }

    pub fn add(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(SymMatrix { m: &self.m + &other.m })
    }

    pub fn sub(&self, other: &SymMatrix) -> Result<SymMatrix> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch(self.dim(), other.dim()));
        }
        Ok(SymMatrix { m: &self.m - &other.m })
    }

    pub fn scale(&self, c: f64) -> SymMatrix {
        SymMatrix { m: self.m.scale(c) }
    }

    /// Inverse through the eigendecomposition; requires all eigenvalues to be
    /// bounded away from zero relative to the norm.
    pub fn inverse(&self) -> Result<SymMatrix> {
        let (vals, vecs) = self.eigen();
        let scale = vals.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        if vals.iter().any(|&v| v.abs() <= 1e-14 * (1.0 + scale)) {
            return Err(Error::Domain("matrix is numerically singular".into()));
        }
        let inv_diag = DMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
            vals.len(),
            vals.iter().map(|&v| 1.0 / v),
        ));
        let m = &vecs * inv_diag * vecs.transpose();
        // resymmetrize to kill round-off asymmetry
        Ok(SymMatrix { m: (&m + m.transpose()).scale(0.5) })
    }

    pub fn frobenius_distance(&self, other: &SymMatrix) -> f64 {
        (&self.m - &other.m).norm()
    }
}

impl Serialize for SymMatrix {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        self.row_major().serialize(s)
    }
}

/// Outcome of a PSD-order comparison `A <= B`: the minimum eigenvalue of
/// `B - A` together with the tolerance it was judged against.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsdVerdict {
    pub min_eigenvalue_of_difference: f64,
    pub tolerance: f64,
    pub holds: bool,
}

/// Default tolerance for PSD comparisons, scaled by the operator norms of
/// the operands so large matrices do not fail on round-off.
pub fn default_psd_tol(a: &SymMatrix, b: &SymMatrix) -> f64 {
    1e-9 * (1.0 + a.op_norm() + b.op_norm())
}

/// Tests `A <= B` in the positive semi-definite order.
///
/// The verdict carries the minimum eigenvalue of `B - A` as a quantitative
/// margin; `holds` iff that margin is at least `-tol`.
pub fn psd_leq(a: &SymMatrix, b: &SymMatrix, tol: f64) -> Result<PsdVerdict> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(a.dim(), b.dim()));
    }
    let min_eig = b.sub(a)?.min_eigenvalue();
    Ok(PsdVerdict {
        min_eigenvalue_of_difference: min_eig,
        tolerance: tol,
        holds: min_eig >= -tol,
    })
}

/// Schatten p-norm of a (not necessarily symmetric) square matrix: the
/// l_p norm of its singular values. `p = f64::INFINITY` gives the operator
/// norm.
pub fn schatten_norm(m: &DMatrix<f64>, p: f64) -> Result<f64> {
    let p_ok = p >= 1.0;
    if !p_ok {
        return Err(Error::Domain(format!("Schatten norm requires p >= 1, got {p}")));
    }
    let sv = m.clone().svd(false, false).singular_values;
    if p.is_infinite() {
        return Ok(sv.iter().fold(0.0f64, |a, &s| a.max(s)));
    }
    if p == 1.0 {
        return Ok(sv.iter().sum());
    }
    if p == 2.0 {
        return Ok(sv.iter().map(|s| s * s).sum::<f64>().sqrt());
    }
    // factor out the largest singular value for overflow safety
    let top = sv.iter().fold(0.0f64, |a, &s| a.max(s));
    if top == 0.0 {
        return Ok(0.0);
    }
    Ok(top * sv.iter().map(|&s| (s / top).powf(p)).sum::<f64>().powf(1.0 / p))
}

/// PSD square root. Eigenvalues in `[-1e-12 * scale, 0)` are clamped to zero;
/// materially negative ones are a domain error.
pub fn sqrt_psd(a: &SymMatrix) -> Result<SymMatrix> {
    let (vals, vecs) = a.eigen();
    let scale = 1.0 + vals.iter().fold(0.0f64, |acc, &v| acc.max(v.abs()));
    let mut sq = Vec::with_capacity(vals.len());
    for &v in &vals {
        if v < -1e-12 * scale {
            return Err(Error::Domain(format!(
                "matrix is not positive semi-definite: eigenvalue {v:e}"
            )));
        }
        sq.push(v.max(0.0).sqrt());
    }
    let diag = DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&sq));
    let m = &vecs * diag * vecs.transpose();
    Ok(SymMatrix { m: (&m + m.transpose()).scale(0.5) })
}

const SIMPLEX_TOL: f64 = 1e-9;
const MAJ_SLACK: f64 = 1e-12;

/// Returns whether `v` is majorized by `u` (i.e. `v <=_m u`): every sorted
/// descending partial sum of `u` dominates the matching one of `v`. Both
/// inputs must be probability vectors of the same length.
pub fn majorizes(u: &[f64], v: &[f64]) -> Result<bool> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch(u.len(), v.len()));
    }
    for w in [u, v] {
        if w.iter().any(|&x| x < -SIMPLEX_TOL) || (w.iter().sum::<f64>() - 1.0).abs() > SIMPLEX_TOL
        {
            return Err(Error::Domain("input is not a probability vector".into()));
        }
    }
    let mut us = u.to_vec();
    let mut vs = v.to_vec();
    us.sort_by(|a, b| b.partial_cmp(a).unwrap());
    vs.sort_by(|a, b| b.partial_cmp(a).unwrap());
    let mut su = 0.0;
    let mut sv = 0.0;
    for i in 0..us.len() {
        su += us[i];
        sv += vs[i];
        if su < sv - MAJ_SLACK {
            return Ok(false);
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn random_sym(rng: &mut impl Rng, d: usize, cond_exp: f64) -> SymMatrix {
        // random orthogonal-ish via QR of a Gaussian matrix, eigenvalues log-spread
        let g = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
        let qr = g.qr();
        let q = qr.q();
        let vals: Vec<f64> = (0..d).map(|i| 10f64.powf(cond_exp * i as f64 / d.max(1) as f64)).collect();
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&vals)) * q.transpose();
        SymMatrix::new((&m + m.transpose()).scale(0.5)).unwrap()
    }

    #[test]
    fn rejects_asymmetric_input() {
        let m = DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(SymMatrix::new(m).is_err());
    }

    #[test]
    fn eigen_reconstructs_ill_conditioned_matrices() {
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        for d in [2usize, 3, 6, 12] {
            for _ in 0..10 {
                let a = random_sym(&mut rng, d, 8.0);
                let (vals, vecs) = a.eigen();
                let rec = &vecs
                    * DMatrix::from_diagonal(&nalgebra::DVector::from_row_slice(&vals))
                    * vecs.transpose();
                let err = (a.as_matrix() - &rec).norm();
                assert!(
                    err < 1e-11 * (1.0 + a.op_norm()),
                    "reconstruction error {err:e} at d={d}"
                );
            }
        }
    }

    #[test]
    fn psd_leq_reflexive_and_transitive() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = random_sym(&mut rng, 4, 1.0);
            let refl = psd_leq(&a, &a, default_psd_tol(&a, &a)).unwrap();
            assert!(refl.holds);
            assert!(refl.min_eigenvalue_of_difference.abs() < 1e-10);

            // a <= a + P <= a + P + Q for PSD bumps P, Q
            let p = random_sym(&mut rng, 4, 0.5);
            let q = random_sym(&mut rng, 4, 0.5);
            let b = a.add(&p).unwrap();
            let c = b.add(&q).unwrap();
            let t1 = psd_leq(&a, &b, default_psd_tol(&a, &b)).unwrap();
            let t2 = psd_leq(&b, &c, default_psd_tol(&b, &c)).unwrap();
            let t3 = psd_leq(&a, &c, t1.tolerance + t2.tolerance).unwrap();
            assert!(t1.holds && t2.holds && t3.holds);
        }
    }

    #[test]
    fn psd_leq_detects_failure() {
        let a = SymMatrix::from_diagonal(&[1.0, 1.0]);
        let b = SymMatrix::from_diagonal(&[2.0, 0.5]);
        let v = psd_leq(&a, &b, 1e-9).unwrap();
        assert!(!v.holds);
        assert!((v.min_eigenvalue_of_difference + 0.5).abs() < 1e-12);
    }

    #[test]
    fn square_counterexample_matrices() {
        // Y <= A but Y^2 not<= A^2 for A=[[2,1],[1,1]], Y=[[1,1],[1,1]]
        let a = SymMatrix::from_row_major(2, &[2.0, 1.0, 1.0, 1.0]).unwrap();
        let y = SymMatrix::from_row_major(2, &[1.0, 1.0, 1.0, 1.0]).unwrap();
        assert!(psd_leq(&y, &a, 1e-12).unwrap().holds);
        let a2 = SymMatrix::new(a.as_matrix() * a.as_matrix()).unwrap();
        let y2 = SymMatrix::new(y.as_matrix() * y.as_matrix()).unwrap();
        let v = psd_leq(&y2, &a2, 1e-12).unwrap();
        assert!(!v.holds);
        // det(A^2 - Y^2) = -1 forces a negative eigenvalue
        let diff = a2.sub(&y2).unwrap();
        let det = diff.as_matrix().determinant();
        assert!((det + 1.0).abs() < 1e-10);
    }

    #[test]
    fn schatten_norms_closed_forms() {
        let i3 = DMatrix::<f64>::identity(3, 3);
        assert!((schatten_norm(&i3, 2.0).unwrap() - 3f64.sqrt()).abs() < 1e-14);
        let d = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 4.0]);
        assert!((schatten_norm(&d, f64::INFINITY).unwrap() - 4.0).abs() < 1e-14);
        assert!((schatten_norm(&d, 1.0).unwrap() - 7.0).abs() < 1e-14);
        assert!(schatten_norm(&d, 0.5).is_err());
    }

    #[test]
    fn schatten_op_equivalence_on_random_matrices() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        for _ in 0..100 {
            let d = rng.gen_range(2..8usize);
            let m = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let op = schatten_norm(&m, f64::INFINITY).unwrap();
            for p in [1.0, 1.5, 2.0, 4.0] {
                let sp = schatten_norm(&m, p).unwrap();
                assert!(op <= sp * (1.0 + 1e-12));
                assert!(sp <= (d as f64).powf(1.0 / p) * op * (1.0 + 1e-12));
            }
        }
    }

    #[test]
    fn sqrt_psd_reconstructs() {
        let s = sqrt_psd(&SymMatrix::from_diagonal(&[4.0, 9.0])).unwrap();
        assert!((s.as_matrix() - DMatrix::from_row_slice(2, 2, &[2.0, 0.0, 0.0, 3.0])).norm() < 1e-12);

        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..20 {
            let d = rng.gen_range(2..6usize);
            let g = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
            let a = SymMatrix::new(&g * g.transpose()).unwrap();
            let s = sqrt_psd(&a).unwrap();
            let err = (s.as_matrix() * s.as_matrix() - a.as_matrix()).norm();
            assert!(err < 1e-10 * (1.0 + a.op_norm()), "sqrt reconstruction {err:e}");
        }
        assert!(sqrt_psd(&SymMatrix::from_diagonal(&[1.0, -0.5])).is_err());
    }

    #[test]
    fn majorization_partial_sums() {
        assert!(majorizes(&[1.0, 0.0], &[0.5, 0.5]).unwrap());
        assert!(!majorizes(&[0.5, 0.5], &[1.0, 0.0]).unwrap());
        assert!(majorizes(&[0.6, 0.2, 0.2], &[0.5, 0.3, 0.2]).unwrap());
        assert!(majorizes(&[0.5, 0.3, 0.2], &[1.0 / 3.0; 3]).unwrap());
        assert!(majorizes(&[1.0, 0.0], &[0.5; 2]).unwrap());
        assert!(majorizes(&[0.3, 0.3], &[0.5, 0.5]).is_err());
        assert!(majorizes(&[0.5, 0.5], &[0.5, 0.5, 0.0]).is_err());
    }

    #[test]
    fn uniform_vector_is_majorized_by_all() {
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for n in [2usize, 3, 5, 8] {
            let uni = vec![1.0 / n as f64; n];
            for _ in 0..50 {
                let mut v: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-12).ln()).collect();
                let s: f64 = v.iter().sum();
                v.iter_mut().for_each(|x| *x /= s);
                assert!(majorizes(&v, &uni).unwrap());
            }
        }
    }

    #[test]
    fn inverse_operator_convexity() {
        // (th A + (1-th) B)^{-1} <= th A^{-1} + (1-th) B^{-1} on random PSD pairs
        let mut rng = ChaCha12Rng::seed_from_u64(23);
        for _ in 0..500 {
            let d = rng.gen_range(2..5usize);
            let mk = |rng: &mut ChaCha12Rng| {
                let g = DMatrix::from_fn(d, d, |_, _| rng.gen::<f64>() * 2.0 - 1.0);
                SymMatrix::new(&g * g.transpose() + DMatrix::identity(d, d).scale(0.3)).unwrap()
            };
            let a = mk(&mut rng);
            let b = mk(&mut rng);
            let th: f64 = rng.gen();
            let mix = a.scale(th).add(&b.scale(1.0 - th)).unwrap();
            let lhs = mix.inverse().unwrap();
            let rhs = a.inverse().unwrap().scale(th).add(&b.inverse().unwrap().scale(1.0 - th)).unwrap();
            let v = psd_leq(&lhs, &rhs, 1e-9 * (1.0 + lhs.op_norm() + rhs.op_norm())).unwrap();
            assert!(v.holds, "operator convexity margin {}", v.min_eigenvalue_of_difference);
        }
    }
}
