//! Positive-definite scatter matrices and the small amount of matrix
//! plumbing the model needs: Cholesky-based quadratic forms, half-vectorization,
//! and an eigenvalue repair for indefinite update candidates.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};

/// Relative asymmetry allowed when accepting a matrix as symmetric.
const SYMMETRY_TOL: f64 = 1e-12;

/// A validated positive-definite scatter matrix with its cached Cholesky
/// factor and log-determinant.
///
/// All quadratic forms and solves go through the triangular factor; the
/// explicit inverse is only materialized on demand for score computations.
#[derive(Debug, Clone)]
pub struct ScatterMatrix {
    m: DMatrix<f64>,
    l: DMatrix<f64>,
    log_det: f64,
}

impl ScatterMatrix {
    /// Validates and factorizes a symmetric positive-definite matrix.
    pub fn new(m: DMatrix<f64>) -> Result<Self> {
        if !m.is_square() || m.nrows() == 0 {
            return Err(Error::InvalidParameter(format!(
                "scatter matrix must be square and non-empty, got {}x{}",
                m.nrows(),
                m.ncols()
            )));
        }
        if m.iter().any(|x| !x.is_finite()) {
            return Err(Error::NotPositiveDefinite(Some(
                "non-finite entries".to_string(),
            )));
        }
        let scale = m.iter().fold(0.0f64, |acc, x| acc.max(x.abs())).max(1.0);
        let asym = (&m - m.transpose()).abs().max();
        if asym > SYMMETRY_TOL * scale {
            return Err(Error::InvalidParameter(format!(
                "scatter matrix is asymmetric (max deviation {asym:.3e})"
            )));
        }
        // Exact symmetry below the acceptance tolerance keeps the factor
        // independent of which triangle the caller filled in.
        let sym = (&m + m.transpose()) * 0.5;
        let chol = Cholesky::new(sym.clone()).ok_or(Error::NotPositiveDefinite(None))?;
        let l = chol.l();
        let log_det = 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>();
        if !log_det.is_finite() {
            return Err(Error::NotPositiveDefinite(Some(
                "log-determinant not finite".to_string(),
            )));
        }
        Ok(Self { m: sym, l, log_det })
    }

    pub fn dim(&self) -> usize {
        self.m.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.m
    }

    /// Lower Cholesky factor L with Σ = L Lᵀ.
    pub fn cholesky_l(&self) -> &DMatrix<f64> {
        &self.l
    }

    pub fn log_det(&self) -> f64 {
        self.log_det
    }

    /// Overwrites `v` with L⁻¹ v, so that vᵀ Σ⁻¹ v = ‖L⁻¹ v‖².
    pub fn half_solve_mut(&self, v: &mut DVector<f64>) {
        let ok = self.l.solve_lower_triangular_mut(v);
        // The factor has strictly positive diagonal by construction.
        debug_assert!(ok);
    }

    /// vᵀ Σ⁻¹ v.
    pub fn quad_form(&self, v: &DVector<f64>) -> f64 {
        let mut w = v.clone();
        self.half_solve_mut(&mut w);
        w.norm_squared()
    }

    /// aᵀ Σ⁻¹ b.
    pub fn inner(&self, a: &DVector<f64>, b: &DVector<f64>) -> f64 {
        let mut wa = a.clone();
        let mut wb = b.clone();
        self.half_solve_mut(&mut wa);
        self.half_solve_mut(&mut wb);
        wa.dot(&wb)
    }

    /// Σ⁻¹ v via two triangular solves.
    pub fn solve(&self, v: &DVector<f64>) -> DVector<f64> {
        let mut w = v.clone();
        let ok = self.l.solve_lower_triangular_mut(&mut w) && self.l.tr_solve_lower_triangular_mut(&mut w);
        debug_assert!(ok);
        w
    }

    /// Explicit Σ⁻¹, for score-vector outer products.
    pub fn inverse(&self) -> DMatrix<f64> {
        Cholesky::<f64, Dyn>::new(self.m.clone())
            .expect("matrix was validated positive definite")
            .inverse()
    }
}

/// Symmetrizes `s` and, if its smallest eigenvalue falls at or below
/// `1e-5 · trace/p`, adds the ridge that lifts it to that floor.
///
/// The floor keeps the result's condition number small enough that density
/// exponents built from its inverse stay within f64 cancellation budgets.
///
/// Returns an error when no positive floor exists (non-finite entries or
/// non-positive trace), since no ridge can then produce a usable scatter.
pub fn repair_pos_def(s: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if s.iter().any(|x| !x.is_finite()) {
        return Err(Error::NotPositiveDefinite(Some(
            "non-finite update candidate".to_string(),
        )));
    }
    let sym = (s + s.transpose()) * 0.5;
    let p = sym.nrows();
    let floor = 1e-5 * sym.trace() / p as f64;
    if !(floor > 0.0) {
        return Err(Error::NotPositiveDefinite(Some(format!(
            "update candidate has non-positive trace {:.3e}",
            sym.trace()
        ))));
    }
    let min_eig = nalgebra::SymmetricEigen::new(sym.clone())
        .eigenvalues
        .min();
    if min_eig > floor {
        return Ok(sym);
    }
    let ridge = floor - min_eig;
    Ok(sym + DMatrix::identity(p, p) * ridge)
}

/// Number of free entries in a symmetric p×p matrix.
pub fn vech_len(p: usize) -> usize {
    p * (p + 1) / 2
}

/// (row, column) pairs of the lower triangle including the diagonal,
/// stacked column by column. This ordering is the contract for every
/// vech-shaped quantity in the crate (scores, standard errors, reports).
pub fn vech_indices(p: usize) -> Vec<(usize, usize)> {
    let mut idx = Vec::with_capacity(vech_len(p));
    for c in 0..p {
        for r in c..p {
            idx.push((r, c));
        }
    }
    idx
}

/// Column-stacked lower triangle (diagonal included) of a symmetric matrix.
pub fn vech(m: &DMatrix<f64>) -> DVector<f64> {
    let p = m.nrows();
    DVector::from_iterator(
        vech_len(p),
        vech_indices(p).into_iter().map(|(r, c)| m[(r, c)]),
    )
}
