//! Standard errors from the empirical information matrix, plus the
//! information criteria.
//!
//! The per-observation score is the conditional expectation of the
//! complete-data score given the observation (Fisher's identity), laid out
//! as (π₁…π_{g−1}, μ₁…μ_g, vech(Σ₁)…vech(Σ_g), γ₁…γ_g). The weight block
//! uses the last component as the reference category, so it is empty when
//! g = 1. The information matrix is the sum of score outer products; its
//! inverse diagonal yields squared standard errors.

use nalgebra::{DMatrix, DVector};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::{vech_indices, vech_len};
use crate::mixture::MixtureParams;
use crate::msl::DEFAULT_EPS_D;

/// Reciprocal condition numbers below this make the information matrix
/// unusable; standard errors are refused rather than silently regularized.
const RCOND_MIN: f64 = 1e-12;

/// Number of free parameters: (g−1) weights plus, per component, p location,
/// p skewness, and p(p+1)/2 scatter entries.
pub fn free_param_count(g: usize, p: usize) -> usize {
    (g - 1) + g * (2 * p + vech_len(p))
}

/// aic = 2d − 2ℓ and bic = d·log n − 2ℓ.
pub fn information_criteria(loglik: f64, g: usize, p: usize, n: usize) -> (f64, f64) {
    let d = free_param_count(g, p) as f64;
    (2.0 * d - 2.0 * loglik, d * (n as f64).ln() - 2.0 * loglik)
}

/// Names aligned with the score/standard-error layout; all indices 1-based,
/// scatter entries named by their (row, column) position in the lower
/// triangle, column-stacked.
pub fn parameter_names(g: usize, p: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(free_param_count(g, p));
    for r in 1..g {
        names.push(format!("pi[{r}]"));
    }
    for i in 1..=g {
        for k in 1..=p {
            names.push(format!("mu[{i}][{k}]"));
        }
    }
    for i in 1..=g {
        for (r, c) in vech_indices(p) {
            names.push(format!("sigma[{i}][{},{}]", r + 1, c + 1));
        }
    }
    for i in 1..=g {
        for k in 1..=p {
            names.push(format!("gamma[{i}][{k}]"));
        }
    }
    names
}

/// Per-observation score at `theta`.
///
/// Writing A = Σᵢ⁻¹, δ = y − μᵢ, a = Aδ, b = Aγᵢ, and (ẑᵢ, v̂₁ᵢ, v̂₂ᵢ) for the
/// responsibilities and conditional latent moments, the blocks are
///
/// ```text
/// π_r: ẑ_r/π_r − ẑ_g/π_g
/// μᵢ:  ẑᵢ (v̂₁ᵢ a − b)
/// Σᵢ:  ẑᵢ · vech(M − ½·Diag(M)),  M = −A + v̂₁ᵢ aaᵀ + v̂₂ᵢ bbᵀ − (abᵀ + baᵀ)
/// γᵢ:  ẑᵢ (a − v̂₂ᵢ b)
/// ```
///
/// The Σ block is the derivative with respect to the free lower-triangle
/// entries of the symmetric scatter: off-diagonal coordinates pick up both
/// mirror entries, the diagonal only itself.
pub fn score_vector(y: &DVector<f64>, theta: &MixtureParams) -> DVector<f64> {
    let (g, p) = (theta.g(), theta.dim());
    let z = theta.responsibilities(y);
    let mut s = DVector::zeros(free_param_count(g, p));

    let mut pos = 0;
    for r in 0..g.saturating_sub(1) {
        s[pos] = z[r] / theta.weights()[r] - z[g - 1] / theta.weights()[g - 1];
        pos += 1;
    }

    let mu_base = pos;
    let sigma_base = mu_base + g * p;
    let gamma_base = sigma_base + g * vech_len(p);
    let vech_idx = vech_indices(p);

    for (i, c) in theta.components().iter().enumerate() {
        let vm = c.v_moments(y, DEFAULT_EPS_D);
        let a_mat = c.sigma().inverse();
        let delta = y - c.mu();
        let a = &a_mat * &delta;
        let b = &a_mat * c.gamma();

        let mu_score = (&a * vm.e_v - &b) * z[i];
        s.rows_mut(mu_base + i * p, p).copy_from(&mu_score);

        let m = -&a_mat + vm.e_v * &a * a.transpose() + vm.e_vinv * &b * b.transpose()
            - (&a * b.transpose() + &b * a.transpose());
        for (slot, &(r, cidx)) in vech_idx.iter().enumerate() {
            let entry = if r == cidx { 0.5 * m[(r, r)] } else { m[(r, cidx)] };
            s[sigma_base + i * vech_len(p) + slot] = z[i] * entry;
        }

        let gamma_score = (&a - &b * vm.e_vinv) * z[i];
        s.rows_mut(gamma_base + i * p, p).copy_from(&gamma_score);
    }
    s
}

/// Σⱼ ŝⱼŝⱼᵀ, accumulated in row order.
pub fn empirical_info(data: &DataMatrix, theta: &MixtureParams) -> DMatrix<f64> {
    let d = free_param_count(theta.g(), theta.dim());
    let mut info = DMatrix::zeros(d, d);
    for y in data.iter() {
        let s = score_vector(y, theta);
        info.syger(1.0, &s, &s, 1.0);
    }
    info.fill_upper_triangle_with_lower_triangle();
    info
}

/// Standard errors and the reciprocal condition number of the information
/// matrix they came from.
#[derive(Debug, Clone)]
pub struct StandardErrors {
    /// sqrt of the diagonal of the inverse information matrix, ordered like
    /// `parameter_names`.
    pub values: Vec<f64>,
    pub rcond: f64,
}

/// Inverts the information matrix through its eigendecomposition and takes
/// the square roots of the inverse's diagonal. Refused outright when the
/// reciprocal condition number drops below 1e-12.
pub fn standard_errors(info: &DMatrix<f64>) -> Result<StandardErrors> {
    assert!(info.is_square() && info.nrows() > 0, "square matrix required");
    let eig = nalgebra::SymmetricEigen::new(info.clone());
    let lambda_max = eig.eigenvalues.max();
    let lambda_min = eig.eigenvalues.min();
    let rcond = if lambda_max > 0.0 { lambda_min / lambda_max } else { 0.0 };
    if !(rcond >= RCOND_MIN) {
        return Err(Error::SingularInformation { rcond });
    }
    let d = info.nrows();
    let values = (0..d)
        .map(|k| {
            (0..d)
                .map(|m| {
                    let q = eig.eigenvectors[(k, m)];
                    q * q / eig.eigenvalues[m]
                })
                .sum::<f64>()
                .sqrt()
        })
        .collect();
    Ok(StandardErrors { values, rcond })
}
