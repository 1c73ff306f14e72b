//! The multivariate skew Laplace (MSL) distribution.
//!
//! A p-variate MSL with location μ, scatter Σ, and skewness γ has log-density
//!
//! ```text
//! log f(y) = -log|Σ|/2 - p·log 2 - (p-1)/2·log π - log α - log Γ((p+1)/2)
//!            - α·√d + (y-μ)ᵀΣ⁻¹γ,
//! d = (y-μ)ᵀΣ⁻¹(y-μ),   α = √(1 + γᵀΣ⁻¹γ).
//! ```
//!
//! Equivalently, Y = μ + W·γ + √W·Σ^{1/2}·X with X standard normal and
//! W = V⁻¹ ~ χ²_{p+1}; the mixing variable V itself is inverse gamma with
//! density ∝ v^{-(p+3)/2} e^{-1/(2v)}. The latent-variable form drives both
//! the sampler and the conditional moments consumed by the EM weights.
//! With γ = 0 the density reduces to the symmetric multivariate Laplace.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{ChiSquared, Distribution, StandardNormal};
use statrs::function::gamma::ln_gamma;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::linalg::ScatterMatrix;

/// Floor applied to the squared Mahalanobis distance before the conditional
/// moments take square roots; E(V|y) diverges as y → μ.
pub const DEFAULT_EPS_D: f64 = 1e-10;

/// Parameters of one MSL component, with the derived quantities that every
/// density evaluation needs cached at construction.
#[derive(Debug, Clone)]
pub struct MslParams {
    mu: DVector<f64>,
    sigma: ScatterMatrix,
    gamma: DVector<f64>,
    /// √(1 + γᵀΣ⁻¹γ); equals 1 exactly when γ = 0.
    alpha: f64,
    /// L⁻¹γ for the Cholesky factor L of Σ, so the density's linear term is
    /// an inner product of half-solved vectors.
    u: DVector<f64>,
    /// Location-independent part of the log-density.
    log_norm: f64,
}

/// Conditional moments of the latent mixing variable given an observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VMoments {
    pub e_v: f64,
    pub e_vinv: f64,
}

impl MslParams {
    pub fn new(mu: DVector<f64>, sigma: ScatterMatrix, gamma: DVector<f64>) -> Result<Self> {
        let p = sigma.dim();
        if mu.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: mu.len(),
            });
        }
        if gamma.len() != p {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: gamma.len(),
            });
        }
        if mu.iter().chain(gamma.iter()).any(|x| !x.is_finite()) {
            return Err(Error::InvalidParameter(
                "non-finite location or skewness entry".to_string(),
            ));
        }
        let mut u = gamma.clone();
        sigma.half_solve_mut(&mut u);
        let alpha = (1.0 + u.norm_squared()).sqrt();
        let log_norm = -0.5 * sigma.log_det()
            - p as f64 * std::f64::consts::LN_2
            - (p as f64 - 1.0) / 2.0 * std::f64::consts::PI.ln()
            - alpha.ln()
            - ln_gamma((p as f64 + 1.0) / 2.0);
        Ok(Self {
            mu,
            sigma,
            gamma,
            alpha,
            u,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &ScatterMatrix {
        &self.sigma
    }

    pub fn gamma(&self) -> &DVector<f64> {
        &self.gamma
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    /// Log-density at `y`.
    ///
    /// Panics if `y` has the wrong dimension.
    pub fn logpdf(&self, y: &DVector<f64>) -> f64 {
        let (d, lin) = self.quad_and_linear(y);
        self.log_norm - self.alpha * d.sqrt() + lin
    }

    /// Squared Mahalanobis distance d and linear term (y−μ)ᵀΣ⁻¹γ, sharing
    /// one triangular solve.
    fn quad_and_linear(&self, y: &DVector<f64>) -> (f64, f64) {
        assert_eq!(y.len(), self.dim(), "observation dimension mismatch");
        let mut w = y - &self.mu;
        self.sigma.half_solve_mut(&mut w);
        (w.norm_squared(), w.dot(&self.u))
    }

    /// Mean μ + (p+1)γ and covariance (p+1)(Σ + 2γγᵀ).
    pub fn moments(&self) -> (DVector<f64>, DMatrix<f64>) {
        let q = self.dim() as f64 + 1.0;
        let mean = &self.mu + &self.gamma * q;
        let cov = (self.sigma.matrix() + 2.0 * &self.gamma * self.gamma.transpose()) * q;
        (mean, cov)
    }

    /// Characteristic function e^{itᵀμ}·(1 + tᵀΣt − 2itᵀγ)^{−(p+1)/2}.
    pub fn cf(&self, t: &DVector<f64>) -> Complex64 {
        assert_eq!(t.len(), self.dim(), "argument dimension mismatch");
        let phase = Complex64::new(0.0, t.dot(&self.mu)).exp();
        let base = Complex64::new(
            1.0 + self.sigma.matrix().dot(&(t * t.transpose())),
            -2.0 * t.dot(&self.gamma),
        );
        phase * base.powf(-(self.dim() as f64 + 1.0) / 2.0)
    }

    /// E(V|y) = α/√d and E(V⁻¹|y) = (1 + α√d)/α², with d clamped below by
    /// `eps_d`. Their product is 1 + 1/(α√d) identically.
    pub fn v_moments(&self, y: &DVector<f64>, eps_d: f64) -> VMoments {
        self.logpdf_and_v_moments(y, eps_d).1
    }

    /// Log-density and conditional latent moments from a single triangular
    /// solve; this is the per-observation kernel of the EM expectation pass.
    pub fn logpdf_and_v_moments(&self, y: &DVector<f64>, eps_d: f64) -> (f64, VMoments) {
        let (d, lin) = self.quad_and_linear(y);
        let logpdf = self.log_norm - self.alpha * d.sqrt() + lin;
        let root_d = d.max(eps_d).sqrt();
        let vm = VMoments {
            e_v: self.alpha / root_d,
            e_vinv: (1.0 + self.alpha * root_d) / (self.alpha * self.alpha),
        };
        (logpdf, vm)
    }

    /// Draws `n` rows, reproducibly for a given `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> DataMatrix {
        assert!(n >= 1, "need at least one draw");
        let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(seed);
        let rows = (0..n).map(|_| self.sample_one(&mut rng)).collect();
        DataMatrix::from_rows(rows).expect("sampler produces finite rows")
    }

    /// One draw from the variance-mean mixture: W ~ χ²_{p+1}, then
    /// y = μ + Wγ + √W·L·x. The mixing draw always precedes the normal
    /// draws so the stream layout is part of the reproducibility contract.
    pub fn sample_one<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.dim();
        let chi = ChiSquared::new(p as f64 + 1.0).expect("positive degrees of freedom");
        let w: f64 = chi.sample(rng);
        let x = DVector::from_iterator(p, (0..p).map(|_| rng.sample::<f64, _>(StandardNormal)));
        &self.mu + &self.gamma * w + w.sqrt() * (self.sigma.cholesky_l() * x)
    }
}
