//! Finite mixtures of MSL components: density, log-likelihood,
//! responsibilities, and MAP classification.

use nalgebra::DVector;

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::msl::MslParams;

/// Tolerance on |Σπᵢ − 1| when accepting a weight vector.
const WEIGHT_SUM_TOL: f64 = 1e-12;

/// Mixing weights plus the component parameters they weight.
#[derive(Debug, Clone)]
pub struct MixtureParams {
    weights: Vec<f64>,
    components: Vec<MslParams>,
}

impl MixtureParams {
    pub fn new(weights: Vec<f64>, components: Vec<MslParams>) -> Result<Self> {
        if components.is_empty() || weights.len() != components.len() {
            return Err(Error::InvalidParameter(format!(
                "{} weights for {} components",
                weights.len(),
                components.len()
            )));
        }
        if weights.iter().any(|w| !(0.0..=1.0).contains(w)) {
            return Err(Error::InvalidParameter(
                "mixing weights must lie in [0, 1]".to_string(),
            ));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(Error::InvalidParameter(format!(
                "mixing weights sum to {sum:.17}, not 1"
            )));
        }
        let p = components[0].dim();
        if components.iter().any(|c| c.dim() != p) {
            return Err(Error::DimensionMismatch {
                expected: p,
                got: components.iter().map(|c| c.dim()).find(|&d| d != p).unwrap(),
            });
        }
        Ok(Self {
            weights,
            components,
        })
    }

    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[MslParams] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &MslParams {
        &self.components[i]
    }

    /// Per-component log πᵢ + log fᵢ(y); −∞ entries mark zero weights.
    fn weighted_logpdfs(&self, y: &DVector<f64>) -> Vec<f64> {
        self.components
            .iter()
            .zip(&self.weights)
            .map(|(c, &w)| {
                if w == 0.0 {
                    f64::NEG_INFINITY
                } else {
                    w.ln() + c.logpdf(y)
                }
            })
            .collect()
    }

    /// Mixture log-density via log-sum-exp. A weight of exactly 1 returns
    /// that component's log-density unchanged.
    pub fn logpdf(&self, y: &DVector<f64>) -> f64 {
        log_sum_exp(&self.weighted_logpdfs(y))
    }

    /// Observed-data log-likelihood: the row sum of mixture log-densities,
    /// accumulated in row order.
    pub fn loglik(&self, data: &DataMatrix) -> f64 {
        data.iter().map(|y| self.logpdf(y)).sum()
    }

    /// Posterior component probabilities at `y`, computed from log terms so
    /// tail observations cannot underflow to 0/0.
    pub fn responsibilities(&self, y: &DVector<f64>) -> Vec<f64> {
        let mut terms = self.weighted_logpdfs(y);
        let lse = log_sum_exp(&terms);
        for t in &mut terms {
            *t = (*t - lse).exp();
        }
        terms
    }

    /// MAP labels (0-based component indices); ties break toward the lower
    /// index.
    pub fn classify(&self, data: &DataMatrix) -> Vec<usize> {
        data.iter()
            .map(|y| {
                let r = self.responsibilities(y);
                let mut best = 0;
                for (i, &v) in r.iter().enumerate().skip(1) {
                    if v > r[best] {
                        best = i;
                    }
                }
                best
            })
            .collect()
    }

    /// Reorders components (and weights) so that new component i is old
    /// component perm[i]. `perm` must be a permutation of 0..g.
    pub fn permuted(&self, perm: &[usize]) -> MixtureParams {
        assert_eq!(perm.len(), self.g(), "permutation length mismatch");
        let mut seen = vec![false; self.g()];
        for &i in perm {
            assert!(!seen[i], "not a permutation");
            seen[i] = true;
        }
        MixtureParams {
            weights: perm.iter().map(|&i| self.weights[i]).collect(),
            components: perm.iter().map(|&i| self.components[i].clone()).collect(),
        }
    }
}

/// log Σ exp(xᵢ) with the max factored out; exact for a single finite term.
fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if m == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    let mut sum = 0.0;
    let mut saw_max = false;
    for &x in xs {
        if x == m && !saw_max {
            // The maximal term contributes exactly 1; skipping its exp keeps
            // the one-component case bit-exact.
            saw_max = true;
        } else {
            sum += (x - m).exp();
        }
    }
    m + sum.ln_1p()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::ScatterMatrix;
    use approx::assert_relative_eq;
    use nalgebra::DMatrix;

    fn component(mu: &[f64], sigma: &[f64], gamma: &[f64]) -> MslParams {
        let p = mu.len();
        MslParams::new(
            DVector::from_row_slice(mu),
            ScatterMatrix::new(DMatrix::from_row_slice(p, p, sigma)).unwrap(),
            DVector::from_row_slice(gamma),
        )
        .unwrap()
    }

    /// The two-component design used across the test suite: well separated,
    /// opposite skews, π₁ = 0.6.
    pub(crate) fn two_component_design() -> MixtureParams {
        MixtureParams::new(
            vec![0.6, 0.4],
            vec![
                component(&[2.0, 2.0], &[1.5, 0.0, 0.0, 1.5], &[1.0, 1.0]),
                component(&[-2.0, -2.0], &[1.5, 0.0, 0.0, 1.5], &[-1.0, -1.0]),
            ],
        )
        .unwrap()
    }

    #[test]
    fn single_component_mixture_is_exact() {
        let c = component(&[2.0, 2.0], &[1.5, 0.0, 0.0, 1.5], &[1.0, 1.0]);
        let m = MixtureParams::new(vec![1.0], vec![c.clone()]).unwrap();
        let y = DVector::from_vec(vec![0.3, -0.7]);
        // Bit-exact, not merely close: the log-sum-exp must not disturb it.
        assert_eq!(m.logpdf(&y), c.logpdf(&y));
        assert_eq!(m.responsibilities(&y), vec![1.0]);
    }

    #[test]
    fn identical_components_collapse() {
        let c = component(&[1.0, -1.0], &[2.0, 0.5, 0.5, 1.0], &[0.3, -0.2]);
        let m = MixtureParams::new(vec![0.3, 0.7], vec![c.clone(), c.clone()]).unwrap();
        let y = DVector::from_vec(vec![0.5, 0.5]);
        assert_relative_eq!(m.logpdf(&y), c.logpdf(&y), max_relative = 1e-14);
        let r = m.responsibilities(&y);
        assert_relative_eq!(r[0], 0.3, max_relative = 1e-12);
        assert_relative_eq!(r[1], 0.7, max_relative = 1e-12);
    }

    #[test]
    fn origin_is_equidistant_in_the_symmetric_design() {
        // Both components have identical density at the origin, so the
        // responsibilities reduce to the weights and the mixture log-density
        // equals either component's. Density value frozen from a 40-digit
        // evaluation.
        let m = two_component_design();
        let y = DVector::zeros(2);
        assert_relative_eq!(m.logpdf(&y), -8.8613261861305658, max_relative = 1e-14);
        let r = m.responsibilities(&y);
        assert_relative_eq!(r[0], 0.6, max_relative = 1e-13);
        assert_relative_eq!(r[1], 0.4, max_relative = 1e-13);
    }

    #[test]
    fn loglik_is_additive_over_rows() {
        let m = two_component_design();
        let rows = vec![vec![0.1, 0.2], vec![-1.0, 3.0], vec![2.0, 2.0]];
        let once = DataMatrix::from_vecs(rows.clone()).unwrap();
        let twice = DataMatrix::from_vecs([rows.clone(), rows].concat()).unwrap();
        assert_relative_eq!(m.loglik(&twice), 2.0 * m.loglik(&once), max_relative = 1e-15);
        let single = DataMatrix::from_vecs(vec![vec![0.1, 0.2]]).unwrap();
        assert_eq!(m.loglik(&single), m.logpdf(single.row(0)));
    }

    #[test]
    fn classification_follows_separation() {
        let m = two_component_design();
        let data = DataMatrix::from_vecs(vec![
            vec![3.0, 3.0],
            vec![-3.0, -3.0],
            vec![2.5, 1.5],
            vec![-1.8, -2.2],
        ])
        .unwrap();
        assert_eq!(m.classify(&data), vec![0, 1, 0, 1]);
    }

    #[test]
    fn classification_tie_breaks_low() {
        let c = component(&[0.0], &[1.0], &[0.0]);
        let m = MixtureParams::new(vec![0.5, 0.5], vec![c.clone(), c]).unwrap();
        let data = DataMatrix::from_vecs(vec![vec![0.7]]).unwrap();
        assert_eq!(m.classify(&data), vec![0]);
    }

    #[test]
    fn permutation_leaves_density_invariant() {
        let m = two_component_design();
        let swapped = m.permuted(&[1, 0]);
        for y in [
            DVector::from_vec(vec![0.4, -0.9]),
            DVector::from_vec(vec![5.0, 5.0]),
        ] {
            assert_relative_eq!(m.logpdf(&y), swapped.logpdf(&y), max_relative = 1e-12);
        }
        assert_eq!(swapped.weights(), &[0.4, 0.6]);
    }

    #[test]
    fn rejects_bad_weights() {
        let c = component(&[0.0], &[1.0], &[0.0]);
        assert!(MixtureParams::new(vec![0.5, 0.6], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureParams::new(vec![1.2, -0.2], vec![c.clone(), c.clone()]).is_err());
        assert!(MixtureParams::new(vec![], vec![]).is_err());
        assert!(MixtureParams::new(vec![0.5], vec![c.clone(), c]).is_err());
    }

    #[test]
    fn zero_weight_component_is_ignored() {
        let near = component(&[0.0], &[1.0], &[0.0]);
        let far = component(&[100.0], &[1.0], &[0.0]);
        let m = MixtureParams::new(vec![1.0, 0.0], vec![near.clone(), far]).unwrap();
        let y = DVector::from_vec(vec![0.2]);
        assert_eq!(m.logpdf(&y), near.logpdf(&y));
        assert_eq!(m.responsibilities(&y), vec![1.0, 0.0]);
    }
}
