//! EM fitting of the MSL mixture.
//!
//! Each iteration alternates an expectation pass, which computes the
//! responsibilities together with the conditional latent moments
//! v̂₁ = E(V|y) and v̂₂ = E(V⁻¹|y) per component, and a maximization pass
//! with closed-form updates:
//!
//! ```text
//! π̂ᵢ = Σⱼ ẑᵢⱼ / n
//! μ̂ᵢ = (Σⱼ ẑᵢⱼ v̂₁ᵢⱼ yⱼ − γᵢ Σⱼ ẑᵢⱼ) / Σⱼ ẑᵢⱼ v̂₁ᵢⱼ
//! γ̂ᵢ = [(Σẑv̂₁)(Σẑy) − (Σẑ)(Σẑv̂₁y)] / [(Σẑv̂₁)(Σẑv̂₂) − (Σẑ)²]
//! Σ̂ᵢ = [Σⱼ ẑᵢⱼ v̂₁ᵢⱼ (yⱼ−μᵢ)(yⱼ−μᵢ)ᵀ − γᵢγᵢᵀ Σⱼ ẑᵢⱼ v̂₂ᵢⱼ] / Σⱼ ẑᵢⱼ
//! ```
//!
//! The μ̂ᵢ update deliberately holds γᵢ at its previous value, and Σ̂ᵢ holds
//! both μᵢ and γᵢ; the updates are conditional-maximization steps, and the
//! γ̂ᵢ denominator is strictly positive because v̂₁v̂₂ > 1 pointwise. A Σ̂ᵢ
//! candidate that is indefinite or nearly singular is rejected in favour of
//! the previous scale, and because all the updates run from the same cached
//! expectation pass, the sweep as a whole can lower the log-likelihood away
//! from a fixed point. An ascent guard detects such iterations and redoes
//! them with coordinate passes that provably cannot descend, so the recorded
//! log-likelihood trace is non-decreasing.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::kmeans;
use crate::linalg::{repair_pos_def, vech, ScatterMatrix};
use crate::mixture::MixtureParams;
use crate::msl::{MslParams, DEFAULT_EPS_D};

/// Convergence test applied after each iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub enum StopRule {
    /// ‖Θ^(k+1) − Θ^(k)‖ < tol over the packed parameter vector.
    #[serde(rename = "param-norm")]
    ParamNorm,
    /// |ℓ^(k+1) − ℓ^(k)| < tol.
    #[serde(rename = "abs-loglik")]
    AbsLogLik,
    /// |ℓ^(k+1)/ℓ^(k) − 1| < tol.
    #[default]
    #[serde(rename = "rel-loglik")]
    RelLogLik,
}

impl std::str::FromStr for StopRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "param-norm" => Ok(StopRule::ParamNorm),
            "abs-loglik" => Ok(StopRule::AbsLogLik),
            "rel-loglik" => Ok(StopRule::RelLogLik),
            _ => Err(Error::InvalidParameter(format!(
                "unknown stop rule {s:?} (expected param-norm, abs-loglik, or rel-loglik)"
            ))),
        }
    }
}

/// Fitting configuration. `min_mass = None` resolves to p+1 once the data
/// dimension is known, the smallest mass for which a component's scatter
/// update can be full rank.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmConfig {
    pub g: usize,
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
    #[serde(default)]
    pub stop_rule: StopRule,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_eps_d")]
    pub eps_d: f64,
    #[serde(default)]
    pub min_mass: Option<f64>,
}

fn default_tol() -> f64 {
    1e-6
}

fn default_max_iter() -> usize {
    2000
}

fn default_restarts() -> usize {
    40
}

fn default_eps_d() -> f64 {
    DEFAULT_EPS_D
}

impl EmConfig {
    pub fn new(g: usize) -> Self {
        Self {
            g,
            tol: default_tol(),
            max_iter: default_max_iter(),
            stop_rule: StopRule::default(),
            restarts: default_restarts(),
            seed: 0,
            eps_d: default_eps_d(),
            min_mass: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g < 1 {
            return Err(Error::InvalidParameter("g must be at least 1".to_string()));
        }
        if !(self.tol > 0.0) {
            return Err(Error::InvalidParameter("tol must be positive".to_string()));
        }
        if self.max_iter < 1 || self.restarts < 1 {
            return Err(Error::InvalidParameter(
                "max_iter and restarts must be at least 1".to_string(),
            ));
        }
        if !(self.eps_d > 0.0) {
            return Err(Error::InvalidParameter(
                "eps_d must be positive".to_string(),
            ));
        }
        if let Some(m) = self.min_mass {
            if !(m > 0.0) {
                return Err(Error::InvalidParameter(
                    "min_mass must be positive".to_string(),
                ));
            }
        }
        Ok(())
    }
}

/// Output of one expectation pass: n×g responsibilities and latent moments.
#[derive(Debug, Clone)]
pub struct EStepCache {
    pub z: DMatrix<f64>,
    pub v1: DMatrix<f64>,
    pub v2: DMatrix<f64>,
}

/// A converged (or iteration-capped) fit.
#[derive(Debug, Clone)]
pub struct FitResult {
    pub theta: MixtureParams,
    /// ℓ(Θ^(k)) for k = 0, 1, …; index 0 is the initializer's value.
    pub loglik_trace: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub z_final: DMatrix<f64>,
    /// MAP labels, 0-based.
    pub labels: Vec<usize>,
    /// Filled by the caller via the inference module; fitting never
    /// computes standard errors on its own.
    pub se: Option<Vec<f64>>,
    pub aic: f64,
    pub bic: f64,
    /// Which restart produced the winning run.
    pub restart_index: usize,
}

impl FitResult {
    pub fn final_loglik(&self) -> f64 {
        *self.loglik_trace.last().expect("trace never empty")
    }
}

/// Expectation pass at `theta`; also returns the observed-data
/// log-likelihood, which the row-wise log-sum-exp yields for free.
fn e_step_with_loglik(
    data: &DataMatrix,
    theta: &MixtureParams,
    eps_d: f64,
) -> (EStepCache, f64) {
    let (n, g) = (data.n(), theta.g());
    let mut z = DMatrix::zeros(n, g);
    let mut v1 = DMatrix::zeros(n, g);
    let mut v2 = DMatrix::zeros(n, g);
    let mut terms = vec![0.0f64; g];
    let mut loglik = 0.0;
    for (j, y) in data.iter().enumerate() {
        for (i, (c, &w)) in theta.components().iter().zip(theta.weights()).enumerate() {
            let (lp, vm) = c.logpdf_and_v_moments(y, eps_d);
            terms[i] = if w == 0.0 { f64::NEG_INFINITY } else { w.ln() + lp };
            v1[(j, i)] = vm.e_v;
            v2[(j, i)] = vm.e_vinv;
        }
        let m = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for &t in terms.iter() {
            sum += (t - m).exp();
        }
        let lse = m + sum.ln();
        for i in 0..g {
            z[(j, i)] = (terms[i] - lse).exp();
        }
        loglik += lse;
    }
    (EStepCache { z, v1, v2 }, loglik)
}

/// Responsibilities and conditional latent moments at `theta`.
pub fn e_step(data: &DataMatrix, theta: &MixtureParams, eps_d: f64) -> EStepCache {
    e_step_with_loglik(data, theta, eps_d).0
}

/// Weighted sums over one component's responsibilities, shared by the
/// maximization variants.
struct ComponentSums {
    sz: f64,
    szv1: f64,
    szv2: f64,
    sy: DVector<f64>,
    syv1: DVector<f64>,
}

fn component_sums(data: &DataMatrix, cache: &EStepCache, i: usize) -> ComponentSums {
    let p = data.dim();
    let mut sz = 0.0;
    let mut szv1 = 0.0;
    let mut szv2 = 0.0;
    let mut sy = DVector::<f64>::zeros(p);
    let mut syv1 = DVector::<f64>::zeros(p);
    for (j, y) in data.iter().enumerate() {
        let z = cache.z[(j, i)];
        sz += z;
        szv1 += z * cache.v1[(j, i)];
        szv2 += z * cache.v2[(j, i)];
        sy.axpy(z, y, 1.0);
        syv1.axpy(z * cache.v1[(j, i)], y, 1.0);
    }
    ComponentSums { sz, szv1, szv2, sy, syv1 }
}

/// Joint location and skewness solution for one component. The scale matrix
/// cancels from the coupled stationarity equations, so this pair maximizes
/// the expected complete log-likelihood in (μᵢ, γᵢ) for any fixed Σᵢ.
fn location_skewness(sums: &ComponentSums, i: usize) -> Result<(DVector<f64>, DVector<f64>)> {
    let denom = sums.szv1 * sums.szv2 - sums.sz * sums.sz;
    if !(denom > 0.0) {
        return Err(Error::Numerical(format!(
            "skewness update denominator {denom:.3e} not positive for component {}",
            i + 1
        )));
    }
    let gamma_new = (&sums.sy * sums.szv1 - &sums.syv1 * sums.sz) / denom;
    let mu_new = (&sums.syv1 - &gamma_new * sums.sz) / sums.szv1;
    Ok((mu_new, gamma_new))
}

/// One maximization pass. `theta_old` supplies the γᵢ held fixed in the μ̂ᵢ
/// update and the (μᵢ, γᵢ) held fixed in the Σ̂ᵢ update.
pub fn m_step(
    data: &DataMatrix,
    cache: &EStepCache,
    theta_old: &MixtureParams,
    min_mass: f64,
) -> Result<MixtureParams> {
    let (n, g, p) = (data.n(), theta_old.g(), theta_old.dim());
    assert_eq!(cache.z.nrows(), n, "cache row count mismatch");
    assert_eq!(cache.z.ncols(), g, "cache component count mismatch");

    let mut weights = Vec::with_capacity(g);
    let mut components = Vec::with_capacity(g);
    for i in 0..g {
        let sums = component_sums(data, cache, i);
        let (sz, szv1, szv2) = (sums.sz, sums.szv1, sums.szv2);
        if !(sz >= min_mass) {
            return Err(Error::DegenerateComponent {
                component: i + 1,
                mass: sz,
                min_mass,
            });
        }
        let gamma_old = theta_old.component(i).gamma();
        let mu_old = theta_old.component(i).mu();

        let mu_new = (&sums.syv1 - gamma_old * sz) / szv1;
        let denom = szv1 * szv2 - sz * sz;
        if !(denom > 0.0) {
            return Err(Error::Numerical(format!(
                "skewness update denominator {denom:.3e} not positive for component {}",
                i + 1
            )));
        }
        let gamma_new = (&sums.sy * szv1 - &sums.syv1 * sz) / denom;

        let mut s = DMatrix::<f64>::zeros(p, p);
        for (j, y) in data.iter().enumerate() {
            let d = y - mu_old;
            s.syger(cache.z[(j, i)] * cache.v1[(j, i)], &d, &d, 1.0);
        }
        s.fill_upper_triangle_with_lower_triangle();
        s -= gamma_old * gamma_old.transpose() * szv2;
        s /= sz;
        let sigma_new = repair_scale_update(s, theta_old.component(i).sigma())?;

        weights.push(sz / n as f64);
        components.push(MslParams::new(mu_new, sigma_new, gamma_new)?);
    }
    MixtureParams::new(weights, components)
}

/// Ascent-safe maximization pass, used by the fit loop when the simultaneous
/// sweep of `m_step` lowers the observed-data log-likelihood.
///
/// Weights and skewnesses update to the same values as in `m_step`, while
/// each location re-solves against the fresh skewness, making (μ̂ᵢ, γ̂ᵢ) the
/// joint conditional maximizer for any fixed scale. Each scale then either
/// re-solves at the fresh location and skewness with all cross moments kept
/// (`keep_scale == false`, the exact conditional maximizer, nonnegative
/// definite because the latent moments satisfy v₁v₂ ≥ 1), or stays at the
/// previous iterate (`keep_scale == true`). Both choices increase the
/// expected complete log-likelihood block by block, so neither can lower the
/// observed-data log-likelihood.
fn m_step_ascent(
    data: &DataMatrix,
    cache: &EStepCache,
    theta_old: &MixtureParams,
    min_mass: f64,
    keep_scale: bool,
) -> Result<MixtureParams> {
    let (n, g, p) = (data.n(), theta_old.g(), theta_old.dim());
    let mut weights = Vec::with_capacity(g);
    let mut components = Vec::with_capacity(g);
    for i in 0..g {
        let sums = component_sums(data, cache, i);
        if !(sums.sz >= min_mass) {
            return Err(Error::DegenerateComponent {
                component: i + 1,
                mass: sums.sz,
                min_mass,
            });
        }
        let (mu_new, gamma_new) = location_skewness(&sums, i)?;

        let sigma_new = if keep_scale {
            theta_old.component(i).sigma().clone()
        } else {
            let mut s = DMatrix::<f64>::zeros(p, p);
            for (j, y) in data.iter().enumerate() {
                let d = y - &mu_new;
                s.syger(cache.z[(j, i)] * cache.v1[(j, i)], &d, &d, 1.0);
            }
            s.fill_upper_triangle_with_lower_triangle();
            let centered = &sums.sy - &mu_new * sums.sz;
            s -= &centered * gamma_new.transpose();
            s -= &gamma_new * centered.transpose();
            s += &gamma_new * gamma_new.transpose() * sums.szv2;
            s /= sums.sz;
            repair_scale_update(s, theta_old.component(i).sigma())?
        };

        weights.push(sums.sz / n as f64);
        components.push(MslParams::new(mu_new, sigma_new, gamma_new)?);
    }
    MixtureParams::new(weights, components)
}

/// Smallest admissible eigenvalue of an accepted scale update, relative to
/// the candidate's mean absolute eigenvalue.
///
/// Below this the component is collapsing onto a lower-dimensional affine
/// set. The density's exponent then cancels terms of size roughly
/// skew·offset/λ_min, so by λ_min ≈ 1e-5·scale the cancellation noise in a
/// data-set log-likelihood approaches 1e-9 and keeps growing as 1/λ_min;
/// accepting such updates would let roundoff swamp the convergence checks.
const REPAIR_FLOOR_REL: f64 = 1e-5;

/// Makes a scale update candidate usable.
///
/// The subtraction of the skewness term can leave the candidate indefinite,
/// and a spurious likelihood ridge can drive it toward rank deficiency. In
/// both cases the previous iterate's scale matrix (healthy by induction) is
/// kept for that sweep: transient indefiniteness heals once the skewness
/// iterate reaches the data's scale, while a collapsing component stays
/// frozen at its last well-conditioned value and the remaining parameters
/// settle against it.
fn repair_scale_update(
    candidate: DMatrix<f64>,
    previous: &ScatterMatrix,
) -> Result<ScatterMatrix> {
    let p = candidate.nrows();
    if candidate.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numerical(
            "scale update candidate has non-finite entries".to_string(),
        ));
    }
    let eigenvalues = candidate.clone().symmetric_eigen().eigenvalues;
    let scale = eigenvalues.iter().map(|l| l.abs()).sum::<f64>() / p as f64;
    if eigenvalues.min() > REPAIR_FLOOR_REL * scale {
        return ScatterMatrix::new(candidate);
    }
    Ok(previous.clone())
}

/// Largest admissible value of 2γ⁰ᵀW⁻¹γ⁰ for an initial skewness; below 1 so
/// the mapped scale keeps a positive margin.
const SKEW_INIT_CAP: f64 = 0.9;

/// Mixture parameters from a seeded k-means partition, with each cluster's
/// sample moments mapped through the model's moment identities.
///
/// The fitted family has E(Y) = μ + (p+1)γ, Var(Y) = (p+1)(Σ + 2γγᵀ), and a
/// per-coordinate third central moment of 6(p+1)γₖΣₖₖ + 8(p+1)γₖ³. Cluster
/// moments (mean, scatter S, third moments m₃) are therefore mapped as
/// γ⁰ₖ = m₃ₖ/(6 Sₖₖ), Σ⁰ = S/(p+1) − 2γ⁰γ⁰ᵀ (eigenvalue-repaired),
/// μ⁰ = mean − (p+1)γ⁰, the linearized inverse of those identities.
pub fn init_kmeans(data: &DataMatrix, g: usize, seed: u64) -> Result<MixtureParams> {
    check_init_size(data, g)?;
    let labels = kmeans::cluster(data, g, seed)?;
    init_from_labels(data, g, &labels)
}

/// Mixture parameters from a seeded uniform random partition, with each
/// cluster's location jittered across the data spread it implies.
///
/// The k-means partition is nearly seed-invariant on well-separated data, so
/// restarts built from it all start in the same basin; the restart loop uses
/// this initializer from the second restart on to actually explore.
pub fn init_random(data: &DataMatrix, g: usize, seed: u64) -> Result<MixtureParams> {
    check_init_size(data, g)?;
    let p = data.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let labels: Vec<usize> = (0..data.n()).map(|_| rng.gen_range(0..g)).collect();
    let base = init_from_labels(data, g, &labels)?;

    let factor = (p + 1) as f64;
    let components = base
        .components()
        .iter()
        .map(|c| {
            // Var(Y) = (p+1)W with W = Σ + 2γγᵀ, so √((p+1)Wₖₖ) is the
            // implied data spread per coordinate; a ±2 multiple of it keeps
            // cross-basin moves likely while the moment-mapped scale and
            // skewness stay as drawn.
            let mu = DVector::from_fn(p, |k, _| {
                let w_kk = c.sigma().matrix()[(k, k)] + 2.0 * c.gamma()[k] * c.gamma()[k];
                c.mu()[k] + rng.gen_range(-2.0..2.0) * (factor * w_kk).sqrt()
            });
            MslParams::new(mu, c.sigma().clone(), c.gamma().clone())
        })
        .collect::<Result<Vec<_>>>()?;
    MixtureParams::new(base.weights().to_vec(), components)
}

fn check_init_size(data: &DataMatrix, g: usize) -> Result<()> {
    let (n, p) = (data.n(), data.dim());
    if n < g * (p + 1) {
        return Err(Error::Data(format!(
            "need at least g·(p+1) = {} observations to initialize, got {n}",
            g * (p + 1)
        )));
    }
    Ok(())
}

/// Moment map from a hard partition: per-cluster mean, scatter, and third
/// moments become the component parameters via the identities in
/// [`init_kmeans`].
fn init_from_labels(data: &DataMatrix, g: usize, labels: &[usize]) -> Result<MixtureParams> {
    let (n, p) = (data.n(), data.dim());

    let mut weights = Vec::with_capacity(g);
    let mut components = Vec::with_capacity(g);
    for i in 0..g {
        let members: Vec<&DVector<f64>> = data
            .iter()
            .zip(labels)
            .filter(|(_, &l)| l == i)
            .map(|(y, _)| y)
            .collect();
        let count = members.len();
        if count == 0 {
            return Err(Error::EmptyCluster);
        }
        let mut mean = DVector::<f64>::zeros(p);
        for y in &members {
            mean += *y;
        }
        mean /= count as f64;

        let mut scatter = DMatrix::<f64>::zeros(p, p);
        let mut m3 = DVector::<f64>::zeros(p);
        for y in &members {
            let d = *y - &mean;
            scatter.syger(1.0, &d, &d, 1.0);
            for k in 0..p {
                m3[k] += d[k] * d[k] * d[k];
            }
        }
        scatter.fill_upper_triangle_with_lower_triangle();
        scatter /= count as f64;
        m3 /= count as f64;

        let factor = (p + 1) as f64;
        let skew = DVector::from_iterator(
            p,
            (0..p).map(|k| {
                let variance = scatter[(k, k)];
                if variance > 0.0 {
                    m3[k] / (6.0 * variance)
                } else {
                    0.0
                }
            }),
        );
        let w = ScatterMatrix::new(repair_pos_def(&(&scatter / factor))?)?;

        weights.push(count as f64 / n as f64);
        components.push(component_from_moments(&mean, &w, skew)?);
    }
    MixtureParams::new(weights, components)
}

/// Component whose implied data mean is `mean` and variance core is `w`, at
/// the proposed skewness: μ = mean − (p+1)γ and Σ = W − 2γγᵀ.
///
/// The downdated scale is positive definite only while 2γᵀW⁻¹γ < 1, and a
/// proposed skewness can land outside that region, so it shrinks back into
/// it before the identity is inverted.
fn component_from_moments(
    mean: &DVector<f64>,
    w: &ScatterMatrix,
    mut skew: DVector<f64>,
) -> Result<MslParams> {
    let factor = (mean.len() + 1) as f64;
    let overshoot = 2.0 * w.quad_form(&skew);
    if overshoot > SKEW_INIT_CAP {
        skew *= (SKEW_INIT_CAP / overshoot).sqrt();
    }
    let location = mean - factor * &skew;
    let mut scale = w.matrix().clone();
    scale.syger(-2.0, &skew, &skew, 1.0);
    scale.fill_upper_triangle_with_lower_triangle();
    MslParams::new(location, ScatterMatrix::new(repair_pos_def(&scale)?)?, skew)
}

/// All parameters flattened to one vector (weights, locations, vech of each
/// scatter, skewness), used by the parameter-norm stopping rule.
fn pack_params(theta: &MixtureParams) -> DVector<f64> {
    let mut out: Vec<f64> = theta.weights().to_vec();
    for c in theta.components() {
        out.extend(c.mu().iter());
    }
    for c in theta.components() {
        out.extend(vech(c.sigma().matrix()).iter());
    }
    for c in theta.components() {
        out.extend(c.gamma().iter());
    }
    DVector::from_vec(out)
}

/// Runs the EM loop from an explicit initializer until the configured
/// stopping rule fires or `max_iter` is reached (`restarts` is ignored).
pub fn fit_with_init(
    data: &DataMatrix,
    config: &EmConfig,
    init: MixtureParams,
) -> Result<FitResult> {
    config.validate()?;
    if init.g() != config.g {
        return Err(Error::InvalidParameter(format!(
            "initializer has {} components, config says {}",
            init.g(),
            config.g
        )));
    }
    let p = data.dim();
    let min_mass = config.min_mass.unwrap_or((p + 1) as f64);

    let mut theta = init;
    let (mut cache, mut ll) = e_step_with_loglik(data, &theta, config.eps_d);
    if !ll.is_finite() {
        return Err(Error::NonFiniteLogLik { iteration: 0 });
    }
    let mut trace = vec![ll];
    let mut converged = false;
    let mut iterations = 0;

    for k in 1..=config.max_iter {
        let mut theta_new = m_step(data, &cache, &theta, min_mass)?;
        let (mut cache_new, mut ll_new) = e_step_with_loglik(data, &theta_new, config.eps_d);
        if !ll_new.is_finite() {
            return Err(Error::NonFiniteLogLik { iteration: k });
        }
        // The simultaneous sweep evaluates each scale update at the previous
        // location and skewness; away from a fixed point that can lower the
        // log-likelihood. Redo such a sweep with ascent-safe passes and keep
        // the best candidate. Fixed points are unaffected, because every
        // variant solves the same self-consistency equations there.
        if ll_new < ll {
            for keep_scale in [false, true] {
                let theta_try = m_step_ascent(data, &cache, &theta, min_mass, keep_scale)?;
                let (cache_try, ll_try) = e_step_with_loglik(data, &theta_try, config.eps_d);
                if ll_try.is_finite() && ll_try > ll_new {
                    theta_new = theta_try;
                    cache_new = cache_try;
                    ll_new = ll_try;
                }
                if ll_new >= ll {
                    break;
                }
            }
        }
        trace.push(ll_new);
        iterations = k;
        let fired = match config.stop_rule {
            StopRule::RelLogLik => (ll_new / ll - 1.0).abs() < config.tol,
            StopRule::AbsLogLik => (ll_new - ll).abs() < config.tol,
            StopRule::ParamNorm => (pack_params(&theta_new) - pack_params(&theta)).norm() < config.tol,
        };
        theta = theta_new;
        cache = cache_new;
        ll = ll_new;
        if fired {
            converged = true;
            break;
        }
    }

    let labels = argmax_rows(&cache.z);
    let n = data.n();
    let (aic, bic) =
        crate::inference::information_criteria(ll, config.g, p, n);
    Ok(FitResult {
        theta,
        loglik_trace: trace,
        iterations,
        converged,
        z_final: cache.z,
        labels,
        se: None,
        aic,
        bic,
        restart_index: 0,
    })
}

/// Full fitting entry point: one k-means initialization plus `restarts − 1`
/// random-partition initializations with seeds derived from (seed, restart
/// index), EM from each, best final log-likelihood wins (ties go to the run
/// that converged in fewer iterations). Failed restarts are skipped; fitting
/// only errors when every restart fails.
pub fn fit(data: &DataMatrix, config: &EmConfig) -> Result<FitResult> {
    config.validate()?;
    let (n, p) = (data.n(), data.dim());
    if n <= config.g * (p + 1) {
        return Err(Error::Data(format!(
            "need more than g·(p+1) = {} observations for g = {}, got {n}",
            config.g * (p + 1),
            config.g
        )));
    }

    let mut best: Option<FitResult> = None;
    let mut last_err = String::new();
    for r in 0..config.restarts {
        // Restart 0 starts from the k-means partition. That partition barely
        // varies with its seed on well-separated data, so later restarts draw
        // random partitions instead to reach basins k-means cannot.
        let init = if r == 0 {
            init_kmeans(data, config.g, derive_seed(config.seed, r as u64))
        } else {
            init_random(data, config.g, derive_seed(config.seed, r as u64))
        };
        let attempt = init.and_then(|init| fit_with_init(data, config, init));
        match attempt {
            Ok(mut res) => {
                res.restart_index = r;
                let better = match &best {
                    None => true,
                    Some(b) => {
                        res.final_loglik() > b.final_loglik()
                            || (res.final_loglik() == b.final_loglik()
                                && res.iterations < b.iterations)
                    }
                };
                if better {
                    best = Some(res);
                }
            }
            Err(e) => last_err = e.to_string(),
        }
    }
    best.ok_or(Error::AllRestartsFailed {
        attempted: config.restarts,
        last: last_err,
    })
}

fn argmax_rows(z: &DMatrix<f64>) -> Vec<usize> {
    (0..z.nrows())
        .map(|j| {
            let mut best = 0;
            for i in 1..z.ncols() {
                if z[(j, i)] > z[(j, best)] {
                    best = i;
                }
            }
            best
        })
        .collect()
}

/// Stateless counter-based seed derivation (the SplitMix64 finalizer), so
/// restarts and replicates get independent streams regardless of ordering.
pub(crate) fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index.wrapping_add(1)));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
