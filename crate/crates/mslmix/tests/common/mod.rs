//! Shared oracles for the integration suites.
//!
//! Everything here recomputes library quantities along a deliberately
//! different path: explicit Gauss-Jordan inverses, scalar accumulation
//! loops, adaptive quadrature, central finite differences. Keep these
//! independent of the library internals they are used to check.

#![allow(dead_code)]

use std::f64::consts::{LN_2, PI};
use std::path::PathBuf;

use mslmix::{DataMatrix, MixtureParams, MslParams, ScatterMatrix};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn swiss_path() -> PathBuf {
    PathBuf::from(concat!(
        env!("CARGO_MANIFEST_DIR"),
        "/data/swiss_banknotes.csv"
    ))
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

// ---------------------------------------------------------------------------
// Scalar linear algebra on plain nested vectors.

/// Gauss-Jordan inverse with partial pivoting.
pub fn invert(a: &[Vec<f64>]) -> Vec<Vec<f64>> {
    let p = a.len();
    let mut work: Vec<Vec<f64>> = a
        .iter()
        .enumerate()
        .map(|(r, row)| {
            let mut v = row.clone();
            v.extend((0..p).map(|c| if c == r { 1.0 } else { 0.0 }));
            v
        })
        .collect();
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| work[i][col].abs().total_cmp(&work[j][col].abs()))
            .unwrap();
        work.swap(col, pivot);
        let scale = work[col][col];
        assert!(scale != 0.0, "singular matrix in test oracle");
        for x in work[col].iter_mut() {
            *x /= scale;
        }
        for r in 0..p {
            if r != col {
                let factor = work[r][col];
                for c in 0..2 * p {
                    work[r][c] -= factor * work[col][c];
                }
            }
        }
    }
    work.iter().map(|row| row[p..].to_vec()).collect()
}

/// Determinant by LU with partial pivoting.
pub fn determinant(a: &[Vec<f64>]) -> f64 {
    let p = a.len();
    let mut m: Vec<Vec<f64>> = a.to_vec();
    let mut det = 1.0;
    for col in 0..p {
        let pivot = (col..p)
            .max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))
            .unwrap();
        if pivot != col {
            m.swap(col, pivot);
            det = -det;
        }
        det *= m[col][col];
        if m[col][col] == 0.0 {
            return 0.0;
        }
        for r in col + 1..p {
            let factor = m[r][col] / m[col][col];
            for c in col..p {
                m[r][c] -= factor * m[col][c];
            }
        }
    }
    det
}

/// xᵀ M y with index loops.
pub fn quad_form(m: &[Vec<f64>], x: &[f64], y: &[f64]) -> f64 {
    let mut acc = 0.0;
    for (r, row) in m.iter().enumerate() {
        for (c, &v) in row.iter().enumerate() {
            acc += x[r] * v * y[c];
        }
    }
    acc
}

/// log Γ((p+1)/2) for the dimensions the tests exercise, from closed forms.
pub fn half_gamma_ln(p: usize) -> f64 {
    match p {
        1 | 3 => 0.0,
        2 => (PI.sqrt() / 2.0).ln(),
        4 => (0.75 * PI.sqrt()).ln(),
        5 => LN_2,
        _ => panic!("unsupported dimension {p} in test oracle"),
    }
}

// ---------------------------------------------------------------------------
// Independent density, mixing-variable, and sweep oracles.

/// Skew Laplace log-density assembled from scalar pieces.
pub fn naive_logpdf(mu: &[f64], sigma: &[Vec<f64>], gamma: &[f64], y: &[f64]) -> f64 {
    let p = mu.len();
    let inv = invert(sigma);
    let det = determinant(sigma);
    let diff: Vec<f64> = (0..p).map(|k| y[k] - mu[k]).collect();
    let d = quad_form(&inv, &diff, &diff).max(1e-10);
    let alpha = (1.0 + quad_form(&inv, gamma, gamma)).sqrt();
    -0.5 * det.ln() - p as f64 * LN_2 - 0.5 * (p as f64 - 1.0) * PI.ln() - alpha.ln()
        - half_gamma_ln(p)
        - alpha * d.sqrt()
        + quad_form(&inv, &diff, gamma)
}

pub fn naive_pdf(mu: &[f64], sigma: &[Vec<f64>], gamma: &[f64], y: &[f64]) -> f64 {
    naive_logpdf(mu, sigma, gamma, y).exp()
}

/// Density of the latent mixing variable given an observation, before any
/// conditional-moment shortcut.
pub fn latent_conditional_pdf(d: f64, alpha: f64, v: f64) -> f64 {
    if v <= 0.0 {
        return 0.0;
    }
    let log_norm = alpha.ln() - 0.5 * (2.0 * PI).ln() + alpha * d.sqrt();
    let log_kernel = -1.5 * v.ln() - 0.5 * (d * v + alpha * alpha / v);
    (log_norm + log_kernel).exp()
}

/// One full E-step plus M-step recomputed with index loops. The scale
/// update keeps the raw candidate, so comparisons only hold on instances
/// where no repair is needed.
pub struct ScalarSweep {
    pub z: Vec<Vec<f64>>,
    pub v1: Vec<Vec<f64>>,
    pub v2: Vec<Vec<f64>>,
    pub weights: Vec<f64>,
    pub mu: Vec<Vec<f64>>,
    pub sigma: Vec<Vec<Vec<f64>>>,
    pub gamma: Vec<Vec<f64>>,
}

pub fn scalar_em_sweep(
    data: &[Vec<f64>],
    weights: &[f64],
    mu: &[Vec<f64>],
    sigma: &[Vec<Vec<f64>>],
    gamma: &[Vec<f64>],
) -> ScalarSweep {
    let n = data.len();
    let g = weights.len();
    let p = mu[0].len();

    let mut z = vec![vec![0.0; g]; n];
    let mut v1 = vec![vec![0.0; g]; n];
    let mut v2 = vec![vec![0.0; g]; n];
    for (j, y) in data.iter().enumerate() {
        let mut mix = 0.0;
        for i in 0..g {
            let f = naive_pdf(&mu[i], &sigma[i], &gamma[i], y);
            z[j][i] = weights[i] * f;
            mix += weights[i] * f;

            let inv = invert(&sigma[i]);
            let diff: Vec<f64> = (0..p).map(|k| y[k] - mu[i][k]).collect();
            let d = quad_form(&inv, &diff, &diff).max(1e-10);
            let alpha2 = 1.0 + quad_form(&inv, &gamma[i], &gamma[i]);
            v1[j][i] = alpha2.sqrt() / d.sqrt();
            v2[j][i] = (1.0 + (alpha2 * d).sqrt()) / alpha2;
        }
        for i in 0..g {
            z[j][i] /= mix;
        }
    }

    let mut new_weights = vec![0.0; g];
    let mut new_mu = vec![vec![0.0; p]; g];
    let mut new_sigma = vec![vec![vec![0.0; p]; p]; g];
    let mut new_gamma = vec![vec![0.0; p]; g];
    for i in 0..g {
        let mut sz = 0.0;
        let mut szv1 = 0.0;
        let mut szv2 = 0.0;
        let mut szy = vec![0.0; p];
        let mut szv1y = vec![0.0; p];
        for j in 0..n {
            sz += z[j][i];
            szv1 += z[j][i] * v1[j][i];
            szv2 += z[j][i] * v2[j][i];
            for k in 0..p {
                szy[k] += z[j][i] * data[j][k];
                szv1y[k] += z[j][i] * v1[j][i] * data[j][k];
            }
        }
        new_weights[i] = sz / n as f64;
        for k in 0..p {
            new_mu[i][k] = (szv1y[k] - gamma[i][k] * sz) / szv1;
            new_gamma[i][k] = (szv1 * szy[k] - sz * szv1y[k]) / (szv1 * szv2 - sz * sz);
        }
        for r in 0..p {
            for c in 0..p {
                let mut acc = 0.0;
                for j in 0..n {
                    let dr = data[j][r] - mu[i][r];
                    let dc = data[j][c] - mu[i][c];
                    acc += z[j][i] * v1[j][i] * dr * dc;
                }
                new_sigma[i][r][c] = (acc - gamma[i][r] * gamma[i][c] * szv2) / sz;
            }
        }
    }

    ScalarSweep {
        z,
        v1,
        v2,
        weights: new_weights,
        mu: new_mu,
        sigma: new_sigma,
        gamma: new_gamma,
    }
}

// ---------------------------------------------------------------------------
// Quadrature.

/// Adaptive Simpson with absolute tolerance.
pub fn adaptive_simpson<F: Fn(f64) -> f64 + Copy>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson<F: Fn(f64) -> f64>(f: &F, a: f64, m: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f(m) + f(b))
    }
    fn recurse<F: Fn(f64) -> f64>(
        f: &F,
        a: f64,
        b: f64,
        whole: f64,
        tol: f64,
        depth: u32,
    ) -> f64 {
        let m = 0.5 * (a + b);
        let left = simpson(f, a, 0.5 * (a + m), m);
        let right = simpson(f, m, 0.5 * (m + b), b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            return left + right + (left + right - whole) / 15.0;
        }
        recurse(f, a, m, left, tol / 2.0, depth - 1) + recurse(f, m, b, right, tol / 2.0, depth - 1)
    }
    let m = 0.5 * (a + b);
    recurse(&f, a, b, simpson(&f, a, m, b), tol, 48)
}

// ---------------------------------------------------------------------------
// Packed parameter vector and finite differences.

/// Packs a mixture in reporting order: leading g−1 weights, all locations,
/// all scale lower triangles (column-stacked, diagonal included), all
/// skewness vectors.
pub fn pack(theta: &MixtureParams) -> Vec<f64> {
    let g = theta.g();
    let p = theta.dim();
    let mut out: Vec<f64> = theta.weights()[..g - 1].to_vec();
    for comp in theta.components() {
        out.extend(comp.mu().iter());
    }
    for comp in theta.components() {
        let m = comp.sigma().matrix();
        for c in 0..p {
            for r in c..p {
                out.push(m[(r, c)]);
            }
        }
    }
    for comp in theta.components() {
        out.extend(comp.gamma().iter());
    }
    out
}

/// Rebuilds a mixture from a packed vector. The g-th weight is one minus
/// the rest, and each off-diagonal scale entry fills both symmetric slots,
/// so perturbing one packed entry moves exactly the tied quantities.
pub fn unpack(packed: &[f64], g: usize, p: usize) -> MixtureParams {
    let mut idx = 0;
    let mut weights: Vec<f64> = packed[..g - 1].to_vec();
    idx += g - 1;
    weights.push(1.0 - weights.iter().sum::<f64>());

    let mut mus = Vec::with_capacity(g);
    for _ in 0..g {
        mus.push(DVector::from_column_slice(&packed[idx..idx + p]));
        idx += p;
    }
    let mut sigmas = Vec::with_capacity(g);
    for _ in 0..g {
        let mut m = DMatrix::zeros(p, p);
        for c in 0..p {
            for r in c..p {
                m[(r, c)] = packed[idx];
                m[(c, r)] = packed[idx];
                idx += 1;
            }
        }
        sigmas.push(ScatterMatrix::new(m).expect("perturbed scale stays positive definite"));
    }
    let mut gammas = Vec::with_capacity(g);
    for _ in 0..g {
        gammas.push(DVector::from_column_slice(&packed[idx..idx + p]));
        idx += p;
    }

    let components = mus
        .into_iter()
        .zip(sigmas)
        .zip(gammas)
        .map(|((mu, sigma), gamma)| {
            MslParams::new(mu, sigma, gamma).expect("perturbed component stays valid")
        })
        .collect();
    MixtureParams::new(weights, components).expect("perturbed mixture stays valid")
}

/// Central finite-difference gradient of the mixture log-density at y with
/// respect to the packed parameters.
pub fn fd_score(y: &DVector<f64>, theta: &MixtureParams, step: f64) -> Vec<f64> {
    let g = theta.g();
    let p = theta.dim();
    let packed = pack(theta);
    (0..packed.len())
        .map(|k| {
            let h = step * packed[k].abs().max(1.0);
            let mut hi = packed.clone();
            hi[k] += h;
            let mut lo = packed.clone();
            lo[k] -= h;
            let f_hi = unpack(&hi, g, p).logpdf(y);
            let f_lo = unpack(&lo, g, p).logpdf(y);
            (f_hi - f_lo) / (2.0 * h)
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Random instance generators.

pub fn rand_vec(rng: &mut ChaCha8Rng, p: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(p, |_, _| rng.gen_range(lo..hi))
}

/// Random well-conditioned scatter: AAᵀ/p plus a diagonal floor.
pub fn rand_scatter(rng: &mut ChaCha8Rng, p: usize, floor: f64) -> ScatterMatrix {
    let a = DMatrix::from_fn(p, p, |_, _| rng.gen_range(-1.0..1.0));
    let m = &a * a.transpose() / p as f64 + DMatrix::identity(p, p) * floor;
    ScatterMatrix::new(m).expect("construction keeps the matrix positive definite")
}

pub fn rand_component(rng: &mut ChaCha8Rng, p: usize, mu_spread: f64, skew: f64) -> MslParams {
    let mu = rand_vec(rng, p, -mu_spread, mu_spread);
    let sigma = rand_scatter(rng, p, 0.5);
    let gamma = rand_vec(rng, p, -skew, skew);
    MslParams::new(mu, sigma, gamma).expect("generated component is valid")
}

/// Random mixture with weights bounded away from zero.
pub fn rand_mixture(rng: &mut ChaCha8Rng, g: usize, p: usize, mu_spread: f64, skew: f64) -> MixtureParams {
    let raw: Vec<f64> = (0..g).map(|_| rng.gen_range(0.5..1.5)).collect();
    let total: f64 = raw.iter().sum();
    let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
    let components = (0..g)
        .map(|_| rand_component(rng, p, mu_spread, skew))
        .collect();
    MixtureParams::new(weights, components).expect("generated mixture is valid")
}

/// Terse fixed-value component constructor for tests.
pub fn msl(mu: &[f64], sigma_rows: &[&[f64]], gamma: &[f64]) -> MslParams {
    let p = mu.len();
    let m = DMatrix::from_fn(p, p, |r, c| sigma_rows[r][c]);
    MslParams::new(
        DVector::from_column_slice(mu),
        ScatterMatrix::new(m).expect("fixture scale is positive definite"),
        DVector::from_column_slice(gamma),
    )
    .expect("fixture component is valid")
}

pub fn data_to_vecs(data: &DataMatrix) -> Vec<Vec<f64>> {
    data.iter().map(|row| row.iter().cloned().collect()).collect()
}

pub fn scatter_rows(s: &ScatterMatrix) -> Vec<Vec<f64>> {
    let p = s.dim();
    (0..p)
        .map(|r| (0..p).map(|c| s.matrix()[(r, c)]).collect())
        .collect()
}
