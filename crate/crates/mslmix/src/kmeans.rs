//! Seeded Lloyd k-means used only to initialize the EM fitter.

use nalgebra::DVector;
use rand::distributions::WeightedIndex;
use rand::prelude::*;
use rand_chacha::ChaCha8Rng;

use crate::data::DataMatrix;
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 50;

/// Hard labels from k-means++-seeded Lloyd iteration, deterministic for a
/// given seed. Fails if any cluster empties out or the points cannot support
/// g distinct centers.
pub(crate) fn cluster(data: &DataMatrix, g: usize, seed: u64) -> Result<Vec<usize>> {
    let n = data.n();
    assert!(g >= 1 && n >= g, "need at least g observations");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);

    // k-means++ seeding: each new center drawn with probability proportional
    // to squared distance from the centers chosen so far.
    let mut centers: Vec<DVector<f64>> = Vec::with_capacity(g);
    centers.push(data.row(rng.gen_range(0..n)).clone());
    let mut d2: Vec<f64> = data
        .iter()
        .map(|y| (y - &centers[0]).norm_squared())
        .collect();
    while centers.len() < g {
        let pick = WeightedIndex::new(&d2)
            .map_err(|_| Error::EmptyCluster)?
            .sample(&mut rng);
        centers.push(data.row(pick).clone());
        for (j, y) in data.iter().enumerate() {
            d2[j] = d2[j].min((y - centers.last().unwrap()).norm_squared());
        }
    }

    let mut labels = vec![0usize; n];
    for _ in 0..MAX_SWEEPS {
        let mut changed = false;
        for (j, y) in data.iter().enumerate() {
            let mut best = 0;
            let mut best_d = f64::INFINITY;
            for (i, c) in centers.iter().enumerate() {
                let d = (y - c).norm_squared();
                if d < best_d {
                    best_d = d;
                    best = i;
                }
            }
            if labels[j] != best {
                labels[j] = best;
                changed = true;
            }
        }
        if !changed {
            break;
        }
        let mut counts = vec![0usize; g];
        let p = data.dim();
        let mut sums = vec![DVector::<f64>::zeros(p); g];
        for (j, y) in data.iter().enumerate() {
            counts[labels[j]] += 1;
            sums[labels[j]] += y;
        }
        for i in 0..g {
            if counts[i] == 0 {
                return Err(Error::EmptyCluster);
            }
            centers[i] = &sums[i] / counts[i] as f64;
        }
    }
    Ok(labels)
}
