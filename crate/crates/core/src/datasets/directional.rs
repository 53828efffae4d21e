//! Nonnegative point clouds grouped by direction, for contrasting Euclidean
//! and angular clustering.

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{OnmfError, Result};
use crate::linalg::DataMatrix;
use crate::metrics::LabeledDataset;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionalCluster {
    /// Nonnegative, nonzero; need not be normalized.
    pub direction: Vec<f64>,
    /// Point norms are drawn uniformly from `[lo, hi]`.
    pub norm_range: (f64, f64),
    /// In 2-D, the half-width in radians of a uniform angular jitter. In
    /// higher dimensions, the standard deviation of a Gaussian perturbation
    /// of the unit direction.
    pub spread: f64,
    pub count: usize,
}

/// Points are columns; cluster `i` gets label `i`. Perturbed directions are
/// folded back into the nonnegative orthant by taking absolute values.
pub fn generate_directional_clusters(clusters: &[DirectionalCluster], seed: u64) -> Result<LabeledDataset> {
    let dim = clusters.first().map_or(0, |c| c.direction.len());
    for (i, c) in clusters.iter().enumerate() {
        if c.direction.len() != dim || dim == 0 {
            return Err(OnmfError::DimensionMismatch(format!("cluster {i} has dimension {}", c.direction.len())));
        }
        if c.direction.iter().any(|&x| !(x >= 0.0)) || c.direction.iter().all(|&x| x == 0.0) {
            return Err(OnmfError::InvalidConfig(format!("cluster {i}: direction must be nonnegative and nonzero")));
        }
        let (lo, hi) = c.norm_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) || !(c.spread >= 0.0) {
            return Err(OnmfError::InvalidConfig(format!("cluster {i}: bad norm range or spread")));
        }
    }
    let n: usize = clusters.iter().map(|c| c.count).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Array2::zeros((dim, n));
    let mut labels = Vec::with_capacity(n);
    let mut col = 0;
    for (i, c) in clusters.iter().enumerate() {
        let len = c.direction.iter().map(|x| x * x).sum::<f64>().sqrt();
        let unit: Vec<f64> = c.direction.iter().map(|x| x / len).collect();
        let noise = Normal::new(0.0, c.spread).expect("spread is finite and >= 0");
        for _ in 0..c.count {
            let dir = if dim == 2 {
                let theta = unit[1].atan2(unit[0]) + c.spread * (2.0 * rng.random::<f64>() - 1.0);
                vec![theta.cos().abs(), theta.sin().abs()]
            } else {
                let d: Vec<f64> = unit.iter().map(|x| (x + noise.sample(&mut rng)).abs()).collect();
                let l = d.iter().map(|x| x * x).sum::<f64>().sqrt();
                if l > 0.0 {
                    d.iter().map(|x| x / l).collect()
                } else {
                    unit.clone()
                }
            };
            let r = rng.random_range(c.norm_range.0..=c.norm_range.1);
            for (dst, x) in a.column_mut(col).iter_mut().zip(dir) {
                *dst = r * x;
            }
            labels.push(i);
            col += 1;
        }
    }
    let names = (0..clusters.len()).map(|i| format!("c{i}")).collect();
    LabeledDataset::new(DataMatrix::dense(a)?, labels, names)
}

fn at_angle(degrees: f64) -> Vec<f64> {
    let t = degrees.to_radians();
    vec![t.cos(), t.sin()]
}

/// Two tight clusters at 15 and 75 degrees; every method separates them.
pub fn separated_clusters(count: usize) -> Vec<DirectionalCluster> {
    [15.0, 75.0]
        .into_iter()
        .map(|deg| DirectionalCluster {
            direction: at_angle(deg),
            norm_range: (1.0, 3.0),
            spread: 5f64.to_radians(),
            count,
        })
        .collect()
}

/// Two clusters at 40 and 50 degrees with overlapping angular spreads: a
/// short one near the origin and a long one far out. Euclidean k-means splits
/// by norm, the angular methods split by direction.
pub fn inline_clusters(count: usize) -> Vec<DirectionalCluster> {
    vec![
        DirectionalCluster {
            direction: at_angle(40.0),
            norm_range: (0.5, 1.5),
            spread: 12f64.to_radians(),
            count,
        },
        DirectionalCluster {
            direction: at_angle(50.0),
            norm_range: (4.0, 6.0),
            spread: 12f64.to_radians(),
            count,
        },
    ]
}
