//! Linear quantile regression on standardised features.
//!
//! The mean head is closed-form ridge regression. Each quantile head starts
//! from the mean head with its intercept moved to the matching empirical
//! quantile of the residuals, then runs full-batch subgradient descent on
//! the pinball loss with an L2 penalty and keeps the best iterate.

use nalgebra::{DMatrix, DVector};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::deadline::Deadline;
use crate::metrics::pinball;
use crate::models::ModelError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerConfig {
    /// Subgradient steps per quantile head.
    pub steps: usize,
    /// Base step size, in units of the target standard deviation.
    pub step_size: f64,
    /// L2 weight on standardised coefficients; quantile heads divide it by the target spread.
    pub l2: f64,
    pub seed: u64,
    /// Rows above this count are subsampled (deterministically by `seed`).
    pub max_rows: usize,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig { steps: 100, step_size: 0.1, l2: 1e-4, seed: 0, max_rows: 10_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearHead {
    pub intercept: f64,
    /// One entry per feature; zero for dropped (constant) features.
    pub coef: Vec<f64>,
}

impl LinearHead {
    fn eval(&self, z: &[f64]) -> f64 {
        self.intercept + self.coef.iter().zip(z).map(|(c, v)| c * v).sum::<f64>()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantileRegressor {
    pub center: Vec<f64>,
    /// Standard deviation per feature; 0 marks a dropped feature.
    pub scale: Vec<f64>,
    pub mean_head: LinearHead,
    pub levels: Vec<f64>,
    pub quantile_heads: Vec<LinearHead>,
    /// Final training loss: mean squared error, then pinball loss per level.
    pub train_loss: Vec<f64>,
}

impl QuantileRegressor {
    pub fn fit(x: &[Vec<f64>], y: &[f64], levels: &[f64], cfg: &LearnerConfig, deadline: &Deadline) -> Result<Self, ModelError> {
        if x.is_empty() || x.len() != y.len() {
            return Err(ModelError::InvalidSpec("no training rows".into()));
        }
        let p = x[0].len();
        let rows: Vec<usize> = if x.len() > cfg.max_rows.max(1) {
            let mut idx: Vec<usize> = (0..x.len()).collect();
            idx.shuffle(&mut ChaCha8Rng::seed_from_u64(cfg.seed));
            idx.truncate(cfg.max_rows.max(1));
            idx.sort_unstable();
            idx
        } else {
            (0..x.len()).collect()
        };
        let n = rows.len();
        let nf = n as f64;

        let mut center = vec![0.0; p];
        let mut scale = vec![0.0; p];
        for j in 0..p {
            let mean = rows.iter().map(|&i| x[i][j]).sum::<f64>() / nf;
            let var = rows.iter().map(|&i| (x[i][j] - mean).powi(2)).sum::<f64>() / nf;
            center[j] = mean;
            scale[j] = if var > 1e-24 * (1.0 + mean * mean) { var.sqrt() } else { 0.0 };
        }
        let active: Vec<usize> = (0..p).filter(|&j| scale[j] > 0.0).collect();
        let pa = active.len();
        let z = DMatrix::from_fn(n, pa, |r, c| {
            let j = active[c];
            (x[rows[r]][j] - center[j]) / scale[j]
        });
        let yv = DVector::from_iterator(n, rows.iter().map(|&i| y[i]));
        if yv.iter().any(|v| !v.is_finite()) || z.iter().any(|v| !v.is_finite()) {
            return Err(ModelError::NonFiniteLoss);
        }
        let y_mean = yv.sum() / nf;
        let y_std = (yv.iter().map(|v| (v - y_mean).powi(2)).sum::<f64>() / nf).sqrt();

        let beta = if pa == 0 {
            DVector::zeros(0)
        } else {
            let centred = yv.add_scalar(-y_mean);
            let mut gram = z.tr_mul(&z) / nf;
            for d in 0..pa {
                gram[(d, d)] += cfg.l2;
            }
            let rhs = z.tr_mul(&centred) / nf;
            match gram.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => gram.lu().solve(&rhs).ok_or(ModelError::DegenerateFeatures)?,
            }
        };
        let fitted = if pa == 0 { DVector::from_element(n, y_mean) } else { (&z * &beta).add_scalar(y_mean) };
        let mse = (&yv - &fitted).norm_squared() / nf;
        if !mse.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }

        let heads = levels
            .par_iter()
            .map(|&q| quantile_head(&z, &yv, &fitted, &beta, y_mean, q, y_std, cfg, deadline))
            .collect::<Result<Vec<_>, _>>()?;

        let expand = |b: &DVector<f64>| {
            let mut coef = vec![0.0; p];
            for (c, &j) in active.iter().enumerate() {
                coef[j] = b[c];
            }
            coef
        };
        let mut train_loss = vec![mse];
        let mut quantile_heads = Vec::with_capacity(levels.len());
        for (c, b, loss) in heads {
            train_loss.push(loss);
            quantile_heads.push(LinearHead { intercept: c, coef: expand(&b) });
        }
        Ok(QuantileRegressor {
            center,
            scale,
            mean_head: LinearHead { intercept: y_mean, coef: expand(&beta) },
            levels: levels.to_vec(),
            quantile_heads,
            train_loss,
        })
    }

    fn standardise(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(v, (c, s))| if *s > 0.0 { (v - c) / s } else { 0.0 })
            .collect()
    }

    /// Mean and per-level predictions for one raw feature row.
    pub fn predict(&self, row: &[f64]) -> (f64, Vec<f64>) {
        let z = self.standardise(row);
        (self.mean_head.eval(&z), self.quantile_heads.iter().map(|h| h.eval(&z)).collect())
    }

    /// Intercept and coefficients of a head expressed on the raw features.
    pub fn raw_coefficients(&self, head: &LinearHead) -> (f64, Vec<f64>) {
        let mut intercept = head.intercept;
        let coef: Vec<f64> = head
            .coef
            .iter()
            .zip(self.center.iter().zip(&self.scale))
            .map(|(b, (c, s))| {
                if *s > 0.0 {
                    intercept -= b * c / s;
                    b / s
                } else {
                    0.0
                }
            })
            .collect();
        (intercept, coef)
    }
}

#[allow(clippy::too_many_arguments)]
fn quantile_head(
    z: &DMatrix<f64>,
    y: &DVector<f64>,
    fitted: &DVector<f64>,
    beta: &DVector<f64>,
    y_mean: f64,
    q: f64,
    y_std: f64,
    cfg: &LearnerConfig,
    deadline: &Deadline,
) -> Result<(f64, DVector<f64>, f64), ModelError> {
    let n = y.len();
    let nf = n as f64;
    let mut resid: Vec<f64> = (y - fitted).iter().copied().collect();
    resid.sort_by(f64::total_cmp);
    let k = ((q * nf).ceil() as usize).clamp(1, n) - 1;
    let mut c = y_mean + resid[k];
    let mut b = beta.clone();
    let spread = if y_std > 0.0 { y_std } else { 1.0 };
    let l2 = cfg.l2 / spread;

    let objective = |pred: &DVector<f64>, b: &DVector<f64>| {
        let loss: f64 = y.iter().zip(pred.iter()).map(|(yi, pi)| pinball(q, *yi, *pi)).sum::<f64>() / nf;
        loss + l2 * b.norm_squared()
    };
    let predict = |c: f64, b: &DVector<f64>| if b.is_empty() { DVector::from_element(n, c) } else { (z * b).add_scalar(c) };

    let mut best = (c, b.clone(), f64::INFINITY);
    for t in 0..=cfg.steps {
        if deadline.expired() {
            return Err(ModelError::Timeout);
        }
        let pred = predict(c, &b);
        let j = objective(&pred, &b);
        if !j.is_finite() {
            return Err(ModelError::NonFiniteLoss);
        }
        if j < best.2 {
            best = (c, b.clone(), j);
        }
        if t == cfg.steps {
            break;
        }
        let g = DVector::from_iterator(
            n,
            y.iter().zip(pred.iter()).map(|(yi, pi)| {
                if yi > pi {
                    -q
                } else if yi < pi {
                    1.0 - q
                } else {
                    0.0
                }
            }),
        );
        let eta = cfg.step_size * spread / ((t + 1) as f64).sqrt();
        c -= eta * g.sum() / nf;
        if !b.is_empty() {
            let grad = z.tr_mul(&g) / nf + &b * (2.0 * l2);
            b -= grad * eta;
        }
    }
    let (c, b, j) = best;
    let penalty = l2 * b.norm_squared();
    Ok((c, b, j - penalty))
}
