//! Exact t-SNE for small point sets. Bandwidths come from a per-row
//! binary search matching the target perplexity; the 2D layout descends
//! the KL divergence with momentum and early exaggeration.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::LabeledPoints;
use crate::tensor::TensorData;

pub const TSNE_ITERATIONS: usize = 1000;
const LEARNING_RATE: f64 = 100.0;
const MOMENTUM_EARLY: f64 = 0.5;
const MOMENTUM_LATE: f64 = 0.8;
const MOMENTUM_SWITCH: usize = 250;
const EXAGGERATION: f64 = 4.0;
const EXAGGERATION_END: usize = 100;
const AFFINITY_FLOOR: f64 = 1e-12;
const PERPLEXITY_TOL: f64 = 1e-3;
const KL_LOG_EVERY: usize = 50;

#[derive(Debug, thiserror::Error)]
pub enum TsneError {
    #[error("perplexity {perplexity} must be below (n-1)/3 = {bound} for {n} points")]
    InfeasiblePerplexity { perplexity: f64, bound: f64, n: usize },
    #[error("t-SNE needs at least 5 points, got {0}")]
    TooFewPoints(usize),
}

/// Projection output with the diagnostics the run is judged by.
#[derive(Debug, Clone)]
pub struct TsneRun {
    pub points: LabeledPoints,
    /// (iteration, KL against the un-exaggerated affinities), logged every
    /// 50 iterations.
    pub kl_trace: Vec<(usize, f64)>,
    /// Per-row perplexity reached by the bandwidth search.
    pub achieved_perplexity: Vec<f64>,
}

impl TsneRun {
    pub fn kl_at(&self, iteration: usize) -> Option<f64> {
        self.kl_trace.iter().find(|(i, _)| *i == iteration).map(|&(_, kl)| kl)
    }
}

/// Conditional distribution over j≠i for one row at bandwidth `beta`,
/// with its perplexity 2^H.
fn row_affinities(d2: &[f64], i: usize, beta: f64, out: &mut [f64]) -> f64 {
    let n = out.len();
    let mut min_d = f64::INFINITY;
    for j in 0..n {
        if j != i && d2[i * n + j] < min_d {
            min_d = d2[i * n + j];
        }
    }
    let mut sum = 0.0;
    for j in 0..n {
        out[j] = if j == i { 0.0 } else { (-beta * (d2[i * n + j] - min_d)).exp() };
        sum += out[j];
    }
    let mut entropy_nats = 0.0;
    for v in out.iter_mut() {
        *v /= sum;
        if *v > 0.0 {
            entropy_nats -= *v * v.ln();
        }
    }
    (entropy_nats / std::f64::consts::LN_2).exp2()
}

/// Bisect the bandwidth until the row's perplexity matches the target.
fn search_beta(d2: &[f64], i: usize, target: f64, row: &mut [f64]) -> f64 {
    let mut beta = 1.0;
    let (mut lo, mut hi) = (0.0_f64, f64::INFINITY);
    let mut perp = row_affinities(d2, i, beta, row);
    for _ in 0..200 {
        if (perp - target).abs() <= PERPLEXITY_TOL / 10.0 {
            break;
        }
        if perp > target {
            // Too flat: narrow the kernel.
            lo = beta;
            beta = if hi.is_finite() { 0.5 * (lo + hi) } else { beta * 2.0 };
        } else {
            hi = beta;
            beta = 0.5 * (lo + hi);
        }
        perp = row_affinities(d2, i, beta, row);
    }
    assert!(
        (perp - target).abs() <= PERPLEXITY_TOL,
        "bandwidth search for row {i} stalled at perplexity {perp} (target {target}); \
         are the points distinct?"
    );
    perp
}

/// Exact t-SNE to two dimensions. Deterministic in (points, perplexity,
/// iterations, seed).
pub fn tsne_2d(
    points: &LabeledPoints,
    perplexity: f64,
    iterations: usize,
    seed: u64,
) -> Result<TsneRun, TsneError> {
    let n = points.len();
    if n < 5 {
        return Err(TsneError::TooFewPoints(n));
    }
    let bound = (n as f64 - 1.0) / 3.0;
    if !(perplexity > 0.0 && perplexity < bound) {
        return Err(TsneError::InfeasiblePerplexity { perplexity, bound, n });
    }

    let d = points.dim();
    let x = points.coords().data();
    let mut d2 = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let mut s = 0.0;
            for k in 0..d {
                let diff = x[i * d + k] - x[j * d + k];
                s += diff * diff;
            }
            d2[i * n + j] = s;
            d2[j * n + i] = s;
        }
    }

    // Symmetrized affinities from per-row bandwidth searches.
    let mut cond = vec![0.0; n * n];
    let mut achieved = Vec::with_capacity(n);
    for i in 0..n {
        achieved.push(search_beta(&d2, i, perplexity, &mut cond[i * n..(i + 1) * n]));
    }
    let mut p = vec![0.0; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                p[i * n + j] =
                    ((cond[i * n + j] + cond[j * n + i]) / (2.0 * n as f64)).max(AFFINITY_FLOOR);
            }
        }
    }

    // Low-dimensional layout, tightly packed at the start.
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || {
        let u1: f64 = rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        (-2.0 * (1.0 - u1).ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    };
    let mut y: Vec<f64> = (0..n * 2).map(|_| normal() * 1e-4).collect();
    let mut velocity = vec![0.0; n * 2];
    let mut q = vec![0.0; n * n];
    let mut kl_trace = Vec::new();

    for iter in 1..=iterations {
        // Student-t similarities in the plane.
        let mut q_sum = 0.0;
        for i in 0..n {
            for j in i + 1..n {
                let dx = y[i * 2] - y[j * 2];
                let dy = y[i * 2 + 1] - y[j * 2 + 1];
                let w = 1.0 / (1.0 + dx * dx + dy * dy);
                q[i * n + j] = w;
                q[j * n + i] = w;
                q_sum += 2.0 * w;
            }
        }

        let exaggeration = if iter <= EXAGGERATION_END { EXAGGERATION } else { 1.0 };
        let momentum = if iter < MOMENTUM_SWITCH { MOMENTUM_EARLY } else { MOMENTUM_LATE };
        for i in 0..n {
            let (mut gx, mut gy) = (0.0, 0.0);
            for j in 0..n {
                if i == j {
                    continue;
                }
                let w = q[i * n + j];
                let pij = exaggeration * p[i * n + j];
                let qij = (w / q_sum).max(AFFINITY_FLOOR);
                let coeff = 4.0 * (pij - qij) * w;
                gx += coeff * (y[i * 2] - y[j * 2]);
                gy += coeff * (y[i * 2 + 1] - y[j * 2 + 1]);
            }
            velocity[i * 2] = momentum * velocity[i * 2] - LEARNING_RATE * gx;
            velocity[i * 2 + 1] = momentum * velocity[i * 2 + 1] - LEARNING_RATE * gy;
        }
        let mut mean = [0.0, 0.0];
        for i in 0..n {
            y[i * 2] += velocity[i * 2];
            y[i * 2 + 1] += velocity[i * 2 + 1];
            mean[0] += y[i * 2] / n as f64;
            mean[1] += y[i * 2 + 1] / n as f64;
        }
        for i in 0..n {
            y[i * 2] -= mean[0];
            y[i * 2 + 1] -= mean[1];
        }

        if iter % KL_LOG_EVERY == 0 || iter == iterations {
            // KL against the plain affinities, so logged values compare
            // across the exaggeration boundary.
            let mut kl = 0.0;
            for i in 0..n {
                for j in 0..n {
                    if i != j {
                        let pij = p[i * n + j];
                        let qij = (q[i * n + j] / q_sum).max(AFFINITY_FLOOR);
                        kl += pij * (pij / qij).ln();
                    }
                }
            }
            assert!(kl.is_finite(), "KL diverged at iteration {iter}");
            if kl_trace.last().map(|&(i, _)| i) != Some(iter) {
                kl_trace.push((iter, kl));
            }
        }
    }

    let coords = TensorData::new(vec![n, 2], y);
    Ok(TsneRun {
        points: LabeledPoints::new(points.labels().to_vec(), coords),
        kl_trace,
        achieved_perplexity: achieved,
    })
}
