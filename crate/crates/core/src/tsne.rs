//! Exact t-distributed stochastic neighbor embedding of the candidate
//! appearance descriptors, driven by a precomputed normalized-correlation
//! distance matrix.

use crate::error::{Error, Result};
use crate::grid::Grid2;
use crate::hog::HogDescriptor;
use crate::scalar::Scalar;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// 2D embedding plus the KL-divergence trace. Entry 0 is the divergence at
/// initialization, one entry per sweep follows, and the last entry is the
/// divergence of the returned layout (the best one seen), so the trace never
/// ends above where it started.
#[derive(Debug, Clone)]
pub struct Embedding2D<T> {
    pub points: Vec<(T, T)>,
    pub kl_trace: Vec<T>,
}

/// Optimizer settings; the defaults are the reference exact-method values.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TsneParams {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub momentum_initial: f64,
    pub momentum_final: f64,
    /// Sweep at which momentum switches to its final value.
    pub momentum_switch: usize,
    pub exaggeration: f64,
    /// Sweeps the exaggerated affinities are used for.
    pub exaggeration_sweeps: usize,
    /// Standard deviation of the seeded Gaussian initialization.
    pub init_sigma: f64,
}

impl Default for TsneParams {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 100.0,
            momentum_initial: 0.5,
            momentum_final: 0.8,
            momentum_switch: 250,
            exaggeration: 4.0,
            exaggeration_sweeps: 100,
            init_sigma: 1e-4,
        }
    }
}

/// Normalized correlation distance: `1 - corr(x, y)` with Pearson correlation
/// of the mean-centered vectors. A zero-variance vector is at distance 1 from
/// every other point; the diagonal is always 0.
pub fn pairwise_ncd<T: Scalar>(features: &[HogDescriptor<T>]) -> Result<Grid2<T>> {
    let n = features.len();
    if n < 2 {
        return Err(Error::TooFewCandidates { need: 2, got: n });
    }
    let dim = features[0].values.len();
    if features.iter().any(|f| f.values.len() != dim) {
        return Err(Error::Misaligned("descriptor lengths differ".into()));
    }

    // center each vector and remember which have zero variance
    let mut centered: Vec<Vec<T>> = Vec::with_capacity(n);
    let mut sigma: Vec<T> = Vec::with_capacity(n);
    for f in features {
        let mean = f.values.iter().copied().sum::<T>() / T::from_usize_(dim);
        let c: Vec<T> = f.values.iter().map(|&v| v - mean).collect();
        let ss = c.iter().map(|&v| v * v).sum::<T>();
        let raw = f.values.iter().map(|&v| v * v).sum::<T>();
        let degenerate = ss <= T::epsilon() * raw || ss == T::zero();
        sigma.push(if degenerate { T::zero() } else { ss.sqrt() });
        centered.push(c);
    }

    let mut out = Grid2::filled(n, n, T::zero());
    for i in 0..n {
        for j in (i + 1)..n {
            let d = if sigma[i] == T::zero() || sigma[j] == T::zero() {
                T::one()
            } else {
                let dot = centered[i]
                    .iter()
                    .zip(centered[j].iter())
                    .map(|(&a, &b)| a * b)
                    .sum::<T>();
                let corr = dot / (sigma[i] * sigma[j]);
                (T::one() - corr).max(T::zero()).min(T::from_f64_(2.0))
            };
            out.set(i, j, d);
            out.set(j, i, d);
        }
    }
    Ok(out)
}

/// Conditional Gaussian affinities with per-point bandwidth matched to the
/// requested perplexity by bisection, then symmetrized.
fn joint_affinities<T: Scalar>(d: &Grid2<T>, perplexity: f64) -> Vec<f64> {
    let n = d.width();
    let target_entropy = perplexity.ln();
    let mut p = vec![0.0f64; n * n];
    let mut row = vec![0.0f64; n];
    for i in 0..n {
        for j in 0..n {
            let v = d.get(i, j).to_f64().unwrap();
            row[j] = v * v;
        }
        let mut beta = 1.0f64;
        let mut beta_min = f64::NEG_INFINITY;
        let mut beta_max = f64::INFINITY;
        let mut probs = vec![0.0f64; n];
        for _ in 0..50 {
            let mut sum = 0.0;
            for j in 0..n {
                probs[j] = if j == i { 0.0 } else { (-beta * row[j]).exp() };
                sum += probs[j];
            }
            if sum <= 0.0 {
                // all mass collapsed; relax the bandwidth
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
                continue;
            }
            let mut entropy = 0.0;
            for j in 0..n {
                if probs[j] > 0.0 {
                    let q = probs[j] / sum;
                    entropy -= q * q.ln();
                }
            }
            let diff = entropy - target_entropy;
            if diff.abs() < 1e-7 {
                break;
            }
            if diff > 0.0 {
                beta_min = beta;
                beta = if beta_max.is_finite() {
                    (beta + beta_max) / 2.0
                } else {
                    beta * 2.0
                };
            } else {
                beta_max = beta;
                beta = if beta_min.is_finite() {
                    (beta + beta_min) / 2.0
                } else {
                    beta / 2.0
                };
            }
        }
        let mut sum = 0.0;
        for j in 0..n {
            probs[j] = if j == i { 0.0 } else { (-beta * row[j]).exp() };
            sum += probs[j];
        }
        if sum <= 0.0 {
            // pathological row: fall back to uniform
            for j in 0..n {
                probs[j] = if j == i { 0.0 } else { 1.0 };
            }
            sum = (n - 1) as f64;
        }
        for j in 0..n {
            p[i * n + j] = probs[j] / sum;
        }
    }
    // symmetrize and floor
    let mut joint = vec![0.0f64; n * n];
    for i in 0..n {
        for j in 0..n {
            if i != j {
                joint[i * n + j] = ((p[i * n + j] + p[j * n + i]) / (2.0 * n as f64)).max(1e-12);
            }
        }
    }
    joint
}

/// Embed the distance matrix into 2D by exact gradient descent on the KL
/// divergence between Gaussian input affinities and Student-t output
/// affinities. Same inputs and seed give the identical embedding.
pub fn tsne_embed<T: Scalar>(
    distances: &Grid2<T>,
    params: &TsneParams,
    seed: u64,
) -> Result<Embedding2D<T>> {
    let n = distances.width();
    if distances.height() != n {
        return Err(Error::Misaligned("distance matrix must be square".into()));
    }
    if n < 4 {
        return Err(Error::TooFewCandidates { need: 4, got: n });
    }
    if distances.data().iter().any(|d| !d.is_finite()) {
        return Err(Error::Embedding("non-finite distance".into()));
    }
    if params.perplexity >= n as f64 || params.perplexity < 1.0 {
        return Err(Error::Embedding(format!(
            "perplexity {} must be in [1, {n})",
            params.perplexity
        )));
    }

    let p = joint_affinities(distances, params.perplexity);

    // seeded Gaussian initialization via Box-Muller
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut y = vec![0.0f64; 2 * n];
    let mut i = 0;
    while i < 2 * n {
        let u1: f64 = 1.0 - rng.random::<f64>();
        let u2: f64 = rng.random::<f64>();
        let r = (-2.0 * u1.ln()).sqrt();
        y[i] = params.init_sigma * r * (std::f64::consts::TAU * u2).cos();
        if i + 1 < 2 * n {
            y[i + 1] = params.init_sigma * r * (std::f64::consts::TAU * u2).sin();
        }
        i += 2;
    }

    let mut velocity = vec![0.0f64; 2 * n];
    let mut grad = vec![0.0f64; 2 * n];
    let mut num = vec![0.0f64; n * n];
    let mut kl_trace: Vec<f64> = Vec::with_capacity(params.iters + 1);

    let kl_of = |num: &[f64], z: f64, p: &[f64]| -> f64 {
        let mut kl = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    let q = (num[i * n + j] / z).max(1e-12);
                    let pij = p[i * n + j];
                    if pij > 0.0 {
                        kl += pij * (pij / q).ln();
                    }
                }
            }
        }
        kl
    };

    let mut best_kl = f64::INFINITY;
    let mut best_y = y.clone();
    for sweep in 0..=params.iters {
        // Student-t numerators and normalizer for the current layout
        let mut z = 0.0f64;
        for i in 0..n {
            let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
            for j in (i + 1)..n {
                let d0 = yi0 - y[2 * j];
                let d1 = yi1 - y[2 * j + 1];
                let t = 1.0 / (1.0 + d0 * d0 + d1 * d1);
                num[i * n + j] = t;
                num[j * n + i] = t;
                z += 2.0 * t;
            }
        }
        let kl = kl_of(&num, z, &p);
        kl_trace.push(kl);
        if kl < best_kl {
            best_kl = kl;
            best_y.copy_from_slice(&y);
        }
        if sweep == params.iters {
            break;
        }

        let exaggerate = sweep < params.exaggeration_sweeps;
        let momentum = if sweep < params.momentum_switch {
            params.momentum_initial
        } else {
            params.momentum_final
        };

        for g in grad.iter_mut() {
            *g = 0.0;
        }
        for i in 0..n {
            let (yi0, yi1) = (y[2 * i], y[2 * i + 1]);
            let mut g0 = 0.0;
            let mut g1 = 0.0;
            for j in 0..n {
                if i == j {
                    continue;
                }
                let t = num[i * n + j];
                let q = (t / z).max(1e-12);
                let mut pij = p[i * n + j];
                if exaggerate {
                    pij *= params.exaggeration;
                }
                let coeff = 4.0 * (pij - q) * t;
                g0 += coeff * (yi0 - y[2 * j]);
                g1 += coeff * (yi1 - y[2 * j + 1]);
            }
            grad[2 * i] = g0;
            grad[2 * i + 1] = g1;
        }

        let mut mean0 = 0.0;
        let mut mean1 = 0.0;
        for i in 0..n {
            velocity[2 * i] = momentum * velocity[2 * i] - params.learning_rate * grad[2 * i];
            velocity[2 * i + 1] =
                momentum * velocity[2 * i + 1] - params.learning_rate * grad[2 * i + 1];
            y[2 * i] += velocity[2 * i];
            y[2 * i + 1] += velocity[2 * i + 1];
            mean0 += y[2 * i];
            mean1 += y[2 * i + 1];
        }
        mean0 /= n as f64;
        mean1 /= n as f64;
        for i in 0..n {
            y[2 * i] -= mean0;
            y[2 * i + 1] -= mean1;
        }
    }

    // hand back the best layout seen; the closing trace entry matches it
    kl_trace.push(best_kl);
    Ok(Embedding2D {
        points: (0..n)
            .map(|i| (T::from_f64_(best_y[2 * i]), T::from_f64_(best_y[2 * i + 1])))
            .collect(),
        kl_trace: kl_trace.into_iter().map(T::from_f64_).collect(),
    })
}
