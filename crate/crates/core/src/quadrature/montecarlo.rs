//! Importance-sampled Monte Carlo for the same integrals.
//!
//! Decaying outer coordinates are drawn from `Exp(beta_j)`, bounded ones
//! uniformly; the radial variable is stratified uniform in the substituted
//! coordinate (the exact inverse distribution of the log-pole kernel), and
//! simplex directions are `Dirichlet(1)`. Batches use independent ChaCha8
//! streams derived from the seed and are reduced in batch order.

use std::cell::Cell;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::Result;

use super::gk::stable_sum;
use super::layout::{Problem, Weight};
use super::QuadOptions;

pub const BATCH_SIZE: usize = 1 << 16;
const ROUND: usize = 8;

fn batch_rng(seed: u64, batch: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (batch as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn sample(problem: &Problem, rng: &mut ChaCha8Rng, stratum: f64) -> f64 {
    let layout = problem.layout;
    let mut t = [0.0; 8];
    let mut weight = 1.0;
    let mut bounded_rate = 0.0;
    for (i, c) in layout.outer.iter().enumerate() {
        let u: f64 = rng.gen();
        if !c.bounded && c.beta > 0.0 {
            t[i] = -(-u).ln_1p() / c.beta;
            weight /= c.beta;
        } else {
            t[i] = u * c.upper;
            weight *= c.upper;
            bounded_rate += c.beta * t[i];
        }
    }
    let pt = problem.outer_point(&t[..layout.outer.len()]);
    weight *= (-bounded_rate).exp();
    if weight == 0.0 {
        return 0.0;
    }
    let n = layout.n;
    let inner = match problem.weight {
        Weight::Point => problem.h(&pt.x[..n]),
        Weight::Kernel { .. } if problem.p == 0 => {
            let v = 1.0 + pt.s;
            let w = (problem.spec.ell * v).ln();
            problem.spec.eps
                * v.powi(-(problem.spec.sigma as i32))
                * w.powf(-1.0 - problem.spec.eps)
                * problem.h(&pt.x[..n])
        }
        _ => {
            let (a, b) = problem.radial_range(pt.s);
            if !(b > a) {
                return 0.0;
            }
            let u = a + (b - a) * stratum;
            let (f, r) = problem.radial_factor(pt.s, u);
            if f == 0.0 {
                return 0.0;
            }
            let h = if !layout.radial_depends {
                problem.h(&pt.x[..n]) * problem.simplex_volume
            } else if problem.p == 1 {
                problem.radial_h(&pt, r, &[1.0])
            } else {
                let mut w = [0.0; 8];
                let mut total = 0.0;
                for wj in w.iter_mut().take(problem.p) {
                    let e: f64 = -(-rng.gen::<f64>()).ln_1p();
                    *wj = e;
                    total += e;
                }
                for wj in w.iter_mut().take(problem.p) {
                    *wj /= total;
                }
                problem.radial_h(&pt, r, &w[..problem.p]) * problem.simplex_volume
            };
            (b - a) * f * h
        }
    };
    weight * inner * problem.inv_nu_prod
}

fn batch_mean(problem: &Problem, seed: u64, batch: usize) -> f64 {
    let mut rng = batch_rng(seed, batch);
    let mut values = Vec::with_capacity(BATCH_SIZE);
    for k in 0..BATCH_SIZE {
        let stratum = (k as f64 + rng.gen::<f64>()) / BATCH_SIZE as f64;
        values.push(sample(problem, &mut rng, stratum));
    }
    stable_sum(&values) / BATCH_SIZE as f64
}

/// Mean and standard error over batch means.
pub fn summarize(means: &[f64]) -> (f64, f64) {
    let b = means.len() as f64;
    let mean = stable_sum(means) / b;
    if means.len() < 2 {
        return (mean, f64::INFINITY);
    }
    let sq: Vec<f64> = means.iter().map(|m| (m - mean) * (m - mean)).collect();
    let var = stable_sum(&sq) / (b - 1.0);
    (mean, (var / b).sqrt())
}

/// Returns mean, standard error and whether `rel_tol` was met.
pub fn evaluate(problem: &Problem, opts: &QuadOptions, rel_tol: f64) -> Result<(f64, f64, bool)> {
    let mut means: Vec<f64> = Vec::new();
    let ok = Cell::new(false);
    let max_batches = opts.mc_max_batches.max(ROUND);
    while means.len() < max_batches {
        let start = means.len();
        let end = (start + ROUND).min(max_batches);
        let round: Vec<f64> = (start..end)
            .into_par_iter()
            .map(|b| batch_mean(problem, opts.seed, b))
            .collect();
        means.extend(round);
        let (mean, se) = summarize(&means);
        if se <= rel_tol * mean.abs() || (mean == 0.0 && se == 0.0) {
            ok.set(true);
            break;
        }
    }
    let (mean, se) = summarize(&means);
    Ok((mean, se, ok.get() && mean.is_finite()))
}
