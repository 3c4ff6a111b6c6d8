//! Posterior predictive trajectories, log predictive density scores and
//! cumulative log Bayes factors.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rand::Rng;

use crate::error::{Error, Result};
use crate::par;
use crate::spatial::Trace;

use super::gibbs::{FittedModel, PosteriorDraw};
use super::simulate::ar_step;

fn harmonic_mean(fit: &FittedModel, draw: &PosteriorDraw, time: usize) -> Vec<f64> {
    let row = fit.design.row(time);
    (0..draw.assignments.len())
        .map(|i| draw.beta0 + row.iter().zip(draw.beta_of(i)).map(|(a, b)| a * b).sum::<f64>())
        .collect()
}

/// One trajectory per draw, each a [`Trace`] of horizon `h` whose time 0 is
/// the last observation and times `1..=h` are simulated forward.
///
/// Draw `m` uses its own stream of a ChaCha generator seeded with `seed`,
/// so results do not depend on scheduling.
pub fn predictive_draws(fit: &FittedModel, h: usize, seed: u64) -> Result<Vec<Trace>> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if fit.draws.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    let n = fit.last_observed.len();
    let traces = par::map_range(fit.draws.len(), |m| {
        let d = &fit.draws[m];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(m as u64);
        let mut w = d.w_last.clone();
        let sd = d.sigma2.sqrt();
        let mut values = vec![0.0; n * (h + 1)];
        for i in 0..n {
            values[i * (h + 1)] = fit.last_observed[i];
        }
        for s in 1..=h {
            if fit.variant.has_random_effect() {
                ar_step(&fit.basis, &mut w, d.xi, d.rho, d.tau2, &mut rng);
            }
            let mean = harmonic_mean(fit, d, fit.origin_time + s);
            for i in 0..n {
                let e: f64 = rng.sample(StandardNormal);
                values[i * (h + 1) + s] = (mean[i] + w[i] + sd * e).exp();
            }
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical {
                draw: m,
                message: "predictive trajectory is not finite".into(),
            });
        }
        Trace::new(n, h + 1, values)
    });
    traces.into_iter().collect()
}

/// `log p(log y_{t+h} | draw)` under the exact `h`-step Gaussian:
/// mean `β0 + hᵀβ + ξʰ w_t`, covariance `σ²I + τ²(1 − ξ^{2h}) Q(ρ)⁻¹`.
pub fn draw_log_density(fit: &FittedModel, draw: &PosteriorDraw, h: usize, log_obs: &[f64]) -> f64 {
    let mean = harmonic_mean(fit, draw, fit.origin_time + h);
    let decay = draw.xi.powi(h as i32);
    let resid: Vec<f64> = (0..log_obs.len())
        .map(|i| log_obs[i] - mean[i] - decay * draw.w_last[i])
        .collect();
    let field_var = draw.tau2 * (1.0 - decay * decay);
    let rotated = fit.basis.to_spectral_vec(&resid);
    let mu = fit.basis.precision_eigenvalues(draw.rho);
    rotated
        .iter()
        .zip(mu)
        .map(|(r, m)| {
            let v = draw.sigma2 + field_var / m.max(1e-12);
            -0.5 * ((2.0 * PI * v).ln() + r * r / v)
        })
        .sum()
}

/// `log( (1/M) Σ_m p(log y_{t+h} | draw m) )` for strictly positive
/// observations. Terms are sorted before the log-sum-exp so the value does
/// not depend on draw order.
pub fn lpds(fit: &FittedModel, h: usize, observed: &[f64]) -> Result<f64> {
    if h == 0 {
        return Err(Error::invalid("forecast horizon must be at least 1"));
    }
    if fit.draws.is_empty() {
        return Err(Error::EmptyEnsemble);
    }
    if observed.len() != fit.basis.dim() {
        return Err(Error::LocationMismatch {
            expected: fit.basis.dim(),
            actual: observed.len(),
        });
    }
    if let Some((i, v)) = observed.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(Error::data(format!("observation {v} at location {i} is not strictly positive")));
    }
    let log_obs: Vec<f64> = observed.iter().map(|v| v.ln()).collect();
    let mut terms = par::map(&fit.draws, |d| draw_log_density(fit, d, h, &log_obs));
    if let Some(m) = terms.iter().position(|v| v.is_nan()) {
        return Err(Error::Numerical {
            draw: m,
            message: "predictive density is NaN".into(),
        });
    }
    terms.sort_by(f64::total_cmp);
    Ok(log_mean_exp(&terms))
}

pub(crate) fn log_mean_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    let sum: f64 = terms.iter().map(|v| (v - max).exp()).sum();
    max + (sum / terms.len() as f64).ln()
}

/// Running sum of `a − b`.
pub fn cumulative_log_bayes_factor(a: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "LPDS series lengths differ: {} vs {}",
            a.len(),
            b.len()
        )));
    }
    let mut acc = 0.0;
    Ok(a.iter()
        .zip(b)
        .map(|(x, y)| {
            acc += x - y;
            acc
        })
        .collect())
}
