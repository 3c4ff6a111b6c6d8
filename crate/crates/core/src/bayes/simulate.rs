//! Forward simulation from the model, used for synthetic data and tests.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::spatial::{Panel, SpatialGrid};

use super::harmonic::HarmonicDesign;
use super::leroux::SpatialBasis;

/// Generating parameters. `assignments[i]` indexes `betas`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrueParams {
    pub beta0: f64,
    pub betas: Vec<Vec<f64>>,
    pub assignments: Vec<usize>,
    pub xi: f64,
    pub rho: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

/// One draw of `N(0, τ² Q(ρ)⁻¹)` via the eigenbasis.
pub(crate) fn draw_car<R: Rng + ?Sized>(basis: &SpatialBasis, rho: f64, tau2: f64, rng: &mut R) -> Vec<f64> {
    let spectral: Vec<f64> = basis
        .precision_eigenvalues(rho)
        .iter()
        .map(|mu| {
            let z: f64 = rng.sample(StandardNormal);
            z * (tau2 / mu.max(1e-12)).sqrt()
        })
        .collect();
    basis.from_spectral_vec(&spectral)
}

/// One AR step `ξ w + √(1−ξ²) u` with `u ~ N(0, τ² Q⁻¹)`, in place.
pub(crate) fn ar_step<R: Rng + ?Sized>(basis: &SpatialBasis, w: &mut [f64], xi: f64, rho: f64, tau2: f64, rng: &mut R) {
    let u = draw_car(basis, rho, tau2, rng);
    let a = (1.0 - xi * xi).sqrt();
    for (wi, ui) in w.iter_mut().zip(u) {
        *wi = xi * *wi + a * ui;
    }
}

/// Simulates `n_times` observations starting at absolute time `start`.
/// Returns the panel (original scale) and the latent field as an
/// `I × T` matrix. `w_1` is drawn from the stationary distribution.
pub fn simulate_panel<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    design: &HarmonicDesign,
    truth: &TrueParams,
    start: usize,
    n_times: usize,
    rng: &mut R,
) -> Result<(Panel, DMatrix<f64>)> {
    let n = grid.n_locations();
    if truth.assignments.len() != n {
        return Err(Error::LocationMismatch {
            expected: n,
            actual: truth.assignments.len(),
        });
    }
    if truth.assignments.iter().any(|&c| c >= truth.betas.len()) {
        return Err(Error::invalid("assignment refers to a missing coefficient vector"));
    }
    if truth.betas.iter().any(|b| b.len() != design.dim()) {
        return Err(Error::DimensionMismatch(format!("coefficients must have length {}", design.dim())));
    }
    if truth.xi.abs() >= 1.0 || !(0.0..1.0).contains(&truth.rho) || truth.tau2 < 0.0 || truth.sigma2 < 0.0 {
        return Err(Error::invalid("generating parameters out of range"));
    }
    let (log_y, w) = simulate_log(grid, design, truth, start, n_times, rng);
    let values: Vec<f64> = (0..n).flat_map(|i| (0..n_times).map(move |s| (i, s))).map(|(i, s)| log_y[(i, s)].exp()).collect();
    Ok((Panel::new(n, n_times, start, values)?, w))
}

/// Log-scale data and latent field, both `I × T`.
pub(crate) fn simulate_log<R: Rng + ?Sized>(
    grid: &SpatialGrid,
    design: &HarmonicDesign,
    truth: &TrueParams,
    start: usize,
    n_times: usize,
    rng: &mut R,
) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = grid.n_locations();
    let basis = SpatialBasis::new(grid);
    let mut w = DMatrix::zeros(n, n_times);
    let mut z = DMatrix::zeros(n, n_times);
    let mut cur = if truth.tau2 > 0.0 {
        draw_car(&basis, truth.rho, truth.tau2, rng)
    } else {
        vec![0.0; n]
    };
    let sd = truth.sigma2.sqrt();
    for s in 0..n_times {
        if s > 0 && truth.tau2 > 0.0 {
            ar_step(&basis, &mut cur, truth.xi, truth.rho, truth.tau2, rng);
        }
        let row = design.row(start + s);
        for i in 0..n {
            let beta = &truth.betas[truth.assignments[i]];
            let harmonic: f64 = row.iter().zip(beta).map(|(a, b)| a * b).sum();
            let e: f64 = rng.sample(StandardNormal);
            w[(i, s)] = cur[i];
            z[(i, s)] = truth.beta0 + harmonic + cur[i] + sd * e;
        }
    }
    (z, w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::leroux::leroux_precision;
    use rand::SeedableRng;

    #[test]
    fn stationary_covariance_matches_car() {
        let grid = SpatialGrid::queen(2, 2).unwrap();
        let basis = SpatialBasis::new(&grid);
        let (xi, rho, tau2) = (0.6, 0.7, 1.5);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4);
        let mut w = draw_car(&basis, rho, tau2, &mut rng);
        for _ in 0..100 {
            ar_step(&basis, &mut w, xi, rho, tau2, &mut rng);
        }
        let steps = 100_000;
        let mut acc = DMatrix::<f64>::zeros(4, 4);
        for _ in 0..steps {
            ar_step(&basis, &mut w, xi, rho, tau2, &mut rng);
            let v = nalgebra::DVector::from_column_slice(&w);
            acc += &v * v.transpose();
        }
        acc /= steps as f64;
        let target = leroux_precision(rho, &grid).unwrap().to_dense().try_inverse().unwrap() * tau2;
        let rel = (&acc - &target).norm() / target.norm();
        assert!(rel < 0.05, "relative error {rel}");
    }

    #[test]
    fn noiseless_panel_is_deterministic_mean() {
        let grid = SpatialGrid::queen(1, 2).unwrap();
        let design = HarmonicDesign::new(vec![0.25]).unwrap();
        let truth = TrueParams {
            beta0: 1.0,
            betas: vec![vec![0.5, 0.0], vec![0.0, 0.5]],
            assignments: vec![0, 1],
            xi: 0.0,
            rho: 0.0,
            tau2: 0.0,
            sigma2: 0.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        let (p, w) = simulate_panel(&grid, &design, &truth, 0, 4, &mut rng).unwrap();
        assert!(w.iter().all(|v| *v == 0.0));
        assert!((p.get(0, 0) - 1.5f64.exp()).abs() < 1e-12);
        assert!((p.get(1, 1) - 1.5f64.exp()).abs() < 1e-12);
        assert!((p.get(0, 2) - 0.5f64.exp()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_truth() {
        let grid = SpatialGrid::queen(1, 2).unwrap();
        let design = HarmonicDesign::new(vec![]).unwrap();
        let mut truth = TrueParams {
            beta0: 0.0,
            betas: vec![vec![]],
            assignments: vec![0, 0],
            xi: 1.0,
            rho: 0.5,
            tau2: 1.0,
            sigma2: 1.0,
        };
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);
        assert!(simulate_panel(&grid, &design, &truth, 0, 4, &mut rng).is_err());
        truth.xi = 0.0;
        truth.assignments = vec![0, 1];
        assert!(simulate_panel(&grid, &design, &truth, 0, 4, &mut rng).is_err());
    }
}
