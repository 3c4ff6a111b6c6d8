//! Gibbs sampler for the harmonic regression / CAR-AR / CAR-AR-BNP models on
//! log intensities.
//!
//! One sweep runs, in order: cluster assignments (BNP only), harmonic
//! coefficients and intercept, the latent space-time field, ρ and ξ
//! (Metropolis–Hastings with truncated-normal proposals), then σ² and τ².

use std::sync::Arc;

use log::debug;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma, StandardNormal};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::spatial::{Panel, SpatialGrid};

use super::config::{BnpConfig, ModelConfig, Variant};
use super::field::{sample_latent_spectral, Ar1Stats};
use super::harmonic::HarmonicDesign;
use super::leroux::SpatialBasis;

/// One retained MCMC state.
///
/// For the baseline variant there is no random effect: `w_last` is zero and
/// `xi`, `rho`, `tau2` are reported as 0.
#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorDraw {
    pub beta0: f64,
    /// Unique harmonic coefficient vectors, one per occupied cluster.
    pub betas: Vec<Vec<f64>>,
    /// Cluster of each location; the identity map unless the variant clusters.
    pub assignments: Vec<usize>,
    /// Latent field at the last training time.
    pub w_last: Vec<f64>,
    /// Full latent field, location-major `I × T`, when requested.
    pub w: Option<Vec<f64>>,
    pub xi: f64,
    pub rho: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

impl PosteriorDraw {
    pub fn n_clusters(&self) -> usize {
        self.betas.len()
    }

    pub fn beta_of(&self, location: usize) -> &[f64] {
        &self.betas[self.assignments[location]]
    }
}

/// Posterior draws together with what is needed to forecast from them.
#[derive(Debug, Clone)]
pub struct FittedModel {
    pub variant: Variant,
    pub design: HarmonicDesign,
    pub basis: Arc<SpatialBasis>,
    /// Absolute time index of the last training observation.
    pub origin_time: usize,
    /// Observed values at the origin (original scale).
    pub last_observed: Vec<f64>,
    pub draws: Vec<PosteriorDraw>,
    pub acceptance: Acceptance,
}

/// Metropolis–Hastings acceptance rates after burn-in.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Acceptance {
    pub xi: f64,
    pub rho: f64,
}

/// Full chain state.
#[derive(Debug, Clone)]
pub(crate) struct ChainState {
    pub beta0: f64,
    pub betas: Vec<DVector<f64>>,
    pub assign: Vec<usize>,
    /// Latent field in spectral coordinates (eigencomponent × time).
    pub x: DMatrix<f64>,
    /// Latent field (location × time).
    pub w: DMatrix<f64>,
    pub xi: f64,
    pub rho: f64,
    pub tau2: f64,
    pub sigma2: f64,
}

struct RandomWalk {
    sd: f64,
    accepted: usize,
    proposed: usize,
    window_accepted: usize,
    window_proposed: usize,
}

impl RandomWalk {
    fn new() -> Self {
        RandomWalk {
            sd: 0.05,
            accepted: 0,
            proposed: 0,
            window_accepted: 0,
            window_proposed: 0,
        }
    }

    fn record(&mut self, ok: bool, counting: bool) {
        self.window_proposed += 1;
        self.window_accepted += ok as usize;
        if counting {
            self.proposed += 1;
            self.accepted += ok as usize;
        }
    }

    /// Steers the acceptance rate into 20–40%.
    fn adapt(&mut self) {
        if self.window_proposed == 0 {
            return;
        }
        let rate = self.window_accepted as f64 / self.window_proposed as f64;
        if rate < 0.2 {
            self.sd *= 0.8;
        } else if rate > 0.4 {
            self.sd *= 1.25;
        }
        self.sd = self.sd.clamp(1e-4, 1.0);
        self.window_accepted = 0;
        self.window_proposed = 0;
    }

    fn rate(&self) -> f64 {
        if self.proposed == 0 {
            0.0
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

fn std_normal() -> Normal {
    Normal::new(0.0, 1.0).expect("unit normal")
}

/// Draws from `N(x, sd²)` truncated to `[lo, hi]` by inversion; returns the
/// proposal and `log Z(x)`, the log normalizing mass at the current point.
fn truncated_normal<R: Rng + ?Sized>(rng: &mut R, x: f64, sd: f64, lo: f64, hi: f64) -> (f64, f64) {
    let n = std_normal();
    let (a, b) = (n.cdf((lo - x) / sd), n.cdf((hi - x) / sd));
    let u = a + (b - a) * rng.random::<f64>();
    let y = x + sd * n.inverse_cdf(u.clamp(1e-300, 1.0 - 1e-16));
    (y.clamp(lo, hi), (b - a).ln())
}

fn log_mass(x: f64, sd: f64, lo: f64, hi: f64) -> f64 {
    let n = std_normal();
    (n.cdf((hi - x) / sd) - n.cdf((lo - x) / sd)).ln()
}

/// Inverse-gamma draw with shape `a` and scale `b`.
fn inv_gamma<R: Rng + ?Sized>(rng: &mut R, a: f64, b: f64) -> f64 {
    let g = Gamma::new(a, 1.0 / b).expect("positive gamma parameters");
    1.0 / g.sample(rng)
}

fn std_normal_vec<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.sample(StandardNormal))
}

pub(crate) struct Sampler<'a> {
    variant: Variant,
    bnp: BnpConfig,
    basis: &'a SpatialBasis,
    /// Log data, location × time.
    z: DMatrix<f64>,
    /// Harmonic design, time × 2K.
    h: DMatrix<f64>,
    hth: DMatrix<f64>,
    prior_prec: DMatrix<f64>,
    prior_prec_mean: DVector<f64>,
    prior_chol_l: DMatrix<f64>,
    prior_mean: DVector<f64>,
    beta0_var: f64,
    a_sigma: f64,
    b_sigma: f64,
    a_tau: f64,
    b_tau: f64,
    pub(crate) state: ChainState,
    xi_walk: RandomWalk,
    rho_walk: RandomWalk,
    aux: Vec<DVector<f64>>,
}

impl<'a> Sampler<'a> {
    pub(crate) fn new(log_data: DMatrix<f64>, start: usize, basis: &'a SpatialBasis, cfg: &ModelConfig) -> Result<Self> {
        let design = HarmonicDesign::new(cfg.frequencies.clone())?;
        let (n, t) = log_data.shape();
        let p = design.dim();
        let h = DMatrix::from_fn(t, p, |s, j| design.row(start + s)[j]);
        let hth = h.tr_mul(&h);
        let prior_cov = cfg.hyper.prior_cov(p)?;
        let prior_mean = cfg.hyper.prior_mean(p)?;
        let (prior_prec, prior_chol_l) = if p == 0 {
            (DMatrix::zeros(0, 0), DMatrix::zeros(0, 0))
        } else {
            let chol = prior_cov
                .clone()
                .cholesky()
                .ok_or_else(|| Error::invalid("S0 is not positive definite"))?;
            (chol.inverse(), chol.l())
        };
        let prior_prec_mean = &prior_prec * &prior_mean;

        let mean = log_data.mean();
        let var = log_data.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n * t) as f64;
        let var = var.max(1e-6);
        let rho = match cfg.variant {
            Variant::Baseline => 0.0,
            Variant::CarArRhoFixed(r) => r,
            _ => 0.5,
        };
        let has_re = cfg.variant.has_random_effect();
        // Every location starts with its own coefficients; only BNP merges them.
        let assign: Vec<usize> = (0..n).collect();
        let n_clusters = n;
        let state = ChainState {
            beta0: mean,
            betas: vec![prior_mean.clone(); n_clusters],
            assign,
            x: DMatrix::zeros(n, t),
            w: DMatrix::zeros(n, t),
            xi: if has_re { 0.5 } else { 0.0 },
            rho,
            tau2: if has_re { var / 2.0 } else { 0.0 },
            sigma2: if has_re { var / 2.0 } else { var },
        };
        Ok(Sampler {
            variant: cfg.variant,
            bnp: cfg.bnp_or_default(),
            basis,
            z: log_data,
            h,
            hth,
            prior_prec,
            prior_prec_mean,
            prior_chol_l,
            prior_mean,
            beta0_var: cfg.hyper.beta0_var,
            a_sigma: cfg.hyper.a_sigma,
            b_sigma: cfg.hyper.b_sigma,
            a_tau: cfg.hyper.a_tau,
            b_tau: cfg.hyper.b_tau,
            state,
            xi_walk: RandomWalk::new(),
            rho_walk: RandomWalk::new(),
            aux: Vec::new(),
        })
    }

    fn dims(&self) -> (usize, usize, usize) {
        (self.z.nrows(), self.z.ncols(), self.h.ncols())
    }

    /// Fitted harmonic part `H β_c` for each cluster, time-indexed.
    fn cluster_means(&self) -> Vec<DVector<f64>> {
        self.state.betas.iter().map(|b| &self.h * b).collect()
    }

    /// `z − β0 − Hβ_{c(i)}` (location × time).
    fn mean_residual(&self) -> DMatrix<f64> {
        let means = self.cluster_means();
        let (n, t, _) = self.dims();
        DMatrix::from_fn(n, t, |i, s| self.z[(i, s)] - self.state.beta0 - means[self.state.assign[i]][s])
    }

    fn draw_prior_beta<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        let p = self.h.ncols();
        &self.prior_mean + &self.prior_chol_l * std_normal_vec(rng, p)
    }

    /// Log-likelihood of location data summarized by `g = Hᵀr` at `θ`,
    /// up to terms constant in `θ`.
    fn cluster_loglik(&self, g: &DVector<f64>, theta: &DVector<f64>) -> f64 {
        (theta.dot(g) - 0.5 * theta.dot(&(&self.hth * theta))) / self.state.sigma2
    }

    /// Marginalized Dirichlet-process update with reusable auxiliary components.
    fn update_clusters<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (n, t, _) = self.dims();
        let c = self.bnp.n_aux;
        let log_aux_weight = (self.bnp.alpha / c as f64).ln();
        self.aux = (0..c).map(|_| self.draw_prior_beta(rng)).collect();

        let resid = DMatrix::from_fn(n, t, |i, s| self.z[(i, s)] - self.state.beta0 - self.state.w[(i, s)]);
        let g: Vec<DVector<f64>> = (0..n).map(|i| self.h.tr_mul(&resid.row(i).transpose())).collect();
        let mut counts = vec![0usize; self.state.betas.len()];
        for &a in &self.state.assign {
            counts[a] += 1;
        }
        let mut logw = Vec::new();
        for i in 0..n {
            let cur = self.state.assign[i];
            counts[cur] -= 1;
            if counts[cur] == 0 {
                let slot = rng.random_range(0..c);
                let last = self.state.betas.len() - 1;
                self.aux[slot] = self.state.betas.swap_remove(cur);
                counts.swap_remove(cur);
                if cur != last {
                    for a in self.state.assign.iter_mut() {
                        if *a == last {
                            *a = cur;
                        }
                    }
                }
            }
            logw.clear();
            for (k, beta) in self.state.betas.iter().enumerate() {
                logw.push((counts[k] as f64).ln() + self.cluster_loglik(&g[i], beta));
            }
            for theta in &self.aux {
                logw.push(log_aux_weight + self.cluster_loglik(&g[i], theta));
            }
            let max = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let total: f64 = logw.iter().map(|v| (v - max).exp()).sum();
            let mut u = rng.random::<f64>() * total;
            let mut pick = logw.len() - 1;
            for (k, v) in logw.iter().enumerate() {
                u -= (v - max).exp();
                if u <= 0.0 {
                    pick = k;
                    break;
                }
            }
            let k_existing = self.state.betas.len();
            if pick < k_existing {
                self.state.assign[i] = pick;
                counts[pick] += 1;
            } else {
                let slot = pick - k_existing;
                let fresh = self.draw_prior_beta(rng);
                let theta = std::mem::replace(&mut self.aux[slot], fresh);
                self.state.betas.push(theta);
                counts.push(1);
                self.state.assign[i] = k_existing;
            }
        }
    }

    /// Gaussian full conditional of each unique coefficient vector.
    pub(crate) fn update_betas<R: Rng + ?Sized>(&mut self, rng: &mut R) -> std::result::Result<(), String> {
        let (n, t, p) = self.dims();
        if p == 0 {
            return Ok(());
        }
        let k = self.state.betas.len();
        let mut sums = vec![DVector::zeros(p); k];
        let mut counts = vec![0usize; k];
        for i in 0..n {
            let r = DVector::from_fn(t, |s, _| self.z[(i, s)] - self.state.beta0 - self.state.w[(i, s)]);
            let c = self.state.assign[i];
            sums[c] += self.h.tr_mul(&r);
            counts[c] += 1;
        }
        for c in 0..k {
            let prec = &self.prior_prec + &self.hth * (counts[c] as f64 / self.state.sigma2);
            let rhs = &self.prior_prec_mean + &sums[c] / self.state.sigma2;
            let chol = prec.cholesky().ok_or("coefficient precision not positive definite")?;
            let mean = chol.solve(&rhs);
            let l = chol.l();
            let noise = l
                .transpose()
                .solve_upper_triangular(&std_normal_vec(rng, p))
                .ok_or("singular coefficient factor")?;
            self.state.betas[c] = mean + noise;
        }
        Ok(())
    }

    fn update_beta0<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (n, t, _) = self.dims();
        let means = self.cluster_means();
        let mut sum = 0.0;
        for i in 0..n {
            let m = &means[self.state.assign[i]];
            for s in 0..t {
                sum += self.z[(i, s)] - m[s] - self.state.w[(i, s)];
            }
        }
        let prec = 1.0 / self.beta0_var + (n * t) as f64 / self.state.sigma2;
        let mean = sum / self.state.sigma2 / prec;
        let e: f64 = rng.sample(StandardNormal);
        self.state.beta0 = mean + e / prec.sqrt();
    }

    fn update_latent<R: Rng + ?Sized>(&mut self, rng: &mut R) -> std::result::Result<(), String> {
        let resid = self.mean_residual();
        let s = &self.state;
        let x = sample_latent_spectral(self.basis, &resid, s.rho, s.xi, s.tau2, s.sigma2, Some(rng))?;
        self.state.w = self.basis.from_spectral(&x);
        self.state.x = x;
        Ok(())
    }

    fn component_stats(&self) -> Vec<Ar1Stats> {
        let (n, t, _) = self.dims();
        let mut row = vec![0.0; t];
        (0..n)
            .map(|k| {
                for s in 0..t {
                    row[s] = self.state.x[(k, s)];
                }
                Ar1Stats::new(&row)
            })
            .collect()
    }

    fn update_rho<R: Rng + ?Sized>(&mut self, rng: &mut R, counting: bool) {
        let t = self.z.ncols() as f64;
        let quads: Vec<f64> = self.component_stats().iter().map(|s| s.quad(self.state.xi)).collect();
        let lambda = self.basis.laplacian_eigenvalues();
        let tau2 = self.state.tau2;
        let target = |rho: f64| {
            let mut logdet = 0.0;
            let mut quad = 0.0;
            for (l, q) in lambda.iter().zip(&quads) {
                let mu = rho * l + 1.0 - rho;
                if mu <= 0.0 {
                    return f64::NEG_INFINITY;
                }
                logdet += mu.ln();
                quad += mu * q;
            }
            0.5 * t * logdet - 0.5 * quad / tau2
        };
        let cur = self.state.rho;
        let sd = self.rho_walk.sd;
        let (prop, log_z_cur) = truncated_normal(rng, cur, sd, 0.0, 1.0);
        let log_ratio = target(prop) - target(cur) + log_z_cur - log_mass(prop, sd, 0.0, 1.0);
        let ok = log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio;
        if ok {
            self.state.rho = prop;
        }
        self.rho_walk.record(ok, counting);
    }

    fn weighted_stats(&self) -> Ar1Stats {
        let mu = self.basis.precision_eigenvalues(self.state.rho);
        self.component_stats()
            .into_iter()
            .zip(mu)
            .fold(Ar1Stats::default(), |acc, (s, m)| acc.add(s.scaled(m)))
    }

    fn update_xi<R: Rng + ?Sized>(&mut self, rng: &mut R, counting: bool) {
        let (n, t, _) = self.dims();
        let stats = self.weighted_stats();
        let tau2 = self.state.tau2;
        let factor = 0.5 * (n * (t - 1)) as f64;
        let target = |xi: f64| {
            if xi.abs() >= 1.0 {
                return f64::NEG_INFINITY;
            }
            -factor * (1.0 - xi * xi).ln() - 0.5 * stats.quad(xi) / tau2
        };
        let cur = self.state.xi;
        let sd = self.xi_walk.sd;
        let (prop, log_z_cur) = truncated_normal(rng, cur, sd, -1.0, 1.0);
        let log_ratio = target(prop) - target(cur) + log_z_cur - log_mass(prop, sd, -1.0, 1.0);
        let ok = log_ratio.is_finite() && rng.random::<f64>().ln() < log_ratio;
        if ok {
            self.state.xi = prop;
        }
        self.xi_walk.record(ok, counting);
    }

    fn update_variances<R: Rng + ?Sized>(&mut self, rng: &mut R) {
        let (n, t, _) = self.dims();
        let resid = self.mean_residual();
        let sse: f64 = resid.iter().zip(self.state.w.iter()).map(|(r, w)| (r - w).powi(2)).sum();
        let nt = (n * t) as f64;
        self.state.sigma2 = inv_gamma(rng, self.a_sigma + 0.5 * nt, self.b_sigma + 0.5 * sse);
        if self.variant.has_random_effect() {
            let quad = self.weighted_stats().quad(self.state.xi);
            self.state.tau2 = inv_gamma(rng, self.a_tau + 0.5 * nt, self.b_tau + 0.5 * quad);
        }
    }

    /// One full sweep. `counting` marks post-burn-in iterations for acceptance statistics.
    pub(crate) fn sweep<R: Rng + ?Sized>(&mut self, rng: &mut R, counting: bool) -> std::result::Result<(), String> {
        if self.variant.is_bnp() {
            self.update_clusters(rng);
        }
        self.update_betas(rng)?;
        self.update_beta0(rng);
        if self.variant.has_random_effect() {
            self.update_latent(rng)?;
            if matches!(self.variant, Variant::CarAr | Variant::CarArBnp) {
                self.update_rho(rng, counting);
            }
            self.update_xi(rng, counting);
        }
        self.update_variances(rng);
        Ok(())
    }

    fn adapt(&mut self) {
        self.xi_walk.adapt();
        self.rho_walk.adapt();
    }

    fn snapshot(&self, keep_latent: bool) -> PosteriorDraw {
        let (n, t, _) = self.dims();
        let s = &self.state;
        PosteriorDraw {
            beta0: s.beta0,
            betas: s.betas.iter().map(|b| b.as_slice().to_vec()).collect(),
            assignments: s.assign.clone(),
            w_last: (0..n).map(|i| s.w[(i, t - 1)]).collect(),
            w: keep_latent.then(|| (0..n).flat_map(|i| (0..t).map(move |u| (i, u))).map(|(i, u)| s.w[(i, u)]).collect()),
            xi: s.xi,
            rho: s.rho,
            tau2: s.tau2,
            sigma2: s.sigma2,
        }
    }
}

/// Log-transformed data as a location × time matrix.
pub(crate) fn log_matrix(data: &Panel) -> DMatrix<f64> {
    DMatrix::from_fn(data.n_locations(), data.n_times(), |i, s| data.get(i, s).ln())
}

/// Runs the sampler on a training window and returns the retained draws.
pub fn gibbs_run(data: &Panel, grid: &SpatialGrid, config: &ModelConfig) -> Result<FittedModel> {
    let basis = Arc::new(SpatialBasis::new(grid));
    gibbs_run_with_basis(data, grid, basis, config)
}

/// As [`gibbs_run`], reusing a precomputed spatial basis for `grid`.
pub fn gibbs_run_with_basis(
    data: &Panel,
    grid: &SpatialGrid,
    basis: Arc<SpatialBasis>,
    config: &ModelConfig,
) -> Result<FittedModel> {
    config.validate()?;
    if data.n_locations() != grid.n_locations() {
        return Err(Error::LocationMismatch {
            expected: grid.n_locations(),
            actual: data.n_locations(),
        });
    }
    if basis.dim() != grid.n_locations() {
        return Err(Error::invalid("spatial basis does not match grid"));
    }
    data.ensure_positive()?;
    let design = HarmonicDesign::new(config.frequencies.clone())?;
    let t = data.n_times();
    if t < design.dim() + 2 {
        return Err(Error::invalid(format!(
            "training length {t} below 2K + 2 = {}",
            design.dim() + 2
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut sampler = Sampler::new(log_matrix(data), data.start(), &basis, config)?;
    let fail = |iter: usize, message: String| Error::Numerical { draw: iter, message };
    sampler.update_betas(&mut rng).map_err(|m| fail(0, m))?;

    let mcmc = &config.mcmc;
    let mut draws = Vec::with_capacity(mcmc.n_draws());
    for iter in 0..mcmc.iters {
        let post = iter >= mcmc.burnin;
        sampler.sweep(&mut rng, post).map_err(|m| fail(iter, m))?;
        if !post && (iter + 1) % 50 == 0 {
            sampler.adapt();
        }
        if post && (iter + 1 - mcmc.burnin) % mcmc.thin == 0 {
            draws.push(sampler.snapshot(mcmc.keep_latent));
        }
    }
    let acceptance = Acceptance {
        xi: sampler.xi_walk.rate(),
        rho: sampler.rho_walk.rate(),
    };
    debug!(
        "{}: {} draws, acceptance xi {:.2} rho {:.2}",
        config.variant.name(),
        draws.len(),
        acceptance.xi,
        acceptance.rho
    );
    Ok(FittedModel {
        variant: config.variant,
        design,
        basis,
        origin_time: data.start() + t - 1,
        last_observed: data.column(t - 1),
        draws,
        acceptance,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bayes::simulate::{simulate_panel, TrueParams};

    fn config(variant: Variant, freqs: Vec<f64>, iters: usize, burnin: usize, thin: usize) -> ModelConfig {
        let mut c = ModelConfig::new(variant, freqs);
        c.mcmc.iters = iters;
        c.mcmc.burnin = burnin;
        c.mcmc.thin = thin;
        c.seed = 17;
        c
    }

    // Geweke-style check: a draw from the prior, data simulated from it, and
    // one sweep must again be distributed as the prior.
    #[test]
    fn one_sweep_preserves_the_prior() {
        use crate::bayes::simulate::simulate_log;
        let grid = SpatialGrid::queen(2, 2).unwrap();
        let basis = SpatialBasis::new(&grid);
        let freqs = vec![0.2];
        let design = HarmonicDesign::new(freqs.clone()).unwrap();
        let mut cfg = config(Variant::CarAr, freqs, 10, 0, 1);
        cfg.hyper.a_sigma = 3.0;
        cfg.hyper.b_sigma = 2.0;
        cfg.hyper.a_tau = 3.0;
        cfg.hyper.b_tau = 2.0;
        cfg.hyper.beta0_var = 1.0;
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let reps = 4000;
        let (mut xi, mut s2, mut t2, mut rho) = (0.0, 0.0, 0.0, 0.0);
        for _ in 0..reps {
            let truth = TrueParams {
                beta0: rng.sample::<f64, _>(StandardNormal),
                betas: (0..4).map(|_| (0..2).map(|_| 0.1f64.sqrt() * rng.sample::<f64, _>(StandardNormal)).collect()).collect(),
                assignments: (0..4).collect(),
                xi: rng.random_range(-1.0..1.0),
                rho: rng.random_range(0.0..1.0),
                tau2: inv_gamma(&mut rng, 3.0, 2.0),
                sigma2: inv_gamma(&mut rng, 3.0, 2.0),
            };
            let (z, w) = simulate_log(&grid, &design, &truth, 0, 6, &mut rng);
            let mut sampler = Sampler::new(z, 0, &basis, &cfg).unwrap();
            sampler.state = ChainState {
                beta0: truth.beta0,
                betas: truth.betas.iter().map(|b| DVector::from_column_slice(b)).collect(),
                assign: truth.assignments.clone(),
                x: basis.to_spectral(&w),
                w,
                xi: truth.xi,
                rho: truth.rho,
                tau2: truth.tau2,
                sigma2: truth.sigma2,
            };
            sampler.sweep(&mut rng, false).unwrap();
            xi += sampler.state.xi;
            rho += sampler.state.rho;
            s2 += sampler.state.sigma2;
            t2 += sampler.state.tau2;
        }
        let n = reps as f64;
        // prior means and sds: xi U(-1,1), rho U(0,1), IG(3,2) has mean 1 and sd 1
        let z = |sum: f64, mean: f64, sd: f64| (sum / n - mean) / (sd / n.sqrt());
        let scores = [
            z(xi, 0.0, (1.0f64 / 3.0).sqrt()),
            z(rho, 0.5, (1.0f64 / 12.0).sqrt()),
            z(s2, 1.0, 1.0),
            z(t2, 1.0, 1.0),
        ];
        assert!(scores.iter().all(|s| s.abs() < 4.0), "{scores:?}");
    }

    #[test]
    fn truncated_normal_stays_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..2000 {
            let (y, lz) = truncated_normal(&mut rng, 0.99, 0.05, 0.0, 1.0);
            assert!((0.0..=1.0).contains(&y));
            assert!(lz < 0.0);
        }
    }

    #[test]
    fn baseline_recovers_coefficients() {
        let grid = SpatialGrid::queen(3, 3).unwrap();
        let freqs = vec![1.0 / 24.0, 1.0 / 12.0];
        let truth = TrueParams {
            beta0: 5.0,
            betas: vec![vec![0.8, -0.4, 0.3, 0.2]],
            assignments: vec![0; 9],
            xi: 0.0,
            rho: 0.0,
            tau2: 0.0,
            sigma2: 0.05,
        };
        let design = HarmonicDesign::new(freqs.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let (panel, _) = simulate_panel(&grid, &design, &truth, 0, 192, &mut rng).unwrap();
        let fit = gibbs_run(&panel, &grid, &config(Variant::Baseline, freqs, 1500, 500, 5)).unwrap();
        assert_eq!(fit.draws.len(), 200);
        for j in 0..4 {
            let vals: Vec<f64> = fit.draws.iter().map(|d| d.betas[0][j]).collect();
            let mean = vals.iter().sum::<f64>() / vals.len() as f64;
            let sd = (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt();
            assert!((mean - truth.betas[0][j]).abs() < 3.0 * sd + 1e-3, "beta[{j}] {mean} ± {sd}");
        }
        assert!(fit.draws.iter().all(|d| d.tau2 == 0.0 && d.w_last.iter().all(|w| *w == 0.0)));
    }

    #[test]
    fn reproducible_and_invariants_hold() {
        let grid = SpatialGrid::queen(2, 3).unwrap();
        let freqs = vec![0.1];
        let design = HarmonicDesign::new(freqs.clone()).unwrap();
        let truth = TrueParams {
            beta0: 3.0,
            betas: vec![vec![0.5, 0.2]],
            assignments: vec![0; 6],
            xi: 0.7,
            rho: 0.6,
            tau2: 0.5,
            sigma2: 0.1,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let (panel, _) = simulate_panel(&grid, &design, &truth, 10, 60, &mut rng).unwrap();
        for variant in [Variant::CarAr, Variant::CarArBnp, Variant::CarArRhoFixed(0.5)] {
            let cfg = config(variant, freqs.clone(), 300, 100, 10);
            let a = gibbs_run(&panel, &grid, &cfg).unwrap();
            let b = gibbs_run(&panel, &grid, &cfg).unwrap();
            assert_eq!(a.draws, b.draws);
            assert_eq!(a.draws.len(), 20);
            assert_eq!(a.origin_time, 69);
            for d in &a.draws {
                assert!(d.xi.abs() < 1.0 && (0.0..=1.0).contains(&d.rho));
                assert!(d.tau2 > 0.0 && d.sigma2 > 0.0);
                assert!(d.assignments.iter().all(|&c| c < d.betas.len()));
                if let Variant::CarArRhoFixed(r) = variant {
                    assert_eq!(d.rho, r);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_input() {
        let grid = SpatialGrid::queen(1, 2).unwrap();
        let cfg = config(Variant::CarAr, vec![0.25], 20, 10, 1);
        let panel = Panel::new(2, 8, 0, vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 1.0]).unwrap();
        assert!(matches!(gibbs_run(&panel, &grid, &cfg), Err(Error::Data(_))));
        let short = Panel::new(2, 3, 0, vec![1.0; 6]).unwrap();
        assert!(matches!(gibbs_run(&short, &grid, &cfg), Err(Error::InvalidArgument(_))));
        let other = SpatialGrid::queen(2, 2).unwrap();
        let ok = Panel::new(2, 8, 0, vec![1.0; 16]).unwrap();
        assert!(matches!(gibbs_run(&ok, &other, &cfg), Err(Error::LocationMismatch { .. })));
    }

    #[test]
    fn bnp_reuse_keeps_labels_dense() {
        let grid = SpatialGrid::queen(3, 3).unwrap();
        let freqs = vec![0.05];
        let design = HarmonicDesign::new(freqs.clone()).unwrap();
        let truth = TrueParams {
            beta0: 4.0,
            betas: vec![vec![1.0, 0.0], vec![-1.0, 0.5]],
            assignments: vec![0, 0, 0, 0, 1, 1, 1, 1, 1],
            xi: 0.5,
            rho: 0.5,
            tau2: 0.1,
            sigma2: 0.05,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let (panel, _) = simulate_panel(&grid, &design, &truth, 0, 80, &mut rng).unwrap();
        let cfg = config(Variant::CarArBnp, freqs, 200, 100, 5);
        let fit = gibbs_run(&panel, &grid, &cfg).unwrap();
        for d in &fit.draws {
            let mut used = vec![false; d.betas.len()];
            d.assignments.iter().for_each(|&a| used[a] = true);
            assert!(used.iter().all(|u| *u), "empty cluster retained");
        }
    }
}
