//! Joint draw of the space-time random effect from its Gaussian full conditional.
//!
//! With prior precision `(1/τ²) A(ξ) ⊗ Q(ρ)` (A the AR(1) precision with unit
//! stationary variance) and observation precision `I/σ²`, rotating space by the
//! Laplacian eigenvectors turns the `I·T` system into `I` independent
//! tridiagonal `T×T` systems, one per eigencomponent.

use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

use super::leroux::SpatialBasis;

/// Sufficient statistics of a series for `xᵀA(ξ)x` at any ξ.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Ar1Stats {
    sum_sq: f64,
    inner_sq: f64,
    lag: f64,
}

impl Ar1Stats {
    pub(crate) fn new(x: &[f64]) -> Self {
        let n = x.len();
        let sum_sq = x.iter().map(|v| v * v).sum();
        let inner_sq = if n > 2 { x[1..n - 1].iter().map(|v| v * v).sum() } else { 0.0 };
        let lag = x.windows(2).map(|w| w[0] * w[1]).sum();
        Ar1Stats { sum_sq, inner_sq, lag }
    }

    pub(crate) fn scaled(self, s: f64) -> Self {
        Ar1Stats {
            sum_sq: self.sum_sq * s,
            inner_sq: self.inner_sq * s,
            lag: self.lag * s,
        }
    }

    pub(crate) fn add(self, o: Self) -> Self {
        Ar1Stats {
            sum_sq: self.sum_sq + o.sum_sq,
            inner_sq: self.inner_sq + o.inner_sq,
            lag: self.lag + o.lag,
        }
    }

    /// `xᵀ A(ξ) x` for series of length ≥ 2.
    pub(crate) fn quad(&self, xi: f64) -> f64 {
        (self.sum_sq + xi * xi * self.inner_sq - 2.0 * xi * self.lag) / (1.0 - xi * xi)
    }
}

/// For the tridiagonal precision `P = s·A(ξ) + c·I = LLᵀ`, returns
/// `P⁻¹b + L⁻ᵀz`. With `z = 0` this is the conditional mean.
pub(crate) fn tridiagonal_draw(s: f64, xi: f64, c: f64, b: &[f64], z: &[f64]) -> Result<Vec<f64>, String> {
    let n = b.len();
    let scale = s / (1.0 - xi * xi);
    let diag = |t: usize| {
        let a = if n == 1 {
            1.0 - xi * xi
        } else if t == 0 || t == n - 1 {
            1.0
        } else {
            1.0 + xi * xi
        };
        scale * a + c
    };
    let off = -scale * xi;
    let mut l_diag = vec![0.0; n];
    let mut l_sub = vec![0.0; n];
    let mut y = vec![0.0; n];
    for t in 0..n {
        let mut d = diag(t);
        if t > 0 {
            l_sub[t] = off / l_diag[t - 1];
            d -= l_sub[t] * l_sub[t];
        }
        if !(d > 0.0) || !d.is_finite() {
            return Err(format!("tridiagonal pivot {d} at t = {t}"));
        }
        l_diag[t] = d.sqrt();
        let prev = if t > 0 { l_sub[t] * y[t - 1] } else { 0.0 };
        y[t] = (b[t] - prev) / l_diag[t];
    }
    let mut x = vec![0.0; n];
    for t in (0..n).rev() {
        let next = if t + 1 < n { l_sub[t + 1] * x[t + 1] } else { 0.0 };
        x[t] = (y[t] + z[t] - next) / l_diag[t];
    }
    Ok(x)
}

/// Draws the latent field in spectral coordinates given residuals
/// `e = z − mean` (locations × times). Returns an `I × T` matrix whose row `k`
/// is the time series of eigencomponent `k`.
pub(crate) fn sample_latent_spectral<R: Rng + ?Sized>(
    basis: &SpatialBasis,
    resid: &DMatrix<f64>,
    rho: f64,
    xi: f64,
    tau2: f64,
    sigma2: f64,
    rng: Option<&mut R>,
) -> Result<DMatrix<f64>, String> {
    let (n, t) = resid.shape();
    let rotated = basis.to_spectral(resid);
    let mu = basis.precision_eigenvalues(rho);
    let mut out = DMatrix::zeros(n, t);
    let mut z = vec![0.0; t];
    let mut b = vec![0.0; t];
    let mut rng = rng;
    for k in 0..n {
        for s in 0..t {
            b[s] = rotated[(k, s)] / sigma2;
        }
        if let Some(r) = rng.as_deref_mut() {
            for v in z.iter_mut() {
                *v = r.sample(StandardNormal);
            }
        }
        let x = tridiagonal_draw(mu[k] / tau2, xi, 1.0 / sigma2, &b, &z)?;
        for s in 0..t {
            out[(k, s)] = x[s];
        }
    }
    Ok(out)
}
