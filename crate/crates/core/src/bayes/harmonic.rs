use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Harmonic regressors `(cos 2πω₁t, sin 2πω₁t, …, cos 2πω_Kt, sin 2πω_Kt)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HarmonicDesign {
    frequencies: Vec<f64>,
}

impl HarmonicDesign {
    pub fn new(frequencies: Vec<f64>) -> Result<Self> {
        for (k, &w) in frequencies.iter().enumerate() {
            if !(w > 0.0 && w <= 0.5) {
                return Err(Error::invalid(format!("frequency {w} outside (0, 0.5]")));
            }
            if frequencies[..k].iter().any(|&v| v == w) {
                return Err(Error::invalid(format!("duplicate frequency {w}")));
            }
        }
        Ok(HarmonicDesign { frequencies })
    }

    /// Fourier frequencies `k / period` for the given `k`.
    pub fn fourier(period: usize, ks: &[usize]) -> Result<Self> {
        HarmonicDesign::new(ks.iter().map(|&k| k as f64 / period as f64).collect())
    }

    pub fn frequencies(&self) -> &[f64] {
        &self.frequencies
    }

    /// Number of regressors, `2K`.
    pub fn dim(&self) -> usize {
        2 * self.frequencies.len()
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.dim());
        for &w in &self.frequencies {
            let a = 2.0 * PI * w * t as f64;
            out.push(a.cos());
            out.push(a.sin());
        }
        out
    }

    /// Checks the harmonic design against a training length.
    pub fn check_length(&self, n_times: usize) -> Result<()> {
        if 2 * self.frequencies.len() > n_times {
            return Err(Error::invalid(format!(
                "{} frequencies exceed half the series length {n_times}",
                self.frequencies.len()
            )));
        }
        Ok(())
    }
}

/// Periodogram at Fourier frequencies `k/T`, `k = 1..=T/2`:
/// `|Σ_t (x_t − x̄) e^{−2πi k t/T}|² / T`.
pub fn periodogram(series: &[f64]) -> Result<Vec<(f64, f64)>> {
    let n = series.len();
    if n < 4 {
        return Err(Error::invalid(format!("periodogram needs at least 4 points, got {n}")));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::invalid("series contains non-finite values"));
    }
    let mean = series.iter().sum::<f64>() / n as f64;
    let mut buf: Vec<Complex<f64>> = series.iter().map(|&x| Complex::new(x - mean, 0.0)).collect();
    FftPlanner::new().plan_fft_forward(n).process(&mut buf);
    Ok((1..=n / 2)
        .map(|k| (k as f64 / n as f64, buf[k].norm_sqr() / n as f64))
        .collect())
}

/// The `n` frequencies with the largest average periodogram across series,
/// in increasing order of frequency.
pub fn top_frequencies(series: &[&[f64]], n: usize) -> Result<Vec<f64>> {
    let Some(first) = series.first() else {
        return Err(Error::invalid("no series"));
    };
    let mut acc = periodogram(first)?;
    for s in &series[1..] {
        if s.len() != first.len() {
            return Err(Error::DimensionMismatch("series lengths differ".into()));
        }
        for (a, (_, v)) in acc.iter_mut().zip(periodogram(s)?) {
            a.1 += v;
        }
    }
    acc.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.total_cmp(&b.0)));
    let mut out: Vec<f64> = acc.into_iter().take(n).map(|(f, _)| f).collect();
    out.sort_by(f64::total_cmp);
    Ok(out)
}
