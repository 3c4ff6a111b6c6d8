//! On-disk draw archive.
//!
//! ```text
//! <dir>/meta.json         variant, frequencies, origin time, last observation
//! <dir>/params.csv        draw,beta0,xi,rho,tau2,sigma2,n_clusters
//! <dir>/betas/<m>.csv     cluster,coef_0,...,coef_{2K-1}
//! <dir>/assignments.csv   draw,location_id,cluster
//! <dir>/w_last.csv        draw,location_id,value
//! <dir>/w/<m>.csv         location_id,time_index,value   (only with keep_latent)
//! ```
//!
//! Floats are written in shortest round-trip form, so reading an archive
//! reproduces the draws exactly.

use std::fs;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spatial::{fmt_f64, SpatialGrid};

use super::config::Variant;
use super::gibbs::{Acceptance, FittedModel, PosteriorDraw};
use super::harmonic::HarmonicDesign;
use super::leroux::SpatialBasis;

#[derive(Debug, Serialize, Deserialize)]
struct Meta {
    variant: Variant,
    frequencies: Vec<f64>,
    origin_time: usize,
    last_observed: Vec<f64>,
    n_locations: usize,
    n_draws: usize,
    acceptance_xi: f64,
    acceptance_rho: f64,
}

fn parse_f64(s: &str, what: &str) -> Result<f64> {
    s.trim().parse().map_err(|_| Error::data(format!("{what}: cannot parse `{s}`")))
}

fn parse_usize(s: &str, what: &str) -> Result<usize> {
    s.trim().parse().map_err(|_| Error::data(format!("{what}: cannot parse `{s}`")))
}

pub fn write_archive(fit: &FittedModel, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("betas"))?;
    let n = fit.basis.dim();
    let meta = Meta {
        variant: fit.variant,
        frequencies: fit.design.frequencies().to_vec(),
        origin_time: fit.origin_time,
        last_observed: fit.last_observed.clone(),
        n_locations: n,
        n_draws: fit.draws.len(),
        acceptance_xi: fit.acceptance.xi,
        acceptance_rho: fit.acceptance.rho,
    };
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta)? + "\n")?;

    let mut params = csv::Writer::from_path(dir.join("params.csv"))?;
    params.write_record(["draw", "beta0", "xi", "rho", "tau2", "sigma2", "n_clusters"])?;
    let mut assign = csv::Writer::from_path(dir.join("assignments.csv"))?;
    assign.write_record(["draw", "location_id", "cluster"])?;
    let mut wl = csv::Writer::from_path(dir.join("w_last.csv"))?;
    wl.write_record(["draw", "location_id", "value"])?;
    let p = fit.design.dim();
    let keep_w = fit.draws.iter().any(|d| d.w.is_some());
    if keep_w {
        fs::create_dir_all(dir.join("w"))?;
    }
    for (m, d) in fit.draws.iter().enumerate() {
        params.write_record([
            m.to_string(),
            fmt_f64(d.beta0),
            fmt_f64(d.xi),
            fmt_f64(d.rho),
            fmt_f64(d.tau2),
            fmt_f64(d.sigma2),
            d.n_clusters().to_string(),
        ])?;
        for (i, (c, w)) in d.assignments.iter().zip(&d.w_last).enumerate() {
            assign.write_record([m.to_string(), i.to_string(), c.to_string()])?;
            wl.write_record([m.to_string(), i.to_string(), fmt_f64(*w)])?;
        }
        let mut betas = csv::Writer::from_path(dir.join("betas").join(format!("{m}.csv")))?;
        let mut header = vec!["cluster".to_string()];
        header.extend((0..p).map(|j| format!("coef_{j}")));
        betas.write_record(&header)?;
        for (c, b) in d.betas.iter().enumerate() {
            let mut row = vec![c.to_string()];
            row.extend(b.iter().map(|v| fmt_f64(*v)));
            betas.write_record(&row)?;
        }
        betas.flush()?;
        if let Some(w) = &d.w {
            let t = w.len() / n;
            let mut out = csv::Writer::from_path(dir.join("w").join(format!("{m}.csv")))?;
            out.write_record(["location_id", "time_index", "value"])?;
            for i in 0..n {
                for s in 0..t {
                    out.write_record([i.to_string(), s.to_string(), fmt_f64(w[i * t + s])])?;
                }
            }
            out.flush()?;
        }
    }
    params.flush()?;
    assign.flush()?;
    wl.flush()?;
    Ok(())
}

fn read_rows(path: &Path) -> Result<Vec<csv::StringRecord>> {
    let mut r = csv::Reader::from_path(path)?;
    r.records().map(|rec| rec.map_err(Error::from)).collect()
}

/// Reads an archive written by [`write_archive`] for the given grid.
pub fn read_archive(dir: &Path, grid: &SpatialGrid) -> Result<FittedModel> {
    let meta: Meta = serde_json::from_reader(fs::File::open(dir.join("meta.json"))?)?;
    let n = grid.n_locations();
    if meta.n_locations != n {
        return Err(Error::LocationMismatch {
            expected: n,
            actual: meta.n_locations,
        });
    }
    let design = HarmonicDesign::new(meta.frequencies.clone())?;
    let mut draws = Vec::with_capacity(meta.n_draws);
    for (m, row) in read_rows(&dir.join("params.csv"))?.iter().enumerate() {
        if row.len() != 7 || parse_usize(&row[0], "params.csv draw")? != m {
            return Err(Error::data(format!("params.csv row {} malformed", m + 1)));
        }
        let k = parse_usize(&row[6], "n_clusters")?;
        let betas: Vec<Vec<f64>> = read_rows(&dir.join("betas").join(format!("{m}.csv")))?
            .iter()
            .map(|r| r.iter().skip(1).map(|v| parse_f64(v, "coefficient")).collect::<Result<Vec<f64>>>())
            .collect::<Result<_>>()?;
        if betas.len() != k || betas.iter().any(|b| b.len() != design.dim()) {
            return Err(Error::data(format!("betas/{m}.csv does not match params.csv")));
        }
        let w = dir.join("w").join(format!("{m}.csv"));
        let w = if w.exists() {
            Some(
                read_rows(&w)?
                    .iter()
                    .map(|r| parse_f64(&r[2], "latent value"))
                    .collect::<Result<Vec<f64>>>()?,
            )
        } else {
            None
        };
        draws.push(PosteriorDraw {
            beta0: parse_f64(&row[1], "beta0")?,
            xi: parse_f64(&row[2], "xi")?,
            rho: parse_f64(&row[3], "rho")?,
            tau2: parse_f64(&row[4], "tau2")?,
            sigma2: parse_f64(&row[5], "sigma2")?,
            betas,
            assignments: vec![usize::MAX; n],
            w_last: vec![f64::NAN; n],
            w,
        });
    }
    if draws.len() != meta.n_draws {
        return Err(Error::data(format!("expected {} draws, found {}", meta.n_draws, draws.len())));
    }
    let n_draws = draws.len();
    let locate = |row: &csv::StringRecord, file: &str| -> Result<(usize, usize)> {
        let m = parse_usize(&row[0], file)?;
        let i = parse_usize(&row[1], file)?;
        if m >= n_draws || i >= n {
            return Err(Error::data(format!("{file}: draw {m} location {i} out of range")));
        }
        Ok((m, i))
    };
    for row in read_rows(&dir.join("assignments.csv"))? {
        let (m, i) = locate(&row, "assignments.csv")?;
        let c = parse_usize(&row[2], "cluster")?;
        draws[m].assignments[i] = c;
    }
    for row in read_rows(&dir.join("w_last.csv"))? {
        let (m, i) = locate(&row, "w_last.csv")?;
        draws[m].w_last[i] = parse_f64(&row[2], "w_last")?;
    }
    for (m, d) in draws.iter().enumerate() {
        if d.assignments.iter().any(|&c| c >= d.betas.len()) || d.w_last.iter().any(|v| v.is_nan()) {
            return Err(Error::data(format!("draw {m} is incomplete or refers to a missing cluster")));
        }
    }
    Ok(FittedModel {
        variant: meta.variant,
        design,
        basis: Arc::new(SpatialBasis::new(grid)),
        origin_time: meta.origin_time,
        last_observed: meta.last_observed,
        draws,
        acceptance: Acceptance {
            xi: meta.acceptance_xi,
            rho: meta.acceptance_rho,
        },
    })
}
