//! Data ingestion and the rolling-window model comparison.
//!
//! Each window trains every variant on `train_len` steps, forecasts from the
//! last training step, scores the realized values with LPDS at each horizon,
//! and monitors all properties on both the predictive ensemble and the
//! realized trace. Windows and variants run concurrently; every task draws
//! its seed from the master seed and its (window, variant) position, so the
//! output does not depend on scheduling.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::Read;
use std::path::Path;
use std::sync::Arc;

use log::{info, warn};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::assess::{assess_property, AssessmentReport};
use crate::bayes::{
    cumulative_log_bayes_factor, gibbs_run_with_basis, lpds, predictive_draws, simulate_panel, write_archive,
    BnpConfig, HarmonicDesign, Hyperparams, McmcConfig, ModelConfig, SpatialBasis, TrueParams, Variant,
};
use crate::error::{Error, Result};
use crate::par;
use crate::spatial::{fmt_f64, GridSpec, Panel, SpatialGrid, StaticLabels};
use crate::strel::{monitor, monitor_ensemble, Formula, Mode, PropertyParams};

/// Rectangular block of a grid, in rows and columns.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Selection {
    pub row0: usize,
    pub col0: usize,
    pub rows: usize,
    pub cols: usize,
}

/// Result of [`ingest`]: values summed per cell and slot on the selected grid.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub panel: Panel,
    pub grid: SpatialGrid,
    pub labels: StaticLabels,
    /// Raw cell id of each location.
    pub cell_ids: Vec<usize>,
    /// Raw time slot value of each time index.
    pub slots: Vec<i64>,
}

/// Reads raw activity records `cell_id,time_slot,activity...` (any header
/// names), sums every activity column over all records of a cell and slot,
/// and returns the panel for the selected block.
///
/// Slots must be equally spaced with no gaps; blank activity fields count as
/// zero; aggregated values must be strictly positive.
pub fn ingest<R: Read>(raw: R, spec: &GridSpec, selection: Option<Selection>) -> Result<Ingested> {
    let (full, full_labels) = spec.build()?;
    let sel = selection.unwrap_or(Selection {
        row0: 0,
        col0: 0,
        rows: full.n_rows(),
        cols: full.n_cols(),
    });
    let (grid, map) = full.queen_subgrid(sel.row0, sel.col0, sel.rows, sel.cols)?;
    let labels = full_labels.restrict(&map);
    let mut local = HashMap::new();
    for (k, &old) in map.iter().enumerate() {
        local.insert(old, k);
    }

    let mut rdr = csv::ReaderBuilder::new().flexible(true).from_reader(raw);
    let width = rdr.headers()?.len();
    if width < 3 {
        return Err(Error::data("raw data needs a cell id, a time slot and at least one activity column"));
    }
    let mut sums: BTreeMap<(usize, i64), f64> = BTreeMap::new();
    for (line, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = line + 2;
        let cell: usize = rec
            .get(0)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("row {row}: bad cell id")))?;
        let slot: i64 = rec
            .get(1)
            .and_then(|v| v.trim().parse().ok())
            .ok_or_else(|| Error::data(format!("row {row}: bad time slot")))?;
        if cell < spec.id_base || cell - spec.id_base >= full.n_locations() {
            return Err(Error::data(format!("row {row}: unknown cell id {cell}")));
        }
        let mut total = 0.0;
        for field in rec.iter().skip(2) {
            let field = field.trim();
            if field.is_empty() {
                continue;
            }
            total += field
                .parse::<f64>()
                .map_err(|_| Error::data(format!("row {row}: bad activity value `{field}`")))?;
        }
        if let Some(&k) = local.get(&(cell - spec.id_base)) {
            *sums.entry((k, slot)).or_insert(0.0) += total;
        }
    }

    let mut slots: Vec<i64> = sums.keys().map(|&(_, s)| s).collect();
    slots.sort_unstable();
    slots.dedup();
    if slots.is_empty() {
        return Err(Error::data("no records fall inside the selection"));
    }
    if slots.len() > 1 {
        let step = slots[1] - slots[0];
        for w in slots.windows(2) {
            if w[1] - w[0] != step {
                return Err(Error::data(format!(
                    "gap in time slots between {} and {} (expected spacing {step})",
                    w[0], w[1]
                )));
            }
        }
    }
    let n = grid.n_locations();
    let t = slots.len();
    let index: HashMap<i64, usize> = slots.iter().enumerate().map(|(k, &s)| (s, k)).collect();
    let mut values = vec![f64::NAN; n * t];
    for (&(k, slot), &v) in &sums {
        values[k * t + index[&slot]] = v;
    }
    for k in 0..n {
        for s in 0..t {
            let v = values[k * t + s];
            if v.is_nan() {
                return Err(Error::data(format!(
                    "missing slot {} for cell {}",
                    slots[s],
                    map[k] + spec.id_base
                )));
            }
            if v <= 0.0 {
                return Err(Error::data(format!(
                    "nonpositive aggregate {v} at cell {}, slot {}",
                    map[k] + spec.id_base,
                    slots[s]
                )));
            }
        }
    }
    Ok(Ingested {
        panel: Panel::new(n, t, 0, values)?,
        grid,
        labels,
        cell_ids: map.iter().map(|m| m + spec.id_base).collect(),
        slots,
    })
}

fn default_step() -> usize {
    1
}
fn default_horizons() -> Vec<usize> {
    vec![1, 2, 3]
}
fn default_variants() -> Vec<Variant> {
    vec![Variant::Baseline, Variant::CarAr]
}

/// Rolling-window comparison settings. The first variant is the reference
/// for Bayes factors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    /// Training window length in steps.
    pub train_len: usize,
    /// Shift between consecutive windows in steps.
    #[serde(default = "default_step")]
    pub step: usize,
    pub n_windows: usize,
    /// Time index of the first training step.
    #[serde(default)]
    pub first_start: usize,
    #[serde(default = "default_horizons")]
    pub horizons: Vec<usize>,
    #[serde(default)]
    pub properties: PropertyParams,
    #[serde(default = "default_variants")]
    pub variants: Vec<Variant>,
    pub frequencies: Vec<f64>,
    #[serde(default)]
    pub hyper: Hyperparams,
    #[serde(default)]
    pub bnp: Option<BnpConfig>,
    #[serde(default)]
    pub mcmc: McmcConfig,
    #[serde(default)]
    pub seed: u64,
    /// Worker threads; 0 uses all cores.
    #[serde(default)]
    pub workers: usize,
    /// Also write each fit's draw archive.
    #[serde(default)]
    pub save_draws: bool,
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(fs::File::open(path)?)?)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_windows == 0 || self.step == 0 {
            return Err(Error::invalid("need at least one window and a positive step"));
        }
        if self.horizons.is_empty() || self.horizons.contains(&0) {
            return Err(Error::invalid("horizons must be at least 1"));
        }
        if self.variants.is_empty() {
            return Err(Error::invalid("no model variants"));
        }
        let names: Vec<String> = self.variants.iter().map(Variant::name).collect();
        if (1..names.len()).any(|k| names[..k].contains(&names[k])) {
            return Err(Error::invalid("variants must be distinct"));
        }
        let k2 = 2 * self.frequencies.len();
        if self.train_len <= k2 + 2 {
            return Err(Error::invalid(format!(
                "training length {} must exceed 2K + 2 = {}",
                self.train_len,
                k2 + 2
            )));
        }
        self.properties.validate()?;
        for v in &self.variants {
            self.model_config(*v, 0).validate()?;
        }
        Ok(())
    }

    pub fn model_config(&self, variant: Variant, seed: u64) -> ModelConfig {
        ModelConfig {
            variant,
            frequencies: self.frequencies.clone(),
            hyper: self.hyper.clone(),
            bnp: if variant.is_bnp() {
                Some(self.bnp.clone().unwrap_or_default())
            } else {
                None
            },
            mcmc: self.mcmc.clone(),
            seed,
        }
    }

    /// Forecast length covering every horizon and every property.
    pub fn forecast_len(&self, formulas: &[(String, Formula)]) -> usize {
        let h = self.horizons.iter().copied().max().unwrap_or(1);
        formulas.iter().map(|(_, f)| f.temporal_depth()).fold(h, usize::max)
    }

    /// Training start of window `w`.
    pub fn window_start(&self, w: usize) -> usize {
        self.first_start + w * self.step
    }
}

/// Seed of the `(window, variant)` task, independent of execution order.
pub fn task_seed(master: u64, window: usize, variant: usize) -> u64 {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((window as u64) << 16) | variant as u64);
    rng.next_u64()
}

/// LPDS and assessments of one variant in one window.
#[derive(Debug, Clone)]
pub struct WindowResult {
    pub window: usize,
    pub variant: Variant,
    /// `(horizon, lpds)`
    pub lpds: Vec<(usize, f64)>,
    pub report: AssessmentReport,
}

#[derive(Debug, Clone, Default)]
pub struct PipelineOutcome {
    pub results: Vec<WindowResult>,
    /// `(window, variant name, message)` for windows that failed.
    pub failures: Vec<(usize, String, String)>,
    /// Per non-reference variant and horizon: cumulative log Bayes factor
    /// against the first variant over windows where both succeeded.
    pub bayes_factors: Vec<(String, usize, Vec<(usize, f64)>)>,
}

fn run_task(
    cfg: &PipelineConfig,
    panel: &Panel,
    grid: &SpatialGrid,
    labels: &StaticLabels,
    basis: &Arc<SpatialBasis>,
    formulas: &[(String, Formula)],
    window: usize,
    variant_index: usize,
    out: Option<&Path>,
) -> Result<WindowResult> {
    let variant = cfg.variants[variant_index];
    let seed = task_seed(cfg.seed, window, variant_index);
    let start = cfg.window_start(window);
    let train = panel.window(start, cfg.train_len)?;
    let model = cfg.model_config(variant, seed);
    let fit = gibbs_run_with_basis(&train, grid, basis.clone(), &model)?;
    let origin = start + cfg.train_len - 1;

    let mut scores = Vec::new();
    for &h in &cfg.horizons {
        scores.push((h, lpds(&fit, h, &panel.column(origin + h))?));
    }

    let horizon = cfg.forecast_len(formulas);
    let ensemble = predictive_draws(&fit, horizon, seed ^ 0x9e37_79b9_7f4a_7c15)?;
    let observed = panel.trace_from(origin, horizon)?;
    let mut report = AssessmentReport::default();
    for (name, f) in formulas {
        let pred_b = monitor_ensemble(f, &ensemble, grid, labels, Mode::Boolean)?;
        let pred_r = monitor_ensemble(f, &ensemble, grid, labels, Mode::Robustness)?;
        let obs_b = monitor(f, &observed, grid, labels, Mode::Boolean)?;
        let obs_r = monitor(f, &observed, grid, labels, Mode::Robustness)?;
        report.push(window, assess_property(name, &pred_b, &pred_r, &obs_b, &obs_r)?);
    }

    if let Some(out) = out {
        let dir = out.join(format!("window_{window:03}")).join(variant.name());
        fs::create_dir_all(&dir)?;
        report.write_report_csv(fs::File::create(dir.join("report.csv"))?)?;
        report.write_fields_csv(fs::File::create(dir.join("fields.csv"))?)?;
        let mut w = csv::Writer::from_path(dir.join("lpds.csv"))?;
        w.write_record(["horizon", "lpds"])?;
        for (h, v) in &scores {
            w.write_record([h.to_string(), fmt_f64(*v)])?;
        }
        w.flush()?;
        if cfg.save_draws {
            write_archive(&fit, &dir.join("draws"))?;
        }
    }
    Ok(WindowResult {
        window,
        variant,
        lpds: scores,
        report,
    })
}

/// Runs the rolling-window comparison. With `out`, writes per-window files
/// and the summaries `lpds.csv`, `bayes_factors.csv` (two or more variants),
/// `<variant>/report.csv`, `<variant>/fields.csv` and `failures.csv`.
pub fn run_pipeline(
    cfg: &PipelineConfig,
    panel: &Panel,
    grid: &SpatialGrid,
    labels: &StaticLabels,
    out: Option<&Path>,
) -> Result<PipelineOutcome> {
    cfg.validate()?;
    if panel.n_locations() != grid.n_locations() {
        return Err(Error::LocationMismatch {
            expected: grid.n_locations(),
            actual: panel.n_locations(),
        });
    }
    panel.ensure_positive()?;
    let formulas = cfg.properties.formulas()?;
    for (name, f) in &formulas {
        if let Some(l) = f.labels().into_iter().find(|l| !labels.contains_label(l)) {
            return Err(Error::UnknownLabel(format!("{l} (needed by {name})")));
        }
    }
    let last_start = cfg.window_start(cfg.n_windows - 1);
    let needed = last_start + cfg.train_len + cfg.forecast_len(&formulas);
    if needed > panel.n_times() {
        return Err(Error::data(format!(
            "data has {} steps but the windows need {needed}",
            panel.n_times()
        )));
    }
    if let Some(out) = out {
        fs::create_dir_all(out)?;
    }

    let basis = Arc::new(SpatialBasis::new(grid));
    let n_var = cfg.variants.len();
    let tasks: Vec<(usize, usize)> = (0..cfg.n_windows).flat_map(|w| (0..n_var).map(move |v| (w, v))).collect();
    let results = par::with_workers(cfg.workers, || {
        par::map(&tasks, |&(w, v)| run_task(cfg, panel, grid, labels, &basis, &formulas, w, v, out))
    });

    let mut outcome = PipelineOutcome::default();
    for (&(w, v), r) in tasks.iter().zip(results) {
        match r {
            Ok(res) => outcome.results.push(res),
            Err(e) => {
                warn!("window {w}, {}: {e}", cfg.variants[v].name());
                outcome.failures.push((w, cfg.variants[v].name(), e.to_string()));
            }
        }
    }

    let lookup = |w: usize, v: Variant| outcome.results.iter().find(|r| r.window == w && r.variant == v);
    if n_var >= 2 {
        let reference = cfg.variants[0];
        for &v in &cfg.variants[1..] {
            for (k, &h) in cfg.horizons.iter().enumerate() {
                let mut windows = Vec::new();
                let (mut a, mut b) = (Vec::new(), Vec::new());
                for w in 0..cfg.n_windows {
                    if let (Some(x), Some(y)) = (lookup(w, v), lookup(w, reference)) {
                        windows.push(w);
                        a.push(x.lpds[k].1);
                        b.push(y.lpds[k].1);
                    }
                }
                let cum = cumulative_log_bayes_factor(&a, &b)?;
                outcome
                    .bayes_factors
                    .push((v.name(), h, windows.into_iter().zip(cum).collect()));
            }
        }
    }
    info!(
        "{} of {} window fits succeeded",
        outcome.results.len(),
        tasks.len()
    );
    if let Some(out) = out {
        write_summaries(cfg, &outcome, out)?;
    }
    Ok(outcome)
}

fn write_summaries(cfg: &PipelineConfig, outcome: &PipelineOutcome, out: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(out.join("lpds.csv"))?;
    w.write_record(["window_id", "variant", "horizon", "lpds"])?;
    for r in &outcome.results {
        for (h, v) in &r.lpds {
            w.write_record([r.window.to_string(), r.variant.name(), h.to_string(), fmt_f64(*v)])?;
        }
    }
    w.flush()?;

    if cfg.variants.len() >= 2 {
        let mut w = csv::Writer::from_path(out.join("bayes_factors.csv"))?;
        w.write_record(["window_id", "variant", "reference", "horizon", "cumulative_log_bf"])?;
        let reference = cfg.variants[0].name();
        for (name, h, series) in &outcome.bayes_factors {
            for (win, v) in series {
                w.write_record([win.to_string(), name.clone(), reference.clone(), h.to_string(), fmt_f64(*v)])?;
            }
        }
        w.flush()?;
    }

    for v in &cfg.variants {
        let mut report = AssessmentReport::default();
        for r in outcome.results.iter().filter(|r| r.variant == *v) {
            report.entries.extend(r.report.entries.iter().cloned());
        }
        let dir = out.join(v.name());
        fs::create_dir_all(&dir)?;
        report.write_report_csv(fs::File::create(dir.join("report.csv"))?)?;
        report.write_fields_csv(fs::File::create(dir.join("fields.csv"))?)?;
    }

    let mut w = csv::Writer::from_path(out.join("failures.csv"))?;
    w.write_record(["window_id", "variant", "message"])?;
    for (win, name, msg) in &outcome.failures {
        w.write_record([win.to_string(), name.clone(), msg.clone()])?;
    }
    w.flush()?;
    Ok(())
}

/// Settings of the bundled synthetic dataset generator.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub rows: usize,
    pub cols: usize,
    pub n_times: usize,
    /// Harmonic frequencies of the seasonal mean.
    pub frequencies: Vec<f64>,
    pub truth: TrueParams,
    /// Locations labelled `hospital`.
    pub hospitals: Vec<usize>,
    pub seed: u64,
}

impl SyntheticSpec {
    /// A 7×7 grid over 600 ten-minute steps with a daily and half-daily
    /// cycle, a persistent CAR-AR field and levels around 500.
    pub fn default_7x7() -> Self {
        let rows = 7;
        let cols = 7;
        let n = rows * cols;
        SyntheticSpec {
            rows,
            cols,
            n_times: 600,
            frequencies: vec![1.0 / 144.0, 1.0 / 72.0],
            truth: TrueParams {
                beta0: 500f64.ln() + 0.1,
                betas: vec![vec![0.3, -0.2, 0.1, 0.05]],
                assignments: vec![0; n],
                xi: 0.9,
                rho: 0.9,
                tau2: 0.1,
                sigma2: 0.01,
            },
            hospitals: vec![8, 24, 40],
            seed: 20_231_101,
        }
    }

    /// The panel and the grid description with labels.
    pub fn generate(&self) -> Result<(Panel, GridSpec)> {
        let mut spec = GridSpec::queen(self.rows, self.cols);
        spec.labels.insert("hospital".into(), self.hospitals.clone());
        let (grid, _) = spec.build()?;
        let design = HarmonicDesign::new(self.frequencies.clone())?;
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let (panel, _) = simulate_panel(&grid, &design, &self.truth, 0, self.n_times, &mut rng)?;
        Ok((panel, spec))
    }
}
