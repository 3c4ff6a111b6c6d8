use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use clap::{Args, ValueEnum};
use log::info;
use serde_json::Value;

use strelcast::assess::{assess_property, AssessmentReport};
use strelcast::bayes::{
    cumulative_log_bayes_factor, gibbs_run, lpds, periodogram, predictive_draws, read_archive, top_frequencies,
    write_archive, McmcConfig, ModelConfig, Variant,
};
use strelcast::par;
use strelcast::pipeline::{ingest as ingest_raw, run_pipeline, PipelineConfig, Selection, SyntheticSpec};
use strelcast::spatial::{fmt_f64, AdjacencySpec};
use strelcast::strel::props::minutes_to_steps;
use strelcast::strel::{monitor as monitor_one, monitor_ensemble, parse_script, Formula, Mode, PropertyParams};
use strelcast::{GridSpec, Panel, SpatialGrid, StaticLabels, Trace};

use crate::{Global, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

fn out_path(g: &Global) -> Result<&Path> {
    g.out.as_deref().ok_or_else(|| usage("this command needs --out"))
}

fn read_json(path: &Path) -> Result<Value> {
    let file = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    serde_json::from_reader(file)
        .map_err(strelcast::Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

fn load_grid(path: &Path) -> Result<(GridSpec, SpatialGrid, StaticLabels)> {
    let spec = GridSpec::load(path).with_context(|| format!("reading grid {}", path.display()))?;
    let (grid, labels) = spec.build()?;
    Ok((spec, grid, labels))
}

fn load_panel(path: &Path) -> Result<Panel> {
    Panel::load(path).with_context(|| format!("reading {}", path.display()))
}

fn parse_list<T: std::str::FromStr>(s: &str, what: &str) -> Result<Vec<T>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|p| p.trim().parse().map_err(|_| usage(format!("bad {what} `{p}`"))))
        .collect()
}

/// Accepts the output directory names: `baseline`, `car_ar`, `car_ar_bnp`, `car_ar_rho<r>`.
pub fn parse_variant(s: &str) -> Result<Variant> {
    Ok(match s {
        "baseline" => Variant::Baseline,
        "car_ar" => Variant::CarAr,
        "car_ar_bnp" => Variant::CarArBnp,
        other => match other.strip_prefix("car_ar_rho") {
            Some(r) => Variant::CarArRhoFixed(r.parse().map_err(|_| usage(format!("bad fixed rho in `{other}`")))?),
            None => return Err(usage(format!("unknown variant `{other}`"))),
        },
    })
}

/// Property windows in minutes, converted with `--step-minutes`.
fn properties_from(value: Option<&Value>, step_minutes: f64) -> Result<PropertyParams> {
    let Some(v) = value else {
        return Ok(PropertyParams::default());
    };
    if let Some(p) = v.get("properties") {
        return Ok(serde_json::from_value(p.clone()).map_err(strelcast::Error::from)?);
    }
    let Some(m) = v.get("property_minutes") else {
        return Ok(PropertyParams::default());
    };
    let def = PropertyParams::default();
    let num = |k: &str, d: f64| m.get(k).and_then(Value::as_f64).unwrap_or(d);
    let hops = |k: &str, d: usize| m.get(k).and_then(Value::as_u64).map_or(d, |x| x as usize);
    Ok(PropertyParams {
        c: num("c", def.c),
        h_p1: minutes_to_steps(num("p1", 30.0), step_minutes)?,
        h_p2: minutes_to_steps(num("p2", 10.0), step_minutes)?,
        h_p3: minutes_to_steps(num("p3", 30.0), step_minutes)?,
        d_p2: hops("d_p2", def.d_p2),
        d_p3: hops("d_p3", def.d_p3),
        d_p4: hops("d_p4", def.d_p4),
    })
}

/// Named formulas from a script, or the four built-in properties.
fn formulas_for(g: &Global, script: Option<&Path>, labels: &StaticLabels) -> Result<Vec<(String, Formula)>> {
    if let Some(path) = script {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let parsed = parse_script(&text, Some(labels)).with_context(|| format!("in {}", path.display()))?;
        return Ok(parsed.into_iter().map(|nf| (nf.name, nf.formula)).collect());
    }
    let cfg = g.config.as_deref().map(read_json).transpose()?;
    Ok(properties_from(cfg.as_ref(), g.step_minutes)?.formulas()?)
}

#[derive(Args, Debug)]
pub struct IngestArgs {
    /// Raw CSV: cell id, time slot, activity columns.
    #[arg(long)]
    raw: PathBuf,
    /// Grid description JSON of the full raw grid.
    #[arg(long)]
    grid: PathBuf,
    /// Subgrid `row0,col0,rows,cols`.
    #[arg(long)]
    select: Option<String>,
}

pub fn ingest(g: &Global, a: IngestArgs) -> Result<()> {
    let out = out_path(g)?;
    let spec = GridSpec::load(&a.grid).with_context(|| format!("reading grid {}", a.grid.display()))?;
    let selection = match &a.select {
        None => None,
        Some(s) => match parse_list::<usize>(s, "selection")?.as_slice() {
            &[row0, col0, rows, cols] => Some(Selection { row0, col0, rows, cols }),
            _ => return Err(usage("--select needs row0,col0,rows,cols")),
        },
    };
    let file = fs::File::open(&a.raw).with_context(|| format!("opening {}", a.raw.display()))?;
    let ing = ingest_raw(file, &spec, selection).with_context(|| format!("ingesting {}", a.raw.display()))?;

    fs::create_dir_all(out)?;
    ing.panel.save(&out.join("trace.csv"))?;
    let mut sub = GridSpec::queen(ing.grid.n_rows(), ing.grid.n_cols());
    if matches!(spec.adjacency, AdjacencySpec::Edges(_)) {
        let edges = (0..ing.grid.n_locations())
            .flat_map(|i| ing.grid.neighbors(i).iter().filter(move |&&j| j > i).map(move |&j| (i, j)))
            .collect();
        sub.adjacency = AdjacencySpec::Edges(edges);
    }
    for name in ing.labels.names() {
        sub.labels.insert(name.to_string(), ing.labels.ids(name).collect());
    }
    sub.save(&out.join("grid.json"))?;
    let mut w = csv::Writer::from_path(out.join("cells.csv"))?;
    w.write_record(["location_id", "cell_id"])?;
    for (i, c) in ing.cell_ids.iter().enumerate() {
        w.write_record([i.to_string(), c.to_string()])?;
    }
    w.flush()?;
    let mut w = csv::Writer::from_path(out.join("slots.csv"))?;
    w.write_record(["time_index", "slot"])?;
    for (t, s) in ing.slots.iter().enumerate() {
        w.write_record([t.to_string(), s.to_string()])?;
    }
    w.flush()?;
    info!("{} locations x {} slots", ing.panel.n_locations(), ing.panel.n_times());
    Ok(())
}

#[derive(Args, Debug)]
pub struct SpectrumArgs {
    /// Trace CSV.
    #[arg(long)]
    data: PathBuf,
    /// Print only the `n` strongest frequencies, comma separated.
    #[arg(long)]
    top_n: Option<usize>,
    /// Use the log of the values, as the models do.
    #[arg(long)]
    log: bool,
}

pub fn spectrum(g: &Global, a: SpectrumArgs) -> Result<()> {
    let panel = load_panel(&a.data)?;
    let series: Vec<Vec<f64>> = (0..panel.n_locations())
        .map(|i| {
            let s = panel.series(i);
            if a.log {
                s.iter().map(|v| v.ln()).collect()
            } else {
                s.to_vec()
            }
        })
        .collect();
    let mut sink: Box<dyn Write> = match &g.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    if let Some(n) = a.top_n {
        let refs: Vec<&[f64]> = series.iter().map(Vec::as_slice).collect();
        let top = top_frequencies(&refs, n)?;
        writeln!(sink, "{}", top.iter().map(|f| fmt_f64(*f)).collect::<Vec<_>>().join(","))?;
        return Ok(());
    }
    let mut avg: Vec<(f64, f64)> = Vec::new();
    for s in &series {
        let p = periodogram(s)?;
        if avg.is_empty() {
            avg = p;
        } else {
            for (a, (_, v)) in avg.iter_mut().zip(p) {
                a.1 += v;
            }
        }
    }
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["frequency", "period", "power"])?;
    let n = series.len() as f64;
    for (f, p) in avg {
        w.write_record([fmt_f64(f), fmt_f64(1.0 / f), fmt_f64(p / n)])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Trace CSV with the training data.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    /// Variant: baseline, car_ar, car_ar_bnp or car_ar_rho<r>. Overrides the configuration.
    #[arg(long)]
    variant: Option<String>,
    /// Harmonic frequencies in cycles per step, comma separated.
    #[arg(long)]
    frequencies: Option<String>,
    /// Use the `n` strongest periodogram peaks of the log data as frequencies.
    #[arg(long, conflicts_with = "frequencies")]
    top_n: Option<usize>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    burnin: Option<usize>,
    #[arg(long)]
    thin: Option<usize>,
    /// Keep every draw's full latent field in the archive.
    #[arg(long)]
    keep_latent: bool,
}

pub fn fit(g: &Global, a: FitArgs) -> Result<()> {
    let out = out_path(g)?;
    let panel = load_panel(&a.data)?;
    let (_, grid, _) = load_grid(&a.grid)?;
    let mut cfg = match &g.config {
        Some(p) => ModelConfig::load(p).with_context(|| format!("reading {}", p.display()))?,
        None => ModelConfig {
            variant: Variant::CarAr,
            frequencies: Vec::new(),
            hyper: Default::default(),
            bnp: None,
            mcmc: McmcConfig::default(),
            seed: 0,
        },
    };
    if let Some(v) = &a.variant {
        cfg.variant = parse_variant(v)?;
    }
    if let Some(f) = &a.frequencies {
        cfg.frequencies = parse_list(f, "frequency")?;
    }
    if let Some(n) = a.top_n {
        panel.ensure_positive()?;
        let logs: Vec<Vec<f64>> = (0..panel.n_locations())
            .map(|i| panel.series(i).iter().map(|v| v.ln()).collect())
            .collect();
        let refs: Vec<&[f64]> = logs.iter().map(Vec::as_slice).collect();
        cfg.frequencies = top_frequencies(&refs, n)?;
    }
    if cfg.frequencies.is_empty() {
        return Err(usage("no frequencies: pass --frequencies, --top-n or a configuration"));
    }
    if let Some(x) = a.iters {
        cfg.mcmc.iters = x;
    }
    if let Some(x) = a.burnin {
        cfg.mcmc.burnin = x;
    }
    if let Some(x) = a.thin {
        cfg.mcmc.thin = x;
    }
    cfg.mcmc.keep_latent |= a.keep_latent;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if cfg.variant.is_bnp() && cfg.bnp.is_none() {
        cfg.bnp = Some(cfg.bnp_or_default());
    }
    let fit = par::with_workers(g.workers.unwrap_or(0), || gibbs_run(&panel, &grid, &cfg))?;
    write_archive(&fit, out)?;
    info!(
        "{} draws; acceptance xi {:.2}, rho {:.2}",
        fit.draws.len(),
        fit.acceptance.xi,
        fit.acceptance.rho
    );
    Ok(())
}

#[derive(Args, Debug)]
pub struct PredictArgs {
    /// Draw archive directory written by `fit`.
    #[arg(long)]
    draws: PathBuf,
    #[arg(long)]
    grid: PathBuf,
    /// Steps ahead of the last training step.
    #[arg(long)]
    horizon: usize,
    /// Trace CSV holding the realized values; enables LPDS scoring.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Window id written to the LPDS table.
    #[arg(long, default_value_t = 0)]
    window_id: usize,
}

pub fn predict(g: &Global, a: PredictArgs) -> Result<()> {
    let out = out_path(g)?;
    if a.horizon == 0 {
        return Err(usage("--horizon must be at least 1"));
    }
    let (_, grid, _) = load_grid(&a.grid)?;
    let fit = read_archive(&a.draws, &grid).with_context(|| format!("reading archive {}", a.draws.display()))?;
    let seed = g.seed.unwrap_or(0);
    let ens = par::with_workers(g.workers.unwrap_or(0), || predictive_draws(&fit, a.horizon, seed))?;
    let dir = out.join("ensemble");
    fs::create_dir_all(&dir)?;
    for (m, t) in ens.iter().enumerate() {
        t.save(&dir.join(format!("{m}.csv")))?;
    }
    if let Some(path) = &a.data {
        let panel = load_panel(path)?;
        let mut w = csv::Writer::from_path(out.join("lpds.csv"))?;
        w.write_record(["window_id", "variant", "horizon", "lpds"])?;
        for h in 1..=a.horizon {
            let t = fit.origin_time + h;
            if t < panel.start() || t >= panel.start() + panel.n_times() {
                return Err(strelcast::Error::Data(format!("{} has no values at time {t}", path.display())).into());
            }
            let score = lpds(&fit, h, &panel.column(t - panel.start()))?;
            w.write_record([a.window_id.to_string(), fit.variant.name(), h.to_string(), fmt_f64(score)])?;
        }
        w.flush()?;
    }
    Ok(())
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Boolean,
    Robustness,
    Both,
}

impl ModeArg {
    fn modes(self) -> Vec<Mode> {
        match self {
            ModeArg::Boolean => vec![Mode::Boolean],
            ModeArg::Robustness => vec![Mode::Robustness],
            ModeArg::Both => vec![Mode::Boolean, Mode::Robustness],
        }
    }
}

#[derive(Args, Debug)]
pub struct MonitorArgs {
    #[arg(long)]
    grid: PathBuf,
    /// Trace CSV to verify.
    #[arg(long, conflicts_with = "ensemble", required_unless_present = "ensemble")]
    trace: Option<PathBuf>,
    /// Directory of predictive traces `<m>.csv`, as written by `predict`.
    #[arg(long)]
    ensemble: Option<PathBuf>,
    /// Anchor the trace at this time index instead of its first one.
    #[arg(long, requires = "trace")]
    origin: Option<usize>,
    /// Property script with `name := formula` lines; defaults to P1..P4.
    #[arg(long)]
    properties: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ModeArg::Both)]
    mode: ModeArg,
}

fn read_ensemble(dir: &Path) -> Result<Vec<Trace>> {
    let mut files: Vec<(usize, PathBuf)> = Vec::new();
    for entry in fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let path = entry?.path();
        if let Some(m) = path.file_stem().and_then(|s| s.to_str()).and_then(|s| s.parse().ok()) {
            if path.extension().is_some_and(|e| e == "csv") {
                files.push((m, path));
            }
        }
    }
    files.sort();
    if files.is_empty() {
        return Err(strelcast::Error::EmptyEnsemble.into());
    }
    files
        .iter()
        .map(|(_, p)| Trace::load(p).with_context(|| format!("reading {}", p.display())))
        .collect()
}

pub fn monitor(g: &Global, a: MonitorArgs) -> Result<()> {
    let out = out_path(g)?;
    let (_, grid, labels) = load_grid(&a.grid)?;
    let formulas = formulas_for(g, a.properties.as_deref(), &labels)?;
    let depth = formulas.iter().map(|(_, f)| f.temporal_depth()).max().unwrap_or(0);
    par::with_workers(g.workers.unwrap_or(0), || -> Result<()> {
        if let Some(path) = &a.trace {
            let panel = load_panel(path)?;
            let trace = match a.origin {
                Some(t) if t < panel.start() || t + depth >= panel.start() + panel.n_times() => {
                    return Err(strelcast::Error::Data(format!(
                        "origin {t} plus horizon {depth} is outside the trace's times {}..{}",
                        panel.start(),
                        panel.start() + panel.n_times()
                    ))
                    .into())
                }
                Some(t) => panel.trace_from(t - panel.start(), depth)?,
                None => panel.trace_from(0, panel.n_times() - 1)?,
            };
            for (name, f) in &formulas {
                let dir = out.join(name);
                fs::create_dir_all(&dir)?;
                for mode in a.mode.modes() {
                    let field = monitor_one(f, &trace, &grid, &labels, mode).with_context(|| format!("property {name}"))?;
                    field.write_csv(fs::File::create(dir.join(format!("{}.csv", mode.as_str())))?)?;
                }
            }
        } else if let Some(dir) = &a.ensemble {
            let traces = read_ensemble(dir)?;
            for (name, f) in &formulas {
                for mode in a.mode.modes() {
                    let fields =
                        monitor_ensemble(f, &traces, &grid, &labels, mode).with_context(|| format!("property {name}"))?;
                    let dir = out.join(name).join(mode.as_str());
                    fs::create_dir_all(&dir)?;
                    for (m, field) in fields.iter().enumerate() {
                        field.write_csv(fs::File::create(dir.join(format!("{m}.csv")))?)?;
                    }
                }
            }
        }
        Ok(())
    })
}

#[derive(Args, Debug)]
pub struct AssessArgs {
    /// `monitor --ensemble` output directory.
    #[arg(long)]
    pred: PathBuf,
    /// `monitor --trace` output directory for the realized trace.
    #[arg(long)]
    obs: PathBuf,
    #[arg(long, default_value_t = 0)]
    window_id: usize,
}

fn read_field(path: &Path) -> Result<strelcast::strel::VerificationField> {
    let f = fs::File::open(path).with_context(|| format!("opening {}", path.display()))?;
    strelcast::strel::VerificationField::read_csv(f).with_context(|| format!("reading {}", path.display()))
}

pub fn assess(g: &Global, a: AssessArgs) -> Result<()> {
    let out = out_path(g)?;
    let mut names: Vec<String> = fs::read_dir(&a.obs)
        .with_context(|| format!("reading {}", a.obs.display()))?
        .filter_map(|e| e.ok())
        .filter(|e| e.path().is_dir())
        .filter_map(|e| e.file_name().into_string().ok())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(strelcast::Error::Data(format!("no property results in {}", a.obs.display())).into());
    }
    let mut report = AssessmentReport::default();
    for name in &names {
        let obs_b = read_field(&a.obs.join(name).join("boolean.csv"))?;
        let obs_r = read_field(&a.obs.join(name).join("robustness.csv"))?;
        let pred_b = read_ensemble_fields(&a.pred.join(name).join("boolean"))?;
        let pred_r = read_ensemble_fields(&a.pred.join(name).join("robustness"))?;
        report.push(a.window_id, assess_property(name, &pred_b, &pred_r, &obs_b, &obs_r)?);
    }
    fs::create_dir_all(out)?;
    report.write_report_csv(fs::File::create(out.join("report.csv"))?)?;
    report.write_fields_csv(fs::File::create(out.join("fields.csv"))?)?;
    Ok(())
}

fn read_ensemble_fields(dir: &Path) -> Result<Vec<strelcast::strel::VerificationField>> {
    let mut files: Vec<(usize, PathBuf)> = fs::read_dir(dir)
        .with_context(|| format!("reading {}", dir.display()))?
        .filter_map(|e| e.ok())
        .filter_map(|e| {
            let p = e.path();
            let m = p.file_stem()?.to_str()?.parse().ok()?;
            Some((m, p))
        })
        .collect();
    files.sort();
    if files.is_empty() {
        return Err(strelcast::Error::EmptyEnsemble.into());
    }
    files.iter().map(|(_, p)| read_field(p)).collect()
}

#[derive(Args, Debug)]
pub struct CompareArgs {
    /// LPDS tables `window_id,variant,horizon,lpds`; may be repeated.
    #[arg(long, required = true)]
    lpds: Vec<PathBuf>,
    /// Reference variant.
    #[arg(long, default_value = "baseline")]
    reference: String,
}

pub fn compare(g: &Global, a: CompareArgs) -> Result<()> {
    // (variant, horizon) -> window -> lpds
    let mut table: BTreeMap<(String, usize), BTreeMap<usize, f64>> = BTreeMap::new();
    for path in &a.lpds {
        let mut rdr = csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
        for rec in rdr.records() {
            let rec = rec.map_err(strelcast::Error::from)?;
            let bad = || strelcast::Error::Data(format!("{}: malformed row {:?}", path.display(), rec));
            if rec.len() != 4 {
                return Err(bad().into());
            }
            let w: usize = rec[0].parse().map_err(|_| bad())?;
            let h: usize = rec[2].parse().map_err(|_| bad())?;
            let v: f64 = rec[3].parse().map_err(|_| bad())?;
            if table.entry((rec[1].to_string(), h)).or_default().insert(w, v).is_some() {
                return Err(strelcast::Error::Data(format!("duplicate entry: window {w}, {} h={h}", &rec[1])).into());
            }
        }
    }
    let sink: Box<dyn Write> = match &g.out {
        Some(p) => Box::new(fs::File::create(p)?),
        None => Box::new(std::io::stdout().lock()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["window_id", "variant", "reference", "horizon", "cumulative_log_bf"])?;
    let mut any = false;
    for ((variant, h), series) in &table {
        if *variant == a.reference {
            continue;
        }
        let Some(base) = table.get(&(a.reference.clone(), *h)) else {
            continue;
        };
        let common: Vec<usize> = series.keys().filter(|k| base.contains_key(k)).copied().collect();
        let x: Vec<f64> = common.iter().map(|k| series[k]).collect();
        let y: Vec<f64> = common.iter().map(|k| base[k]).collect();
        for (win, bf) in common.iter().zip(cumulative_log_bayes_factor(&x, &y)?) {
            any = true;
            w.write_record([win.to_string(), variant.clone(), a.reference.clone(), h.to_string(), fmt_f64(bf)])?;
        }
    }
    w.flush()?;
    if !any {
        return Err(strelcast::Error::Data(format!("no windows shared with reference `{}`", a.reference)).into());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct PipelineArgs {
    /// Trace CSV with the full series.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    grid: PathBuf,
}

/// Reads a pipeline configuration, converting `property_minutes` into steps.
pub fn load_pipeline_config(path: &Path, step_minutes: f64) -> Result<PipelineConfig> {
    let mut v = read_json(path)?;
    let props = properties_from(Some(&v), step_minutes)?;
    if let Some(obj) = v.as_object_mut() {
        obj.remove("property_minutes");
        obj.insert("properties".into(), serde_json::to_value(props).map_err(strelcast::Error::from)?);
    }
    serde_json::from_value(v)
        .map_err(strelcast::Error::from)
        .with_context(|| format!("reading {}", path.display()))
}

pub fn pipeline(g: &Global, a: PipelineArgs) -> Result<()> {
    let out = out_path(g)?;
    let path = g.config.as_deref().ok_or_else(|| usage("pipeline needs --config"))?;
    let mut cfg = load_pipeline_config(path, g.step_minutes)?;
    if let Some(s) = g.seed {
        cfg.seed = s;
    }
    if let Some(w) = g.workers {
        cfg.workers = w;
    }
    let panel = load_panel(&a.data)?;
    let (_, grid, labels) = load_grid(&a.grid)?;
    let outcome = run_pipeline(&cfg, &panel, &grid, &labels, Some(out))?;
    let total = cfg.n_windows * cfg.variants.len();
    if outcome.results.is_empty() {
        let numerical = outcome.failures.iter().all(|(_, _, m)| m.starts_with("numerical"));
        let msg = format!("all {total} window fits failed; see failures.csv");
        return Err(if numerical {
            strelcast::Error::Numerical { draw: 0, message: msg }.into()
        } else {
            strelcast::Error::Data(msg).into()
        });
    }
    for (name, h, series) in &outcome.bayes_factors {
        if let Some((_, v)) = series.last() {
            println!("{name} vs {} h={h}: cumulative log BF {v:.3}", cfg.variants[0].name());
        }
    }
    if !outcome.failures.is_empty() {
        eprintln!("{} of {total} window fits failed; see failures.csv", outcome.failures.len());
    }
    Ok(())
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    /// Number of time steps.
    #[arg(long)]
    n_times: Option<usize>,
}

pub fn synth(g: &Global, a: SynthArgs) -> Result<()> {
    let out = out_path(g)?;
    let mut spec = SyntheticSpec::default_7x7();
    if let Some(t) = a.n_times {
        spec.n_times = t;
    }
    if let Some(s) = g.seed {
        spec.seed = s;
    }
    let (panel, grid) = spec.generate()?;
    fs::create_dir_all(out)?;
    panel.save(&out.join("trace.csv"))?;
    grid.save(&out.join("grid.json"))?;
    Ok(())
}
