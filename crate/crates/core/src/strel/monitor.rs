//! Boolean and quantitative (robustness) monitoring of formulas on traces.
//!
//! Every subformula is evaluated bottom-up over all locations and over the
//! times at which it is defined: a node of temporal depth `k` on a trace with
//! horizon `H` is defined at times `0..=H-k`. Results are read at time 0, the
//! forecast origin.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par;
use crate::spatial::{SpatialGrid, StaticLabels, Trace};

use super::ast::{Direction, Formula};

/// Robustness assigned to a crisp label: `+B` at members, `-B` elsewhere.
pub const LABEL_ROBUSTNESS: f64 = 1e9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Boolean,
    Robustness,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Boolean => "boolean",
            Mode::Robustness => "robustness",
        }
    }
}

/// Per-location verification result at the forecast origin.
#[derive(Debug, Clone, PartialEq)]
pub struct VerificationField {
    pub mode: Mode,
    pub values: Vec<f64>,
}

impl VerificationField {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Satisfaction as booleans. Robustness fields map `r >= 0` to satisfied.
    pub fn satisfied(&self) -> Vec<bool> {
        match self.mode {
            Mode::Boolean => self.values.iter().map(|&v| v == 1.0).collect(),
            Mode::Robustness => self.values.iter().map(|&v| v >= 0.0).collect(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(["location_id", "mode", "value"])?;
        for (i, v) in self.values.iter().enumerate() {
            w.write_record([i.to_string(), self.mode.as_str().to_string(), crate::spatial::fmt_f64(*v)])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn read_csv<R: std::io::Read>(reader: R) -> Result<Self> {
        #[derive(Deserialize)]
        struct Row {
            location_id: usize,
            mode: Mode,
            value: f64,
        }
        let mut rdr = csv::Reader::from_reader(reader);
        let mut rows: Vec<Row> = Vec::new();
        for r in rdr.deserialize() {
            rows.push(r?);
        }
        let Some(first) = rows.first() else {
            return Err(Error::data("empty verification file"));
        };
        let mode = first.mode;
        let mut values = vec![f64::NAN; rows.len()];
        for r in &rows {
            if r.mode != mode {
                return Err(Error::data("mixed modes in verification file"));
            }
            if r.location_id >= values.len() || !values[r.location_id].is_nan() {
                return Err(Error::data(format!("bad or duplicate location id {}", r.location_id)));
            }
            values[r.location_id] = r.value;
        }
        Ok(VerificationField { mode, values })
    }
}

fn check_inputs(f: &Formula, trace: &Trace, grid: &SpatialGrid, labels: &StaticLabels) -> Result<()> {
    if trace.n_locations() != grid.n_locations() {
        return Err(Error::LocationMismatch {
            expected: grid.n_locations(),
            actual: trace.n_locations(),
        });
    }
    f.validate().map_err(Error::InvalidArgument)?;
    if let Some(missing) = f.labels().into_iter().find(|l| !labels.contains_label(l)) {
        return Err(Error::UnknownLabel(missing.to_string()));
    }
    let required = f.temporal_depth();
    if required > trace.horizon() {
        return Err(Error::InsufficientHorizon {
            required,
            available: trace.horizon(),
        });
    }
    Ok(())
}

struct Ctx<'a> {
    trace: &'a Trace,
    grid: &'a SpatialGrid,
    labels: &'a StaticLabels,
}

/// Time-major field `values[t * n + i]` defined on times `0..n_times`.
struct Field<T> {
    values: Vec<T>,
}

impl<T: Copy> Field<T> {
    fn slice(&self, n: usize, t: usize) -> &[T] {
        &self.values[t * n..(t + 1) * n]
    }
}

/// Boolean satisfaction of `f` at every location at the forecast origin (1 or 0).
pub fn boolean_monitor(f: &Formula, trace: &Trace, grid: &SpatialGrid, labels: &StaticLabels) -> Result<VerificationField> {
    check_inputs(f, trace, grid, labels)?;
    let ctx = Ctx { trace, grid, labels };
    let field = eval_bool(f, &ctx);
    let n = grid.n_locations();
    Ok(VerificationField {
        mode: Mode::Boolean,
        values: field.slice(n, 0).iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
    })
}

/// Robustness of `f` at every location at the forecast origin.
pub fn quantitative_monitor(
    f: &Formula,
    trace: &Trace,
    grid: &SpatialGrid,
    labels: &StaticLabels,
) -> Result<VerificationField> {
    check_inputs(f, trace, grid, labels)?;
    let ctx = Ctx { trace, grid, labels };
    let field = eval_rob(f, &ctx);
    Ok(VerificationField {
        mode: Mode::Robustness,
        values: field.slice(grid.n_locations(), 0).to_vec(),
    })
}

pub fn monitor(f: &Formula, trace: &Trace, grid: &SpatialGrid, labels: &StaticLabels, mode: Mode) -> Result<VerificationField> {
    match mode {
        Mode::Boolean => boolean_monitor(f, trace, grid, labels),
        Mode::Robustness => quantitative_monitor(f, trace, grid, labels),
    }
}

/// Monitors every trace of an ensemble; output is aligned with the input.
pub fn monitor_ensemble(
    f: &Formula,
    traces: &[Trace],
    grid: &SpatialGrid,
    labels: &StaticLabels,
    mode: Mode,
) -> Result<Vec<VerificationField>> {
    if let Some(first) = traces.first() {
        if let Some(bad) = traces
            .iter()
            .position(|t| t.n_locations() != first.n_locations() || t.n_times() != first.n_times())
        {
            return Err(Error::DimensionMismatch(format!("trace {bad} differs in shape from trace 0")));
        }
    }
    par::map(traces, |t| monitor(f, t, grid, labels, mode)).into_iter().collect()
}

fn node_times(f: &Formula, trace: &Trace) -> usize {
    trace.n_times() - f.temporal_depth()
}

fn eval_bool(f: &Formula, ctx: &Ctx) -> Field<bool> {
    let n = ctx.grid.n_locations();
    let n_times = node_times(f, ctx.trace);
    let atom = |g: &dyn Fn(usize, usize) -> bool| {
        let mut values = Vec::with_capacity(n * n_times);
        for t in 0..n_times {
            for i in 0..n {
                values.push(g(i, t));
            }
        }
        Field { values }
    };
    match f {
        Formula::True => atom(&|_, _| true),
        Formula::Compare { direction, threshold } => match direction {
            Direction::Greater => atom(&|i, t| ctx.trace.get(i, t) > *threshold),
            Direction::Less => atom(&|i, t| ctx.trace.get(i, t) < *threshold),
        },
        Formula::Label(name) => atom(&|i, _| ctx.labels.has(name, i)),
        Formula::Not(a) => {
            let a = eval_bool(a, ctx);
            Field {
                values: a.values.iter().map(|v| !v).collect(),
            }
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let (a, b) = (eval_bool(a, ctx), eval_bool(b, ctx));
            let op: fn(bool, bool) -> bool = match f {
                Formula::And(..) => |x, y| x && y,
                Formula::Or(..) => |x, y| x || y,
                _ => |x, y| !x || y,
            };
            let values = (0..n * n_times).map(|k| op(a.values[k], b.values[k])).collect();
            Field { values }
        }
        Formula::Eventually { lo, hi, body } | Formula::Always { lo, hi, body } => {
            let inner = eval_bool(body, ctx);
            let any = matches!(f, Formula::Eventually { .. });
            let mut values = Vec::with_capacity(n * n_times);
            for s in 0..n_times {
                for i in 0..n {
                    let mut window = (s + lo..=s + hi).map(|u| inner.values[u * n + i]);
                    values.push(if any { window.any(|v| v) } else { window.all(|v| v) });
                }
            }
            Field { values }
        }
        Formula::Reach { left, max_hops, right } => {
            let (l, r) = (eval_bool(left, ctx), eval_bool(right, ctx));
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(reach_bool(ctx.grid, l.slice(n, t), r.slice(n, t), *max_hops));
            }
            Field { values }
        }
        Formula::Somewhere { max_hops, body } => {
            let r = eval_bool(body, ctx);
            let all = vec![true; n];
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(reach_bool(ctx.grid, &all, r.slice(n, t), *max_hops));
            }
            Field { values }
        }
        Formula::Escape { min_hops, max_hops, body } => {
            let p = eval_bool(body, ctx);
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(escape_bool(ctx.grid, p.slice(n, t), *min_hops, *max_hops));
            }
            Field { values }
        }
    }
}

/// Locations from which a `right` location is reachable within `d` hops
/// through `left` locations (the endpoint itself need not satisfy `left`).
fn reach_bool(grid: &SpatialGrid, left: &[bool], right: &[bool], d: usize) -> Vec<bool> {
    let n = grid.n_locations();
    let mut cur = right.to_vec();
    for _ in 0..d {
        let next: Vec<bool> = (0..n)
            .map(|i| cur[i] || (left[i] && grid.neighbors(i).iter().any(|&j| cur[j])))
            .collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Locations with a route of `body` locations (origin included) ending at a
/// location whose hop distance from the origin lies in `[lo, hi]`.
fn escape_bool(grid: &SpatialGrid, body: &[bool], lo: usize, hi: usize) -> Vec<bool> {
    let n = grid.n_locations();
    let mut out = vec![false; n];
    let mut seen = vec![false; n];
    let mut stack = Vec::new();
    for (i, slot) in out.iter_mut().enumerate() {
        if !body[i] {
            continue;
        }
        seen.iter_mut().for_each(|s| *s = false);
        seen[i] = true;
        stack.push(i);
        while let Some(u) = stack.pop() {
            if grid.hop_unchecked(i, u).is_some_and(|h| (lo..=hi).contains(&h)) {
                *slot = true;
                stack.clear();
                break;
            }
            for &v in grid.neighbors(u) {
                if body[v] && !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
    }
    out
}

fn eval_rob(f: &Formula, ctx: &Ctx) -> Field<f64> {
    let n = ctx.grid.n_locations();
    let n_times = node_times(f, ctx.trace);
    let atom = |g: &dyn Fn(usize, usize) -> f64| {
        let mut values = Vec::with_capacity(n * n_times);
        for t in 0..n_times {
            for i in 0..n {
                values.push(g(i, t));
            }
        }
        Field { values }
    };
    match f {
        Formula::True => atom(&|_, _| f64::INFINITY),
        Formula::Compare { direction, threshold } => match direction {
            Direction::Greater => atom(&|i, t| ctx.trace.get(i, t) - threshold),
            Direction::Less => atom(&|i, t| threshold - ctx.trace.get(i, t)),
        },
        Formula::Label(name) => atom(&|i, _| {
            if ctx.labels.has(name, i) {
                LABEL_ROBUSTNESS
            } else {
                -LABEL_ROBUSTNESS
            }
        }),
        Formula::Not(a) => {
            let a = eval_rob(a, ctx);
            Field {
                values: a.values.iter().map(|v| -v).collect(),
            }
        }
        Formula::And(a, b) | Formula::Or(a, b) | Formula::Implies(a, b) => {
            let (a, b) = (eval_rob(a, ctx), eval_rob(b, ctx));
            let op: fn(f64, f64) -> f64 = match f {
                Formula::And(..) => f64::min,
                Formula::Or(..) => f64::max,
                _ => |x, y| (-x).max(y),
            };
            let values = (0..n * n_times).map(|k| op(a.values[k], b.values[k])).collect();
            Field { values }
        }
        Formula::Eventually { lo, hi, body } | Formula::Always { lo, hi, body } => {
            let inner = eval_rob(body, ctx);
            let sup = matches!(f, Formula::Eventually { .. });
            let mut values = Vec::with_capacity(n * n_times);
            for s in 0..n_times {
                for i in 0..n {
                    let window = (s + lo..=s + hi).map(|u| inner.values[u * n + i]);
                    values.push(if sup {
                        window.fold(f64::NEG_INFINITY, f64::max)
                    } else {
                        window.fold(f64::INFINITY, f64::min)
                    });
                }
            }
            Field { values }
        }
        Formula::Reach { left, max_hops, right } => {
            let (l, r) = (eval_rob(left, ctx), eval_rob(right, ctx));
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(reach_rob(ctx.grid, l.slice(n, t), r.slice(n, t), *max_hops));
            }
            Field { values }
        }
        Formula::Somewhere { max_hops, body } => {
            let r = eval_rob(body, ctx);
            let all = vec![f64::INFINITY; n];
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(reach_rob(ctx.grid, &all, r.slice(n, t), *max_hops));
            }
            Field { values }
        }
        Formula::Escape { min_hops, max_hops, body } => {
            let p = eval_rob(body, ctx);
            let mut values = Vec::with_capacity(n * n_times);
            for t in 0..n_times {
                values.extend(escape_rob(ctx.grid, p.slice(n, t), *min_hops, *max_hops));
            }
            Field { values }
        }
    }
}

/// Bounded max-min fixpoint:
/// `D_0 = right`, `D_{m+1}(i) = max(D_m(i), max_{j in N(i)} min(left(i), D_m(j)))`.
pub(crate) fn reach_rob(grid: &SpatialGrid, left: &[f64], right: &[f64], d: usize) -> Vec<f64> {
    let n = grid.n_locations();
    let mut cur = right.to_vec();
    for _ in 0..d {
        let next: Vec<f64> = (0..n)
            .map(|i| {
                let best = grid
                    .neighbors(i)
                    .iter()
                    .map(|&j| left[i].min(cur[j]))
                    .fold(f64::NEG_INFINITY, f64::max);
                cur[i].max(best)
            })
            .collect();
        if next == cur {
            break;
        }
        cur = next;
    }
    cur
}

/// Pairwise max-min route values `e(i, j)` through `body`, maximized over
/// targets `j` with hop distance in `[lo, hi]`.
pub(crate) fn escape_rob(grid: &SpatialGrid, body: &[f64], lo: usize, hi: usize) -> Vec<f64> {
    let n = grid.n_locations();
    let mut e = vec![f64::NEG_INFINITY; n * n];
    for i in 0..n {
        e[i * n + i] = body[i];
    }
    for _ in 0..n.saturating_sub(1) {
        let mut changed = false;
        let mut next = e.clone();
        for i in 0..n {
            for &k in grid.neighbors(i) {
                for j in 0..n {
                    let cand = body[i].min(e[k * n + j]);
                    if cand > next[i * n + j] {
                        next[i * n + j] = cand;
                        changed = true;
                    }
                }
            }
        }
        e = next;
        if !changed {
            break;
        }
    }
    (0..n)
        .map(|i| {
            (0..n)
                .filter(|&j| grid.hop_unchecked(i, j).is_some_and(|h| (lo..=hi).contains(&h)))
                .map(|j| e[i * n + j])
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::strel::props::{build_p1, build_p2, build_p3};

    fn labels() -> StaticLabels {
        let mut l = StaticLabels::new();
        l.insert("hospital", []);
        l
    }

    fn constant(grid: &SpatialGrid, h: usize, v: f64) -> Trace {
        Trace::from_fn(grid.n_locations(), h + 1, |_, _| v).unwrap()
    }

    #[test]
    fn atom_below_threshold_is_false_everywhere() {
        let g = SpatialGrid::queen(2, 2).unwrap();
        let out = boolean_monitor(&Formula::gt(500.0), &constant(&g, 0, 400.0), &g, &labels()).unwrap();
        assert_eq!(out.values, vec![0.0; 4]);
    }

    #[test]
    fn p1_false_antecedent() {
        let g = SpatialGrid::queen(3, 3).unwrap();
        let f = build_p1(500.0, 3).unwrap();
        let out = boolean_monitor(&f, &constant(&g, 3, 100.0), &g, &labels()).unwrap();
        assert_eq!(out.values, vec![1.0; 9]);
    }

    #[test]
    fn p1_recovers_within_window() {
        let g = SpatialGrid::queen(1, 1).unwrap();
        let f = build_p1(500.0, 3).unwrap();
        let tr = Trace::new(1, 4, vec![600.0, 600.0, 600.0, 450.0]).unwrap();
        assert_eq!(boolean_monitor(&f, &tr, &g, &labels()).unwrap().values, vec![1.0]);
        assert_eq!(quantitative_monitor(&f, &tr, &g, &labels()).unwrap().values, vec![50.0]);
    }

    #[test]
    fn p2_isolated_cell_violated() {
        let g = SpatialGrid::queen(1, 1).unwrap();
        let f = build_p2(500.0, 1, 1).unwrap();
        let tr = Trace::new(1, 2, vec![100.0, 600.0]).unwrap();
        assert_eq!(boolean_monitor(&f, &tr, &g, &labels()).unwrap().values, vec![0.0]);
        let all_low = constant(&SpatialGrid::queen(3, 3).unwrap(), 1, 10.0);
        let g3 = SpatialGrid::queen(3, 3).unwrap();
        assert_eq!(boolean_monitor(&f, &all_low, &g3, &labels()).unwrap().values, vec![1.0; 9]);
    }

    #[test]
    fn p3_two_cells() {
        let g = SpatialGrid::queen(2, 1).unwrap();
        let f = build_p3(500.0, 3, 1).unwrap();
        // cell0 always 600; cell1 crowded only at step 2
        let tr = Trace::new(2, 4, vec![600.0, 600.0, 600.0, 600.0, 100.0, 100.0, 600.0, 100.0]).unwrap();
        let out = boolean_monitor(&f, &tr, &g, &labels()).unwrap();
        assert_eq!(out.values, vec![0.0, 0.0]);
        let low = constant(&g, 3, 1.0);
        assert_eq!(boolean_monitor(&f, &low, &g, &labels()).unwrap().values, vec![1.0, 1.0]);
    }

    #[test]
    fn reach_on_two_cells() {
        let g = SpatialGrid::queen(1, 2).unwrap();
        // left := y > 0 true only at cell0; right := y > 5 true only at cell1
        let f = Formula::reach(Formula::lt(5.0), 1, Formula::gt(5.0));
        let tr = Trace::new(2, 1, vec![1.0, 9.0]).unwrap();
        assert_eq!(boolean_monitor(&f, &tr, &g, &labels()).unwrap().values, vec![1.0, 1.0]);
        let tr = Trace::new(2, 1, vec![1.0, 2.0]).unwrap();
        assert_eq!(boolean_monitor(&f, &tr, &g, &labels()).unwrap().values, vec![0.0, 0.0]);
    }

    #[test]
    fn robustness_atoms() {
        let g = SpatialGrid::queen(1, 1).unwrap();
        let tr = Trace::new(1, 1, vec![600.0]).unwrap();
        let r = |f: Formula| quantitative_monitor(&f, &tr, &g, &labels()).unwrap().values[0];
        assert_eq!(r(Formula::gt(500.0)), 100.0);
        assert_eq!(r(Formula::not(Formula::gt(500.0))), -100.0);
        assert_eq!(r(Formula::and(Formula::gt(598.0), Formula::lt(597.0))), -3.0);
        assert_eq!(r(Formula::label("hospital")), -LABEL_ROBUSTNESS);
    }

    #[test]
    fn horizon_and_shape_errors() {
        let g = SpatialGrid::queen(2, 2).unwrap();
        let f = build_p1(500.0, 3).unwrap();
        match boolean_monitor(&f, &constant(&g, 2, 1.0), &g, &labels()) {
            Err(Error::InsufficientHorizon { required, available }) => assert_eq!((required, available), (3, 2)),
            other => panic!("{other:?}"),
        }
        let wrong = Trace::from_fn(3, 4, |_, _| 1.0).unwrap();
        assert!(matches!(
            quantitative_monitor(&f, &wrong, &g, &labels()),
            Err(Error::LocationMismatch { .. })
        ));
        assert!(matches!(
            boolean_monitor(&Formula::label("school"), &constant(&g, 0, 1.0), &g, &labels()),
            Err(Error::UnknownLabel(_))
        ));
    }

    #[test]
    fn ensemble_alignment() {
        let g = SpatialGrid::queen(2, 2).unwrap();
        let f = Formula::eventually(0, 1, Formula::gt(3.0));
        assert!(monitor_ensemble(&f, &[], &g, &labels(), Mode::Boolean).unwrap().is_empty());
        let traces: Vec<Trace> = (0..7)
            .map(|m| Trace::from_fn(4, 2, |i, t| (m * 3 + i + t) as f64 % 5.0).unwrap())
            .collect();
        for mode in [Mode::Boolean, Mode::Robustness] {
            let out = monitor_ensemble(&f, &traces, &g, &labels(), mode).unwrap();
            for (tr, field) in traces.iter().zip(&out) {
                assert_eq!(field, &monitor(&f, tr, &g, &labels(), mode).unwrap());
            }
        }
    }

    #[test]
    fn verification_csv_round_trip() {
        let v = VerificationField {
            mode: Mode::Robustness,
            values: vec![1.5, -2.0, f64::INFINITY],
        };
        let mut buf = Vec::new();
        v.write_csv(&mut buf).unwrap();
        assert_eq!(VerificationField::read_csv(buf.as_slice()).unwrap(), v);
    }

    mod properties {
        use super::*;
        use crate::strel::arb_formula;
        use proptest::prelude::*;

        fn two_labels(n: usize, mask: u32) -> StaticLabels {
            let mut l = StaticLabels::new();
            l.insert("hospital", (0..n).filter(|i| mask >> i & 1 == 1));
            l.insert("school", (0..n).filter(|i| mask >> (i + 9) & 1 == 1));
            l
        }

        fn trace_for(grid: &SpatialGrid, h: usize, seed: &[f64]) -> Trace {
            let n = grid.n_locations();
            Trace::from_fn(n, h + 1, |i, t| seed[(i * 7 + t * 3) % seed.len()] + (i + t) as f64 * 0.013).unwrap()
        }

        // Max-min over all walks of at most `d` hops.
        fn reach_oracle(grid: &SpatialGrid, left: &[f64], right: &[f64], d: usize) -> Vec<f64> {
            fn walk(g: &SpatialGrid, l: &[f64], r: &[f64], at: usize, left_d: usize, acc: f64, best: &mut f64) {
                *best = best.max(acc.min(r[at]));
                if left_d == 0 {
                    return;
                }
                let acc = acc.min(l[at]);
                for &j in g.neighbors(at) {
                    walk(g, l, r, j, left_d - 1, acc, best);
                }
            }
            (0..grid.n_locations())
                .map(|i| {
                    let mut best = f64::NEG_INFINITY;
                    walk(grid, left, right, i, d, f64::INFINITY, &mut best);
                    best
                })
                .collect()
        }

        // Max over simple paths from i ending at a target in the hop band.
        fn escape_oracle(grid: &SpatialGrid, body: &[f64], lo: usize, hi: usize) -> Vec<f64> {
            fn dfs(g: &SpatialGrid, b: &[f64], o: usize, at: usize, acc: f64, seen: &mut Vec<bool>, band: (usize, usize), best: &mut f64) {
                let acc = acc.min(b[at]);
                let h = g.hop_distance(o, at).unwrap().unwrap();
                if (band.0..=band.1).contains(&h) {
                    *best = best.max(acc);
                }
                for &j in g.neighbors(at) {
                    if !seen[j] {
                        seen[j] = true;
                        dfs(g, b, o, j, acc, seen, band, best);
                        seen[j] = false;
                    }
                }
            }
            let n = grid.n_locations();
            (0..n)
                .map(|i| {
                    let mut seen = vec![false; n];
                    seen[i] = true;
                    let mut best = f64::NEG_INFINITY;
                    dfs(grid, body, i, i, f64::INFINITY, &mut seen, (lo, hi), &mut best);
                    best
                })
                .collect()
        }

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(200))]

            #[test]
            fn boolean_agrees_with_robustness_sign(
                f in arb_formula(4),
                rows in 1usize..4,
                cols in 1usize..4,
                mask in any::<u32>(),
                seed in proptest::collection::vec(-300.0f64..300.0, 5..40),
            ) {
                let g = SpatialGrid::queen(rows, cols).unwrap();
                let tr = trace_for(&g, f.temporal_depth(), &seed);
                let l = two_labels(g.n_locations(), mask);
                let b = boolean_monitor(&f, &tr, &g, &l).unwrap();
                let r = quantitative_monitor(&f, &tr, &g, &l).unwrap();
                for (bv, rv) in b.values.iter().zip(&r.values) {
                    if rv.abs() > 1e-9 {
                        prop_assert_eq!(*bv == 1.0, *rv > 0.0, "{} : {} vs {}", f, bv, rv);
                    }
                }
            }

            #[test]
            fn expansion_preserves_boolean_output(
                f in arb_formula(4),
                rows in 1usize..4,
                cols in 1usize..4,
                mask in any::<u32>(),
                seed in proptest::collection::vec(-300.0f64..300.0, 5..40),
            ) {
                let g = SpatialGrid::queen(rows, cols).unwrap();
                let tr = trace_for(&g, f.temporal_depth(), &seed);
                let l = two_labels(g.n_locations(), mask);
                let a = boolean_monitor(&f, &tr, &g, &l).unwrap();
                let b = boolean_monitor(&f.expand_derived(), &tr, &g, &l).unwrap();
                prop_assert_eq!(a, b);
            }

            #[test]
            fn spatial_fixpoints_match_route_enumeration(
                rows in 1usize..4,
                cols in 1usize..4,
                d in 0usize..4,
                lo in 0usize..3,
                w in 0usize..3,
                vals in proptest::collection::vec(-10.0f64..10.0, 27),
            ) {
                let g = SpatialGrid::queen(rows, cols).unwrap();
                let n = g.n_locations();
                let (left, right, body) = (&vals[..n], &vals[9..9 + n], &vals[18..18 + n]);
                prop_assert_eq!(reach_rob(&g, left, right, d), reach_oracle(&g, left, right, d));
                prop_assert_eq!(escape_rob(&g, body, lo, lo + w), escape_oracle(&g, body, lo, lo + w));
                let lb: Vec<bool> = left.iter().map(|v| *v > 0.0).collect();
                let rb: Vec<bool> = right.iter().map(|v| *v > 0.0).collect();
                let bb: Vec<bool> = body.iter().map(|v| *v > 0.0).collect();
                let rr: Vec<bool> = reach_oracle(&g, left, right, d).iter().map(|v| *v > 0.0).collect();
                prop_assert_eq!(reach_bool(&g, &lb, &rb, d), rr);
                let er: Vec<bool> = escape_oracle(&g, body, lo, lo + w).iter().map(|v| *v > 0.0).collect();
                prop_assert_eq!(escape_bool(&g, &bb, lo, lo + w), er);
            }
        }
    }
}
